#pragma once

#include "ppap/infer/bank.h"
#include "ppap/infer/predictor.h"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ppap::infer {

struct QueryPlan {
    std::vector<std::string> masker_ids;  // eta_m
    std::vector<double> gammas;           // eta_g, log10 gains

    // Throws UsageError when either list is empty, ids repeat or a gamma is
    // not finite.
    void validate() const;
};

struct QueryResult {
    std::vector<std::string> masker_ids;
    std::vector<double> gammas;
    std::vector<model::PredictedDistribution> grid;  // masker-major
    StageCounts counts;
    StageTimes times;
    double wall_seconds = 0.0;

    const model::PredictedDistribution & at(std::size_t masker, std::size_t gamma) const {
        return grid[masker * gammas.size() + gamma];
    }
};

using MaskerSpectrograms = std::map<std::string, dsp::Spectrogram>;

// Every cell recomputes f_s, f_m and the gain stage.
QueryResult query_naive(Predictor & predictor, const dsp::Spectrogram & soundscape, const QueryPlan & plan,
                        const MaskerSpectrograms & maskers);

// f_s once, f_m once per masker unless `bank` supplies it, gain stage per cell.
// Throws DataError on a stale bank or a masker missing from both sources.
QueryResult query_optimized(Predictor & predictor, const dsp::Spectrogram & soundscape, const QueryPlan & plan,
                            const MaskerSpectrograms & maskers, const MaskerBank * bank = nullptr);

struct RankedPair {
    std::string masker_id;
    double gain = 1.0;
    double gamma = 0.0;
    double mu = 0.0;
    double sigma = 1.0;
};

// Descending mu, then ascending sigma, masker id, gain. k beyond the grid
// returns the whole grid with a warning.
std::vector<RankedPair> rank(const QueryResult & result, std::size_t k);

// count points from lo to hi inclusive. count == 1 gives {lo}.
std::vector<double> gamma_grid(double lo, double hi, std::size_t count);
// "lo:hi:count" on the gamma scale.
std::vector<double> parse_gain_spec(const std::string & spec);

struct SweepPoint {
    double gamma = 0.0;
    double mu = 0.0;
    double sigma = 1.0;
};

// One gain-stage call per gamma for a banked masker. count >= 2.
std::vector<SweepPoint> gain_sweep(Predictor & predictor, const model::Embedding & keys, const MaskerBank & bank,
                                   const std::string & masker_id, double lo, double hi, std::size_t count);
std::vector<SweepPoint> gain_sweep(Predictor & predictor, const dsp::Spectrogram & soundscape, const MaskerBank & bank,
                                   const std::string & masker_id, double lo, double hi, std::size_t count);

// Header "masker_id,gamma,mu,sigma".
std::string format_sweep_csv(const std::vector<std::pair<std::string, std::vector<SweepPoint>>> & sweeps);

} // namespace ppap::infer
