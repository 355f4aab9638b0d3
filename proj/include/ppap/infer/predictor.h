#pragma once

#include "ppap/dsp/spectrogram.h"
#include "ppap/model/network.h"
#include "ppap/model/ppap.h"
#include "ppap/model/weights_io.h"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ppap::infer {

// Calls per stage: f_s, f_m, and f_o . f_a . f_g (one per (masker, gain)).
struct StageCounts {
    std::size_t soundscape = 0;
    std::size_t masker = 0;
    std::size_t head = 0;

    bool operator==(const StageCounts &) const = default;
};

// Accumulated wall time per stage, seconds.
struct StageTimes {
    double soundscape = 0.0;
    double masker = 0.0;
    double head = 0.0;
};

// Frozen eval-mode model with per-stage call accounting.
class Predictor {
public:
    Predictor(model::ModelConfig config, nn::ParameterSet<float> params, std::string weight_hash,
              std::optional<model::GammaStats> gamma_stats = std::nullopt);
    static Predictor from_file(const std::filesystem::path & weights);
    static Predictor from_weights(model::WeightFile wf);

    const model::ModelConfig & config() const { return net_.config(); }
    const model::Network<float> & network() const { return net_; }
    const nn::ParameterSet<float> & params() const { return params_; }
    const std::string & weight_hash() const { return weight_hash_; }
    const std::optional<model::GammaStats> & gamma_stats() const { return gamma_stats_; }

    model::Embedding soundscape_features(const dsp::Spectrogram & soundscape);
    model::Embedding masker_features(const dsp::Spectrogram & masker);
    // One head call per gamma.
    std::vector<model::PredictedDistribution> gain_stage(const model::Embedding & keys, const model::Embedding & queries,
                                                         std::span<const double> gammas);

    const StageCounts & counts() const { return counts_; }
    const StageTimes & times() const { return times_; }
    void reset_counters();

private:
    model::Network<float> net_;
    nn::ParameterSet<float> params_;
    std::string weight_hash_;
    std::optional<model::GammaStats> gamma_stats_;
    StageCounts counts_;
    StageTimes times_;
};

// FNV-1a over the raw values and shape of a spectrogram, hex.
std::string spectrogram_hash(const dsp::Spectrogram & s);

} // namespace ppap::infer
