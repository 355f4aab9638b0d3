#pragma once

#include "ppap/infer/query.h"

#include <json.hpp>

namespace ppap::infer {

struct ScheduleTiming {
    StageCounts counts;
    StageTimes stage_seconds;     // median over repeats
    double wall_seconds = 0.0;    // median over repeats
    double predicted_seconds = 0.0;  // sum of the stage medians

    double additivity_error() const;  // |predicted - wall| / wall
};

struct BenchReport {
    std::size_t eta_m = 0;
    std::size_t eta_g = 0;
    std::size_t repeats = 0;
    ScheduleTiming naive;
    ScheduleTiming optimized;  // f_m computed in the query
    ScheduleTiming cached;     // f_m from a precomputed bank
    // Per-call stage times from the naive schedule.
    double tau_s = 0.0;
    double tau_m = 0.0;
    double tau_gao = 0.0;
    double max_abs_diff = 0.0;  // naive vs optimized grid, mu and log sigma
    bool counts_ok = false;

    double speedup_optimized() const { return naive.wall_seconds / optimized.wall_seconds; }
    double speedup_cached() const { return naive.wall_seconds / cached.wall_seconds; }
};

// Runs all three schedules `repeats` times on the first eta_m maskers and an
// even gamma grid over [-2, 2]. Throws UsageError for eta_m or eta_g of zero
// or fewer maskers than eta_m.
BenchReport run_benchmark(Predictor & predictor, const dsp::Spectrogram & soundscape,
                          const MaskerSpectrograms & maskers, std::size_t eta_m, std::size_t eta_g,
                          std::size_t repeats);

nlohmann::ordered_json to_json(const BenchReport & report);

} // namespace ppap::infer
