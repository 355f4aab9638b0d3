#include "ppap/infer/bench.h"

#include "ppap/common/error.h"

#include <algorithm>
#include <cmath>

namespace ppap::infer {

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

template <typename Run>
ScheduleTiming time_schedule(std::size_t repeats, Run run, QueryResult & last) {
    std::vector<double> wall, s, m, h;
    for (std::size_t i = 0; i < repeats; ++i) {
        last = run();
        wall.push_back(last.wall_seconds);
        s.push_back(last.times.soundscape);
        m.push_back(last.times.masker);
        h.push_back(last.times.head);
    }
    ScheduleTiming t;
    t.counts = last.counts;
    t.stage_seconds = {median(s), median(m), median(h)};
    t.wall_seconds = median(wall);
    t.predicted_seconds = t.stage_seconds.soundscape + t.stage_seconds.masker + t.stage_seconds.head;
    return t;
}

double per_call(double seconds, std::size_t calls) { return calls ? seconds / static_cast<double>(calls) : 0.0; }

} // namespace

double ScheduleTiming::additivity_error() const {
    return wall_seconds > 0.0 ? std::abs(predicted_seconds - wall_seconds) / wall_seconds : 0.0;
}

BenchReport run_benchmark(Predictor & predictor, const dsp::Spectrogram & soundscape,
                          const MaskerSpectrograms & maskers, std::size_t eta_m, std::size_t eta_g,
                          std::size_t repeats) {
    if (eta_m == 0 || eta_g == 0) throw UsageError("bench needs eta_m >= 1 and eta_g >= 1");
    if (repeats == 0) throw UsageError("bench needs repeats >= 1");
    if (maskers.size() < eta_m) {
        throw UsageError("bench needs " + std::to_string(eta_m) + " maskers, got " + std::to_string(maskers.size()));
    }
    QueryPlan plan;
    for (const auto & [id, spec] : maskers) {
        if (plan.masker_ids.size() == eta_m) break;
        plan.masker_ids.push_back(id);
    }
    plan.gammas = eta_g == 1 ? std::vector<double>{0.0} : gamma_grid(-2.0, 2.0, eta_g);

    std::vector<NamedSpectrogram> banked;
    for (const auto & id : plan.masker_ids) banked.emplace_back(id, maskers.at(id));
    const MaskerBank bank = precompute_bank(predictor, banked);

    BenchReport r;
    r.eta_m = eta_m;
    r.eta_g = eta_g;
    r.repeats = repeats;
    QueryResult naive, optimized, cached;
    r.naive = time_schedule(repeats, [&] { return query_naive(predictor, soundscape, plan, maskers); }, naive);
    r.optimized = time_schedule(repeats, [&] { return query_optimized(predictor, soundscape, plan, maskers); }, optimized);
    r.cached = time_schedule(repeats, [&] { return query_optimized(predictor, soundscape, plan, maskers, &bank); }, cached);

    r.tau_s = per_call(r.naive.stage_seconds.soundscape, r.naive.counts.soundscape);
    r.tau_m = per_call(r.naive.stage_seconds.masker, r.naive.counts.masker);
    r.tau_gao = per_call(r.naive.stage_seconds.head, r.naive.counts.head);

    const std::size_t cells = eta_m * eta_g;
    r.counts_ok = r.naive.counts == StageCounts{cells, cells, cells} &&
                  r.optimized.counts == StageCounts{1, eta_m, cells} && r.cached.counts == StageCounts{1, 0, cells};
    for (std::size_t i = 0; i < naive.grid.size(); ++i) {
        r.max_abs_diff = std::max({r.max_abs_diff, std::abs(naive.grid[i].mu - cached.grid[i].mu),
                                   std::abs(naive.grid[i].log_sigma - cached.grid[i].log_sigma),
                                   std::abs(naive.grid[i].mu - optimized.grid[i].mu),
                                   std::abs(naive.grid[i].log_sigma - optimized.grid[i].log_sigma)});
    }
    return r;
}

nlohmann::ordered_json to_json(const BenchReport & r) {
    auto schedule = [](const ScheduleTiming & t) {
        return nlohmann::ordered_json{
            {"calls", {{"f_s", t.counts.soundscape}, {"f_m", t.counts.masker}, {"f_gao", t.counts.head}}},
            {"stage_seconds", {{"f_s", t.stage_seconds.soundscape}, {"f_m", t.stage_seconds.masker}, {"f_gao", t.stage_seconds.head}}},
            {"wall_seconds", t.wall_seconds},
            {"predicted_seconds", t.predicted_seconds},
            {"additivity_error", t.additivity_error()},
        };
    };
    return {
        {"eta_m", r.eta_m},
        {"eta_g", r.eta_g},
        {"repeats", r.repeats},
        {"tau_s", r.tau_s},
        {"tau_m", r.tau_m},
        {"tau_gao", r.tau_gao},
        {"naive", schedule(r.naive)},
        {"optimized", schedule(r.optimized)},
        {"cached", schedule(r.cached)},
        {"speedup_optimized", r.speedup_optimized()},
        {"speedup_cached", r.speedup_cached()},
        {"max_abs_diff", r.max_abs_diff},
        {"counts_ok", r.counts_ok},
    };
}

} // namespace ppap::infer
