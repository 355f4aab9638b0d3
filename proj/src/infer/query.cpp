#include "ppap/infer/query.h"

#include "ppap/common/error.h"
#include "ppap/common/log.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace ppap::infer {

namespace {

using Clock = std::chrono::steady_clock;

const dsp::Spectrogram & masker_or_throw(const MaskerSpectrograms & maskers, const std::string & id) {
    const auto it = maskers.find(id);
    if (it == maskers.end()) throw DataError("no spectrogram for masker '" + id + "'");
    return it->second;
}

QueryResult start_result(Predictor & predictor, const QueryPlan & plan) {
    plan.validate();
    predictor.reset_counters();
    QueryResult r;
    r.masker_ids = plan.masker_ids;
    r.gammas = plan.gammas;
    r.grid.reserve(plan.masker_ids.size() * plan.gammas.size());
    return r;
}

void finish_result(QueryResult & r, const Predictor & predictor, Clock::time_point t0) {
    r.counts = predictor.counts();
    r.times = predictor.times();
    r.wall_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
}

} // namespace

void QueryPlan::validate() const {
    if (masker_ids.empty()) throw UsageError("query plan needs at least one masker");
    if (gammas.empty()) throw UsageError("query plan needs at least one gain");
    std::set<std::string> seen;
    for (const auto & id : masker_ids) {
        if (!seen.insert(id).second) throw UsageError("masker '" + id + "' appears twice in the query plan");
    }
    for (double g : gammas) {
        if (!std::isfinite(g)) throw UsageError("query plan gamma is not finite");
    }
}

QueryResult query_naive(Predictor & predictor, const dsp::Spectrogram & soundscape, const QueryPlan & plan,
                        const MaskerSpectrograms & maskers) {
    QueryResult r = start_result(predictor, plan);
    const auto t0 = Clock::now();
    for (const auto & id : plan.masker_ids) {
        const dsp::Spectrogram & m = masker_or_throw(maskers, id);
        for (double g : plan.gammas) {
            const model::Embedding k = predictor.soundscape_features(soundscape);
            const model::Embedding q = predictor.masker_features(m);
            r.grid.push_back(predictor.gain_stage(k, q, std::span<const double>(&g, 1)).front());
        }
    }
    finish_result(r, predictor, t0);
    return r;
}

QueryResult query_optimized(Predictor & predictor, const dsp::Spectrogram & soundscape, const QueryPlan & plan,
                            const MaskerSpectrograms & maskers, const MaskerBank * bank) {
    if (bank) check_bank(*bank, predictor);
    QueryResult r = start_result(predictor, plan);
    const auto t0 = Clock::now();
    const model::Embedding k = predictor.soundscape_features(soundscape);
    for (const auto & id : plan.masker_ids) {
        const BankEntry * cached = bank ? bank->find(id) : nullptr;
        model::Embedding computed;
        if (!cached) {
            if (bank && !maskers.count(id)) {
                throw DataError("masker '" + id + "' is neither in the feature cache nor given as audio");
            }
            computed = predictor.masker_features(masker_or_throw(maskers, id));
        }
        const model::Embedding & q = cached ? cached->query : computed;
        auto cells = predictor.gain_stage(k, q, plan.gammas);
        r.grid.insert(r.grid.end(), cells.begin(), cells.end());
    }
    finish_result(r, predictor, t0);
    return r;
}

std::vector<RankedPair> rank(const QueryResult & result, std::size_t k) {
    if (k == 0) throw UsageError("rank: k must be >= 1");
    std::vector<RankedPair> all;
    for (std::size_t m = 0; m < result.masker_ids.size(); ++m) {
        for (std::size_t g = 0; g < result.gammas.size(); ++g) {
            const auto & p = result.at(m, g);
            all.push_back({result.masker_ids[m], std::pow(10.0, result.gammas[g]), result.gammas[g], p.mu, p.sigma()});
        }
    }
    std::sort(all.begin(), all.end(), [](const RankedPair & a, const RankedPair & b) {
        if (a.mu != b.mu) return a.mu > b.mu;
        if (a.sigma != b.sigma) return a.sigma < b.sigma;
        if (a.masker_id != b.masker_id) return a.masker_id < b.masker_id;
        return a.gain < b.gain;
    });
    if (k > all.size()) {
        log::warn("rank: top-" + std::to_string(k) + " requested from a grid of " + std::to_string(all.size()) +
                  "; returning the full grid");
    } else {
        all.resize(k);
    }
    return all;
}

std::vector<double> gamma_grid(double lo, double hi, std::size_t count) {
    if (count == 0) throw UsageError("gain grid needs at least one point");
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw UsageError("gain grid bounds must be finite");
    if (count == 1) return {lo};
    std::vector<double> out(count);
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
    out.back() = hi;
    return out;
}

std::vector<double> parse_gain_spec(const std::string & spec) {
    std::stringstream ss(spec);
    std::string lo, hi, count;
    if (!std::getline(ss, lo, ':') || !std::getline(ss, hi, ':') || !std::getline(ss, count) || ss.rdbuf()->in_avail()) {
        throw UsageError("gain spec '" + spec + "' must be lo:hi:count");
    }
    try {
        std::size_t used = 0;
        const double l = std::stod(lo, &used);
        if (used != lo.size()) throw std::invalid_argument(lo);
        const double h = std::stod(hi, &used);
        if (used != hi.size()) throw std::invalid_argument(hi);
        const long n = std::stol(count, &used);
        if (used != count.size() || n < 1) throw std::invalid_argument(count);
        return gamma_grid(l, h, static_cast<std::size_t>(n));
    } catch (const std::logic_error &) {
        throw UsageError("gain spec '" + spec + "' must be lo:hi:count with numeric bounds and count >= 1");
    }
}

std::vector<SweepPoint> gain_sweep(Predictor & predictor, const model::Embedding & keys, const MaskerBank & bank,
                                   const std::string & masker_id, double lo, double hi, std::size_t count) {
    if (count < 2) throw UsageError("gain sweep needs count >= 2");
    check_bank(bank, predictor);
    const BankEntry * e = bank.find(masker_id);
    if (!e) {
        std::string ids;
        for (const auto & id : bank.ids()) ids += (ids.empty() ? "" : ", ") + id;
        throw DataError("masker '" + masker_id + "' is not in the feature cache (available: " + ids + ")");
    }
    const std::vector<double> gammas = gamma_grid(lo, hi, count);
    const auto preds = predictor.gain_stage(keys, e->query, gammas);
    std::vector<SweepPoint> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = {gammas[i], preds[i].mu, preds[i].sigma()};
    return out;
}

std::vector<SweepPoint> gain_sweep(Predictor & predictor, const dsp::Spectrogram & soundscape, const MaskerBank & bank,
                                   const std::string & masker_id, double lo, double hi, std::size_t count) {
    if (count < 2) throw UsageError("gain sweep needs count >= 2");
    return gain_sweep(predictor, predictor.soundscape_features(soundscape), bank, masker_id, lo, hi, count);
}

std::string format_sweep_csv(const std::vector<std::pair<std::string, std::vector<SweepPoint>>> & sweeps) {
    std::string out = "masker_id,gamma,mu,sigma\n";
    char buf[128];
    for (const auto & [id, points] : sweeps) {
        for (const auto & p : points) {
            std::snprintf(buf, sizeof buf, ",%.9g,%.9g,%.9g\n", p.gamma, p.mu, p.sigma);
            out += id + buf;
        }
    }
    return out;
}

} // namespace ppap::infer
