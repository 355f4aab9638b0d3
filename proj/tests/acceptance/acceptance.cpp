// One PASS/FAIL line per acceptance criterion. Pass criterion numbers as
// arguments to run a subset; 9 and 10 reuse the model trained for 8.
// `--known-fail 9,...` still runs and reports those criteria but leaves them
// out of the exit status.

#include "ppap/calib/calibration.h"
#include "ppap/cli/cli.h"
#include "ppap/common/log.h"
#include "ppap/data/manifest.h"
#include "ppap/data/pleasantness.h"
#include "ppap/data/synthetic.h"
#include "ppap/dsp/spectrogram.h"
#include "ppap/infer/bank.h"
#include "ppap/infer/predictor.h"
#include "ppap/infer/query.h"
#include "ppap/model/gradcheck.h"
#include "ppap/model/ppap.h"
#include "ppap/model/train.h"
#include "ppap/model/weights_io.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace ppap;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char * f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

dsp::Spectrogram random_spec(std::size_t T, std::size_t F, std::size_t C, std::mt19937_64 & rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    dsp::Spectrogram s{T, F, C, std::vector<double>(T * F * C)};
    for (auto & v : s.values) v = n(rng);
    return s;
}

// Average ranks, so tied values share a rank.
std::vector<double> ranks(const std::vector<double> & x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * double(i + j) + 1.0;
        i = j + 1;
    }
    return r;
}

double pearson(const std::vector<double> & a, const std::vector<double> & b) {
    const double n = double(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n, mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

double spearman(const std::vector<double> & a, const std::vector<double> & b) { return pearson(ranks(a), ranks(b)); }

double stddev(const std::vector<double> & x) {
    const double m = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / double(x.size()));
}

// ---- 1 -----------------------------------------------------------------

Verdict shape_fidelity() {
    const auto t0 = Clock::now();
    const model::ModelConfig c = model::ModelConfig::standard();
    model::Network<float> net(c);
    auto params = net.init_parameters(1);
    std::mt19937_64 rng(1);
    const model::Embedding k = model::extract_soundscape_features(net, random_spec(644, 64, 2, rng), params);
    const model::Embedding q = model::extract_masker_features(net, random_spec(644, 64, 1, rng), params);
    const double s = seconds_since(t0);
    const bool ok = k.frames() == 20 && k.dim() == 128 && q.frames() == 20 && q.dim() == 128 && s < 1.0;
    return {ok, fmt("f_s 644x64x2 -> %zux%zu, f_m 644x64x1 -> %zux%zu in %.3f s (exact 20x128, < 1 s)", k.frames(), k.dim(),
                    q.frames(), q.dim(), s)};
}

// ---- 2 -----------------------------------------------------------------

Verdict frame_count() {
    const std::size_t T = dsp::frame_count(30 * 44100, 4096, 2048);
    return {T == 644, fmt("30 s at 44.1 kHz, W=4096, H=2048 -> T=%zu (exact 644)", T)};
}

// ---- 3 -----------------------------------------------------------------

Verdict gradient_correctness() {
    const auto t0 = Clock::now();
    double worst = 0.0;
    std::string worst_variant;
    bool ok = true;
    for (auto aug : {model::Augmentation::cat, model::Augmentation::add, model::Augmentation::conv}) {
        for (auto fus : {model::Fusion::additive, model::Fusion::dot_product, model::Fusion::multi_head,
                         model::Fusion::pass_through}) {
            model::GradcheckOptions o;
            o.config.augmentation = aug;
            o.config.fusion = fus;
            const model::GradcheckReport r = model::gradient_check(o);
            ok = ok && r.pass && r.max_rel_error < 1e-4;
            if (r.max_rel_error >= worst) {
                worst = r.max_rel_error;
                worst_variant = model::to_string(aug) + "+" + model::to_string(fus);
            }
        }
    }
    const double s = seconds_since(t0);
    ok = ok && s < 120.0;
    return {ok, fmt("12 variants, worst max rel error %.2e (%s) in %.1f s (< 1e-4, < 120 s)", worst, worst_variant.c_str(), s)};
}

// ---- 4 -----------------------------------------------------------------

Verdict loss_spot_values() {
    auto nll = [](double y, double mu, double sigma) {
        const std::vector<model::PredictedDistribution> p{{mu, std::log(sigma)}};
        const std::vector<double> l{y};
        return model::nll_loss(p, l);
    };
    const double a = nll(0.3, 0.3, 1.0), b = nll(1.0, 0.0, 1.0), c = nll(0.5, 0.0, 0.5);
    const double err = std::max({std::abs(a), std::abs(b - 0.5), std::abs(c - (0.5 + std::log(0.5)))});
    const double printed = std::abs(c - (-0.19314));
    return {err <= 1e-9 && printed <= 1e-5,
            fmt("nll = %.12f, %.12f, %.12f; max error vs closed form %.1e (<= 1e-9)", a, b, c, err)};
}

// ---- 5 -----------------------------------------------------------------

Verdict schedule_equivalence() {
    const model::ModelConfig c = model::ModelConfig::compact();
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> eta(1, 8);
    std::uniform_real_distribution<double> gamma(-2.0, 2.0);
    double worst = 0.0;
    bool counts_ok = true;
    for (int instance = 0; instance < 20; ++instance) {
        auto params = model::Network<float>(c).init_parameters(100 + instance);
        const std::string hash = model::weights_hash(c, params);
        infer::Predictor p(c, std::move(params), hash);
        const dsp::Spectrogram s = random_spec(c.time_frames, c.mel_bins(), 2, rng);
        infer::QueryPlan plan;
        infer::MaskerSpectrograms maskers;
        const std::size_t m = eta(rng), g = eta(rng);
        for (std::size_t j = 0; j < m; ++j) {
            plan.masker_ids.push_back("m" + std::to_string(j));
            maskers[plan.masker_ids.back()] = random_spec(c.time_frames, c.mel_bins(), 1, rng);
        }
        for (std::size_t i = 0; i < g; ++i) plan.gammas.push_back(gamma(rng));
        const infer::QueryResult a = infer::query_naive(p, s, plan, maskers);
        const infer::QueryResult b = infer::query_optimized(p, s, plan, maskers);
        for (std::size_t i = 0; i < a.grid.size(); ++i) {
            worst = std::max({worst, std::abs(a.grid[i].mu - b.grid[i].mu),
                              std::abs(a.grid[i].log_sigma - b.grid[i].log_sigma)});
        }
        counts_ok = counts_ok && a.counts == infer::StageCounts{m * g, m * g, m * g} &&
                    b.counts == infer::StageCounts{1, m, m * g};
    }
    return {worst <= 1e-6 && counts_ok,
            fmt("20 instances, max |naive - optimized| %.2e (<= 1e-6), call counts %s", worst, counts_ok ? "exact" : "WRONG")};
}

// ---- 6 -----------------------------------------------------------------

Verdict measured_speedup() {
    const auto t0 = Clock::now();
    const model::ModelConfig c = model::ModelConfig::standard();
    auto params = model::Network<float>(c).init_parameters(6);
    const std::string hash = model::weights_hash(c, params);
    infer::Predictor p(c, std::move(params), hash);
    std::mt19937_64 rng(6);
    const dsp::Spectrogram s = random_spec(c.time_frames, c.mel_bins(), 2, rng);
    infer::QueryPlan plan;
    infer::MaskerSpectrograms maskers;
    std::vector<infer::NamedSpectrogram> named;
    for (std::size_t j = 0; j < 32; ++j) {
        plan.masker_ids.push_back("m" + std::to_string(j));
        maskers[plan.masker_ids.back()] = random_spec(c.time_frames, c.mel_bins(), 1, rng);
        named.emplace_back(plan.masker_ids.back(), maskers[plan.masker_ids.back()]);
    }
    plan.gammas = infer::gamma_grid(-2.0, 2.0, 8);
    const infer::MaskerBank bank = infer::precompute_bank(p, named);
    const infer::QueryResult naive = infer::query_naive(p, s, plan, maskers);
    const infer::QueryResult cached = infer::query_optimized(p, s, plan, {}, &bank);
    const double ratio = cached.wall_seconds / naive.wall_seconds;
    const double total = seconds_since(t0);
    return {ratio < 1.0 && total < 300.0,
            fmt("eta_m=32, eta_g=8, standard preset: naive %.3f s, optimized+bank %.3f s, ratio %.4f (speedup %.1fx; < 1, "
                "< 300 s total, took %.1f s)",
                naive.wall_seconds, cached.wall_seconds, ratio, 1.0 / ratio, total)};
}

// ---- 7 -----------------------------------------------------------------

Verdict gain_interpolation() {
    calib::GainLookupTable t;
    for (int l = 46; l <= 83; ++l) t.at(l) = 0.002 * std::pow(1.09, l - 46);
    int exact = 0;
    for (int l = 46; l <= 83; ++l) exact += calib::interpolate_gain(t, double(l)) == t.at(l);
    t.at(64) = 1.0;
    const double g = calib::interpolate_gain(t, 64.4);
    const double err = std::abs(g - 1.04713);
    return {exact == 38 && err <= 1e-5, fmt("exact at %d/38 keys; g(64.4) = %.6f, |g - 1.04713| = %.1e (<= 1e-5)", exact, g, err)};
}

// ---- 8, 9, 10 ----------------------------------------------------------

struct Reference {
    data::SyntheticDataset dataset;
    model::ModelConfig config;
    model::TrainResult result;
    double heldout_mse = 0.0;
    double final_epoch_mse = 0.0;
    std::size_t heldout_records = 0;
    double seconds = 0.0;
};

const Reference & reference_model() {
    static std::optional<Reference> ref;
    if (ref) return *ref;
    ref.emplace();
    const auto t0 = Clock::now();
    ref->config = model::ModelConfig::compact();
    ref->config.augmentation = model::Augmentation::conv;
    ref->config.fusion = model::Fusion::dot_product;

    data::SynthOptions so;
    so.n_scenes = 50;
    so.records_per_scene = 40;
    so.noise_std = 0.1;
    so.clip_samples = ref->config.clip_samples();
    so.seed = 2023;
    ref->dataset = data::generate_synthetic_dataset(so);
    const data::LoadedDataset loaded = data::to_training_set(ref->dataset, ref->config);

    model::TrainOptions o;
    o.model = ref->config;
    o.adam.lr = 5e-5;
    o.max_epochs = 100;
    o.batch_size = 32;
    o.seed = 1;
    o.validation_fold = 0;
    o.on_epoch = [&](const model::EpochMetrics & m) {
        if (m.epoch % 10 == 0 || m.epoch == 1) {
            std::cout << fmt("  [train] epoch %3zu  train mse %.4f  held-out mse %.4f  nll %.4f  (%.0f s)", m.epoch,
                             m.train_mse, m.val_mse, m.val_nll, seconds_since(t0))
                      << std::endl;
        }
    };
    ref->result = model::train(loaded.set, o);
    ref->final_epoch_mse = ref->result.history.back().val_mse;

    std::vector<std::size_t> heldout;
    for (std::size_t i = 0; i < loaded.set.samples.size(); ++i) {
        if (loaded.set.samples[i].fold == 0) heldout.push_back(i);
    }
    model::Network<float> net(ref->config);
    ref->heldout_mse = model::evaluate(net, ref->result.params, loaded.set, heldout, ref->result.gamma_stats).mse;
    ref->heldout_records = heldout.size();
    ref->seconds = seconds_since(t0);
    return *ref;
}

Verdict oracle_recovery() {
    const Reference & r = reference_model();
    return {r.heldout_mse <= 0.04 && r.seconds <= 1800.0,
            fmt("CONV+DPA, %zu records, %zu held out: MSE %.4f at best epoch %zu (final epoch %.4f) in %.0f s (<= 0.04, "
                "<= 1800 s)",
                r.dataset.records.size(), r.heldout_records, r.heldout_mse, r.result.best_epoch, r.final_epoch_mse, r.seconds)};
}

struct Sweeps {
    std::vector<double> gammas;
    std::vector<double> bird, traffic, silent;
    std::vector<double> bird_oracle;
    std::string scene_id, bird_id, traffic_id;
};

const Sweeps & reference_sweeps() {
    static std::optional<Sweeps> sw;
    if (sw) return *sw;
    const Reference & r = reference_model();
    sw.emplace();
    infer::Predictor p(r.config, r.result.params, model::weights_hash(r.config, r.result.params, r.result.gamma_stats),
                       r.result.gamma_stats);

    std::set<std::string> heldout_scenes;
    for (const auto & rec : r.dataset.records) {
        if (rec.fold == 0) heldout_scenes.insert(rec.scene_id);
    }
    const data::SyntheticScene * scene = nullptr;
    for (const auto & s : r.dataset.scenes) {
        if (heldout_scenes.count(s.id)) {
            scene = &s;
            break;
        }
    }
    const data::SyntheticMasker * bird = nullptr;
    const data::SyntheticMasker * traffic = nullptr;
    for (const auto & m : r.dataset.maskers) {
        if (!bird && m.cls == data::MaskerClass::bird) bird = &m;
        if (!traffic && m.cls == data::MaskerClass::traffic) traffic = &m;
    }
    sw->scene_id = scene->id;
    sw->bird_id = bird->id;
    sw->traffic_id = traffic->id;

    std::vector<infer::NamedSpectrogram> named{
        {bird->id, data::masker_spectrogram(bird->audio, r.config)},
        {traffic->id, data::masker_spectrogram(traffic->audio, r.config)},
        {data::kSilentMasker, dsp::Spectrogram::silent(r.config.time_frames, r.config.mel_bins(), 1)}};
    const infer::MaskerBank bank = infer::precompute_bank(p, named);
    const dsp::Spectrogram s = data::soundscape_spectrogram(scene->audio, r.config);
    const model::Embedding k = p.soundscape_features(s);
    auto mus = [&](const std::string & id) {
        std::vector<double> out;
        for (const auto & pt : infer::gain_sweep(p, k, bank, id, -2.0, 2.0, 256)) out.push_back(pt.mu);
        return out;
    };
    sw->gammas = infer::gamma_grid(-2.0, 2.0, 256);
    sw->bird = mus(bird->id);
    sw->traffic = mus(traffic->id);
    sw->silent = mus(data::kSilentMasker);
    for (double g : sw->gammas) {
        sw->bird_oracle.push_back(data::oracle_label(r.dataset.options, data::MaskerClass::bird, scene->offset, g));
    }
    return *sw;
}

Verdict sweep_shape() {
    const Sweeps & s = reference_sweeps();
    const double rho_bird = spearman(s.bird, s.bird_oracle);
    const double argmax = s.gammas[std::max_element(s.bird.begin(), s.bird.end()) - s.bird.begin()];
    const double rho_traffic = spearman(s.traffic, s.gammas);
    const bool ok = rho_bird >= 0.9 && argmax >= -1.0 && argmax <= 0.0 && rho_traffic <= -0.9;
    return {ok, fmt("scene %s: bird %s Spearman vs oracle %.3f (>= 0.9), argmax gamma %.3f (in [-1, 0]); traffic %s "
                    "Spearman vs gamma %.3f (<= -0.9)",
                    s.scene_id.c_str(), s.bird_id.c_str(), rho_bird, argmax, s.traffic_id.c_str(), rho_traffic)};
}

Verdict silent_flatness() {
    const Sweeps & s = reference_sweeps();
    const double a = stddev(s.silent), b = stddev(s.bird);
    return {a <= 0.25 * b, fmt("std(mu) silent %.5f, bird %.5f, ratio %.3f (<= 0.25)", a, b, a / b)};
}

// ---- 11 ----------------------------------------------------------------

Verdict add_independence() {
    model::ModelConfig c = model::ModelConfig::standard();
    c.augmentation = model::Augmentation::add;
    model::Network<float> net(c);
    std::mt19937_64 rng(11);
    std::normal_distribution<float> n;
    auto random_embedding = [&] {
        nn::Tensor<float> t({1, c.embed_frames, c.embed_dim});
        for (auto & v : t.values()) v = n(rng);
        return t;
    };
    const std::vector<float> zero{0.0f};
    int identical = 0;
    for (int draw = 0; draw < 10; ++draw) {
        const auto params = net.init_parameters(1000 + draw);
        const nn::Tensor<float> k = random_embedding();
        std::optional<std::vector<float>> first;
        bool same = true;
        for (int j = 0; j < 10; ++j) {
            nn::Graph<float> g(false);
            model::ForwardContext<float> ctx{g, params};
            const nn::Var<float> v = net.augment(ctx, g.constant(k), g.constant(random_embedding()), zero);
            if (!first) first = v.value().storage();
            else same = same && *first == v.value().storage();
        }
        identical += same;
    }
    return {identical == 10, fmt("%d/10 weight draws give bit-identical f_g(k, q, 0) over 10 queries (exact)", identical)};
}

// ---- 12 ----------------------------------------------------------------

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "ppap");
    std::vector<const char *> argv;
    for (const auto & a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(int(argv.size()), argv.data(), out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

std::string slurp(const fs::path & p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Verdict determinism() {
    const fs::path dir = fs::temp_directory_path() / "ppap_acceptance_determinism";
    fs::remove_all(dir);
    bool ok = cli({"synth", "--out", (dir / "ds").string(), "--scenes", "6", "--records-per-scene", "6", "--seed", "12",
                   "--preset", "tiny", "--maskers-per-class", "1"}) == 0;
    for (const char * run : {"a", "b"}) {
        ok = ok && cli({"train", "--manifest", (dir / "ds" / "manifest.jsonl").string(), "--out", (dir / run).string(),
                        "--preset", "tiny", "--epochs", "3", "--batch-size", "8", "--seed", "12"}) == 0;
    }
    const std::string a = slurp(dir / "a" / "weights.ppapw"), b = slurp(dir / "b" / "weights.ppapw");
    const bool same = ok && !a.empty() && a == b;
    fs::remove_all(dir);
    return {same, fmt("two train runs, same config and seed: %zu-byte weight files %s (byte-identical)", a.size(),
                      same ? "identical" : "DIFFER")};
}

// ---- 13 ----------------------------------------------------------------

Verdict iso_examples() {
    using namespace data;
    Ratings r;
    r.fill(3);
    const double e1 = std::abs(iso_pleasantness(r));
    r[kPleasant] = 5;
    r[kAnnoying] = 1;
    const double e2 = std::abs(iso_pleasantness(r) - 4.0 / (4.0 + 4.0 * std::sqrt(2.0)));
    const double printed = std::abs(iso_pleasantness(r) - 0.41421);
    r[kCalm] = 5;
    r[kVibrant] = 5;
    r[kChaotic] = 1;
    r[kMonotonous] = 1;
    const double e3 = std::abs(iso_pleasantness(r) - 1.0);
    const double err = std::max({e1, e2, e3});

    // +1: non-decreasing in the rating, -1: non-increasing, 0: no effect.
    const std::array<int, 8> direction{+1, 0, 0, -1, +1, +1, -1, -1};
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> u(1, 5);
    std::size_t violations = 0, checks = 0;
    for (int profile = 0; profile < 1000; ++profile) {
        Ratings base;
        for (auto & v : base) v = u(rng);
        for (std::size_t i = 0; i < 8; ++i) {
            Ratings x = base;
            x[i] = 1;
            double prev = iso_pleasantness(x);
            for (int v = 2; v <= 5; ++v) {
                x[i] = v;
                const double y = iso_pleasantness(x);
                ++checks;
                const bool ok = direction[i] > 0 ? y >= prev : direction[i] < 0 ? y <= prev : y == prev;
                violations += !ok;
                prev = y;
            }
        }
    }
    return {err <= 1e-9 && printed <= 1e-5 && violations == 0,
            fmt("examples max error %.1e (<= 1e-9); %zu single-rating perturbations of 1000 profiles, %zu violations", err,
                checks, violations)};
}

} // namespace

int main(int argc, char ** argv) {
    log::set_level(log::Level::warn);
    const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
        {"shape fidelity", shape_fidelity},
        {"frame count", frame_count},
        {"gradient correctness", gradient_correctness},
        {"loss spot values", loss_spot_values},
        {"schedule equivalence", schedule_equivalence},
        {"measured speedup", measured_speedup},
        {"gain interpolation", gain_interpolation},
        {"synthetic-oracle recovery", oracle_recovery},
        {"gain-sweep shape recovery", sweep_shape},
        {"silent-masker flatness", silent_flatness},
        {"ADD gamma=0 independence", add_independence},
        {"determinism", determinism},
        {"ISO pleasantness", iso_examples},
    };
    std::set<int> only, known_fail;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--known-fail" && i + 1 < argc) {
            std::stringstream list(argv[++i]);
            for (std::string item; std::getline(list, item, ',');) known_fail.insert(std::stoi(item));
        } else {
            only.insert(std::stoi(arg));
        }
    }

    int failed = 0, known = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int id = int(i) + 1;
        if (!only.empty() && !only.count(id)) continue;
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception & e) {
            v = {false, std::string("threw: ") + e.what()};
        }
        if (!v.pass) (known_fail.count(id) ? known : failed)++;
        std::cout << fmt("criterion %2d %s  %s: ", id, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str()) << v.detail
                  << std::endl;
    }
    std::cout << fmt("%d unexpected failure(s), %d known failure(s)", failed, known) << std::endl;
    return failed == 0 ? 0 : 1;
}
