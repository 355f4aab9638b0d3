#include "ppap/cli/cli.h"

#include "ppap/common/error.h"
#include "ppap/common/file_io.h"
#include "ppap/common/log.h"
#include "ppap/data/manifest.h"
#include "ppap/data/synthetic.h"
#include "ppap/dsp/wav.h"
#include "ppap/infer/bench.h"
#include "ppap/infer/query.h"
#include "ppap/model/gradcheck.h"
#include "ppap/model/train.h"
#include "ppap/model/weights_io.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <set>

namespace ppap::cli {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

RunConfig load_run_config(const fs::path & path) {
    json j;
    try {
        j = json::parse(read_file(path));
    } catch (const json::exception & e) {
        throw DataError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    RunConfig rc;
    try {
        if (j.contains("preset")) rc.model = model::ModelConfig::preset(j["preset"].get<std::string>());
        if (j.contains("model")) j["model"].get_to(rc.model);
        if (j.contains("lr")) rc.adam.lr = j["lr"].get<double>();
        if (j.contains("epochs")) rc.max_epochs = j["epochs"].get<std::size_t>();
        if (j.contains("batch_size")) rc.batch_size = j["batch_size"].get<std::size_t>();
        if (j.contains("seed")) rc.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("fold")) rc.fold = j["fold"].get<int>();
        if (j.contains("manifest")) rc.manifest = j["manifest"].get<std::string>();
        if (j.contains("out")) rc.out_dir = j["out"].get<std::string>();
    } catch (const json::exception & e) {
        throw DataError("config " + path.string() + ": " + e.what());
    }
    return rc;
}

namespace {

std::vector<std::uint64_t> parse_seeds(const std::string & spec) {
    std::vector<std::uint64_t> out;
    try {
        const auto dash = spec.find('-');
        if (dash != std::string::npos) {
            const std::uint64_t a = std::stoull(spec.substr(0, dash)), b = std::stoull(spec.substr(dash + 1));
            if (b < a) throw std::invalid_argument(spec);
            for (std::uint64_t s = a; s <= b; ++s) out.push_back(s);
        } else {
            std::stringstream ss(spec);
            std::string item;
            while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
        }
    } catch (const std::logic_error &) {
        throw UsageError("--seeds must look like 0-9 or 0,3,7");
    }
    if (out.empty()) throw UsageError("--seeds is empty");
    return out;
}

void require_file(const fs::path & p, const char * what) {
    if (p.empty()) throw UsageError(std::string(what) + " path is required");
    if (!fs::is_regular_file(p)) throw DataError(std::string(what) + " not found: " + p.string());
}

std::vector<fs::path> expand_wavs(const std::vector<std::string> & inputs) {
    std::vector<fs::path> out;
    for (const auto & in : inputs) {
        const fs::path p(in);
        if (fs::is_directory(p)) {
            std::vector<fs::path> found;
            for (const auto & e : fs::directory_iterator(p)) {
                if (e.is_regular_file() && e.path().extension() == ".wav") found.push_back(e.path());
            }
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            require_file(p, "masker WAV");
            out.push_back(p);
        }
    }
    if (out.empty()) throw UsageError("no masker WAVs given");
    return out;
}

std::string format_metrics(const std::vector<model::EpochMetrics> & history) {
    std::string out = "epoch,train_loss,val_mse,val_mae\n";
    char buf[160];
    for (const auto & m : history) {
        std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", m.epoch, m.train_loss, m.val_mse, m.val_mae);
        out += buf;
    }
    return out;
}

void add_model_flags(CLI::App * sub, std::string & preset, std::string & aug, std::string & fusion) {
    sub->add_option("--preset", preset, "Model preset: standard, compact or tiny");
    sub->add_option("--augmentation", aug, "Gain augmentation: CAT, ADD or CONV");
    sub->add_option("--fusion", fusion, "Attention: AA, DPA, MHA4 or PASSTHROUGH");
}

void apply_model_flags(model::ModelConfig & cfg, const std::string & preset, const std::string & aug,
                       const std::string & fusion) {
    if (!preset.empty()) {
        const auto a = cfg.augmentation;
        const auto f = cfg.fusion;
        cfg = model::ModelConfig::preset(preset);
        cfg.augmentation = a;
        cfg.fusion = f;
    }
    if (!aug.empty()) cfg.augmentation = model::parse_augmentation(aug);
    if (!fusion.empty()) cfg.fusion = model::parse_fusion(fusion);
    cfg.validate();
}

void write_text(const fs::path & path, std::ostream & out, const std::string & text) {
    if (path.empty()) {
        out << text;
    } else {
        if (path.has_parent_path()) fs::create_directories(path.parent_path());
        write_file_atomic(path, text);
    }
}

// ---- synth ---------------------------------------------------------------

struct SynthArgs {
    std::string out;
    std::size_t scenes = 50;
    std::size_t records = 40;
    std::optional<std::uint64_t> seed;
    std::string preset = "standard";
    std::size_t clip_samples = 0;
    double noise_std = 0.1;
    std::size_t maskers_per_class = 3;
    int folds = 5;
    bool mixtures = false;
    bool force = false;
};

int cmd_synth(const SynthArgs & a, std::ostream & out) {
    if (a.scenes == 0) throw UsageError("--scenes must be >= 1");
    if (!a.seed) throw UsageError("synth needs --seed");
    const fs::path dir(a.out);
    if (fs::exists(dir) && !fs::is_empty(dir) && !a.force) {
        throw UsageError("output directory " + dir.string() + " is not empty; pass --force to overwrite");
    }
    data::SynthOptions o;
    o.n_scenes = a.scenes;
    o.records_per_scene = a.records;
    o.seed = *a.seed;
    o.clip_samples = a.clip_samples ? a.clip_samples : model::ModelConfig::preset(a.preset).clip_samples();
    o.noise_std = a.noise_std;
    o.maskers_per_class = a.maskers_per_class;
    o.folds = a.folds;
    o.write_mixtures = a.mixtures;
    const data::SyntheticDataset ds = data::generate_synthetic_dataset(o);
    data::write_synthetic_dataset(ds, dir);
    out << "wrote " << ds.records.size() << " records (" << ds.scenes.size() << " scenes, " << ds.maskers.size()
        << " maskers, " << o.folds << " folds) to " << dir.string() << "\n";
    return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string manifest;
    std::string out;
    std::string preset, aug, fusion;
    double lr = 0.0;
    std::size_t epochs = 0;
    std::size_t batch = 0;
    std::uint64_t seed = 0;
    int fold = 0;
    bool all_folds = false;
    std::string seeds;
};

void train_one(const RunConfig & rc, const data::LoadedDataset & loaded, std::uint64_t seed, int fold,
               const fs::path & dir, std::ostream & out) {
    fs::create_directories(dir);
    model::TrainOptions opt;
    opt.model = rc.model;
    opt.adam = rc.adam;
    opt.max_epochs = rc.max_epochs;
    opt.batch_size = rc.batch_size;
    opt.seed = seed;
    opt.validation_fold = fold;
    std::vector<model::EpochMetrics> history;
    opt.on_epoch = [&](const model::EpochMetrics & m) {
        history.push_back(m);
        write_file_atomic(dir / "metrics.csv", format_metrics(history));
    };
    model::TrainResult result = model::train(loaded.set, opt);
    const std::string hash = model::save_weights(dir / "weights.ppapw", rc.model, result.params, result.gamma_stats);

    ordered_json echo;
    echo["model"] = ordered_json::parse(json(rc.model).dump());
    echo["lr"] = rc.adam.lr;
    echo["beta1"] = rc.adam.beta1;
    echo["beta2"] = rc.adam.beta2;
    echo["eps"] = rc.adam.eps;
    echo["epochs"] = rc.max_epochs;
    echo["batch_size"] = rc.batch_size;
    echo["seed"] = seed;
    echo["fold"] = fold;
    echo["manifest"] = fs::absolute(rc.manifest).string();
    echo["weight_hash"] = hash;
    echo["best_epoch"] = result.best_epoch;
    echo["gamma_stats"] = {{"mean", result.gamma_stats.mean}, {"stddev", result.gamma_stats.stddev}};
    write_file_atomic(dir / "config.json", echo.dump(2) + "\n");

    out << "seed " << seed << " fold " << fold << ": best epoch " << result.best_epoch;
    if (result.best_epoch > 0 && fold >= 0) {
        const auto & best = result.history[result.best_epoch - 1];
        out << ", val_mse " << best.val_mse << ", val_mae " << best.val_mae;
    }
    out << ", weights " << (dir / "weights.ppapw").string() << " (" << hash << ")\n";
}

int cmd_train(const TrainArgs & a, CLI::App * sub, std::ostream & out) {
    RunConfig rc = a.config.empty() ? RunConfig{} : load_run_config(a.config);
    if (sub->count("--manifest")) rc.manifest = a.manifest;
    if (sub->count("--out")) rc.out_dir = a.out;
    if (sub->count("--lr")) rc.adam.lr = a.lr;
    if (sub->count("--epochs")) rc.max_epochs = a.epochs;
    if (sub->count("--batch-size")) rc.batch_size = a.batch;
    if (sub->count("--seed")) rc.seed = a.seed;
    if (sub->count("--fold")) rc.fold = a.fold;
    apply_model_flags(rc.model, a.preset, a.aug, a.fusion);

    require_file(rc.manifest, "manifest");
    if (rc.out_dir.empty()) throw UsageError("train needs --out");
    if (!(rc.adam.lr >= 0.0)) throw UsageError("--lr must be >= 0");
    if (rc.batch_size == 0) throw UsageError("--batch-size must be >= 1");
    std::vector<std::uint64_t> seeds;
    if (!a.seeds.empty()) {
        seeds = parse_seeds(a.seeds);
    } else if (rc.seed) {
        seeds = {*rc.seed};
    } else {
        throw UsageError("train needs --seed (or --seeds)");
    }

    const auto records = data::read_manifest(rc.manifest);
    std::set<int> present;
    for (const auto & r : records) present.insert(r.fold);
    std::vector<int> folds;
    if (a.all_folds) {
        folds.assign(present.begin(), present.end());
    } else {
        if (rc.fold != -1 && !present.count(rc.fold)) {
            std::string list;
            for (int f : present) list += (list.empty() ? "" : ",") + std::to_string(f);
            throw UsageError("fold " + std::to_string(rc.fold) + " is not in the manifest (folds: " + list +
                             "; -1 trains on everything)");
        }
        folds = {rc.fold};
    }
    const auto loaded = data::load_training_set(rc.manifest, records, rc.model);
    const bool single = seeds.size() == 1 && folds.size() == 1;
    for (std::uint64_t s : seeds) {
        for (int f : folds) {
            const fs::path dir = single ? rc.out_dir
                                        : rc.out_dir / ("seed" + std::to_string(s) + "_fold" + std::to_string(f));
            train_one(rc, loaded, s, f, dir, out);
        }
    }
    return 0;
}

// ---- precompute ----------------------------------------------------------

struct PrecomputeArgs {
    std::string weights;
    std::vector<std::string> maskers;
    std::string out;
    bool silent = false;
};

int cmd_precompute(const PrecomputeArgs & a, std::ostream & out) {
    require_file(a.weights, "weights");
    const auto paths = expand_wavs(a.maskers);
    infer::Predictor predictor = infer::Predictor::from_file(a.weights);
    std::vector<infer::NamedSpectrogram> maskers;
    for (const auto & p : paths) {
        maskers.emplace_back(p.stem().string(), data::masker_spectrogram(dsp::read_wav(p), predictor.config()));
    }
    if (a.silent) {
        const auto & c = predictor.config();
        maskers.emplace_back(data::kSilentMasker, dsp::Spectrogram::silent(c.time_frames, c.mel_bins(), 1));
    }
    const infer::MaskerBank bank = infer::precompute_bank(predictor, maskers);
    if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
    infer::save_bank(a.out, bank);
    out << "cached " << bank.entries.size() << " masker embeddings (" << bank.frames << "x" << bank.dim
        << ") for weights " << bank.weight_hash << " in " << a.out << "\n";
    return 0;
}

// ---- infer ---------------------------------------------------------------

struct InferArgs {
    std::string weights, soundscape, cache, gains = "-2:2:256", out;
    std::size_t top_k = 5;
    std::vector<std::string> maskers;
};

int cmd_infer(const InferArgs & a, std::ostream & out) {
    require_file(a.weights, "weights");
    require_file(a.soundscape, "soundscape");
    require_file(a.cache, "feature cache");
    if (a.top_k == 0) throw UsageError("--top-k must be >= 1");
    infer::QueryPlan plan;
    plan.gammas = infer::parse_gain_spec(a.gains);
    infer::Predictor predictor = infer::Predictor::from_file(a.weights);
    const infer::MaskerBank bank = infer::load_bank(a.cache);
    infer::check_bank(bank, predictor);
    plan.masker_ids = a.maskers.empty() ? bank.ids() : a.maskers;
    for (const auto & id : plan.masker_ids) {
        if (!bank.find(id)) throw DataError("masker '" + id + "' is not in the feature cache");
    }
    const dsp::Spectrogram s = data::soundscape_spectrogram(dsp::read_wav(a.soundscape), predictor.config());
    const infer::QueryResult result = infer::query_optimized(predictor, s, plan, {}, &bank);
    ordered_json list = ordered_json::array();
    for (const auto & r : infer::rank(result, a.top_k)) {
        list.push_back(ordered_json{{"masker_id", r.masker_id}, {"gain", r.gain}, {"gamma", r.gamma}, {"mu", r.mu}, {"sigma", r.sigma}});
    }
    write_text(a.out, out, list.dump(2) + "\n");
    return 0;
}

// ---- sweep ---------------------------------------------------------------

struct SweepArgs {
    std::string weights, soundscape, cache, range = "-2:2", out;
    std::size_t count = 256;
    std::vector<std::string> maskers;
    bool silent = false;
};

int cmd_sweep(const SweepArgs & a, std::ostream & out) {
    require_file(a.weights, "weights");
    require_file(a.soundscape, "soundscape");
    require_file(a.cache, "feature cache");
    const auto colon = a.range.find(':');
    double lo = 0, hi = 0;
    try {
        if (colon == std::string::npos) throw std::invalid_argument(a.range);
        lo = std::stod(a.range.substr(0, colon));
        hi = std::stod(a.range.substr(colon + 1));
    } catch (const std::logic_error &) {
        throw UsageError("--range must be lo:hi");
    }
    infer::Predictor predictor = infer::Predictor::from_file(a.weights);
    infer::MaskerBank bank = infer::load_bank(a.cache);
    infer::check_bank(bank, predictor);
    std::vector<std::string> ids = a.maskers;
    if (ids.empty()) {
        for (const auto & id : bank.ids()) {
            if (id != data::kSilentMasker) ids.push_back(id);
        }
    }
    if (a.silent && std::find(ids.begin(), ids.end(), data::kSilentMasker) == ids.end()) {
        ids.push_back(data::kSilentMasker);
        if (!bank.find(data::kSilentMasker)) {
            const auto & c = predictor.config();
            const auto silent = dsp::Spectrogram::silent(c.time_frames, c.mel_bins(), 1);
            bank.entries.push_back({data::kSilentMasker, infer::spectrogram_hash(silent), predictor.masker_features(silent)});
        }
    }
    const dsp::Spectrogram s = data::soundscape_spectrogram(dsp::read_wav(a.soundscape), predictor.config());
    const model::Embedding keys = predictor.soundscape_features(s);
    std::vector<std::pair<std::string, std::vector<infer::SweepPoint>>> sweeps;
    for (const auto & id : ids) sweeps.emplace_back(id, infer::gain_sweep(predictor, keys, bank, id, lo, hi, a.count));
    write_text(a.out, out, infer::format_sweep_csv(sweeps));
    return 0;
}

// ---- bench ---------------------------------------------------------------

struct BenchArgs {
    std::string weights, preset = "compact", out;
    std::size_t eta_m = 32, eta_g = 8, repeats = 3;
    std::uint64_t seed = 0;
};

int cmd_bench(const BenchArgs & a, std::ostream & out) {
    std::optional<infer::Predictor> predictor;
    if (!a.weights.empty()) {
        require_file(a.weights, "weights");
        predictor.emplace(infer::Predictor::from_file(a.weights));
    } else {
        model::ModelConfig cfg = model::ModelConfig::preset(a.preset);
        model::Network<float> net(cfg);
        auto params = net.init_parameters(a.seed);
        const std::string hash = model::weights_hash(cfg, params);
        predictor.emplace(cfg, std::move(params), hash);
    }
    const auto & cfg = predictor->config();
    const std::size_t n = cfg.clip_samples();
    const int sr = cfg.dsp.sample_rate;
    const dsp::Spectrogram soundscape = data::soundscape_spectrogram(
        data::synth_ambience(data::AmbienceClass::pink, -24.0, n, sr, a.seed), cfg);
    infer::MaskerSpectrograms maskers;
    const data::MaskerClass classes[] = {data::MaskerClass::bird, data::MaskerClass::water, data::MaskerClass::traffic,
                                         data::MaskerClass::construction};
    for (std::size_t m = 0; m < a.eta_m; ++m) {
        char id[32];
        std::snprintf(id, sizeof id, "masker_%03zu", m);
        maskers.emplace(id, data::masker_spectrogram(data::synth_masker(classes[m % 4], -20.0, n, sr, a.seed + 1 + m), cfg));
    }
    const infer::BenchReport report = infer::run_benchmark(*predictor, soundscape, maskers, a.eta_m, a.eta_g, a.repeats);
    write_text(a.out, out, infer::to_json(report).dump(2) + "\n");
    if (!report.counts_ok) throw NumericalError("stage call counts violate the schedule identities");
    return 0;
}

// ---- gradcheck -----------------------------------------------------------

struct GradcheckArgs {
    std::uint64_t seed = 0;
    std::string aug = "all", fusion = "all", corrupt;
};

int cmd_gradcheck(const GradcheckArgs & a, std::ostream & out) {
    std::vector<model::Augmentation> augs;
    std::vector<model::Fusion> fusions;
    if (a.aug == "all") {
        augs = {model::Augmentation::cat, model::Augmentation::add, model::Augmentation::conv};
    } else {
        augs = {model::parse_augmentation(a.aug)};
    }
    if (a.fusion == "all") {
        fusions = {model::Fusion::additive, model::Fusion::dot_product, model::Fusion::multi_head,
                   model::Fusion::pass_through};
    } else {
        fusions = {model::parse_fusion(a.fusion)};
    }
    bool pass = true;
    char line[256];
    for (auto aug : augs) {
        for (auto fusion : fusions) {
            model::GradcheckOptions o;
            o.config.augmentation = aug;
            o.config.fusion = fusion;
            o.seed = a.seed;
            o.corrupt_group = a.corrupt;
            const auto report = model::gradient_check(o);
            const std::string variant = model::to_string(aug) + "+" + model::to_string(fusion);
            for (const auto & g : report.groups) {
                std::snprintf(line, sizeof line, "%-18s %-26s %6zu  max_rel_err %.3e  %s\n", variant.c_str(),
                              g.group.c_str(), g.checked, g.max_rel_error, g.pass ? "PASS" : "FAIL");
                out << line;
            }
            pass = pass && report.pass;
        }
    }
    out << (pass ? "gradcheck PASS" : "gradcheck FAIL") << "\n";
    if (!pass) throw NumericalError("analytic gradients disagree with finite differences beyond 1e-4");
    return 0;
}

} // namespace

int run(int argc, const char * const * argv, std::ostream & out, std::ostream & err) {
    CLI::App app{"Probabilistic pleasantness prediction for soundscape augmentation"};
    app.name("ppap");
    app.require_subcommand(1);

    SynthArgs synth;
    auto * s = app.add_subcommand("synth", "Generate a synthetic-oracle dataset");
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_option("--scenes", synth.scenes, "Number of scenes");
    s->add_option("--records-per-scene", synth.records, "Response records per scene");
    s->add_option("--seed", synth.seed, "RNG seed")->required();
    s->add_option("--preset", synth.preset, "Model preset whose input length the clips match");
    s->add_option("--clip-samples", synth.clip_samples, "Clip length in samples (overrides --preset)");
    s->add_option("--noise-std", synth.noise_std, "Response noise std");
    s->add_option("--maskers-per-class", synth.maskers_per_class, "Masker instances per audible class");
    s->add_option("--folds", synth.folds, "Cross-validation folds");
    s->add_flag("--mixtures", synth.mixtures, "Also write SMR mixtures for listening");
    s->add_flag("--force", synth.force, "Overwrite a non-empty output directory");

    TrainArgs train;
    auto * t = app.add_subcommand("train", "Train a model on a manifest");
    t->add_option("--config", train.config, "JSON run config; flags override it");
    t->add_option("--manifest", train.manifest, "Manifest (JSON lines)");
    t->add_option("--out", train.out, "Output directory");
    add_model_flags(t, train.preset, train.aug, train.fusion);
    t->add_option("--lr", train.lr, "Adam learning rate");
    t->add_option("--epochs", train.epochs, "Maximum epochs");
    t->add_option("--batch-size", train.batch, "Batch size");
    t->add_option("--seed", train.seed, "Seed");
    t->add_option("--fold", train.fold, "Validation fold (-1 for none)");
    t->add_flag("--all-folds", train.all_folds, "Loop over every fold in the manifest");
    t->add_option("--seeds", train.seeds, "Seed loop, e.g. 0-9");

    PrecomputeArgs pre;
    auto * p = app.add_subcommand("precompute", "Cache masker query embeddings");
    p->add_option("--weights", pre.weights, "Weight file")->required();
    p->add_option("--maskers", pre.maskers, "Masker WAVs or directories")->required();
    p->add_option("--out", pre.out, "Cache file")->required();
    p->add_flag("--silent", pre.silent, "Add a SILENT entry");

    InferArgs inf;
    auto * i = app.add_subcommand("infer", "Rank masker-gain pairs for a soundscape");
    i->add_option("--weights", inf.weights, "Weight file")->required();
    i->add_option("--soundscape", inf.soundscape, "Soundscape WAV")->required();
    i->add_option("--cache", inf.cache, "Feature cache")->required();
    i->add_option("--gains", inf.gains, "Gamma grid lo:hi:count");
    i->add_option("--top-k", inf.top_k, "Pairs to report");
    i->add_option("--maskers", inf.maskers, "Subset of cached masker ids");
    i->add_option("--out", inf.out, "Output JSON (stdout if absent)");

    SweepArgs sw;
    auto * w = app.add_subcommand("sweep", "Sweep gamma for cached maskers");
    w->add_option("--weights", sw.weights, "Weight file")->required();
    w->add_option("--soundscape", sw.soundscape, "Soundscape WAV")->required();
    w->add_option("--cache", sw.cache, "Feature cache")->required();
    w->add_option("--maskers", sw.maskers, "Masker ids (default: every cached one)");
    w->add_option("--range", sw.range, "Gamma range lo:hi");
    w->add_option("--count", sw.count, "Points per masker");
    w->add_flag("--silent", sw.silent, "Include a SILENT sweep");
    w->add_option("--out", sw.out, "Output CSV (stdout if absent)");

    BenchArgs bench;
    auto * b = app.add_subcommand("bench", "Naive vs optimized query timing");
    b->add_option("--weights", bench.weights, "Weight file (random init from --preset if absent)");
    b->add_option("--preset", bench.preset, "Preset for random weights");
    b->add_option("--eta-m", bench.eta_m, "Maskers");
    b->add_option("--eta-g", bench.eta_g, "Gains per masker");
    b->add_option("--repeats", bench.repeats, "Repeats (median reported)");
    b->add_option("--seed", bench.seed, "Seed for synthetic inputs and random weights");
    b->add_option("--out", bench.out, "Output JSON (stdout if absent)");

    GradcheckArgs gc;
    auto * g = app.add_subcommand("gradcheck", "Finite-difference gradient check at the tiny config");
    g->add_option("--seed", gc.seed, "Seed");
    g->add_option("--augmentation", gc.aug, "CAT, ADD, CONV or all");
    g->add_option("--fusion", gc.fusion, "AA, DPA, MHA4, PASSTHROUGH or all");
    g->add_option("--corrupt-group", gc.corrupt, "Test hook: perturb this group's analytic gradient")->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError & e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : static_cast<int>(ExitCode::usage);
    }

    try {
        if (s->parsed()) return cmd_synth(synth, out);
        if (t->parsed()) return cmd_train(train, t, out);
        if (p->parsed()) return cmd_precompute(pre, out);
        if (i->parsed()) return cmd_infer(inf, out);
        if (w->parsed()) return cmd_sweep(sw, out);
        if (b->parsed()) return cmd_bench(bench, out);
        if (g->parsed()) return cmd_gradcheck(gc, out);
    } catch (const Error & e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(e.code());
    } catch (const fs::filesystem_error & e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::data);
    } catch (const std::exception & e) {
        err << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::data);
    }
    return static_cast<int>(ExitCode::usage);
}

} // namespace ppap::cli
