#include "ppap/data/synthetic.h"

#include "ppap/common/error.h"
#include "ppap/common/file_io.h"
#include "ppap/data/mix.h"
#include "ppap/dsp/wav.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace ppap::data {

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t derive_seed(std::uint64_t seed, const std::string & tag, std::uint64_t index) {
    return fnv1a64(tag + ":" + std::to_string(index), fnv1a64(std::to_string(seed)));
}

double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

void set_rms(std::vector<double> & x, double target) {
    double ss = 0.0;
    for (double v : x) ss += v * v;
    const double rms = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(x.size(), 1)));
    if (rms > 0.0) {
        for (double & v : x) v *= target / rms;
    }
}

std::vector<double> colored_noise(AmbienceClass cls, std::size_t n, std::mt19937_64 & rng) {
    std::normal_distribution<double> w(0.0, 1.0);
    std::vector<double> out(n);
    switch (cls) {
    case AmbienceClass::white:
        for (auto & v : out) v = w(rng);
        break;
    case AmbienceClass::pink: {
        // Kellet's refined pink filter.
        double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
        for (auto & v : out) {
            const double x = w(rng);
            b0 = 0.99886 * b0 + x * 0.0555179;
            b1 = 0.99332 * b1 + x * 0.0750759;
            b2 = 0.96900 * b2 + x * 0.1538520;
            b3 = 0.86650 * b3 + x * 0.3104856;
            b4 = 0.55000 * b4 + x * 0.5329522;
            b5 = -0.7616 * b5 - x * 0.0168980;
            v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + x * 0.5362;
            b6 = x * 0.115926;
        }
        break;
    }
    case AmbienceClass::brown: {
        double y = 0.0;
        for (auto & v : out) {
            y = 0.995 * y + w(rng);
            v = y;
        }
        break;
    }
    }
    return out;
}

// Two-pole resonator at `freq` with pole radius r.
void resonate(std::vector<double> & x, double freq, double r, int sample_rate) {
    const double c = 2.0 * r * std::cos(2.0 * kPi * freq / sample_rate);
    double y1 = 0.0, y2 = 0.0;
    for (auto & v : x) {
        const double y = (1.0 - r) * v + c * y1 - r * r * y2;
        y2 = y1;
        y1 = y;
        v = y;
    }
}

dsp::AudioClip to_clip(std::vector<std::vector<double>> chans, int sample_rate) {
    dsp::AudioClip clip;
    clip.sample_rate = sample_rate;
    for (auto & ch : chans) {
        std::vector<float> f(ch.size());
        std::transform(ch.begin(), ch.end(), f.begin(), [](double v) { return static_cast<float>(v); });
        clip.channels.push_back(std::move(f));
    }
    clip.clip_to_full_scale();
    return clip;
}

std::vector<double> bird(std::size_t n, int sr, std::mt19937_64 & rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n, 0.0);
    const double base = 2500.0 + 2000.0 * u(rng);
    double t = 0.05 * u(rng);
    while (true) {
        const double dur = 0.05 + 0.1 * u(rng);
        const std::size_t start = static_cast<std::size_t>(t * sr);
        const std::size_t len = static_cast<std::size_t>(dur * sr);
        if (start >= n) break;
        const double f0 = base * (0.9 + 0.2 * u(rng));
        const double sweep = (u(rng) < 0.5 ? -1.0 : 1.0) * (500.0 + 1500.0 * u(rng));
        double phase = 0.0;
        for (std::size_t i = 0; i < len && start + i < n; ++i) {
            const double tau = static_cast<double>(i) / len;
            const double f = f0 + sweep * tau;
            phase += 2.0 * kPi * f / sr;
            const double env = 0.5 - 0.5 * std::cos(2.0 * kPi * tau);
            x[start + i] += env * (std::sin(phase) + 0.3 * std::sin(2.0 * phase));
        }
        t += dur + 0.05 + 0.3 * u(rng);
    }
    return x;
}

std::vector<double> water(std::size_t n, int sr, std::mt19937_64 & rng) {
    std::normal_distribution<double> w(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n);
    double prev = 0.0, lp = 0.0;
    for (auto & v : x) {
        const double s = w(rng);
        lp = 0.7 * lp + 0.3 * (s - prev);  // differentiated then gently smoothed
        prev = s;
        v = lp;
    }
    double rates[3], phases[3];
    for (int k = 0; k < 3; ++k) {
        rates[k] = 3.0 + 5.0 * u(rng);
        phases[k] = 2.0 * kPi * u(rng);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        double am = 1.0;
        for (int k = 0; k < 3; ++k) am += 0.25 * std::sin(2.0 * kPi * rates[k] * t + phases[k]);
        x[i] *= am;
    }
    return x;
}

std::vector<double> traffic(std::size_t n, int sr, std::mt19937_64 & rng) {
    std::normal_distribution<double> w(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n);
    double y = 0.0, lp = 0.0;
    for (auto & v : x) {
        y = 0.999 * y + w(rng);
        lp = 0.98 * lp + 0.02 * y;
        v = lp;
    }
    set_rms(x, 1.0);
    const double f0 = 30.0 + 30.0 * u(rng);
    const double am_rate = 0.1 + 0.3 * u(rng);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = static_cast<double>(i) / sr;
        const double hum = std::sin(2.0 * kPi * f0 * t) + 0.5 * std::sin(4.0 * kPi * f0 * t) + 0.25 * std::sin(6.0 * kPi * f0 * t);
        x[i] = (x[i] + 0.8 * hum) * (1.0 + 0.4 * std::sin(2.0 * kPi * am_rate * t));
    }
    return x;
}

std::vector<double> construction(std::size_t n, int sr, std::mt19937_64 & rng) {
    std::normal_distribution<double> w(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> x(n, 0.0);
    const double ring = 800.0 + 1200.0 * u(rng);
    double t = 0.05 * u(rng);
    while (true) {
        const std::size_t start = static_cast<std::size_t>(t * sr);
        if (start >= n) break;
        const double decay = (0.01 + 0.02 * u(rng)) * sr;
        const std::size_t len = static_cast<std::size_t>(6.0 * decay);
        for (std::size_t i = 0; i < len && start + i < n; ++i) x[start + i] += w(rng) * std::exp(-double(i) / decay);
        t += 0.15 + 0.25 * u(rng);
    }
    resonate(x, ring, 0.995, sr);
    return x;
}

} // namespace

std::string to_string(MaskerClass c) {
    switch (c) {
    case MaskerClass::bird: return "bird";
    case MaskerClass::water: return "water";
    case MaskerClass::traffic: return "traffic";
    case MaskerClass::construction: return "construction";
    case MaskerClass::silent: return "silent";
    }
    return "?";
}

std::string to_string(AmbienceClass c) {
    switch (c) {
    case AmbienceClass::white: return "white";
    case AmbienceClass::pink: return "pink";
    case AmbienceClass::brown: return "brown";
    }
    return "?";
}

MaskerClass parse_masker_class(const std::string & s) {
    for (auto c : {MaskerClass::bird, MaskerClass::water, MaskerClass::traffic, MaskerClass::construction,
                   MaskerClass::silent}) {
        if (s == to_string(c)) return c;
    }
    throw UsageError("unknown masker class '" + s + "'");
}

std::map<MaskerClass, OracleCoefficients> default_oracle() {
    return {
        {MaskerClass::bird, {0.0, -0.15, -0.15, 0.1}},
        {MaskerClass::water, {0.0, -0.168, -0.12, 0.05}},
        {MaskerClass::traffic, {0.0, -0.2, -0.03, -0.2}},
        {MaskerClass::construction, {0.0, -0.25, -0.02, -0.3}},
        {MaskerClass::silent, {0.0, 0.0, 0.0, 0.0}},
    };
}

double oracle_label(const SynthOptions & options, MaskerClass cls, double scene_offset, double gamma) {
    const OracleCoefficients & c = options.oracle.at(cls);
    const double g = cls == MaskerClass::silent ? 0.0 : gamma;
    return std::clamp(c(g) + scene_offset, -1.0, 1.0);
}

dsp::AudioClip synth_ambience(AmbienceClass cls, double level_dbfs, std::size_t samples, int sample_rate,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> left = colored_noise(cls, samples, rng);
    std::vector<double> extra = colored_noise(cls, samples, rng);
    set_rms(left, 1.0);
    set_rms(extra, 1.0);
    std::vector<double> right(samples);
    for (std::size_t i = 0; i < samples; ++i) right[i] = 0.8 * left[i] + 0.6 * extra[i];
    const double target = db_to_amplitude(level_dbfs);
    set_rms(left, target);
    set_rms(right, target);
    return to_clip({std::move(left), std::move(right)}, sample_rate);
}

dsp::AudioClip synth_masker(MaskerClass cls, double rms_dbfs, std::size_t samples, int sample_rate, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> x;
    switch (cls) {
    case MaskerClass::bird: x = bird(samples, sample_rate, rng); break;
    case MaskerClass::water: x = water(samples, sample_rate, rng); break;
    case MaskerClass::traffic: x = traffic(samples, sample_rate, rng); break;
    case MaskerClass::construction: x = construction(samples, sample_rate, rng); break;
    case MaskerClass::silent: x.assign(samples, 0.0); break;
    }
    set_rms(x, db_to_amplitude(rms_dbfs));
    return to_clip({std::move(x)}, sample_rate);
}

SyntheticDataset generate_synthetic_dataset(const SynthOptions & o) {
    if (o.n_scenes == 0) throw UsageError("synthetic dataset needs at least one scene");
    if (o.records_per_scene == 0) throw UsageError("records_per_scene must be >= 1");
    if (o.maskers_per_class == 0) throw UsageError("maskers_per_class must be >= 1");
    if (!(o.noise_std >= 0.0)) throw UsageError("noise_std must be >= 0");
    if (o.clip_samples == 0) throw UsageError("clip_samples must be >= 1");
    for (auto cls : {MaskerClass::bird, MaskerClass::water, MaskerClass::traffic, MaskerClass::construction,
                     MaskerClass::silent}) {
        if (!o.oracle.count(cls)) throw UsageError("oracle coefficients missing for class " + to_string(cls));
    }

    SyntheticDataset ds;
    ds.options = o;
    const std::vector<MaskerClass> audible{MaskerClass::bird, MaskerClass::water, MaskerClass::traffic,
                                           MaskerClass::construction};
    std::map<MaskerClass, std::vector<std::size_t>> by_class;
    for (MaskerClass cls : audible) {
        for (std::size_t k = 0; k < o.maskers_per_class; ++k) {
            SyntheticMasker m;
            m.id = to_string(cls) + "_" + std::to_string(k);
            m.cls = cls;
            m.audio = synth_masker(cls, o.masker_rms_dbfs, o.clip_samples, o.sample_rate,
                                   derive_seed(o.seed, "masker:" + to_string(cls), k));
            by_class[cls].push_back(ds.maskers.size());
            ds.lookup_tables.push_back(calib::synth_lookup_table(m.audio, o.reference_spdr, m.id));
            ds.maskers.push_back(std::move(m));
        }
    }

    const std::vector<AmbienceClass> ambiences{AmbienceClass::white, AmbienceClass::pink, AmbienceClass::brown};
    const double mid = 0.5 * (o.ambience_level_min_dbfs + o.ambience_level_max_dbfs);
    const std::vector<MaskerClass> choices{MaskerClass::bird, MaskerClass::water, MaskerClass::traffic,
                                           MaskerClass::construction, MaskerClass::silent};
    for (std::size_t s = 0; s < o.n_scenes; ++s) {
        std::mt19937_64 rng(derive_seed(o.seed, "scene", s));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        SyntheticScene sc;
        char buf[32];
        std::snprintf(buf, sizeof buf, "scene_%04zu", s);
        sc.id = buf;
        sc.ambience = ambiences[s % ambiences.size()];
        sc.level_dbfs = o.ambience_level_min_dbfs + (o.ambience_level_max_dbfs - o.ambience_level_min_dbfs) * u(rng);
        sc.offset = o.ambience_offset.at(sc.ambience) + o.level_slope * (sc.level_dbfs - mid) / 6.0;
        sc.audio = synth_ambience(sc.ambience, sc.level_dbfs, o.clip_samples, o.sample_rate, rng());
        sc.meta.scene_id = sc.id;
        sc.meta.laeq = 20.0 * std::log10(sc.audio.rms() * o.reference_spdr / 20e-6);

        std::normal_distribution<double> noise(0.0, 1.0);
        std::uniform_int_distribution<std::size_t> pick_class(0, choices.size() - 1);
        std::uniform_int_distribution<std::size_t> pick_instance(0, o.maskers_per_class - 1);
        for (std::size_t r = 0; r < o.records_per_scene; ++r) {
            ResponseRecord rec;
            rec.scene_id = sc.id;
            rec.soundscape_wav = "soundscapes/" + sc.id + ".wav";
            const MaskerClass cls = choices[pick_class(rng)];
            double gamma = 0.0;
            if (cls == MaskerClass::silent) {
                rec.masker_id = kSilentMasker;
                rec.gain = 1.0;
            } else {
                const SyntheticMasker & m = ds.maskers[by_class[cls][pick_instance(rng)]];
                rec.masker_wav = "maskers/" + m.id + ".wav";
                rec.masker_id = m.id;
                gamma = -2.0 + 4.0 * u(rng);
                rec.gain = std::pow(10.0, gamma);
            }
            rec.masker_class = to_string(cls);
            const double clean = oracle_label(o, cls, sc.offset, gamma);
            rec.label = std::clamp(clean + o.noise_std * noise(rng), -1.0, 1.0);
            ds.records.push_back(std::move(rec));
        }
        ds.scenes.push_back(std::move(sc));
    }
    make_folds(ds.records, o.folds, o.seed);
    return ds;
}

void write_synthetic_dataset(const SyntheticDataset & ds, const std::filesystem::path & dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir / "soundscapes");
    fs::create_directories(dir / "maskers");
    for (const auto & s : ds.scenes) dsp::write_wav(dir / "soundscapes" / (s.id + ".wav"), s.audio);
    for (const auto & m : ds.maskers) dsp::write_wav(dir / "maskers" / (m.id + ".wav"), m.audio);
    write_lookup_tables(dir / "lookup_tables.jsonl", ds.lookup_tables);

    std::string scenes;
    for (const auto & s : ds.scenes) {
        nlohmann::ordered_json j{{"scene_id", s.id},
                                 {"laeq", s.meta.laeq},
                                 {"ambience", to_string(s.ambience)},
                                 {"level_dbfs", s.level_dbfs},
                                 {"offset", s.offset}};
        scenes += j.dump() + "\n";
    }
    write_file_atomic(dir / "scenes.jsonl", scenes);

    const SynthOptions & o = ds.options;
    nlohmann::ordered_json cfg{{"n_scenes", o.n_scenes},
                               {"records_per_scene", o.records_per_scene},
                               {"clip_samples", o.clip_samples},
                               {"sample_rate", o.sample_rate},
                               {"seed", o.seed},
                               {"noise_std", o.noise_std},
                               {"maskers_per_class", o.maskers_per_class},
                               {"folds", o.folds},
                               {"reference_spdr", o.reference_spdr}};
    for (const auto & [cls, c] : o.oracle) {
        cfg["oracle"][to_string(cls)] = {{"a0", c.a0}, {"a1", c.a1}, {"a2", c.a2}, {"offset", c.offset}};
    }
    write_file_atomic(dir / "synth_config.json", cfg.dump(2) + "\n");

    if (o.write_mixtures && !ds.maskers.empty()) {
        fs::create_directories(dir / "mixtures");
        for (const auto & s : ds.scenes) {
            const SyntheticMasker & m = ds.maskers.front();
            for (double smr : o.smrs) {
                const double level = s.meta.laeq + smr;
                if (calib::round_level(level) < calib::GainLookupTable::kMinLevel ||
                    calib::round_level(level) > calib::GainLookupTable::kMaxLevel) {
                    continue;
                }
                MixResult mix = mix_at_smr(s.audio, m.audio, ds.lookup_tables.front(), s.meta, smr);
                char name[96];
                std::snprintf(name, sizeof name, "%s_%s_smr%+d.wav", s.id.c_str(), m.id.c_str(), int(std::lround(smr)));
                dsp::write_wav(dir / "mixtures" / name, mix.mixture);
            }
        }
    }
    write_manifest(dir / "manifest.jsonl", ds.records);
}

LoadedDataset to_training_set(const SyntheticDataset & ds, const model::ModelConfig & config) {
    LoadedDataset out;
    std::map<std::string, std::size_t> scene_index, masker_index;
    for (const auto & s : ds.scenes) {
        scene_index[s.id] = out.set.soundscapes.size();
        out.set.soundscapes.push_back(soundscape_spectrogram(s.audio, config));
        out.soundscape_paths.push_back("soundscapes/" + s.id + ".wav");
    }
    for (const auto & m : ds.maskers) {
        masker_index[m.id] = out.set.maskers.size();
        out.set.maskers.push_back(masker_spectrogram(m.audio, config));
        out.masker_ids.push_back(m.id);
    }
    for (const auto & r : ds.records) {
        model::TrainSample s;
        s.soundscape = scene_index.at(r.scene_id);
        if (!r.silent()) {
            s.masker = masker_index.at(r.masker_id);
            s.gamma = r.gamma();
        }
        s.label = r.label;
        s.fold = r.fold;
        out.set.samples.push_back(s);
    }
    return out;
}

} // namespace ppap::data
