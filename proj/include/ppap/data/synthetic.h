#pragma once

#include "ppap/calib/calibration.h"
#include "ppap/data/manifest.h"
#include "ppap/dsp/audio.h"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ppap::data {

enum class MaskerClass { bird, water, traffic, construction, silent };
enum class AmbienceClass { white, pink, brown };

std::string to_string(MaskerClass c);
std::string to_string(AmbienceClass c);
MaskerClass parse_masker_class(const std::string & s);

// y = a0 + a1 gamma + a2 gamma^2 + offset, before scene offset and noise.
struct OracleCoefficients {
    double a0 = 0.0;
    double a1 = 0.0;
    double a2 = 0.0;
    double offset = 0.0;

    double operator()(double gamma) const { return a0 + a1 * gamma + a2 * gamma * gamma + offset; }
};

// Bird peaks at gamma = -0.5, water at -0.7; traffic and construction fall
// monotonically over [-2, 2]; silent is flat.
std::map<MaskerClass, OracleCoefficients> default_oracle();

struct SynthOptions {
    std::size_t n_scenes = 50;
    std::size_t records_per_scene = 40;
    std::size_t clip_samples = 1323000;
    int sample_rate = 44100;
    std::uint64_t seed = 0;
    double noise_std = 0.1;
    std::size_t maskers_per_class = 3;
    int folds = 5;
    std::map<MaskerClass, OracleCoefficients> oracle = default_oracle();
    std::map<AmbienceClass, double> ambience_offset{
        {AmbienceClass::white, -0.1}, {AmbienceClass::pink, 0.15}, {AmbienceClass::brown, 0.0}};
    double ambience_level_min_dbfs = -30.0;
    double ambience_level_max_dbfs = -18.0;
    double level_slope = -0.1;      // scene offset per 6 dB above the midpoint level
    double masker_rms_dbfs = -20.0;
    double reference_spdr = 0.6325;  // 0 dBFS RMS plays at ~90 dBA
    // Mixtures written per scene at each SMR, for listening checks only.
    std::vector<double> smrs{-6.0, -3.0, 0.0, 3.0, 6.0};
    bool write_mixtures = false;
};

struct SyntheticScene {
    std::string id;
    AmbienceClass ambience = AmbienceClass::pink;
    double level_dbfs = -24.0;
    double offset = 0.0;
    calib::SceneMeta meta;
    dsp::AudioClip audio;  // stereo
};

struct SyntheticMasker {
    std::string id;
    MaskerClass cls = MaskerClass::bird;
    dsp::AudioClip audio;  // mono
};

struct SyntheticDataset {
    SynthOptions options;
    std::vector<SyntheticScene> scenes;
    std::vector<SyntheticMasker> maskers;
    std::vector<ResponseRecord> records;
    std::vector<calib::GainLookupTable> lookup_tables;
};

// Noise-free oracle value for a masker class on a scene, clipped to [-1, 1].
double oracle_label(const SynthOptions & options, MaskerClass cls, double scene_offset, double gamma);

// Deterministic in (options, seed). Throws UsageError for n_scenes == 0.
SyntheticDataset generate_synthetic_dataset(const SynthOptions & options);

// Writes soundscapes/, maskers/, manifest.jsonl, lookup_tables.jsonl,
// scenes.jsonl and synth_config.json under `dir`.
void write_synthetic_dataset(const SyntheticDataset & dataset, const std::filesystem::path & dir);

// Spectrograms straight from memory, no disk round trip.
LoadedDataset to_training_set(const SyntheticDataset & dataset, const model::ModelConfig & config);

// Single synthetic clips, exposed for inference tests and benchmarks.
dsp::AudioClip synth_ambience(AmbienceClass cls, double level_dbfs, std::size_t samples, int sample_rate,
                              std::uint64_t seed);
dsp::AudioClip synth_masker(MaskerClass cls, double rms_dbfs, std::size_t samples, int sample_rate, std::uint64_t seed);

} // namespace ppap::data
