#pragma once

#include "ppap/data/pleasantness.h"
#include "ppap/model/config.h"
#include "ppap/model/ppap.h"
#include "ppap/model/train.h"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ppap::data {

inline constexpr char kSilentMasker[] = "SILENT";

// One manifest line. Paths are relative to the manifest's directory.
struct ResponseRecord {
    std::string scene_id;
    std::string soundscape_wav;
    std::optional<std::string> masker_wav;  // empty for SILENT
    std::string masker_id;                  // defaults to the WAV stem, or SILENT
    std::string masker_class;               // optional, informational
    double gain = 1.0;
    double label = 0.0;
    int fold = 0;
    std::optional<Ratings> ratings;

    bool silent() const { return !masker_wav.has_value(); }
    double gamma() const { return std::log10(gain); }
};

// Throws DataError naming the offending field.
void validate_record(const ResponseRecord & r);

ResponseRecord parse_record(const std::string & line);
std::string format_record(const ResponseRecord & r);

// Blank lines are skipped. Errors carry path:line.
std::vector<ResponseRecord> read_manifest(const std::filesystem::path & path);
void write_manifest(const std::filesystem::path & path, const std::vector<ResponseRecord> & records);

// Scene-disjoint k-fold assignment: scenes ordered by a seeded hash of their
// id, then dealt round-robin. Throws UsageError for k < 2 and DataError with
// fewer scenes than folds.
void make_folds(std::vector<ResponseRecord> & records, int k = 5, std::uint64_t seed = 0);

// Mean and population std of log10 gain over non-silent records whose fold is
// in `training_folds`.
model::GammaStats compute_gamma_stats(const std::vector<ResponseRecord> & records, const std::vector<int> & training_folds);

// Reads every referenced WAV once and computes its log-mel spectrogram.
// Clips must yield exactly config.time_frames frames.
struct LoadedDataset {
    model::TrainingSet set;
    std::vector<std::string> soundscape_paths;
    std::vector<std::string> masker_ids;
};

LoadedDataset load_training_set(const std::filesystem::path & manifest_path, const std::vector<ResponseRecord> & records,
                                const model::ModelConfig & config);

// Log-mel of a clip checked against the model input shape. Stereo maskers
// are averaged to mono first.
dsp::Spectrogram soundscape_spectrogram(const dsp::AudioClip & clip, const model::ModelConfig & config);
dsp::Spectrogram masker_spectrogram(const dsp::AudioClip & clip, const model::ModelConfig & config);

} // namespace ppap::data
