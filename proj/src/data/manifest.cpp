#include "ppap/data/manifest.h"

#include "ppap/common/error.h"
#include "ppap/common/file_io.h"
#include "ppap/dsp/wav.h"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace ppap::data {

void validate_record(const ResponseRecord & r) {
    if (r.scene_id.empty()) throw DataError("record has an empty scene_id");
    if (r.soundscape_wav.empty()) throw DataError("record '" + r.scene_id + "' has an empty soundscape_wav");
    if (!r.silent() && !(std::isfinite(r.gain) && r.gain > 0.0)) {
        throw DataError("record '" + r.scene_id + "' has a non-positive gain");
    }
    if (!(std::isfinite(r.label) && r.label >= -1.0 && r.label <= 1.0)) {
        throw DataError("record '" + r.scene_id + "' has a label outside [-1, 1]");
    }
    if (r.fold < 0) throw DataError("record '" + r.scene_id + "' has a negative fold");
}

ResponseRecord parse_record(const std::string & line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception & e) {
        throw DataError(std::string("manifest record is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("manifest record must be a JSON object");
    ResponseRecord r;
    try {
        r.scene_id = j.at("scene_id").get<std::string>();
        r.soundscape_wav = j.at("soundscape_wav").get<std::string>();
        const std::string masker = j.at("masker_wav").get<std::string>();
        if (masker != kSilentMasker) r.masker_wav = masker;
        if (j.contains("masker_id")) {
            r.masker_id = j["masker_id"].get<std::string>();
        } else {
            r.masker_id = r.silent() ? kSilentMasker : std::filesystem::path(masker).stem().string();
        }
        if (j.contains("masker_class")) r.masker_class = j["masker_class"].get<std::string>();
        r.gain = r.silent() ? j.value("gain", 1.0) : j.at("gain").get<double>();
        r.fold = j.at("fold").get<int>();
        if (j.contains("ratings") && !j["ratings"].is_null()) {
            const auto v = j["ratings"].get<std::vector<int>>();
            if (v.size() != 8) throw DataError("ratings must hold exactly 8 values");
            Ratings rt{};
            std::copy(v.begin(), v.end(), rt.begin());
            r.ratings = rt;
        }
        if (j.contains("label")) {
            r.label = j["label"].get<double>();
        } else if (r.ratings) {
            r.label = iso_pleasantness(*r.ratings);
        } else {
            throw DataError("record has neither label nor ratings");
        }
    } catch (const nlohmann::json::exception & e) {
        throw DataError(std::string("manifest record schema error: ") + e.what());
    }
    if (r.ratings) iso_pleasantness(*r.ratings);
    validate_record(r);
    return r;
}

std::string format_record(const ResponseRecord & r) {
    nlohmann::ordered_json j;
    j["scene_id"] = r.scene_id;
    j["soundscape_wav"] = r.soundscape_wav;
    j["masker_wav"] = r.silent() ? std::string(kSilentMasker) : *r.masker_wav;
    j["masker_id"] = r.masker_id;
    if (!r.masker_class.empty()) j["masker_class"] = r.masker_class;
    j["gain"] = r.gain;
    j["label"] = r.label;
    j["fold"] = r.fold;
    if (r.ratings) j["ratings"] = std::vector<int>(r.ratings->begin(), r.ratings->end());
    return j.dump();
}

std::vector<ResponseRecord> read_manifest(const std::filesystem::path & path) {
    std::istringstream in(read_file(path));
    std::vector<ResponseRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_record(line));
        } catch (const DataError & e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (out.empty()) throw DataError("manifest " + path.string() + " has no records");
    return out;
}

void write_manifest(const std::filesystem::path & path, const std::vector<ResponseRecord> & records) {
    std::string text;
    for (const auto & r : records) {
        validate_record(r);
        text += format_record(r) + "\n";
    }
    write_file_atomic(path, text);
}

void make_folds(std::vector<ResponseRecord> & records, int k, std::uint64_t seed) {
    if (k < 2) throw UsageError("fold count must be >= 2");
    std::set<std::string> ids;
    for (const auto & r : records) ids.insert(r.scene_id);
    if (ids.size() < static_cast<std::size_t>(k)) {
        throw DataError(std::to_string(ids.size()) + " scenes cannot fill " + std::to_string(k) + " folds");
    }
    std::vector<std::pair<std::uint64_t, std::string>> order;
    for (const auto & id : ids) order.emplace_back(fnv1a64(id, fnv1a64(std::to_string(seed))), id);
    std::sort(order.begin(), order.end());
    std::map<std::string, int> fold;
    for (std::size_t i = 0; i < order.size(); ++i) fold[order[i].second] = static_cast<int>(i % k);
    for (auto & r : records) r.fold = fold.at(r.scene_id);
}

model::GammaStats compute_gamma_stats(const std::vector<ResponseRecord> & records,
                                      const std::vector<int> & training_folds) {
    std::vector<double> log_gains;
    for (const auto & r : records) {
        if (r.silent()) continue;
        if (std::find(training_folds.begin(), training_folds.end(), r.fold) == training_folds.end()) continue;
        log_gains.push_back(r.gamma());
    }
    return model::gamma_stats_from_log_gains(log_gains);
}

namespace {

dsp::Spectrogram checked_spectrogram(const dsp::AudioClip & clip, const model::ModelConfig & config, const char * what) {
    dsp::Spectrogram s = dsp::log_mel_spectrogram(clip, config.dsp);
    if (s.frames != config.time_frames) {
        throw DataError(std::string(what) + " clip of " + std::to_string(clip.length()) + " samples gives " +
                        std::to_string(s.frames) + " frames; the model expects " +
                        std::to_string(config.time_frames) + " (" + std::to_string(config.clip_samples()) +
                        " samples)");
    }
    return s;
}

} // namespace

dsp::Spectrogram soundscape_spectrogram(const dsp::AudioClip & clip, const model::ModelConfig & config) {
    if (clip.channel_count() != config.soundscape_channels) {
        throw DataError("soundscape has " + std::to_string(clip.channel_count()) + " channels, the model expects " +
                        std::to_string(config.soundscape_channels));
    }
    return checked_spectrogram(clip, config, "soundscape");
}

dsp::Spectrogram masker_spectrogram(const dsp::AudioClip & clip, const model::ModelConfig & config) {
    if (clip.channel_count() == 1) return checked_spectrogram(clip, config, "masker");
    clip.validate();
    dsp::AudioClip mono = dsp::AudioClip::silence(clip.sample_rate, 1, clip.length());
    const float w = 1.0f / static_cast<float>(clip.channel_count());
    for (const auto & ch : clip.channels) {
        for (std::size_t n = 0; n < ch.size(); ++n) mono.channels[0][n] += w * ch[n];
    }
    return checked_spectrogram(mono, config, "masker");
}

LoadedDataset load_training_set(const std::filesystem::path & manifest_path, const std::vector<ResponseRecord> & records,
                                const model::ModelConfig & config) {
    const std::filesystem::path base = manifest_path.parent_path();
    LoadedDataset out;
    std::map<std::string, std::size_t> soundscape_index, masker_index;
    for (const auto & r : records) {
        auto [sit, snew] = soundscape_index.try_emplace(r.soundscape_wav, out.set.soundscapes.size());
        if (snew) {
            out.set.soundscapes.push_back(soundscape_spectrogram(dsp::read_wav(base / r.soundscape_wav), config));
            out.soundscape_paths.push_back(r.soundscape_wav);
        }
        model::TrainSample s;
        s.soundscape = sit->second;
        if (!r.silent()) {
            auto [mit, mnew] = masker_index.try_emplace(*r.masker_wav, out.set.maskers.size());
            if (mnew) {
                out.set.maskers.push_back(masker_spectrogram(dsp::read_wav(base / *r.masker_wav), config));
                out.masker_ids.push_back(r.masker_id);
            }
            s.masker = mit->second;
            s.gamma = r.gamma();
        }
        s.label = r.label;
        s.fold = r.fold;
        out.set.samples.push_back(s);
    }
    return out;
}

} // namespace ppap::data
