#include "ppap/calib/calibration.h"

#include "ppap/common/error.h"
#include "ppap/common/file_io.h"
#include "ppap/common/log.h"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace ppap::calib {

namespace {

constexpr double kReferencePressure = 20e-6;

std::size_t slot(int level) {
    if (level < GainLookupTable::kMinLevel || level > GainLookupTable::kMaxLevel) {
        throw DataError("level " + std::to_string(level) + " dBA is outside the lookup table range [" +
                        std::to_string(GainLookupTable::kMinLevel) + ", " +
                        std::to_string(GainLookupTable::kMaxLevel) + "]");
    }
    return static_cast<std::size_t>(level - GainLookupTable::kMinLevel);
}

} // namespace

double GainLookupTable::at(int level) const { return gains[slot(level)]; }
double & GainLookupTable::at(int level) { return gains[slot(level)]; }

void GainLookupTable::validate() const {
    for (std::size_t i = 0; i < kSize; ++i) {
        if (!std::isfinite(gains[i]) || gains[i] <= 0.0) {
            throw DataError("lookup table '" + masker_id + "': gain at " + std::to_string(kMinLevel + int(i)) +
                            " dBA must be positive");
        }
        if (i > 0 && gains[i] < gains[i - 1]) {
            throw DataError("lookup table '" + masker_id + "': gains decrease at " + std::to_string(kMinLevel + int(i)) +
                            " dBA");
        }
    }
}

void SceneMeta::validate() const {
    if (!std::isfinite(laeq) || laeq < 20.0 || laeq > 120.0) {
        throw DataError("scene '" + scene_id + "': in-situ level " + std::to_string(laeq) + " dBA outside [20, 120]");
    }
}

int round_level(double level) {
    if (!std::isfinite(level)) throw DataError("target level is not finite");
    return static_cast<int>(std::round(level));
}

double interpolate_gain(const GainLookupTable & table, double level) {
    const int r = round_level(level);
    return table.at(r) * std::pow(10.0, (level - r) / 20.0);
}

double smr_to_gain(const GainLookupTable & table, const SceneMeta & scene, double smr) {
    return interpolate_gain(table, scene.laeq + smr);
}

dsp::AudioClip normalize_spdr(const dsp::AudioClip & masker, const CalibrationProfile & profile,
                              const std::string & masker_id) {
    const auto it = profile.masker_spdr.find(masker_id);
    if (it == profile.masker_spdr.end()) {
        throw DataError("no SPDR known for masker '" + masker_id +
                        "'; calibrate it with a gain lookup table instead");
    }
    if (!(it->second > 0.0) || !(profile.d0 > 0.0)) throw DataError("SPDR values must be positive");
    dsp::AudioClip out = masker;
    out.scale(static_cast<float>(profile.d0 / it->second));
    const std::size_t clipped = out.clip_to_full_scale();
    if (clipped > 0) {
        log::warn("normalize_spdr: " + std::to_string(clipped) + " samples of '" + masker_id + "' clipped to full scale");
    }
    return out;
}

GainLookupTable synth_lookup_table(const dsp::AudioClip & masker, double reference_spdr, const std::string & masker_id) {
    if (!(reference_spdr > 0.0)) throw DataError("reference SPDR must be positive");
    const double rms = masker.rms();
    if (!(rms > 0.0)) throw DataError("cannot calibrate silent masker '" + masker_id + "'");
    GainLookupTable t;
    t.masker_id = masker_id;
    for (int l = GainLookupTable::kMinLevel; l <= GainLookupTable::kMaxLevel; ++l) {
        t.at(l) = kReferencePressure * std::pow(10.0, l / 20.0) / (rms * reference_spdr);
    }
    return t;
}

GainLookupTable parse_lookup_table(const std::string & line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception & e) {
        throw DataError(std::string("lookup table record is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError("lookup table record must be a JSON object");
    if (j.size() != GainLookupTable::kSize + 1) {
        throw DataError("lookup table record must have masker_id plus exactly " +
                        std::to_string(GainLookupTable::kSize) + " level keys");
    }
    GainLookupTable t;
    if (!j.contains("masker_id") || !j["masker_id"].is_string()) throw DataError("lookup table record lacks masker_id");
    t.masker_id = j["masker_id"].get<std::string>();
    for (int l = GainLookupTable::kMinLevel; l <= GainLookupTable::kMaxLevel; ++l) {
        const std::string key = std::to_string(l);
        if (!j.contains(key) || !j[key].is_number()) {
            throw DataError("lookup table '" + t.masker_id + "' lacks a numeric gain for level " + key);
        }
        t.at(l) = j[key].get<double>();
    }
    t.validate();
    return t;
}

std::string format_lookup_table(const GainLookupTable & table) {
    nlohmann::ordered_json j;
    j["masker_id"] = table.masker_id;
    for (int l = GainLookupTable::kMinLevel; l <= GainLookupTable::kMaxLevel; ++l) j[std::to_string(l)] = table.at(l);
    return j.dump();
}

std::vector<GainLookupTable> read_lookup_tables(const std::filesystem::path & path) {
    std::istringstream in(read_file(path));
    std::vector<GainLookupTable> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse_lookup_table(line));
        } catch (const DataError & e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_lookup_tables(const std::filesystem::path & path, const std::vector<GainLookupTable> & tables) {
    std::string text;
    for (const auto & t : tables) {
        t.validate();
        text += format_lookup_table(t) + "\n";
    }
    write_file_atomic(path, text);
}

} // namespace ppap::calib
