#pragma once

#include "ppap/dsp/audio.h"

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace ppap::calib {

// cg[lambda] for integer lambda in [46, 83] dBA.
struct GainLookupTable {
    static constexpr int kMinLevel = 46;
    static constexpr int kMaxLevel = 83;
    static constexpr std::size_t kSize = kMaxLevel - kMinLevel + 1;

    std::string masker_id;
    std::array<double, kSize> gains{};

    double at(int level) const;
    double & at(int level);

    // Throws DataError unless every gain is finite, > 0 and non-decreasing.
    void validate() const;
};

// SPL-per-unit-DFS ratios: d0 for the in-situ recordings, d_j per masker.
struct CalibrationProfile {
    double d0 = 1.0;
    std::map<std::string, double> masker_spdr;
};

struct SceneMeta {
    std::string scene_id;
    double laeq = 65.0;  // a_i, dBA

    void validate() const;  // a_i in [20, 120]
};

// Rounds half away from zero.
int round_level(double level);

// cg[round(l)] * 10^((l - round(l)) / 20). Throws DataError outside the table.
double interpolate_gain(const GainLookupTable & table, double level);

// interpolate_gain(table, a_i + smr).
double smr_to_gain(const GainLookupTable & table, const SceneMeta & scene, double smr);

// Scales by d0 / d_j and clips to full scale, warning with the clip count.
// Throws DataError when d_j is unknown.
dsp::AudioClip normalize_spdr(const dsp::AudioClip & masker, const CalibrationProfile & profile,
                              const std::string & masker_id);

// Table whose entries make the clip play back at exactly lambda dBA under
// `reference_spdr`, taking SPL = 20 log10(g * rms * spdr / 20 uPa).
GainLookupTable synth_lookup_table(const dsp::AudioClip & masker, double reference_spdr, const std::string & masker_id);

// One JSON object per line: {"masker_id": ..., "46": g, ..., "83": g}.
std::vector<GainLookupTable> read_lookup_tables(const std::filesystem::path & path);
void write_lookup_tables(const std::filesystem::path & path, const std::vector<GainLookupTable> & tables);
GainLookupTable parse_lookup_table(const std::string & line);
std::string format_lookup_table(const GainLookupTable & table);

} // namespace ppap::calib
