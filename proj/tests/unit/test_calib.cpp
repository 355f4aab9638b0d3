#include "ppap/calib/calibration.h"
#include "ppap/common/error.h"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

using namespace ppap;
using namespace ppap::calib;

namespace {

GainLookupTable ramp_table() {
    GainLookupTable t;
    t.masker_id = "m";
    for (int l = GainLookupTable::kMinLevel; l <= GainLookupTable::kMaxLevel; ++l) t.at(l) = 0.01 * std::pow(10.0, (l - 46) / 20.0);
    return t;
}

dsp::AudioClip noise_clip(std::size_t n, double amp, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    dsp::AudioClip c;
    c.channels.assign(1, std::vector<float>(n));
    for (auto & s : c.channels[0]) s = static_cast<float>(amp) * u(rng);
    return c;
}

} // namespace

TEST_CASE("rounding is half away from zero") {
    CHECK(round_level(65.5) == 66);
    CHECK(round_level(64.4) == 64);
    CHECK(round_level(64.5) == 65);
    CHECK(round_level(-0.5) == -1);
}

TEST_CASE("interpolate_gain examples") {
    GainLookupTable t = ramp_table();
    t.at(65) = 0.5;
    t.at(64) = 0.45;
    CHECK(interpolate_gain(t, 65.0) == 0.5);

    GainLookupTable a;
    a.gains.fill(1.0);
    CHECK(interpolate_gain(a, 64.4) == doctest::Approx(std::pow(10.0, 0.02)));
    CHECK(interpolate_gain(a, 64.4) == doctest::Approx(1.04713).epsilon(1e-5));

    a.at(66) = 2.0;
    CHECK(interpolate_gain(a, 65.5) == doctest::Approx(2.0 * std::pow(10.0, -0.025)));
    CHECK(interpolate_gain(a, 65.5) == doctest::Approx(1.88812).epsilon(1e-5));
}

TEST_CASE("interpolation is exact at every table key") {
    const GainLookupTable t = ramp_table();
    for (int l = GainLookupTable::kMinLevel; l <= GainLookupTable::kMaxLevel; ++l)
        CHECK(interpolate_gain(t, double(l)) == t.at(l));
}

TEST_CASE("interpolation is monotone within each unit interval") {
    const GainLookupTable t = ramp_table();
    for (int l = 46; l < 83; ++l) {
        double prev = 0.0;
        for (int i = -5; i < 5; ++i) {
            const double level = l + i / 10.0;
            if (level < 45.5) continue;
            const double g = interpolate_gain(t, level);
            CHECK(g > prev);
            prev = g;
        }
    }
}

TEST_CASE("out-of-range levels throw") {
    const GainLookupTable t = ramp_table();
    CHECK_THROWS_AS(interpolate_gain(t, 45.4), DataError);
    CHECK_THROWS_AS(interpolate_gain(t, 83.5), DataError);
    CHECK_NOTHROW(interpolate_gain(t, 45.5));
    CHECK_NOTHROW(interpolate_gain(t, 83.49));
    CHECK_THROWS_AS(t.at(84), DataError);
    CHECK_THROWS_AS(interpolate_gain(t, std::nan("")), DataError);
}

TEST_CASE("smr_to_gain composes with interpolation") {
    const GainLookupTable t = ramp_table();
    SceneMeta s{"scene", 65.3};
    for (double smr : {-6.0, -3.0, 0.0, 3.0, 6.0}) CHECK(smr_to_gain(t, s, smr) == interpolate_gain(t, 65.3 + smr));
    CHECK(smr_to_gain(t, SceneMeta{"x", 65.0}, 0.0) == t.at(65));
    CHECK(smr_to_gain(t, s, -6.0) == doctest::Approx(t.at(59) * std::pow(10.0, 0.3 / 20.0)));
    CHECK_THROWS_AS(SceneMeta({"bad", 10.0}).validate(), DataError);
}

TEST_CASE("table validation") {
    GainLookupTable t = ramp_table();
    CHECK_NOTHROW(t.validate());
    t.at(70) = t.at(69) * 0.5;
    CHECK_THROWS_AS(t.validate(), DataError);
    t = ramp_table();
    t.at(46) = 0.0;
    CHECK_THROWS_AS(t.validate(), DataError);
}

TEST_CASE("normalize_spdr") {
    const dsp::AudioClip m = noise_clip(1000, 0.5, 1);
    CalibrationProfile p{2.0, {{"same", 2.0}, {"half", 4.0}, {"loud", 0.2}}};
    dsp::AudioClip same = normalize_spdr(m, p, "same");
    CHECK(same.channels == m.channels);
    dsp::AudioClip half = normalize_spdr(m, p, "half");
    for (std::size_t i = 0; i < m.length(); ++i) CHECK(half.channels[0][i] == doctest::Approx(0.5 * m.channels[0][i]));
    CHECK(half.rms() == doctest::Approx(0.5 * m.rms()).epsilon(1e-6));
    dsp::AudioClip loud = normalize_spdr(m, p, "loud");
    for (float s : loud.channels[0]) CHECK(std::abs(s) <= 1.0f);
    CHECK_THROWS_AS(normalize_spdr(m, p, "unknown"), DataError);
}

TEST_CASE("synthetic lookup tables") {
    const dsp::AudioClip m = noise_clip(20000, 0.3, 2);
    const GainLookupTable a = synth_lookup_table(m, 0.5, "m1");
    const GainLookupTable b = synth_lookup_table(m, 1.0, "m1");
    CHECK_NOTHROW(a.validate());
    for (int l = 46; l <= 83; ++l) CHECK(b.at(l) == doctest::Approx(0.5 * a.at(l)));
    for (int l = 46; l + 20 <= 83; ++l) CHECK(a.at(l + 20) / a.at(l) == doctest::Approx(10.0));
    for (int l = 46; l <= 83; ++l) {
        const double spl = 20.0 * std::log10(a.at(l) * m.rms() * 0.5 / 20e-6);
        CHECK(spl == doctest::Approx(double(l)));
    }
    CHECK_THROWS_AS(synth_lookup_table(dsp::AudioClip::silence(44100, 1, 100), 0.5, "s"), DataError);
}

TEST_CASE("lookup table text format") {
    GainLookupTable t = ramp_table();
    t.masker_id = "bird_00";
    const GainLookupTable back = parse_lookup_table(format_lookup_table(t));
    CHECK(back.masker_id == "bird_00");
    CHECK(back.gains == t.gains);

    CHECK_THROWS_AS(parse_lookup_table("not json"), DataError);
    CHECK_THROWS_AS(parse_lookup_table(R"({"masker_id": "x"})"), DataError);
    auto j = format_lookup_table(t);
    auto extra = j.substr(0, j.size() - 1) + R"(, "84": 1.0})";
    CHECK_THROWS_AS(parse_lookup_table(extra), DataError);

    const auto dir = std::filesystem::temp_directory_path() / "ppap_test_calib";
    std::filesystem::create_directories(dir);
    GainLookupTable u = ramp_table();
    u.masker_id = "water_01";
    write_lookup_tables(dir / "t.jsonl", {t, u});
    auto tables = read_lookup_tables(dir / "t.jsonl");
    REQUIRE(tables.size() == 2);
    CHECK(tables[1].masker_id == "water_01");
    CHECK(tables[1].gains == u.gains);

    std::ofstream(dir / "bad.jsonl") << format_lookup_table(t) << "\n{\"masker_id\": 3}\n";
    CHECK_THROWS_AS(read_lookup_tables(dir / "bad.jsonl"), DataError);
    std::filesystem::remove_all(dir);
}
