#pragma once

#include "ppap/model/config.h"
#include "ppap/model/ppap.h"
#include "ppap/nn/params.h"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ppap::model {

// Weight file layout:
//   "PPAPW1"
//   u64 LE header byte count
//   header: JSON {config, gamma_stats?, seed, tensors: [{name, shape, dtype: "f32", trainable}]}
//   raw little-endian f32 data for each tensor in header order
struct WeightFile {
    ModelConfig config;
    nn::ParameterSet<float> params;
    std::optional<GammaStats> gamma_stats;
    std::string hash;  // FNV-1a 64 of the encoded file, hex
};

inline constexpr char kWeightMagic[] = "PPAPW1";

std::vector<std::uint8_t> encode_weights(const ModelConfig & config, const nn::ParameterSet<float> & params,
                                         const std::optional<GammaStats> & gamma_stats = std::nullopt);
WeightFile decode_weights(const std::vector<std::uint8_t> & bytes);

std::string weights_hash(const ModelConfig & config, const nn::ParameterSet<float> & params,
                         const std::optional<GammaStats> & gamma_stats = std::nullopt);

// Atomic write; returns the hash of what was written.
std::string save_weights(const std::filesystem::path & path, const ModelConfig & config,
                         const nn::ParameterSet<float> & params,
                         const std::optional<GammaStats> & gamma_stats = std::nullopt);
WeightFile load_weights(const std::filesystem::path & path);

} // namespace ppap::model
