#pragma once

#include "ppap/dsp/spectrogram.h"

#include <json.hpp>

#include <cstddef>
#include <string>
#include <vector>

namespace ppap::model {

// Gain-conditioned feature augmentation f_g.
enum class Augmentation { cat, add, conv };
// QKV fusion f_a. pass_through is the no-attention ablation.
enum class Fusion { additive, dot_product, multi_head, pass_through };

std::string to_string(Augmentation a);  // "CAT" | "ADD" | "CONV"
std::string to_string(Fusion f);        // "AA" | "DPA" | "MHA4" | "PASSTHROUGH"
Augmentation parse_augmentation(const std::string & s);
Fusion parse_fusion(const std::string & s);

struct ModelConfig {
    dsp::DspConfig dsp;                 // mel_bins is F
    std::size_t time_frames = 644;      // T
    std::size_t soundscape_channels = 2;  // C
    std::vector<std::size_t> conv_channels{16, 32, 48, 64, 64};
    std::size_t embed_frames = 20;      // N
    std::size_t embed_dim = 128;        // D
    Augmentation augmentation = Augmentation::conv;
    Fusion fusion = Fusion::dot_product;
    std::size_t attention_heads = 4;    // multi_head only
    double dropout = 0.1;
    double bn_momentum = 0.1;
    double log_sigma_min = -6.0;
    double log_sigma_max = 3.0;

    std::size_t mel_bins() const { return static_cast<std::size_t>(dsp.mel_bins); }

    // N and D implied by the conv stack: each block halves time and frequency
    // (floor), and the final frequency bins are flattened with the channels.
    std::size_t derived_embed_frames() const;
    std::size_t derived_embed_dim() const;

    // Throws UsageError on any inconsistency, including N/D that do not match
    // the conv stack and D not divisible by the head count under MHA.
    void validate() const;

    // 644x64x2 input, five blocks, N=20, D=128.
    static ModelConfig standard();
    // 3.1 s clips (T=65), 32 mel bins, five blocks: N=2, D=64. Desk-scale training.
    static ModelConfig compact();
    // T=16, F=8, three blocks [4,6,8]: N=2, D=8. Gradient checks.
    static ModelConfig tiny();
    static ModelConfig preset(const std::string & name);

    // Clip length in samples that yields exactly time_frames frames.
    std::size_t clip_samples() const;
};

void to_json(nlohmann::json & j, const ModelConfig & c);
void from_json(const nlohmann::json & j, ModelConfig & c);

} // namespace ppap::model
