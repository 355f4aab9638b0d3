#include "ppap/model/config.h"

#include "ppap/common/error.h"

namespace ppap::model {

std::string to_string(Augmentation a) {
    switch (a) {
    case Augmentation::cat: return "CAT";
    case Augmentation::add: return "ADD";
    case Augmentation::conv: return "CONV";
    }
    return "?";
}

std::string to_string(Fusion f) {
    switch (f) {
    case Fusion::additive: return "AA";
    case Fusion::dot_product: return "DPA";
    case Fusion::multi_head: return "MHA4";
    case Fusion::pass_through: return "PASSTHROUGH";
    }
    return "?";
}

Augmentation parse_augmentation(const std::string & s) {
    if (s == "CAT" || s == "cat") return Augmentation::cat;
    if (s == "ADD" || s == "add") return Augmentation::add;
    if (s == "CONV" || s == "conv") return Augmentation::conv;
    throw UsageError("unknown augmentation variant '" + s + "' (expected CAT, ADD or CONV)");
}

Fusion parse_fusion(const std::string & s) {
    if (s == "AA" || s == "aa") return Fusion::additive;
    if (s == "DPA" || s == "dpa") return Fusion::dot_product;
    if (s == "MHA4" || s == "mha4" || s == "MHA" || s == "mha") return Fusion::multi_head;
    if (s == "PASSTHROUGH" || s == "passthrough" || s == "X" || s == "x") return Fusion::pass_through;
    throw UsageError("unknown attention variant '" + s + "' (expected AA, DPA, MHA4 or PASSTHROUGH)");
}

std::size_t ModelConfig::derived_embed_frames() const {
    std::size_t t = time_frames;
    for (std::size_t i = 0; i < conv_channels.size(); ++i) t /= 2;
    return t;
}

std::size_t ModelConfig::derived_embed_dim() const {
    std::size_t f = mel_bins();
    for (std::size_t i = 0; i < conv_channels.size(); ++i) f /= 2;
    return conv_channels.empty() ? 0 : f * conv_channels.back();
}

void ModelConfig::validate() const {
    dsp.validate();
    if (conv_channels.empty()) throw UsageError("conv_channels must list at least one block");
    for (std::size_t c : conv_channels) {
        if (c == 0) throw UsageError("conv_channels entries must be positive");
    }
    if (soundscape_channels == 0) throw UsageError("soundscape_channels must be >= 1");
    // Every pooled axis must still be >= 2 when it reaches its pooling layer.
    std::size_t t = time_frames, f = mel_bins();
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
        if (t < 2 || f < 2) {
            throw UsageError("input " + std::to_string(time_frames) + "x" + std::to_string(mel_bins()) + " too small for " +
                             std::to_string(conv_channels.size()) + " pooling blocks");
        }
        t /= 2;
        f /= 2;
    }
    if (derived_embed_frames() != embed_frames) {
        throw UsageError("embed_frames N=" + std::to_string(embed_frames) + " but the conv stack yields " +
                         std::to_string(derived_embed_frames()));
    }
    if (derived_embed_dim() != embed_dim) {
        throw UsageError("embed_dim D=" + std::to_string(embed_dim) + " but the conv stack yields " +
                         std::to_string(derived_embed_dim()));
    }
    if (fusion == Fusion::multi_head && (attention_heads == 0 || embed_dim % attention_heads != 0)) {
        throw UsageError("embed_dim " + std::to_string(embed_dim) + " is not divisible by " +
                         std::to_string(attention_heads) + " attention heads");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) throw UsageError("dropout must be in [0, 1)");
    if (!(log_sigma_min < log_sigma_max)) throw UsageError("log_sigma_min must be < log_sigma_max");
}

ModelConfig ModelConfig::standard() { return ModelConfig{}; }

ModelConfig ModelConfig::compact() {
    ModelConfig c;
    c.dsp.mel_bins = 32;
    c.time_frames = 65;
    c.embed_frames = 2;
    c.embed_dim = 64;
    return c;
}

ModelConfig ModelConfig::tiny() {
    ModelConfig c;
    c.dsp.mel_bins = 8;
    c.time_frames = 16;
    c.conv_channels = {4, 6, 8};
    c.embed_frames = 2;
    c.embed_dim = 8;
    return c;
}

ModelConfig ModelConfig::preset(const std::string & name) {
    if (name == "standard" || name == "default") return standard();
    if (name == "compact") return compact();
    if (name == "tiny") return tiny();
    throw UsageError("unknown model preset '" + name + "' (expected standard, compact or tiny)");
}

std::size_t ModelConfig::clip_samples() const {
    return static_cast<std::size_t>(dsp.window_size) + (time_frames - 1) * static_cast<std::size_t>(dsp.hop);
}

void to_json(nlohmann::json & j, const ModelConfig & c) {
    j = nlohmann::json{
        {"sample_rate", c.dsp.sample_rate},
        {"window_size", c.dsp.window_size},
        {"hop", c.dsp.hop},
        {"mel_bins", c.dsp.mel_bins},
        {"time_frames", c.time_frames},
        {"soundscape_channels", c.soundscape_channels},
        {"conv_channels", c.conv_channels},
        {"embed_frames", c.embed_frames},
        {"embed_dim", c.embed_dim},
        {"augmentation", to_string(c.augmentation)},
        {"fusion", to_string(c.fusion)},
        {"attention_heads", c.attention_heads},
        {"dropout", c.dropout},
        {"bn_momentum", c.bn_momentum},
        {"log_sigma_min", c.log_sigma_min},
        {"log_sigma_max", c.log_sigma_max},
    };
}

void from_json(const nlohmann::json & j, ModelConfig & c) {
    // Missing keys keep the current value so partial config files layer over a preset.
    auto get = [&](const char * key, auto & field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    get("sample_rate", c.dsp.sample_rate);
    get("window_size", c.dsp.window_size);
    get("hop", c.dsp.hop);
    get("mel_bins", c.dsp.mel_bins);
    get("time_frames", c.time_frames);
    get("soundscape_channels", c.soundscape_channels);
    get("conv_channels", c.conv_channels);
    get("embed_frames", c.embed_frames);
    get("embed_dim", c.embed_dim);
    if (j.contains("augmentation")) c.augmentation = parse_augmentation(j.at("augmentation").get<std::string>());
    if (j.contains("fusion")) c.fusion = parse_fusion(j.at("fusion").get<std::string>());
    get("attention_heads", c.attention_heads);
    get("dropout", c.dropout);
    get("bn_momentum", c.bn_momentum);
    get("log_sigma_min", c.log_sigma_min);
    get("log_sigma_max", c.log_sigma_max);
}

} // namespace ppap::model
