#include "ppap/model/weights_io.h"

#include "ppap/common/error.h"
#include "ppap/common/file_io.h"

#include <json.hpp>

#include <bit>
#include <cstring>

namespace ppap::model {

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");

namespace {

constexpr std::size_t kMagicLen = 6;

} // namespace

std::vector<std::uint8_t> encode_weights(const ModelConfig & config, const nn::ParameterSet<float> & params,
                                         const std::optional<GammaStats> & gamma_stats) {
    nlohmann::json header;
    header["config"] = config;
    header["seed"] = params.seed;
    if (gamma_stats) header["gamma_stats"] = {{"mean", gamma_stats->mean}, {"stddev", gamma_stats->stddev}};
    nlohmann::json tensors = nlohmann::json::array();
    std::size_t payload = 0;
    for (const auto & name : params.names()) {
        const auto & t = params.value(name);
        tensors.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f32"}, {"trainable", params.trainable(name)}});
        payload += t.size() * sizeof(float);
    }
    header["tensors"] = std::move(tensors);
    const std::string text = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(kMagicLen + 8 + text.size() + payload);
    out.insert(out.end(), kWeightMagic, kWeightMagic + kMagicLen);
    const std::uint64_t len = text.size();
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((len >> (8 * i)) & 0xff));
    out.insert(out.end(), text.begin(), text.end());
    for (const auto & name : params.names()) {
        const auto & t = params.value(name);
        const auto * p = reinterpret_cast<const std::uint8_t *>(t.data());
        out.insert(out.end(), p, p + t.size() * sizeof(float));
    }
    return out;
}

WeightFile decode_weights(const std::vector<std::uint8_t> & bytes) {
    if (bytes.size() < kMagicLen + 8 || std::memcmp(bytes.data(), kWeightMagic, kMagicLen) != 0) {
        throw DataError("not a PPAP weight file (bad magic)");
    }
    std::uint64_t len = 0;
    for (int i = 0; i < 8; ++i) len |= static_cast<std::uint64_t>(bytes[kMagicLen + i]) << (8 * i);
    const std::size_t header_start = kMagicLen + 8;
    if (len > bytes.size() - header_start) throw DataError("weight file header truncated");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + header_start, bytes.begin() + header_start + len);
    } catch (const nlohmann::json::exception & e) {
        throw DataError(std::string("weight file header is not valid JSON: ") + e.what());
    }

    WeightFile wf;
    try {
        wf.config = header.at("config").get<ModelConfig>();
        wf.params.seed = header.value("seed", std::uint64_t{0});
        if (header.contains("gamma_stats")) {
            wf.gamma_stats = GammaStats{header["gamma_stats"].at("mean").get<double>(),
                                        header["gamma_stats"].at("stddev").get<double>()};
        }
        std::size_t offset = header_start + len;
        for (const auto & t : header.at("tensors")) {
            if (t.at("dtype").get<std::string>() != "f32") throw DataError("unsupported tensor dtype in weight file");
            nn::Shape shape = t.at("shape").get<nn::Shape>();
            const std::size_t n = nn::element_count(shape);
            if (offset + n * sizeof(float) > bytes.size()) throw DataError("weight file data truncated");
            std::vector<float> data(n);
            std::memcpy(data.data(), bytes.data() + offset, n * sizeof(float));
            offset += n * sizeof(float);
            wf.params.add(t.at("name").get<std::string>(), nn::Tensor<float>(std::move(shape), std::move(data)),
                          t.at("trainable").get<bool>());
        }
        if (offset != bytes.size()) throw DataError("weight file has trailing bytes");
    } catch (const nlohmann::json::exception & e) {
        throw DataError(std::string("weight file header schema error: ") + e.what());
    }
    wf.config.validate();
    wf.hash = hex64(fnv1a64(bytes));
    return wf;
}

std::string weights_hash(const ModelConfig & config, const nn::ParameterSet<float> & params,
                         const std::optional<GammaStats> & gamma_stats) {
    return hex64(fnv1a64(encode_weights(config, params, gamma_stats)));
}

std::string save_weights(const std::filesystem::path & path, const ModelConfig & config,
                         const nn::ParameterSet<float> & params, const std::optional<GammaStats> & gamma_stats) {
    const auto bytes = encode_weights(config, params, gamma_stats);
    write_file_atomic(path, bytes);
    return hex64(fnv1a64(bytes));
}

WeightFile load_weights(const std::filesystem::path & path) {
    const std::string raw = read_file(path);
    return decode_weights(std::vector<std::uint8_t>(raw.begin(), raw.end()));
}

} // namespace ppap::model
