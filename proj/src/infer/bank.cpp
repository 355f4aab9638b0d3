#include "ppap/infer/bank.h"

#include "ppap/common/error.h"
#include "ppap/common/file_io.h"

#include <json.hpp>

#include <cstring>
#include <set>

namespace ppap::infer {

namespace {

constexpr char kMagic[] = "PPAPC1";
constexpr std::size_t kMagicLen = 6;

void put_u64(std::vector<std::uint8_t> & out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string & in, std::size_t & pos, int bytes) {
    if (pos + bytes > in.size()) throw DataError("feature cache truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(in[pos + i])) << (8 * i);
    pos += bytes;
    return v;
}

} // namespace

const BankEntry * MaskerBank::find(const std::string & id) const {
    for (const auto & e : entries) {
        if (e.id == id) return &e;
    }
    return nullptr;
}

std::vector<std::string> MaskerBank::ids() const {
    std::vector<std::string> out;
    for (const auto & e : entries) out.push_back(e.id);
    return out;
}

MaskerBank precompute_bank(Predictor & predictor, const std::vector<NamedSpectrogram> & maskers) {
    std::set<std::string> seen;
    for (const auto & [id, spec] : maskers) {
        if (!seen.insert(id).second) throw DataError("duplicate masker id '" + id + "'");
    }
    MaskerBank bank;
    bank.weight_hash = predictor.weight_hash();
    bank.frames = predictor.config().embed_frames;
    bank.dim = predictor.config().embed_dim;
    for (const auto & [id, spec] : maskers) {
        bank.entries.push_back({id, spectrogram_hash(spec), predictor.masker_features(spec)});
    }
    return bank;
}

void check_bank(const MaskerBank & bank, const Predictor & predictor) {
    if (bank.weight_hash != predictor.weight_hash()) {
        throw DataError("feature cache was built from weights " + bank.weight_hash + " but the model is " +
                        predictor.weight_hash() + "; re-run precompute with these weights");
    }
    if (bank.frames != predictor.config().embed_frames || bank.dim != predictor.config().embed_dim) {
        throw DataError("feature cache embeddings are " + std::to_string(bank.frames) + "x" + std::to_string(bank.dim) +
                        " but the model expects " + std::to_string(predictor.config().embed_frames) + "x" +
                        std::to_string(predictor.config().embed_dim) + "; re-run precompute");
    }
}

void save_bank(const std::filesystem::path & path, const MaskerBank & bank) {
    nlohmann::ordered_json header;
    header["weight_hash"] = bank.weight_hash;
    header["N"] = bank.frames;
    header["D"] = bank.dim;
    header["masker_count"] = bank.entries.size();
    header["maskers"] = nlohmann::json::array();
    for (const auto & e : bank.entries) {
        header["maskers"].push_back({{"id", e.id}, {"spectrogram_hash", e.spectrogram_hash}});
    }
    const std::string text = header.dump();
    std::vector<std::uint8_t> out(kMagic, kMagic + kMagicLen);
    put_u64(out, text.size(), 8);
    out.insert(out.end(), text.begin(), text.end());
    for (const auto & e : bank.entries) {
        if (e.query.values.size() != bank.frames * bank.dim) throw DataError("bank entry '" + e.id + "' has the wrong size");
        put_u64(out, e.id.size(), 4);
        out.insert(out.end(), e.id.begin(), e.id.end());
        const auto * p = reinterpret_cast<const std::uint8_t *>(e.query.values.data());
        out.insert(out.end(), p, p + e.query.values.size() * sizeof(float));
    }
    write_file_atomic(path, out);
}

MaskerBank load_bank(const std::filesystem::path & path) {
    const std::string in = read_file(path);
    if (in.size() < kMagicLen || in.compare(0, kMagicLen, kMagic) != 0) {
        throw DataError(path.string() + " is not a PPAP feature cache (bad magic)");
    }
    std::size_t pos = kMagicLen;
    const std::uint64_t len = get_u64(in, pos, 8);
    if (len > in.size() - pos) throw DataError("feature cache header truncated");
    MaskerBank bank;
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(in.begin() + pos, in.begin() + pos + len);
        bank.weight_hash = header.at("weight_hash").get<std::string>();
        bank.frames = header.at("N").get<std::size_t>();
        bank.dim = header.at("D").get<std::size_t>();
    } catch (const nlohmann::json::exception & e) {
        throw DataError(std::string("feature cache header invalid: ") + e.what());
    }
    pos += len;
    const std::size_t count = header.at("masker_count").get<std::size_t>();
    const auto & listed = header.at("maskers");
    if (listed.size() != count) throw DataError("feature cache masker_count disagrees with its masker list");
    for (std::size_t m = 0; m < count; ++m) {
        const std::size_t id_len = get_u64(in, pos, 4);
        if (pos + id_len > in.size()) throw DataError("feature cache truncated");
        BankEntry e;
        e.id = in.substr(pos, id_len);
        pos += id_len;
        if (e.id != listed[m].at("id").get<std::string>()) throw DataError("feature cache entry order disagrees with header");
        e.spectrogram_hash = listed[m].value("spectrogram_hash", std::string());
        const std::size_t n = bank.frames * bank.dim;
        if (pos + n * sizeof(float) > in.size()) throw DataError("feature cache truncated");
        std::vector<float> data(n);
        std::memcpy(data.data(), in.data() + pos, n * sizeof(float));
        pos += n * sizeof(float);
        e.query.role = model::EmbeddingRole::query;
        e.query.values = nn::Tensor<float>({bank.frames, bank.dim}, std::move(data));
        bank.entries.push_back(std::move(e));
    }
    if (pos != in.size()) throw DataError("feature cache has trailing bytes");
    return bank;
}

} // namespace ppap::infer
