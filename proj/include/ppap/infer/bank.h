#pragma once

#include "ppap/infer/predictor.h"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace ppap::infer {

struct BankEntry {
    std::string id;
    std::string spectrogram_hash;
    model::Embedding query;  // N x D
};

// Precomputed masker queries, tied to the weights that produced them.
struct MaskerBank {
    std::string weight_hash;
    std::size_t frames = 0;  // N
    std::size_t dim = 0;     // D
    std::vector<BankEntry> entries;

    const BankEntry * find(const std::string & id) const;
    std::vector<std::string> ids() const;
};

using NamedSpectrogram = std::pair<std::string, dsp::Spectrogram>;

// One f_m call per masker. Throws DataError on a duplicate id.
MaskerBank precompute_bank(Predictor & predictor, const std::vector<NamedSpectrogram> & maskers);

// Throws DataError telling the caller to re-run precompute when the bank was
// built from other weights or shapes.
void check_bank(const MaskerBank & bank, const Predictor & predictor);

// Cache file layout:
//   "PPAPC1"
//   u64 LE header byte count
//   header: JSON {weight_hash, N, D, masker_count, maskers: [{id, spectrogram_hash}]}
//   per masker: u32 LE id byte count, id bytes, N*D LE f32
void save_bank(const std::filesystem::path & path, const MaskerBank & bank);
MaskerBank load_bank(const std::filesystem::path & path);

} // namespace ppap::infer
