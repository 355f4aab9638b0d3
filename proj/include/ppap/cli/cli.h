#pragma once

#include "ppap/model/config.h"
#include "ppap/nn/params.h"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ppap::cli {

// Everything a train run needs. Loaded from a JSON file, then overridden by
// whichever flags were given.
struct RunConfig {
    model::ModelConfig model = model::ModelConfig::standard();
    nn::AdamConfig adam;
    std::size_t max_epochs = 100;
    std::size_t batch_size = 32;
    std::optional<std::uint64_t> seed;
    int fold = 0;
    std::filesystem::path manifest;
    std::filesystem::path out_dir;
};

// Keys: preset, model{...}, lr, epochs, batch_size, seed, fold, manifest, out.
// A preset is applied before model overrides.
RunConfig load_run_config(const std::filesystem::path & path);

// Runs one subcommand. Returns the process exit code: 0 success, 1 usage,
// 2 data or validation, 3 numerical.
int run(int argc, const char * const * argv, std::ostream & out, std::ostream & err);

} // namespace ppap::cli
