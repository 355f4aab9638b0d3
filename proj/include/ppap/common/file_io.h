#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace ppap {

// Writes to "<path>.tmp.<pid>" then renames over `path`. A crash mid-write
// never leaves a truncated file at `path`.
void write_file_atomic(const std::filesystem::path & path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path & path, std::string_view text);

std::string read_file(const std::filesystem::path & path);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

} // namespace ppap
