#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace qsmlot::io {

// FNV-1a 64-bit; used for config hashes and dataset content hashes.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hex64(std::uint64_t v);

}  // namespace qsmlot::io
