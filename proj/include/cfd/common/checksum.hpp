#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace cfd {

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::span<const double> values, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Hex FNV-1a digest of a file's bytes. Throws std::runtime_error if unreadable.
std::string file_checksum(const std::filesystem::path& path);

std::string to_hex(std::uint64_t value);

}  // namespace cfd
