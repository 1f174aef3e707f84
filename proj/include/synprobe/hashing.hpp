#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace synprobe {

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);
std::string read_file_bytes(const std::string& path);
// Deterministic RNG seed from a label: the first 8 bytes of its SHA-256.
std::uint64_t seed_from_label(std::string_view label);

}  // namespace synprobe
