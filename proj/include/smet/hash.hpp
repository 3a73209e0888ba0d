#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace smet {

/// FNV-1a 64 with a splitmix64 finalizer; stable across platforms and runs.
std::uint64_t stable_hash64(std::string_view bytes, std::uint64_t seed = 0);
std::string to_hex16(std::uint64_t value);
std::string sha256_hex(std::string_view bytes);

}  // namespace smet
