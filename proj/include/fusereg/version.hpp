#pragma once

#include <cstdint>
#include <string>

namespace fusereg {

inline constexpr const char* kVersion = "0.1.0";

// FNV-1a, used to stamp a hash of the resolved configuration into outputs.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash_hex(const std::string& canonical_config);

}  // namespace fusereg
