#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace wcd {

// MurmurHash3 x86 32-bit (Austin Appleby's finalized variant).
// All token hashing in this project uses seed 0 over raw token bytes;
// the identifier below is embedded in model and feature-cache headers
// so that files produced with a different hash can be rejected.
uint32_t murmur3_x86_32(const void* data, size_t len, uint32_t seed);

inline uint32_t murmur3_x86_32(std::string_view s, uint32_t seed = 0) {
  return murmur3_x86_32(s.data(), s.size(), seed);
}

inline constexpr const char* kHashVariantId = "murmur3_x86_32/seed0";

}  // namespace wcd
