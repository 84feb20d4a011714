#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace icr {

// FNV-1a, 64 bit. Used for stable cross-platform content ids (cluster ids,
// cache file names, per-cluster sampling seeds). Not cryptographic.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 14695981039346656037ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

std::string hex64(std::uint64_t v);

// splitmix64 step, used to whiten hash-derived seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace icr
