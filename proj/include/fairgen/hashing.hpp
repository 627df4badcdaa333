#pragma once

#include "fairgen/types.hpp"

#include <cstdint>
#include <string_view>

namespace fairgen {

// FNV-1a, 64 bit. Used for seeding per-state generators and config hashes.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t seed = 1469598103934665603ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const TokenSeq& seq,
                             std::uint64_t seed = 1469598103934665603ull) {
  std::uint64_t h = seed;
  for (Token t : seq) {
    for (int shift = 0; shift < 32; shift += 8) {
      h ^= static_cast<unsigned char>(t >> shift);
      h *= 1099511628211ull;
    }
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Per-component seed derivation from one master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view component) {
  return splitmix64(master ^ fnv1a64(component));
}

}  // namespace fairgen
