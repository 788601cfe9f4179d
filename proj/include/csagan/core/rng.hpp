#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace csagan {

// SplitMix64 finalizer.
constexpr uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Independent stream seed for a named consumer of the master seed; adding or
// reordering consumers never shifts another stream.
constexpr uint64_t derive_seed(uint64_t master, std::string_view stream,
                               uint64_t counter = 0) {
  return mix64(mix64(master ^ fnv1a(stream)) + counter);
}

inline std::mt19937_64 make_rng(uint64_t master, std::string_view stream,
                                uint64_t counter = 0) {
  return std::mt19937_64(derive_seed(master, stream, counter));
}

}  // namespace csagan
