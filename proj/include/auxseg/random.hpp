#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace auxseg {

/// SplitMix64 finalizer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combines seed components into one stream seed. All randomness in the
/// library is derived from explicit seeds through this function.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (std::uint64_t p : parts) h = splitmix64(h ^ splitmix64(p));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::initializer_list<std::uint64_t> parts) { return Rng(derive_seed(parts)); }

}  // namespace auxseg
