#pragma once

// Deterministic helpers shared across modules. std::uniform_int_distribution
// and std::shuffle are implementation-defined, so seeded runs use these
// instead.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace alphax {

using Rng = std::mt19937_64;

// Unbiased draw from [0, n) via rejection sampling.
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  if (n == 0) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

// Uniform double in [0, 1) with 53 bits of entropy.
inline double uniform_real(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

template <typename T>
void deterministic_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

// FNV-1a over bytes.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 14695981039346656037ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s) {
  return fnv1a(s.data(), s.size());
}

// Stateless hash of (seed, key) mapped to [0, 1).
inline double hash01(std::uint64_t seed, const std::string& key) {
  std::uint64_t h = fnv1a(&seed, sizeof(seed));
  h = fnv1a(key.data(), key.size(), h);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Shortest round-trip decimal representation of a double.
std::string format_double(double x);

std::string rng_to_string(const Rng& rng);
Rng rng_from_string(const std::string& s);

}  // namespace alphax
