#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace fedsac {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; a bijective mixer used to derive independent seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives the seed of a named substream, optionally indexed
/// (e.g. `derive_seed(root, "habits", {day, ev})`).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view stream,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  // FNV-1a over the stream name.
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : stream) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  std::uint64_t s = splitmix64(root ^ splitmix64(h));
  for (std::uint64_t i : indices) {
    s = splitmix64(s ^ splitmix64(i + 0x632BE59BD9B4E019ULL));
  }
  return s;
}

inline Rng make_rng(std::uint64_t root, std::string_view stream,
                    std::initializer_list<std::uint64_t> indices = {}) {
  return Rng{derive_seed(root, stream, indices)};
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>{lo, hi}(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>{lo, hi}(rng);
}

inline double standard_normal(Rng& rng) {
  return std::normal_distribution<double>{0.0, 1.0}(rng);
}

/// Normal(mean, std) conditioned on [lo, hi], by rejection; falls back to
/// clamping after many rejections so the call always terminates.
inline double truncated_normal(Rng& rng, double mean, double std, double lo,
                               double hi) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    double x = mean + std * standard_normal(rng);
    if (x >= lo && x <= hi) {
      return x;
    }
  }
  return std::clamp(mean, lo, hi);
}

}  // namespace fedsac
