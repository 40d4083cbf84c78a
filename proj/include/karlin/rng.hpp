#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace karlin {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; decorrelates nearby seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Private stream for replicate `replicate` of an experiment seeded by `master`.
/// The mapping is fixed so results do not depend on scheduling.
inline Rng make_stream(std::uint64_t master, std::uint64_t replicate) {
  const std::uint64_t a = splitmix64(master ^ splitmix64(replicate + 0x5851f42d4c957f2dULL));
  const std::uint64_t b = splitmix64(a + replicate);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1].
inline double uniform_open0(Rng& rng) { return 1.0 - uniform01(rng); }

inline double standard_exponential(Rng& rng) { return -std::log(uniform_open0(rng)); }

}  // namespace karlin
