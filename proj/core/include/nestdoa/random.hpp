#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "nestdoa/types.hpp"

namespace nestdoa {

/// SplitMix64 finalizer. Used to derive independent per-trial seeds from a base seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of trial `trial` at sweep point `point`. Streams for distinct
/// (point, trial) pairs are decorrelated through two rounds of mixing.
constexpr std::uint64_t trial_seed(std::uint64_t base, std::uint64_t point,
                                   std::uint64_t trial) noexcept {
  return mix_seed(mix_seed(base ^ mix_seed(point + 0x632be59bd9b4e019ULL)) ^ mix_seed(trial));
}

using Rng = std::mt19937_64;

/// Uniform draw in the open interval (0, 1) from the top 53 bits of the engine.
inline double uniform_open(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Circularly-symmetric complex Gaussian draw with E|z|^2 = variance.
/// Hand-rolled Box-Muller so streams are identical across standard libraries.
class ComplexGaussian {
 public:
  explicit ComplexGaussian(double variance) : scale_(std::sqrt(variance / 2.0)) {}

  Complex operator()(Rng& rng) const {
    const double u1 = uniform_open(rng);
    const double u2 = uniform_open(rng);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * kPi * u2;
    return {scale_ * radius * std::cos(angle), scale_ * radius * std::sin(angle)};
  }

 private:
  double scale_;
};

}  // namespace nestdoa
