#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rotir::detail {

// splitmix64; used to derive independent stream seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Box-Muller on top of mt19937_64. std::normal_distribution is
// implementation-defined, so the transform is spelled out here to keep
// generated scenarios byte-reproducible across standard libraries.
class GaussianSource {
 public:
  explicit GaussianSource(std::uint64_t seed) : eng_(seed) {}

  double next() {
    const double u1 = (static_cast<double>(eng_()) + 1.0) * kInv64;  // (0, 1]
    const double u2 = static_cast<double>(eng_()) * kInv64;          // [0, 1)
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static constexpr double kInv64 = 1.0 / 18446744073709551616.0;  // 2^-64
  std::mt19937_64 eng_;
};

}  // namespace rotir::detail
