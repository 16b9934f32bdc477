#include "rotir/fft.hpp"

#include <numbers>
#include <stdexcept>

namespace rotir::fft {

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace {

void transform(std::vector<std::complex<double>>& buf, bool invert) {
  const std::size_t n = buf.size();
  if (!is_pow2(n)) throw std::invalid_argument("fft: size must be a power of two");
  if (n <= 1) return;

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(buf[i], buf[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (invert ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = buf[i + k];
        const std::complex<double> v = buf[i + k + len / 2] * w;
        buf[i + k] = u + v;
        buf[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (invert) {
    const double inv = 1.0 / static_cast<double>(n);
    for (auto& c : buf) c *= inv;
  }
}

}  // namespace

void forward(std::vector<std::complex<double>>& buf) { transform(buf, false); }

void inverse(std::vector<std::complex<double>>& buf) { transform(buf, true); }

std::vector<std::complex<double>> real_spectrum(std::span<const double> x,
                                                std::size_t fft_size) {
  if (!is_pow2(fft_size)) throw std::invalid_argument("fft: size must be a power of two");
  if (x.size() > fft_size) throw std::invalid_argument("fft: signal longer than fft size");
  std::vector<std::complex<double>> buf(fft_size);
  for (std::size_t i = 0; i < x.size(); ++i) buf[i] = x[i];
  forward(buf);
  buf.resize(fft_size / 2 + 1);
  return buf;
}

}  // namespace rotir::fft
