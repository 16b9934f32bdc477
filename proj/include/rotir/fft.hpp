#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

// Minimal iterative radix-2 FFT. Power-of-two sizes only; that is all the
// spectral metrics need (IRs are zero-padded to the next power of two).
namespace rotir::fft {

constexpr bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n);

// In-place forward transform, no scaling. buf.size() must be a power of two.
void forward(std::vector<std::complex<double>>& buf);

// In-place inverse transform, scaled by 1/N.
void inverse(std::vector<std::complex<double>>& buf);

// One-sided spectrum of a real signal zero-padded to fft_size:
// bins 0 .. fft_size/2 inclusive.
std::vector<std::complex<double>> real_spectrum(std::span<const double> x,
                                                std::size_t fft_size);

}  // namespace rotir::fft
