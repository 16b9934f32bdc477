#pragma once

#include <cstddef>
#include <span>
#include <vector>

// Perfect-sweep excitation signals, the per-speaker shifted bank and the
// flat regressor vectors consumed by the identifiers.
namespace rotir::signals {

// Periodic excitation whose circular autocorrelation is a delta. Constructed
// in the frequency domain (unit magnitude, quadratic phase) and scaled so
// mean(x^2) == 1.
struct PerfectSweep {
  std::size_t period = 0;
  std::vector<double> samples;  // length == period
};

// period must be even and >= 2.
PerfectSweep generate_perfect_sweep(std::size_t period);

// S copies of the base sweep, row s0 (0-based) circularly shifted by s0*taps
// samples and tiled to `length`.
struct ExcitationBank {
  std::size_t speakers = 0;  // S
  std::size_t taps = 0;      // estimated IR length the identifiers use
  std::size_t length = 0;    // N
  std::vector<double> rows;  // speakers x length, row-major

  std::size_t period() const { return speakers * taps; }
  const double* row(std::size_t s) const { return rows.data() + s * length; }
  // x_s(n); samples before time 0 read as zero.
  double sample(std::size_t s, std::ptrdiff_t n) const {
    return (n < 0) ? 0.0 : rows[s * length + static_cast<std::size_t>(n)];
  }
};

ExcitationBank build_excitation_bank(const PerfectSweep& sweep, std::size_t speakers,
                                     std::size_t taps, std::size_t length);

// Fills the flat regressor x_{n,ele}: `speakers` blocks of `taps` samples,
// newest first, i.e. out[s*taps + j] == x_s(n - j). out.size() must equal
// speakers*taps; n must be < bank.length.
void fill_regressor(const ExcitationBank& bank, std::size_t n, std::span<double> out);

std::vector<double> regressor(const ExcitationBank& bank, std::size_t n);

}  // namespace rotir::signals
