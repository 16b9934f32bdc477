#include "rotir/signals.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace rotir::signals {

PerfectSweep generate_perfect_sweep(std::size_t period) {
  if (period < 2 || period % 2 != 0)
    throw std::invalid_argument("generate_perfect_sweep: period must be even and >= 2");

  const auto p = static_cast<std::int64_t>(period);
  const std::int64_t half = p / 2;

  // Spectrum: |X[k]| = 1 with phase(k) = -pi k^2 / P, completed conjugate
  // symmetric. Bin P/2 must be real; when the quadratic phase lands on
  // +-pi/2 there (P == 2 mod 4) it is forced to +1, which keeps the
  // magnitude at one and therefore the delta autocorrelation intact.
  const std::int64_t half_sq_mod = (half * half) % (2 * p);
  double nyquist = 1.0;
  if (half_sq_mod == p) nyquist = -1.0;

  PerfectSweep out;
  out.period = period;
  out.samples.resize(period);

  // Inverse DFT evaluated directly. Phase arguments are reduced with exact
  // integer arithmetic before entering cos(), so precision holds for large
  // periods: cos(pi * (2kn - k^2) / P) with (2kn - k^2) taken mod 2P.
  // The raw inverse transform carries 1/P; the unit-power scaling multiplies
  // by sqrt(P), so each sample is the bin sum divided by sqrt(P).
  const double pi_over_p = std::numbers::pi / static_cast<double>(p);
  const double scale = 1.0 / std::sqrt(static_cast<double>(p));
  for (std::int64_t n = 0; n < p; ++n) {
    double acc = 1.0;  // k = 0 bin, X[0] = 1
    acc += ((n % 2 == 0) ? 1.0 : -1.0) * nyquist;
    for (std::int64_t k = 1; k < half; ++k) {
      std::int64_t t = (2 * k * n - k * k) % (2 * p);
      if (t < 0) t += 2 * p;
      acc += 2.0 * std::cos(pi_over_p * static_cast<double>(t));
    }
    out.samples[static_cast<std::size_t>(n)] = acc * scale;
  }
  return out;
}

ExcitationBank build_excitation_bank(const PerfectSweep& sweep, std::size_t speakers,
                                     std::size_t taps, std::size_t length) {
  if (speakers == 0 || taps == 0)
    throw std::invalid_argument("build_excitation_bank: speakers and taps must be positive");
  if (sweep.period != speakers * taps)
    throw std::invalid_argument("build_excitation_bank: sweep period must equal speakers*taps");
  if (length == 0) throw std::invalid_argument("build_excitation_bank: length must be >= 1");

  const std::size_t p = sweep.period;
  ExcitationBank bank;
  bank.speakers = speakers;
  bank.taps = taps;
  bank.length = length;
  bank.rows.resize(speakers * length);
  for (std::size_t s = 0; s < speakers; ++s) {
    const std::size_t shift = s * taps;
    double* row = bank.rows.data() + s * length;
    for (std::size_t n = 0; n < length; ++n) {
      row[n] = sweep.samples[(n + shift) % p];
    }
  }
  return bank;
}

void fill_regressor(const ExcitationBank& bank, std::size_t n, std::span<double> out) {
  if (n >= bank.length)
    throw std::invalid_argument("fill_regressor: time index out of range");
  if (out.size() != bank.speakers * bank.taps)
    throw std::invalid_argument("fill_regressor: output size mismatch");
  const std::size_t avail = std::min(bank.taps, n + 1);
  for (std::size_t s = 0; s < bank.speakers; ++s) {
    const double* row = bank.row(s);
    double* block = out.data() + s * bank.taps;
    for (std::size_t j = 0; j < avail; ++j) block[j] = row[n - j];
    for (std::size_t j = avail; j < bank.taps; ++j) block[j] = 0.0;
  }
}

std::vector<double> regressor(const ExcitationBank& bank, std::size_t n) {
  std::vector<double> out(bank.speakers * bank.taps);
  fill_regressor(bank, n, out);
  return out;
}

}  // namespace rotir::signals
