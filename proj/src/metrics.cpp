#include "rotir/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "rotir/fft.hpp"
#include "rotir/kernels.hpp"

namespace rotir::metrics {

namespace {

constexpr double kNmFloorDb = -300.0;
constexpr double kMagnitudeFloor = 1e-12;

double circular_distance_deg(double a, double b) {
  double diff = std::fmod(std::abs(a - b), 360.0);
  return std::min(diff, 360.0 - diff);
}

}  // namespace

AlignedPair make_aligned(std::span<const double> true_ir, std::span<const double> est_ir) {
  const std::size_t len = std::max(true_ir.size(), est_ir.size());
  AlignedPair pair;
  pair.true_ir.assign(len, 0.0);
  pair.est_ir.assign(len, 0.0);
  std::copy(true_ir.begin(), true_ir.end(), pair.true_ir.begin());
  std::copy(est_ir.begin(), est_ir.end(), pair.est_ir.begin());
  return pair;
}

NmResult normalized_misalignment(std::span<const AlignedPair> pairs) {
  NmResult out;
  double sum_db = 0.0;
  for (const auto& pair : pairs) {
    if (pair.true_ir.size() != pair.est_ir.size())
      throw std::invalid_argument("normalized_misalignment: pair length mismatch");
    const double denom = kernels::sum_sq(pair.true_ir.data(), pair.true_ir.size());
    if (denom == 0.0) {
      ++out.skipped_zero_norm;
      continue;
    }
    double num = 0.0;
    for (std::size_t k = 0; k < pair.true_ir.size(); ++k) {
      const double diff = pair.true_ir[k] - pair.est_ir[k];
      num += diff * diff;
    }
    double db = kNmFloorDb;
    if (num > 0.0) db = std::max(kNmFloorDb, 10.0 * std::log10(num / denom));
    if (db == kNmFloorDb) out.exact_match = true;
    sum_db += db;
    ++out.evaluated;
  }
  if (out.evaluated == 0)
    throw std::invalid_argument("normalized_misalignment: every true IR has zero norm");
  out.nm_db = sum_db / static_cast<double>(out.evaluated);
  return out;
}

double log_spectral_distortion(std::span<const AlignedPair> pairs, std::size_t fft_size,
                               const Band& band, double sample_rate) {
  if (pairs.empty()) throw std::invalid_argument("log_spectral_distortion: no pairs");
  if (!fft::is_pow2(fft_size))
    throw std::invalid_argument("log_spectral_distortion: fft_size must be a power of two");
  if (!(sample_rate > 0.0))
    throw std::invalid_argument("log_spectral_distortion: sample_rate must be > 0");
  const double hi = band.hi_hz > 0.0 ? band.hi_hz : sample_rate / 2.0;
  if (band.lo_hz < 0.0 || hi > sample_rate / 2.0 || band.lo_hz >= hi)
    throw std::invalid_argument("log_spectral_distortion: bad band");

  // One-sided bins, DC excluded.
  std::vector<std::size_t> bins;
  for (std::size_t i = 1; i <= fft_size / 2; ++i) {
    const double f = static_cast<double>(i) * sample_rate / static_cast<double>(fft_size);
    if (f >= band.lo_hz && f <= hi) bins.push_back(i);
  }
  if (bins.empty()) throw std::invalid_argument("log_spectral_distortion: empty band");

  double sum_sq_db = 0.0;
  std::size_t count = 0;
  for (const auto& pair : pairs) {
    if (pair.true_ir.size() > fft_size || pair.est_ir.size() > fft_size)
      throw std::invalid_argument("log_spectral_distortion: fft_size < IR length");
    const auto spec_true = fft::real_spectrum(pair.true_ir, fft_size);
    const auto spec_est = fft::real_spectrum(pair.est_ir, fft_size);
    for (const std::size_t i : bins) {
      const double mag_true = std::max(kMagnitudeFloor, std::abs(spec_true[i]));
      const double mag_est = std::max(kMagnitudeFloor, std::abs(spec_est[i]));
      const double db = 20.0 * std::log10(mag_true / mag_est);
      sum_sq_db += db * db;
      ++count;
    }
  }
  return std::sqrt(sum_sq_db / static_cast<double>(count));
}

double itd_seconds(std::span<const double> h_left, std::span<const double> h_right,
                   std::size_t max_lag, double sample_rate) {
  if (h_left.size() != h_right.size())
    throw std::invalid_argument("itd: IR length mismatch");
  const std::size_t k_len = h_left.size();
  if (k_len == 0 || max_lag >= k_len)
    throw std::invalid_argument("itd: max_lag must be smaller than the IR length");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("itd: sample_rate must be > 0");

  const double energy_l = kernels::sum_sq(h_left.data(), k_len);
  const double energy_r = kernels::sum_sq(h_right.data(), k_len);
  if (energy_l == 0.0 || energy_r == 0.0)
    throw std::invalid_argument("itd: zero-energy input");
  const double norm = std::sqrt(energy_l * energy_r);

  // corr(tau) = sum_k hl(k) hr(k + tau); out-of-range samples read as zero.
  const auto lag_limit = static_cast<std::ptrdiff_t>(max_lag);
  double best_value = -std::numeric_limits<double>::infinity();
  std::ptrdiff_t best_tau = 0;
  for (std::ptrdiff_t tau = -lag_limit; tau <= lag_limit; ++tau) {
    const std::size_t lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -tau));
    const std::size_t hi =
        static_cast<std::size_t>(std::min<std::ptrdiff_t>(k_len, static_cast<std::ptrdiff_t>(k_len) - tau));
    double acc = 0.0;
    if (lo < hi)
      acc = kernels::dot(h_left.data() + lo, h_right.data() + lo + tau, hi - lo);
    const double value = acc / norm;
    if (value > best_value ||
        (value == best_value && std::abs(tau) < std::abs(best_tau))) {
      best_value = value;
      best_tau = tau;
    }
  }
  return static_cast<double>(best_tau) / sample_rate;
}

void time_window(std::span<double> ir, double t0_s, double t1_s, double sample_rate) {
  if (!(t0_s >= 0.0) || !(t1_s > t0_s))
    throw std::invalid_argument("time_window: need 0 <= t0 < t1");
  if (!(sample_rate > 0.0))
    throw std::invalid_argument("time_window: sample_rate must be > 0");
  for (std::size_t k = 0; k < ir.size(); ++k) {
    const double t = static_cast<double>(k) / sample_rate;
    if (t < t0_s || t >= t1_s) ir[k] = 0.0;
  }
}

void otf_compensate(std::span<std::complex<double>> spectrum,
                    std::span<const std::complex<double>> otf, double reg) {
  if (spectrum.size() != otf.size())
    throw std::invalid_argument("otf_compensate: bin count mismatch");
  if (reg < 0.0) throw std::invalid_argument("otf_compensate: reg must be >= 0");
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    const double denom = std::norm(otf[i]) + reg;
    spectrum[i] = spectrum[i] * std::conj(otf[i]) / denom;
  }
}

std::vector<MappedSnapshot> azimuth_map(const ident::IdentificationResult& result,
                                        std::span<const double> targets_deg) {
  if (result.snapshot_count() == 0)
    throw std::invalid_argument("azimuth_map: result holds no snapshots");

  std::vector<MappedSnapshot> out;
  out.reserve(targets_deg.size());
  for (const double target : targets_deg) {
    std::size_t best = 0;
    double best_d = circular_distance_deg(result.snapshot_azimuth_deg[0], target);
    for (std::size_t i = 1; i < result.snapshot_count(); ++i) {
      const double dist = circular_distance_deg(result.snapshot_azimuth_deg[i], target);
      if (dist < best_d) {
        best_d = dist;
        best = i;
      }
    }
    MappedSnapshot m;
    m.target_deg = target;
    m.tag_deg = result.snapshot_azimuth_deg[best];
    m.snapshot = best;
    const auto h = result.snapshot(best);
    m.h.assign(h.begin(), h.end());
    out.push_back(std::move(m));
  }
  return out;
}

std::span<const double> speaker_ir(std::span<const double> flat, std::size_t s,
                                   std::size_t taps) {
  if ((s + 1) * taps > flat.size())
    throw std::invalid_argument("speaker_ir: block out of range");
  return flat.subspan(s * taps, taps);
}

std::vector<ItdRow> itd_error_table(std::span<const BinauralIr> truth,
                                    std::span<const BinauralIr> est,
                                    std::span<const double> azimuths_deg,
                                    std::size_t max_lag, double sample_rate) {
  if (truth.size() != azimuths_deg.size() || est.size() != azimuths_deg.size())
    throw std::invalid_argument("itd_error_table: sets do not cover the azimuth list");
  std::vector<ItdRow> rows;
  rows.reserve(azimuths_deg.size());
  for (std::size_t i = 0; i < azimuths_deg.size(); ++i) {
    ItdRow row;
    row.azimuth_deg = azimuths_deg[i];
    row.itd_true_s = itd_seconds(truth[i].left, truth[i].right, max_lag, sample_rate);
    row.itd_est_s = itd_seconds(est[i].left, est[i].right, max_lag, sample_rate);
    row.abs_err_s = std::abs(row.itd_est_s - row.itd_true_s);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace rotir::metrics
