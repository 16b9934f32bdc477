#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "rotir/identifiers.hpp"

// Evaluation of identified trajectories: normalized misalignment, log
// spectral distortion, interaural time difference, azimuth alignment and the
// post-processing helpers (time windowing, OTF compensation).
namespace rotir::metrics {

// True/estimated IR pair, zero-padded to a common length.
struct AlignedPair {
  std::vector<double> true_ir;
  std::vector<double> est_ir;
};

AlignedPair make_aligned(std::span<const double> true_ir, std::span<const double> est_ir);

struct NmResult {
  double nm_db = 0.0;
  std::size_t evaluated = 0;         // pairs entering the mean
  std::size_t skipped_zero_norm = 0; // pairs with zero-energy true IR
  bool exact_match = false;          // some pair hit the -300 dB floor
};

// Mean over pairs of 10 log10(|h - h_est|^2 / |h|^2), each term floored at
// -300 dB. Zero-norm true IRs are excluded and counted.
NmResult normalized_misalignment(std::span<const AlignedPair> pairs);

struct Band {
  double lo_hz = 0.0;  // 0 keeps everything above DC
  double hi_hz = 0.0;
};

// RMS over (pair, bin) of 20 log10(|H|/|H_est|) on the one-sided spectrum,
// fft_size a power of two >= the IR length, magnitudes floored at 1e-12,
// bins restricted to the band (DC excluded).
double log_spectral_distortion(std::span<const AlignedPair> pairs, std::size_t fft_size,
                               const Band& band, double sample_rate);

// Lag (in seconds) maximizing the normalized interaural cross-correlation
// sum_k hl(k) hr(k + tau) over tau in [-max_lag, max_lag]; positive when the
// right ear lags. Ties break toward smaller |tau|.
double itd_seconds(std::span<const double> h_left, std::span<const double> h_right,
                   std::size_t max_lag, double sample_rate);

// Zeroes samples outside [t0*fs, t1*fs).
void time_window(std::span<double> ir, double t0_s, double t1_s, double sample_rate);

// Regularized spectral division: H * conj(O) / (|O|^2 + reg), in place.
void otf_compensate(std::span<std::complex<double>> spectrum,
                    std::span<const std::complex<double>> otf, double reg);

// Snapshot pick for one target azimuth: the stored estimate whose angle tag
// is circularly closest. The flat (1, taps*S) layout reshapes to (taps, S)
// with speaker s occupying block s.
struct MappedSnapshot {
  double target_deg = 0.0;
  double tag_deg = 0.0;
  std::size_t snapshot = 0;       // index into the result's snapshot list
  std::vector<double> h;          // speakers * taps, block per speaker
};

std::vector<MappedSnapshot> azimuth_map(const ident::IdentificationResult& result,
                                        std::span<const double> targets_deg);

// Block s of a flat estimate: the length-`taps` IR of speaker s.
std::span<const double> speaker_ir(std::span<const double> flat, std::size_t s,
                                   std::size_t taps);

struct BinauralIr {
  std::vector<double> left, right;
};

struct ItdRow {
  double azimuth_deg = 0.0;
  double itd_true_s = 0.0;
  double itd_est_s = 0.0;
  double abs_err_s = 0.0;
};

// |itd(est) - itd(true)| per azimuth. The IR sets are parallel to the
// azimuth list; a size mismatch means a missing azimuth.
std::vector<ItdRow> itd_error_table(std::span<const BinauralIr> truth,
                                    std::span<const BinauralIr> est,
                                    std::span<const double> azimuths_deg,
                                    std::size_t max_lag, double sample_rate);

}  // namespace rotir::metrics
