#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "rotir/signals.hpp"

// Ground-truth time-varying IR trajectories (from an azimuth-gridded dataset
// or synthetic generators) and the microphone-signal renderer.
namespace rotir::scenario {

struct RotationProfile {
  double theta0_deg = 0.0;
  double omega_deg_per_s = 0.0;
  double sample_rate = 0.0;

  // theta(n) wrapped to [0, 360).
  double angle_deg(std::size_t n) const;
  // theta0 + omega * n / fs without wrapping (used by delay schedules).
  double angle_unwrapped_deg(std::size_t n) const;
};

// Azimuth-gridded IR dataset: `rows` IRs per grid azimuth (one row per
// speaker position), each of length `taps`.
struct IRDatasetGrid {
  std::vector<double> azimuths_deg;  // strictly increasing, in [0, 360)
  std::size_t rows = 0;
  std::size_t taps = 0;
  double sample_rate = 0.0;
  std::vector<double> irs;  // [azimuth][row][tap]

  const double* ir(std::size_t az_index, std::size_t row) const {
    return irs.data() + (az_index * rows + row) * taps;
  }
  void validate() const;
};

// Two-neighbour inverse-distance interpolation over the circular azimuth
// axis. Exact grid hits return the stored IR. out.size() == grid.taps.
void idw_interpolate(const IRDatasetGrid& grid, double azimuth_deg, std::size_t row,
                     std::span<double> out);

// h_{n,s}(k) over the whole sequence. Grid-backed trajectories evaluate
// frames on demand; synthetic ones are materialized (desk scale).
class IRTrajectory {
 public:
  std::size_t length() const { return length_; }    // N
  std::size_t speakers() const { return speakers_; }  // S
  std::size_t taps() const { return taps_; }          // K
  const RotationProfile& rotation() const { return rotation_; }

  // Writes the frame h_n as a row-major speakers x taps block.
  void frame(std::size_t n, std::span<double> out) const;
  double at(std::size_t n, std::size_t s, std::size_t k) const;

  struct Source;
  IRTrajectory(std::shared_ptr<const Source> src, std::size_t n, std::size_t s,
               std::size_t k, RotationProfile rot);

  static IRTrajectory materialized(std::size_t speakers, std::size_t taps,
                                   RotationProfile rot, std::vector<double> data);

 private:
  std::shared_ptr<const Source> source_;
  std::size_t length_ = 0, speakers_ = 0, taps_ = 0;
  RotationProfile rotation_;
};

// Assigns each speaker a grid row plus an azimuth offset added to theta(n).
struct SpeakerPick {
  std::size_t grid_row = 0;
  double azimuth_offset_deg = 0.0;
};

IRTrajectory trajectory_from_grid(const IRDatasetGrid& grid, const RotationProfile& rotation,
                                  std::size_t length, std::size_t speakers,
                                  const std::vector<SpeakerPick>& picks);

// Synthetic ground truths for desk-scale experiments.
struct StaticParams {
  std::size_t speakers = 1, taps = 8;
  std::uint64_t seed = 0;
};
// Windowed-sinc fractional delay whose delay (in samples) varies linearly
// with the unwrapped rotation angle: delay_s(n) = delay0 + per_deg * theta(n).
struct FractionalDelayPanParams {
  std::size_t speakers = 1, taps = 32;
  double delay0 = 12.0;
  double delay_per_deg = 0.0;
  std::size_t window_halfwidth = 6;
  double amplitude = 1.0;
};
// Per-tap AR(1) processes: h_{n+1} = rho h_n + sqrt(1-rho^2) amp env(k) w_n.
struct SmoothRandomParams {
  std::size_t speakers = 1, taps = 8;
  double rho = 0.999;
  double amplitude = 1.0;
  std::uint64_t seed = 0;
};
using SynthParams = std::variant<StaticParams, FractionalDelayPanParams, SmoothRandomParams>;

IRTrajectory synth_trajectory(const SynthParams& params, const RotationProfile& rotation,
                              std::size_t length);

struct Recording {
  std::vector<double> samples;  // y(n), length N
  double noise_variance = 0.0;
  std::optional<double> snr_db;  // 10 log10(clean power / noise variance)
  std::uint64_t seed = 0;
};

// y(n) = sum_s sum_k x_s(n-k) h_{n,s}(k) + v(n) with seeded white Gaussian
// noise. The bank must cover the trajectory: same S, length >= N.
Recording render(const IRTrajectory& traj, const signals::ExcitationBank& bank,
                 double noise_variance, std::uint64_t seed);

double snr_to_variance(double clean_power, double target_snr_db);

}  // namespace rotir::scenario
