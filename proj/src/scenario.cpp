#include "rotir/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "rotir/kernels.hpp"
#include "rng.hpp"

namespace rotir::scenario {

double RotationProfile::angle_unwrapped_deg(std::size_t n) const {
  return theta0_deg + omega_deg_per_s * static_cast<double>(n) / sample_rate;
}

double RotationProfile::angle_deg(std::size_t n) const {
  double a = std::fmod(angle_unwrapped_deg(n), 360.0);
  if (a < 0.0) a += 360.0;
  return a;
}

void IRDatasetGrid::validate() const {
  if (azimuths_deg.size() < 2)
    throw std::invalid_argument("ir grid: need at least 2 azimuths");
  if (rows == 0 || taps == 0) throw std::invalid_argument("ir grid: empty rows/taps");
  if (sample_rate <= 0.0) throw std::invalid_argument("ir grid: sample_rate must be > 0");
  for (std::size_t i = 0; i < azimuths_deg.size(); ++i) {
    const double a = azimuths_deg[i];
    if (a < 0.0 || a >= 360.0)
      throw std::invalid_argument("ir grid: azimuths must lie in [0, 360)");
    if (i > 0 && a <= azimuths_deg[i - 1])
      throw std::invalid_argument("ir grid: azimuths must be strictly increasing");
  }
  if (irs.size() != azimuths_deg.size() * rows * taps)
    throw std::invalid_argument("ir grid: payload size mismatch");
  for (double v : irs)
    if (!std::isfinite(v)) throw std::invalid_argument("ir grid: non-finite IR sample");
}

void idw_interpolate(const IRDatasetGrid& grid, double azimuth_deg, std::size_t row,
                     std::span<double> out) {
  // Full grid validation is the caller's responsibility (trajectory_from_grid
  // runs it once); this is a per-sample hot path.
  if (grid.azimuths_deg.size() < 2) throw std::invalid_argument("idw: invalid grid");
  if (row >= grid.rows) throw std::invalid_argument("idw: row out of range");
  if (out.size() != grid.taps) throw std::invalid_argument("idw: output size mismatch");

  double az = std::fmod(azimuth_deg, 360.0);
  if (az < 0.0) az += 360.0;

  const auto& g = grid.azimuths_deg;
  const std::size_t m = g.size();

  // Bracketing neighbours on the circle; [last, first + 360) covers the wrap.
  std::size_t lo, hi;
  const auto it = std::upper_bound(g.begin(), g.end(), az);
  if (it == g.begin()) {  // below the first grid point: wrap segment
    lo = m - 1;
    hi = 0;
  } else {
    lo = static_cast<std::size_t>(it - g.begin()) - 1;
    hi = (lo + 1 == m) ? 0 : lo + 1;
  }

  double d_lo = az - g[lo];
  if (d_lo < 0.0) d_lo += 360.0;
  double d_hi = g[hi] - az;
  if (d_hi < 0.0) d_hi += 360.0;

  constexpr double kExactHit = 1e-12;
  const double* a = grid.ir(lo, row);
  const double* b = grid.ir(hi, row);
  if (d_lo <= kExactHit) {
    std::copy(a, a + grid.taps, out.begin());
    return;
  }
  if (d_hi <= kExactHit) {
    std::copy(b, b + grid.taps, out.begin());
    return;
  }
  // Weights proportional to inverse angular distance; with two neighbours
  // this reduces to linear interpolation.
  const double w_lo = d_hi / (d_lo + d_hi);
  const double w_hi = d_lo / (d_lo + d_hi);
  for (std::size_t k = 0; k < grid.taps; ++k) out[k] = w_lo * a[k] + w_hi * b[k];
}

struct IRTrajectory::Source {
  virtual ~Source() = default;
  virtual void frame(std::size_t n, std::span<double> out) const = 0;
};

IRTrajectory::IRTrajectory(std::shared_ptr<const Source> src, std::size_t n, std::size_t s,
                           std::size_t k, RotationProfile rot)
    : source_(std::move(src)), length_(n), speakers_(s), taps_(k), rotation_(rot) {}

void IRTrajectory::frame(std::size_t n, std::span<double> out) const {
  if (n >= length_) throw std::invalid_argument("trajectory: frame index out of range");
  if (out.size() != speakers_ * taps_)
    throw std::invalid_argument("trajectory: frame buffer size mismatch");
  source_->frame(n, out);
}

double IRTrajectory::at(std::size_t n, std::size_t s, std::size_t k) const {
  if (s >= speakers_ || k >= taps_)
    throw std::invalid_argument("trajectory: speaker/tap out of range");
  std::vector<double> buf(speakers_ * taps_);
  frame(n, buf);
  return buf[s * taps_ + k];
}

namespace {

struct MaterializedSource final : IRTrajectory::Source {
  std::size_t speakers, taps;
  std::vector<double> data;  // length x speakers x taps

  MaterializedSource(std::size_t s, std::size_t k, std::vector<double> d)
      : speakers(s), taps(k), data(std::move(d)) {}

  void frame(std::size_t n, std::span<double> out) const override {
    const double* src = data.data() + n * speakers * taps;
    std::copy(src, src + speakers * taps, out.begin());
  }
};

struct GridSource final : IRTrajectory::Source {
  IRDatasetGrid grid;  // owned copy; trajectories outlive caller state
  RotationProfile rotation;
  std::vector<SpeakerPick> picks;

  void frame(std::size_t n, std::span<double> out) const override {
    const double theta = rotation.angle_deg(n);
    for (std::size_t s = 0; s < picks.size(); ++s) {
      idw_interpolate(grid, theta + picks[s].azimuth_offset_deg, picks[s].grid_row,
                      out.subspan(s * grid.taps, grid.taps));
    }
  }
};

}  // namespace

IRTrajectory IRTrajectory::materialized(std::size_t speakers, std::size_t taps,
                                        RotationProfile rot, std::vector<double> data) {
  if (speakers == 0 || taps == 0 || data.size() % (speakers * taps) != 0)
    throw std::invalid_argument("trajectory: bad materialized dimensions");
  const std::size_t n = data.size() / (speakers * taps);
  auto src = std::make_shared<MaterializedSource>(speakers, taps, std::move(data));
  return IRTrajectory(std::move(src), n, speakers, taps, rot);
}

IRTrajectory trajectory_from_grid(const IRDatasetGrid& grid, const RotationProfile& rotation,
                                  std::size_t length, std::size_t speakers,
                                  const std::vector<SpeakerPick>& picks) {
  grid.validate();
  if (length == 0) throw std::invalid_argument("trajectory_from_grid: length must be >= 1");
  if (picks.size() != speakers)
    throw std::invalid_argument("trajectory_from_grid: one grid pick per speaker required");
  for (const auto& pk : picks)
    if (pk.grid_row >= grid.rows)
      throw std::invalid_argument("trajectory_from_grid: pick references missing grid row");
  auto src = std::make_shared<GridSource>();
  src->grid = grid;
  src->rotation = rotation;
  src->picks = picks;
  return IRTrajectory(std::move(src), length, speakers, grid.taps, rotation);
}

namespace {

std::vector<double> make_static_frames(const StaticParams& p, std::size_t length) {
  detail::GaussianSource gauss(p.seed);
  std::vector<double> frame0(p.speakers * p.taps);
  const double tau = static_cast<double>(p.taps) / 3.0;
  for (std::size_t s = 0; s < p.speakers; ++s)
    for (std::size_t k = 0; k < p.taps; ++k)
      frame0[s * p.taps + k] = gauss.next() * std::exp(-static_cast<double>(k) / tau);
  std::vector<double> data(length * frame0.size());
  for (std::size_t n = 0; n < length; ++n)
    std::copy(frame0.begin(), frame0.end(), data.begin() + n * frame0.size());
  return data;
}

double windowed_sinc(double t, double halfwidth) {
  if (std::abs(t) >= halfwidth) return 0.0;
  const double w = 0.5 * (1.0 + std::cos(std::numbers::pi * t / halfwidth));  // Hann
  if (t == 0.0) return w;
  const double x = std::numbers::pi * t;
  return w * std::sin(x) / x;
}

std::vector<double> make_pan_frames(const FractionalDelayPanParams& p,
                                    const RotationProfile& rot, std::size_t length) {
  if (p.window_halfwidth == 0)
    throw std::invalid_argument("fractional_delay_pan: window_halfwidth must be >= 1");
  std::vector<double> data(length * p.speakers * p.taps, 0.0);
  const double hw = static_cast<double>(p.window_halfwidth);
  for (std::size_t n = 0; n < length; ++n) {
    const double theta = rot.angle_unwrapped_deg(n);
    for (std::size_t s = 0; s < p.speakers; ++s) {
      // Speakers share the delay law, staggered by two samples each so
      // multi-speaker instances stay distinguishable.
      const double d = p.delay0 + p.delay_per_deg * theta + 2.0 * static_cast<double>(s);
      if (d < 0.0 || d >= static_cast<double>(p.taps))
        throw std::invalid_argument("fractional_delay_pan: delay leaves the IR support");
      double* h = data.data() + (n * p.speakers + s) * p.taps;
      for (std::size_t k = 0; k < p.taps; ++k)
        h[k] = p.amplitude * windowed_sinc(static_cast<double>(k) - d, hw);
    }
  }
  return data;
}

std::vector<double> make_smooth_random_frames(const SmoothRandomParams& p,
                                              std::size_t length) {
  if (!(p.rho >= 0.0 && p.rho < 1.0))
    throw std::invalid_argument("smooth_random: rho must lie in [0, 1)");
  detail::GaussianSource gauss(p.seed);
  const std::size_t fsz = p.speakers * p.taps;
  const double tau = static_cast<double>(p.taps) / 3.0;
  std::vector<double> env(p.taps);
  for (std::size_t k = 0; k < p.taps; ++k)
    env[k] = p.amplitude * std::exp(-static_cast<double>(k) / tau);

  std::vector<double> data(length * fsz);
  const double drive = std::sqrt(1.0 - p.rho * p.rho);
  for (std::size_t s = 0; s < p.speakers; ++s)
    for (std::size_t k = 0; k < p.taps; ++k) data[s * p.taps + k] = env[k] * gauss.next();
  for (std::size_t n = 1; n < length; ++n) {
    const double* prev = data.data() + (n - 1) * fsz;
    double* cur = data.data() + n * fsz;
    for (std::size_t s = 0; s < p.speakers; ++s)
      for (std::size_t k = 0; k < p.taps; ++k) {
        const std::size_t i = s * p.taps + k;
        cur[i] = p.rho * prev[i] + drive * env[k] * gauss.next();
      }
  }
  return data;
}

}  // namespace

IRTrajectory synth_trajectory(const SynthParams& params, const RotationProfile& rotation,
                              std::size_t length) {
  if (length == 0) throw std::invalid_argument("synth_trajectory: length must be >= 1");
  return std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if (p.speakers == 0 || p.taps == 0)
          throw std::invalid_argument("synth_trajectory: speakers/taps must be positive");
        std::vector<double> data;
        if constexpr (std::is_same_v<T, StaticParams>) {
          data = make_static_frames(p, length);
        } else if constexpr (std::is_same_v<T, FractionalDelayPanParams>) {
          data = make_pan_frames(p, rotation, length);
        } else {
          data = make_smooth_random_frames(p, length);
        }
        return IRTrajectory::materialized(p.speakers, p.taps, rotation, std::move(data));
      },
      params);
}

Recording render(const IRTrajectory& traj, const signals::ExcitationBank& bank,
                 double noise_variance, std::uint64_t seed) {
  if (bank.speakers != traj.speakers())
    throw std::invalid_argument("render: bank/trajectory speaker count mismatch");
  if (bank.length < traj.length())
    throw std::invalid_argument("render: bank shorter than trajectory");
  if (noise_variance < 0.0)
    throw std::invalid_argument("render: noise variance must be >= 0");

  const std::size_t n_frames = traj.length();
  const std::size_t s_count = traj.speakers();
  const std::size_t k_taps = traj.taps();

  Recording rec;
  rec.samples.resize(n_frames);
  rec.noise_variance = noise_variance;
  rec.seed = seed;

  std::vector<double> frame(s_count * k_taps);
  double clean_energy = 0.0;
  for (std::size_t n = 0; n < n_frames; ++n) {
    traj.frame(n, frame);
    double y = 0.0;
    const std::size_t avail = std::min(k_taps, n + 1);
    for (std::size_t s = 0; s < s_count; ++s) {
      y += kernels::dot_rev(bank.row(s) + n, frame.data() + s * k_taps, avail);
    }
    clean_energy += y * y;
    rec.samples[n] = y;
  }

  if (noise_variance > 0.0) {
    detail::GaussianSource gauss(detail::mix_seed(seed, 0x6e6f697365ull));  // "noise"
    const double sigma = std::sqrt(noise_variance);
    for (auto& y : rec.samples) y += sigma * gauss.next();
    const double clean_power = clean_energy / static_cast<double>(n_frames);
    rec.snr_db = 10.0 * std::log10(clean_power / noise_variance);
  }
  return rec;
}

double snr_to_variance(double clean_power, double target_snr_db) {
  if (!(clean_power > 0.0))
    throw std::invalid_argument("snr_to_variance: clean power must be > 0");
  return clean_power / std::pow(10.0, target_snr_db / 10.0);
}

}  // namespace rotir::scenario
