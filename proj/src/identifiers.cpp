#include "rotir/identifiers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rotir/errors.hpp"
#include "rotir/kernels.hpp"

namespace rotir::ident {

double estimation_error(std::span<const double> x, double y, std::span<const double> h_hat) {
  if (x.size() != h_hat.size())
    throw std::invalid_argument("estimation_error: dimension mismatch");
  return y - kernels::dot(x.data(), h_hat.data(), x.size());
}

void ise_gradient(std::span<const double> x, double e, std::span<double> grad) {
  if (grad.size() != x.size()) throw std::invalid_argument("ise_gradient: size mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) grad[i] = x[i] * e;
}

StepRecord make_step_record(std::span<const double> x, double y,
                            std::span<const double> h_hat) {
  StepRecord rec;
  rec.e = estimation_error(x, y, h_hat);
  rec.ise = rec.e * rec.e;
  rec.grad.resize(x.size());
  ise_gradient(x, rec.e, rec.grad);
  return rec;
}

double lms_step(std::span<double> h_hat, std::span<const double> x, double y, double mu) {
  if (mu < 0.0) throw std::invalid_argument("lms_step: mu must be >= 0");
  const double e = estimation_error(x, y, h_hat);
  kernels::axpy(mu * e, x.data(), h_hat.data(), x.size());
  return e;
}

double nlms_step(std::span<double> h_hat, std::span<const double> x, double y, double mu,
                 double eps) {
  if (eps <= 0.0) throw std::invalid_argument("nlms_step: eps must be > 0");
  const double e = estimation_error(x, y, h_hat);
  const double power = kernels::sum_sq(x.data(), x.size());
  kernels::axpy(mu * e / (power + eps), x.data(), h_hat.data(), x.size());
  return e;
}

KalmanState KalmanState::create(std::size_t dim, double q, double r, double p0,
                                bool diagonal) {
  if (dim == 0) throw std::invalid_argument("kalman: dim must be >= 1");
  if (q < 0.0 || r < 0.0 || p0 < 0.0)
    throw std::invalid_argument("kalman: q, r, p0 must be >= 0");
  KalmanState st;
  st.h_hat.assign(dim, 0.0);
  st.q = q;
  st.r = r;
  st.diagonal = diagonal;
  if (diagonal) {
    st.cov.assign(dim, p0);
  } else {
    st.cov.assign(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) st.cov[i * dim + i] = p0;
  }
  return st;
}

double kalman_step(KalmanState& state, std::span<const double> x, double y) {
  const std::size_t d = state.dim();
  if (x.size() != d) throw std::invalid_argument("kalman_step: dimension mismatch");

  const double e = estimation_error(x, y, state.h_hat);

  if (state.diagonal) {
    // Diagonal-covariance approximation: prediction adds q per tap, the
    // update keeps only the diagonal of the full correction.
    double s = state.r;
    for (std::size_t i = 0; i < d; ++i) {
      state.cov[i] += state.q;
      s += x[i] * x[i] * state.cov[i];
    }
    if (!std::isfinite(s) || s <= 0.0)
      throw numerical_failure("kalman_step: non-finite innovation variance");
    for (std::size_t i = 0; i < d; ++i) {
      const double px = state.cov[i] * x[i];
      const double g = px / s;
      state.h_hat[i] += g * e;
      state.cov[i] = std::max(0.0, state.cov[i] - g * px);
    }
    return e;
  }

  // P- = P + q I
  for (std::size_t i = 0; i < d; ++i) state.cov[i * d + i] += state.q;
  // px = P- x; innovation variance s = x' P- x + r
  std::vector<double> px(d);
  kernels::matvec(state.cov.data(), x.data(), px.data(), d, d);
  const double s = kernels::dot(x.data(), px.data(), d) + state.r;
  if (!std::isfinite(s) || s <= 0.0)
    throw numerical_failure("kalman_step: non-finite innovation variance");
  // h' = h + g e with g = px / s; P' = P- - px px' / s, then symmetrize.
  kernels::axpy(e / s, px.data(), state.h_hat.data(), d);
  kernels::ger(state.cov.data(), -1.0 / s, px.data(), px.data(), d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double avg = 0.5 * (state.cov[i * d + j] + state.cov[j * d + i]);
      state.cov[i * d + j] = avg;
      state.cov[j * d + i] = avg;
    }
  return e;
}

JoNlmsState JoNlmsState::create(std::size_t dim, double sigma_v2, double m0) {
  if (dim == 0) throw std::invalid_argument("jo_nlms: dim must be >= 1");
  if (sigma_v2 < 0.0 || m0 < 0.0)
    throw std::invalid_argument("jo_nlms: sigma_v2 and m0 must be >= 0");
  JoNlmsState st;
  st.h_hat.assign(dim, 0.0);
  st.m = m0;
  st.sigma_v2 = sigma_v2;
  return st;
}

double jo_nlms_step(JoNlmsState& state, std::span<const double> x, double y) {
  const std::size_t d = state.h_hat.size();
  if (x.size() != d) throw std::invalid_argument("jo_nlms_step: dimension mismatch");
  if (state.m < 0.0) throw std::invalid_argument("jo_nlms_step: m must be >= 0");

  const double e = estimation_error(x, y, state.h_hat);
  const double power = kernels::sum_sq(x.data(), x.size());
  const double denom = state.m * power + static_cast<double>(d) * state.sigma_v2;
  if (denom <= 0.0) return e;  // zero regressor with zero noise model: no update
  const double mu_n = state.m / denom;
  if (!std::isfinite(mu_n)) throw numerical_failure("jo_nlms_step: non-finite step size");
  kernels::axpy(mu_n * e, x.data(), state.h_hat.data(), d);
  state.m = std::max(0.0, state.m * (1.0 - mu_n * power / static_cast<double>(d)));
  return e;
}

std::string AlgoConfig::name() const {
  switch (kind) {
    case Kind::Lms: return "lms";
    case Kind::Nlms: return "nlms";
    case Kind::JoNlms: return "jo_nlms";
    case Kind::Kalman: return "kalman";
  }
  return "unknown";
}

std::map<std::string, double> AlgoConfig::hyperparameters() const {
  switch (kind) {
    case Kind::Lms:
      return {{"mu", mu}};
    case Kind::Nlms:
      return {{"mu", mu}, {"eps", eps}};
    case Kind::JoNlms:
      return {{"sigma_v2", sigma_v2}, {"m0", m0}};
    case Kind::Kalman:
      return {{"q", q}, {"r", r}, {"p0", p0}, {"diagonal", kalman_diagonal ? 1.0 : 0.0}};
  }
  return {};
}

StorePolicy StorePolicy::every() { return StorePolicy{Mode::Every, 1, {}}; }

StorePolicy StorePolicy::strided(std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("store policy: stride must be >= 1");
  return StorePolicy{Mode::Stride, stride, {}};
}

StorePolicy StorePolicy::at_indices(std::vector<std::size_t> indices) {
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  return StorePolicy{Mode::Indices, 1, std::move(indices)};
}

namespace {

double circular_distance_deg(double a, double b) {
  double diff = std::fmod(std::abs(a - b), 360.0);
  return std::min(diff, 360.0 - diff);
}

}  // namespace

std::vector<std::size_t> azimuth_snapshot_indices(const scenario::RotationProfile& rotation,
                                                  std::size_t n_begin, std::size_t n_end,
                                                  std::span<const double> targets_deg) {
  if (n_begin >= n_end)
    throw std::invalid_argument("azimuth_snapshot_indices: empty frame range");
  if (rotation.sample_rate <= 0.0)
    throw std::invalid_argument("azimuth_snapshot_indices: sample_rate must be > 0");

  std::vector<std::size_t> out;
  out.reserve(targets_deg.size());
  const double step = rotation.omega_deg_per_s / rotation.sample_rate;  // deg per sample
  for (double target : targets_deg) {
    std::size_t best_n = n_begin;
    double best_d = circular_distance_deg(rotation.angle_deg(n_begin), target);
    if (step == 0.0) {
      out.push_back(best_n);
      continue;
    }
    // Candidate frames where theta(n) passes the target, one per wrap.
    const double theta_b = rotation.angle_unwrapped_deg(n_begin);
    const double theta_e = rotation.angle_unwrapped_deg(n_end - 1);
    const double lo = std::min(theta_b, theta_e), hi = std::max(theta_b, theta_e);
    const double first_k = std::floor((lo - target) / 360.0);
    const double last_k = std::ceil((hi - target) / 360.0);
    for (double k = first_k; k <= last_k; k += 1.0) {
      const double n_exact = (target + 360.0 * k - rotation.theta0_deg) / step;
      for (const double cand : {std::floor(n_exact), std::ceil(n_exact)}) {
        if (cand < static_cast<double>(n_begin) || cand >= static_cast<double>(n_end))
          continue;
        const auto n = static_cast<std::size_t>(cand);
        const double dist = circular_distance_deg(rotation.angle_deg(n), target);
        if (dist < best_d) {
          best_d = dist;
          best_n = n;
        }
      }
    }
    out.push_back(best_n);
  }
  return out;
}

namespace {

struct SnapshotWriter {
  const StorePolicy& policy;
  IdentificationResult& result;
  const scenario::RotationProfile& rotation;
  std::size_t next_index_pos = 0;

  bool wants(std::size_t n) const {
    switch (policy.mode) {
      case StorePolicy::Mode::Every:
        return true;
      case StorePolicy::Mode::Stride:
        return n % policy.stride == 0;
      case StorePolicy::Mode::Indices:
        return next_index_pos < policy.indices.size() &&
               policy.indices[next_index_pos] == n;
    }
    return false;
  }

  void store(std::size_t n, std::span<const double> h) {
    if (!wants(n)) return;
    if (policy.mode == StorePolicy::Mode::Indices) ++next_index_pos;
    result.snapshot_index.push_back(n);
    result.snapshot_azimuth_deg.push_back(rotation.angle_deg(n));
    result.snapshots.insert(result.snapshots.end(), h.begin(), h.end());
  }
};

}  // namespace

IdentificationResult run_identifier(const AlgoConfig& algo,
                                    const signals::ExcitationBank& bank,
                                    const scenario::Recording& recording,
                                    const StorePolicy& policy,
                                    const scenario::RotationProfile& rotation) {
  const std::size_t n_frames = recording.samples.size();
  if (n_frames > bank.length)
    throw std::invalid_argument("run_identifier: recording longer than excitation bank");
  const std::size_t dim = bank.speakers * bank.taps;

  IdentificationResult result;
  result.algo = algo.name();
  result.n_frames = n_frames;
  result.speakers = bank.speakers;
  result.taps = bank.taps;
  result.e_trace.reserve(n_frames);
  result.segment_starts = {0};
  result.failures = {""};

  AlgoConfig cfg = algo;
  if (cfg.kind == AlgoConfig::Kind::Nlms && cfg.eps <= 0.0) cfg.eps = default_nlms_eps(dim);
  result.hyperparameters = cfg.hyperparameters();
  if (n_frames == 0) return result;

  std::vector<double> h(dim, 0.0);
  std::vector<double> x(dim);
  KalmanState kalman;
  JoNlmsState jo;
  if (cfg.kind == AlgoConfig::Kind::Kalman)
    kalman = KalmanState::create(dim, cfg.q, cfg.r, cfg.p0, cfg.kalman_diagonal);
  if (cfg.kind == AlgoConfig::Kind::JoNlms) jo = JoNlmsState::create(dim, cfg.sigma_v2, cfg.m0);

  SnapshotWriter writer{policy, result, rotation};
  for (std::size_t n = 0; n < n_frames; ++n) {
    std::span<const double> h_now(h);
    if (cfg.kind == AlgoConfig::Kind::Kalman) h_now = kalman.h_hat;
    if (cfg.kind == AlgoConfig::Kind::JoNlms) h_now = jo.h_hat;
    writer.store(n, h_now);

    signals::fill_regressor(bank, n, x);
    const double y = recording.samples[n];
    double e = 0.0;
    try {
      switch (cfg.kind) {
        case AlgoConfig::Kind::Lms:
          e = lms_step(h, x, y, cfg.mu);
          break;
        case AlgoConfig::Kind::Nlms:
          e = nlms_step(h, x, y, cfg.mu, cfg.eps);
          break;
        case AlgoConfig::Kind::JoNlms:
          e = jo_nlms_step(jo, x, y);
          break;
        case AlgoConfig::Kind::Kalman:
          e = kalman_step(kalman, x, y);
          break;
      }
    } catch (const numerical_failure& failure) {
      throw numerical_failure("frame " + std::to_string(n) + ": " + failure.what());
    }
    result.e_trace.push_back(e);
  }

  // Only an explicit index list may ask for the post-run estimate h_N;
  // Every/Stride emit exactly the per-loop estimates h_0 .. h_{N-1}.
  if (policy.mode == StorePolicy::Mode::Indices) {
    std::span<const double> h_final(h);
    if (cfg.kind == AlgoConfig::Kind::Kalman) h_final = kalman.h_hat;
    if (cfg.kind == AlgoConfig::Kind::JoNlms) h_final = jo.h_hat;
    writer.store(n_frames, h_final);
  }
  return result;
}

}  // namespace rotir::ident
