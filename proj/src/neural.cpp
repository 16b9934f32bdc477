#include "rotir/neural.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <thread>

#include "rotir/errors.hpp"
#include "rotir/kernels.hpp"

namespace rotir::neural {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

const std::array<std::vector<double> DnnParams::*, DnnParams::kTensorCount>&
DnnParams::tensor_members() {
  static const std::array<std::vector<double> DnnParams::*, kTensorCount> members = {
      &DnnParams::norm_vec, &DnnParams::fc_c_w,   &DnnParams::fc_c_b,
      &DnnParams::gate_r_w, &DnnParams::gate_r_u, &DnnParams::gate_r_b,
      &DnnParams::gate_z_w, &DnnParams::gate_z_u, &DnnParams::gate_z_b,
      &DnnParams::head1_w,  &DnnParams::head1_b,  &DnnParams::head2_w,
      &DnnParams::head2_b,  &DnnParams::head3_w,  &DnnParams::head3_b,
  };
  return members;
}

const std::array<std::string_view, DnnParams::kTensorCount>& DnnParams::tensor_names() {
  static const std::array<std::string_view, kTensorCount> names = {
      "norm_vec", "fc_c_w",   "fc_c_b",   "gate_r_w", "gate_r_u",
      "gate_r_b", "gate_z_w", "gate_z_u", "gate_z_b", "head1_w",
      "head1_b",  "head2_w",  "head2_b",  "head3_w",  "head3_b",
  };
  return names;
}

std::size_t DnnParams::expected_count(std::size_t d) { return 8 * d * d + 7 * d; }

std::size_t DnnParams::count() const {
  std::size_t total = 0;
  for (auto member : tensor_members()) total += (this->*member).size();
  return total;
}

bool DnnParams::all_finite() const {
  for (auto member : tensor_members())
    for (double v : this->*member)
      if (!std::isfinite(v)) return false;
  return true;
}

void DnnParams::resize_zero(std::size_t d) {
  if (d == 0) throw std::invalid_argument("dnn params: dim must be >= 1");
  dim = d;
  norm_vec.assign(d, 0.0);
  fc_c_w.assign(d * d, 0.0);
  fc_c_b.assign(d, 0.0);
  gate_r_w.assign(d * d, 0.0);
  gate_r_u.assign(d * d, 0.0);
  gate_r_b.assign(d, 0.0);
  gate_z_w.assign(d * d, 0.0);
  gate_z_u.assign(d * d, 0.0);
  gate_z_b.assign(d, 0.0);
  head1_w.assign(d * d, 0.0);
  head1_b.assign(d, 0.0);
  head2_w.assign(d * d, 0.0);
  head2_b.assign(d, 0.0);
  head3_w.assign(d * d, 0.0);
  head3_b.assign(d, 0.0);
}

DnnParams init_identity(std::size_t d) {
  DnnParams p;
  p.resize_zero(d);
  p.norm_vec.assign(d, 1.0);
  for (std::size_t i = 0; i < d; ++i) {
    p.fc_c_w[i * d + i] = 1.0;
    p.head1_w[i * d + i] = 1.0;
    p.head2_w[i * d + i] = 1.0;
    p.head3_w[i * d + i] = 1.0;
  }
  return p;
}

namespace {

// Scratch buffers reused across steps.
struct CellWorkspace {
  std::vector<double> x, u, r, z, q, g, t1, t2, delta, tmp;
  void resize(std::size_t d) {
    for (auto* v : {&x, &u, &r, &z, &q, &g, &t1, &t2, &delta, &tmp}) v->assign(d, 0.0);
  }
};

// One cell evaluation. e is the a-priori estimation error; x the regressor.
// c_in/c_out may not alias. Writes the activations that the reverse pass
// needs into the workspace members (u, r, z, g, t1, t2).
void cell_step(const DnnParams& p, double e, double inv_power,
               const double* x, const double* c_in, double* c_out,
               CellWorkspace& w) {
  const std::size_t d = p.dim;

  // u = (norm_vec * 1/(power+eps)) .* grad, folded as p*e * norm .* x.
  const double pe = inv_power * e;
  for (std::size_t i = 0; i < d; ++i) w.u[i] = pe * p.norm_vec[i] * x[i];

  // Gates.
  kernels::matvec(p.gate_r_w.data(), w.u.data(), w.r.data(), d, d);
  kernels::matvec(p.gate_r_u.data(), c_in, w.tmp.data(), d, d);
  for (std::size_t i = 0; i < d; ++i) w.r[i] = sigmoid(w.r[i] + w.tmp[i] + p.gate_r_b[i]);
  kernels::matvec(p.gate_z_w.data(), w.u.data(), w.z.data(), d, d);
  kernels::matvec(p.gate_z_u.data(), c_in, w.tmp.data(), d, d);
  for (std::size_t i = 0; i < d; ++i) w.z[i] = sigmoid(w.z[i] + w.tmp[i] + p.gate_z_b[i]);

  // g = u + fc_c(r .* c)
  for (std::size_t i = 0; i < d; ++i) w.q[i] = w.r[i] * c_in[i];
  kernels::matvec(p.fc_c_w.data(), w.q.data(), w.g.data(), d, d);
  for (std::size_t i = 0; i < d; ++i) w.g[i] += w.u[i] + p.fc_c_b[i];

  // c' = (1-z) .* c + z .* tanh(g)
  for (std::size_t i = 0; i < d; ++i)
    c_out[i] = (1.0 - w.z[i]) * c_in[i] + w.z[i] * std::tanh(w.g[i]);

  // delta = W3 tanh(W2 tanh(W1 g + b1) + b2) + b3
  kernels::matvec(p.head1_w.data(), w.g.data(), w.t1.data(), d, d);
  for (std::size_t i = 0; i < d; ++i) w.t1[i] = std::tanh(w.t1[i] + p.head1_b[i]);
  kernels::matvec(p.head2_w.data(), w.t1.data(), w.t2.data(), d, d);
  for (std::size_t i = 0; i < d; ++i) w.t2[i] = std::tanh(w.t2[i] + p.head2_b[i]);
  kernels::matvec(p.head3_w.data(), w.t2.data(), w.delta.data(), d, d);
  for (std::size_t i = 0; i < d; ++i) w.delta[i] += p.head3_b[i];
}

bool vec_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace

CellOutput cell_forward(const DnnParams& params, const CellInput& input) {
  const std::size_t d = params.dim;
  if (input.grad.size() != d || input.c.size() != d)
    throw std::invalid_argument("cell_forward: dimension mismatch");
  if (!(input.power >= 0.0))
    throw std::invalid_argument("cell_forward: power must be >= 0");

  // The streaming path folds grad = x*e; the standalone cell takes the
  // gradient directly, which is the same thing with e = 1 and x = grad.
  CellWorkspace w;
  w.resize(d);
  CellOutput out;
  out.c_next.resize(d);
  const double inv_power = 1.0 / (input.power + kPowerEps);
  cell_step(params, 1.0, inv_power, input.grad.data(), input.c.data(),
            out.c_next.data(), w);
  out.delta = w.delta;
  if (!vec_finite(out.delta) || !vec_finite(out.c_next))
    throw numerical_failure("cell_forward: non-finite output");
  return out;
}

double training_loss(double accumulated_ise, std::size_t n_frames) {
  if (accumulated_ise < 0.0) throw std::invalid_argument("training_loss: loss must be >= 0");
  if (n_frames == 0) throw std::invalid_argument("training_loss: need at least one frame");
  return std::log(accumulated_ise / static_cast<double>(n_frames) + kLossFloor);
}

void SequenceCache::resize(std::size_t d, std::size_t n) {
  dim = d;
  steps = n;
  e.assign(n, 0.0);
  p.assign(n, 0.0);
  for (auto* v : {&c, &u, &r, &z, &g, &t1, &t2}) v->assign(n * d, 0.0);
  c_final.assign(d, 0.0);
}

SequenceRun identify_sequence(const DnnParams& params, const signals::ExcitationBank& bank,
                              const scenario::Recording& recording, std::size_t n_begin,
                              std::size_t n_end, std::span<const double> h0,
                              std::span<const double> c0, const ident::StorePolicy& policy,
                              const scenario::RotationProfile& rotation,
                              SequenceCache* cache) {
  const std::size_t d = bank.speakers * bank.taps;
  if (params.dim != d)
    throw std::invalid_argument("identify_sequence: params/bank dimension mismatch");
  if (h0.size() != d || c0.size() != d)
    throw std::invalid_argument("identify_sequence: initial state dimension mismatch");
  if (n_end > recording.samples.size() || n_begin > n_end)
    throw std::invalid_argument("identify_sequence: bad frame range");
  if (n_end > bank.length)
    throw std::invalid_argument("identify_sequence: bank shorter than frame range");

  const std::size_t steps = n_end - n_begin;
  SequenceRun run;
  run.result.algo = "dnn";
  run.result.n_frames = steps;
  run.result.speakers = bank.speakers;
  run.result.taps = bank.taps;
  run.result.segment_starts = {n_begin};
  run.result.failures = {""};
  run.result.e_trace.reserve(steps);
  run.h_final.assign(h0.begin(), h0.end());
  run.c_final.assign(c0.begin(), c0.end());
  if (cache != nullptr) cache->resize(d, steps);
  if (steps == 0) return run;

  CellWorkspace w;
  w.resize(d);
  std::vector<double> c_next(d);

  // Snapshot bookkeeping mirrors run_identifier: h_n stored before step n.
  std::size_t index_pos = 0;
  auto maybe_store = [&](std::size_t n, const std::vector<double>& h) {
    bool want = false;
    switch (policy.mode) {
      case ident::StorePolicy::Mode::Every: want = true; break;
      case ident::StorePolicy::Mode::Stride: want = (n % policy.stride == 0); break;
      case ident::StorePolicy::Mode::Indices:
        while (index_pos < policy.indices.size() && policy.indices[index_pos] < n)
          ++index_pos;
        want = index_pos < policy.indices.size() && policy.indices[index_pos] == n;
        if (want) ++index_pos;
        break;
    }
    if (!want) return;
    run.result.snapshot_index.push_back(n);
    run.result.snapshot_azimuth_deg.push_back(rotation.angle_deg(n));
    run.result.snapshots.insert(run.result.snapshots.end(), h.begin(), h.end());
  };

  std::vector<double>& h = run.h_final;
  std::vector<double>& c = run.c_final;
  for (std::size_t n = n_begin; n < n_end; ++n) {
    const std::size_t k = n - n_begin;
    maybe_store(n, h);

    signals::fill_regressor(bank, n, w.x);
    const double e = recording.samples[n] - kernels::dot(w.x.data(), h.data(), d);
    const double power = kernels::sum_sq(w.x.data(), d);
    const double inv_power = 1.0 / (power + kPowerEps);
    run.accumulated_ise += e * e;
    run.result.e_trace.push_back(e);

    if (cache != nullptr) {
      cache->e[k] = e;
      cache->p[k] = inv_power;
      std::memcpy(cache->c.data() + k * d, c.data(), d * sizeof(double));
    }

    cell_step(params, e, inv_power, w.x.data(), c.data(), c_next.data(), w);

    if (!std::isfinite(e) || !vec_finite(w.delta) || !vec_finite(c_next))
      throw numerical_failure("identify_sequence: non-finite value at frame " +
                              std::to_string(n) + " (accumulated ISE " +
                              std::to_string(run.accumulated_ise) + ")");

    if (cache != nullptr) {
      std::memcpy(cache->u.data() + k * d, w.u.data(), d * sizeof(double));
      std::memcpy(cache->r.data() + k * d, w.r.data(), d * sizeof(double));
      std::memcpy(cache->z.data() + k * d, w.z.data(), d * sizeof(double));
      std::memcpy(cache->g.data() + k * d, w.g.data(), d * sizeof(double));
      std::memcpy(cache->t1.data() + k * d, w.t1.data(), d * sizeof(double));
      std::memcpy(cache->t2.data() + k * d, w.t2.data(), d * sizeof(double));
    }

    for (std::size_t i = 0; i < d; ++i) h[i] += w.delta[i];
    c.swap(c_next);
  }
  // As in run_identifier, only an explicit index list may ask for the
  // post-run estimate h_N.
  if (policy.mode == ident::StorePolicy::Mode::Indices) maybe_store(n_end, h);
  if (cache != nullptr)
    std::memcpy(cache->c_final.data(), c.data(), d * sizeof(double));
  return run;
}

DnnParams backprop_sequence(const DnnParams& params, const signals::ExcitationBank& bank,
                            std::size_t n_begin, std::size_t n_end,
                            const SequenceCache& cache, const BpttOptions& options) {
  const std::size_t d = params.dim;
  const std::size_t steps = n_end - n_begin;
  if (cache.dim != d || cache.steps != steps)
    throw std::runtime_error("backprop_sequence: cache does not match the forward run");

  DnnParams grads;
  grads.resize_zero(d);
  if (steps == 0) return grads;

  double loss_sum = 0.0;
  for (std::size_t k = 0; k < steps; ++k) loss_sum += cache.e[k] * cache.e[k];

  std::vector<double> hbar(d, 0.0), cbar(d, 0.0), cbar_next(d, 0.0);
  std::vector<double> x(d), q(d), gbar(d), ubar(d), t2bar(d), t1bar(d), tmp(d), zbar(d);

  for (std::size_t n = n_end; n-- > n_begin;) {
    const std::size_t k = n - n_begin;
    const double* c_n = cache.c.data() + k * d;
    const double* u_n = cache.u.data() + k * d;
    const double* r_n = cache.r.data() + k * d;
    const double* z_n = cache.z.data() + k * d;
    const double* g_n = cache.g.data() + k * d;
    const double* t1_n = cache.t1.data() + k * d;
    const double* t2_n = cache.t2.data() + k * d;
    const double e_n = cache.e[k];
    const double p_n = cache.p[k];
    signals::fill_regressor(bank, n, x);

    // Head: delta_bar is the estimate adjoint from the future.
    const double* delta_bar = hbar.data();
    kernels::ger(grads.head3_w.data(), 1.0, delta_bar, t2_n, d, d);
    kernels::axpy(1.0, delta_bar, grads.head3_b.data(), d);
    kernels::matvec_t(params.head3_w.data(), delta_bar, t2bar.data(), d, d);
    for (std::size_t i = 0; i < d; ++i) t2bar[i] *= 1.0 - t2_n[i] * t2_n[i];
    kernels::ger(grads.head2_w.data(), 1.0, t2bar.data(), t1_n, d, d);
    kernels::axpy(1.0, t2bar.data(), grads.head2_b.data(), d);
    kernels::matvec_t(params.head2_w.data(), t2bar.data(), t1bar.data(), d, d);
    for (std::size_t i = 0; i < d; ++i) t1bar[i] *= 1.0 - t1_n[i] * t1_n[i];
    kernels::ger(grads.head1_w.data(), 1.0, t1bar.data(), g_n, d, d);
    kernels::axpy(1.0, t1bar.data(), grads.head1_b.data(), d);
    kernels::matvec_t(params.head1_w.data(), t1bar.data(), gbar.data(), d, d);

    // Hidden-state blend: c' = (1-z) .* c + z .* tanh(g).
    for (std::size_t i = 0; i < d; ++i) {
      const double tg = std::tanh(g_n[i]);
      zbar[i] = cbar[i] * (tg - c_n[i]);
      gbar[i] += cbar[i] * z_n[i] * (1.0 - tg * tg);
    }

    // g = u + fc_c(r .* c) + b.
    for (std::size_t i = 0; i < d; ++i) q[i] = r_n[i] * c_n[i];
    kernels::ger(grads.fc_c_w.data(), 1.0, gbar.data(), q.data(), d, d);
    kernels::axpy(1.0, gbar.data(), grads.fc_c_b.data(), d);
    kernels::matvec_t(params.fc_c_w.data(), gbar.data(), tmp.data(), d, d);  // qbar

    // New hidden adjoint: direct blend path plus the fc_c path.
    for (std::size_t i = 0; i < d; ++i)
      cbar_next[i] = cbar[i] * (1.0 - z_n[i]) + tmp[i] * r_n[i];
    // rbar (reuse tmp): qbar .* c, then through the sigmoid.
    for (std::size_t i = 0; i < d; ++i)
      tmp[i] = tmp[i] * c_n[i] * r_n[i] * (1.0 - r_n[i]);  // pre-activation adjoint

    // Reset gate.
    kernels::ger(grads.gate_r_w.data(), 1.0, tmp.data(), u_n, d, d);
    kernels::ger(grads.gate_r_u.data(), 1.0, tmp.data(), c_n, d, d);
    kernels::axpy(1.0, tmp.data(), grads.gate_r_b.data(), d);
    ubar = gbar;  // direct u path inside g
    kernels::matvec_t(params.gate_r_w.data(), tmp.data(), gbar.data(), d, d);
    kernels::axpy(1.0, gbar.data(), ubar.data(), d);
    kernels::matvec_t(params.gate_r_u.data(), tmp.data(), gbar.data(), d, d);
    kernels::axpy(1.0, gbar.data(), cbar_next.data(), d);

    // Update gate.
    for (std::size_t i = 0; i < d; ++i) zbar[i] *= z_n[i] * (1.0 - z_n[i]);
    kernels::ger(grads.gate_z_w.data(), 1.0, zbar.data(), u_n, d, d);
    kernels::ger(grads.gate_z_u.data(), 1.0, zbar.data(), c_n, d, d);
    kernels::axpy(1.0, zbar.data(), grads.gate_z_b.data(), d);
    kernels::matvec_t(params.gate_z_w.data(), zbar.data(), gbar.data(), d, d);
    kernels::axpy(1.0, gbar.data(), ubar.data(), d);
    kernels::matvec_t(params.gate_z_u.data(), zbar.data(), gbar.data(), d, d);
    kernels::axpy(1.0, gbar.data(), cbar_next.data(), d);

    // u = (p * e) * norm .* x.
    const double pe = p_n * e_n;
    double ebar = 2.0 * e_n;  // direct ISE term of the raw loss
    if (!options.freeze_norm_vec) {
      for (std::size_t i = 0; i < d; ++i) grads.norm_vec[i] += ubar[i] * pe * x[i];
    }
    for (std::size_t i = 0; i < d; ++i) ebar += ubar[i] * p_n * params.norm_vec[i] * x[i];

    // e = y - x . h: fold into the estimate adjoint.
    kernels::axpy(-ebar, x.data(), hbar.data(), d);
    cbar.swap(cbar_next);
  }

  // Chain through L_train = ln(L/N + floor).
  const double scale =
      1.0 / (loss_sum + static_cast<double>(steps) * kLossFloor);
  for (auto member : DnnParams::tensor_members())
    kernels::scale(scale, (grads.*member).data(), (grads.*member).size());
  return grads;
}

void TrainerConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("trainer: lr must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("trainer: betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw std::invalid_argument("trainer: adam_eps must be > 0");
  if (max_epochs == 0) throw std::invalid_argument("trainer: max_epochs must be >= 1");
  if (clip_norm < 0.0) throw std::invalid_argument("trainer: clip_norm must be >= 0");
}

AdamState AdamState::create(std::size_t d) {
  AdamState st;
  st.m.resize_zero(d);
  st.v.resize_zero(d);
  st.step = 0;
  return st;
}

void adam_step(DnnParams& params, const DnnParams& grads, AdamState& state,
               const TrainerConfig& cfg) {
  cfg.validate();
  if (params.dim != grads.dim || params.dim != state.m.dim)
    throw std::invalid_argument("adam_step: dimension mismatch");

  double clip_scale = 1.0;
  if (cfg.clip_norm > 0.0) {
    double norm_sq = 0.0;
    for (auto member : DnnParams::tensor_members()) {
      const auto& g = grads.*member;
      norm_sq += kernels::sum_sq(g.data(), g.size());
    }
    const double norm = std::sqrt(norm_sq);
    if (norm > cfg.clip_norm) clip_scale = cfg.clip_norm / norm;
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (auto member : DnnParams::tensor_members()) {
    auto& p = params.*member;
    const auto& g = grads.*member;
    auto& m = state.m.*member;
    auto& v = state.v.*member;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = clip_scale * g[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.adam_eps);
    }
  }
}

TrainOutcome train(const signals::ExcitationBank& bank, const scenario::Recording& recording,
                   std::size_t n_begin, std::size_t n_end, const TrainerConfig& cfg) {
  cfg.validate();
  if (n_begin >= n_end) throw std::invalid_argument("train: empty frame range");
  const std::size_t d = bank.speakers * bank.taps;
  const std::size_t steps = n_end - n_begin;

  DnnParams params = init_identity(d);
  AdamState adam = AdamState::create(d);
  const std::vector<double> zero(d, 0.0);
  const ident::StorePolicy no_snapshots = ident::StorePolicy::at_indices({});
  const scenario::RotationProfile no_rotation{0.0, 0.0, 1.0};
  BpttOptions bptt{cfg.fixed_normalization};

  TrainOutcome out;
  out.best_params = params;
  out.best_l_train = std::numeric_limits<double>::infinity();

  SequenceCache cache;
  std::size_t consecutive_failures = 0;
  std::size_t quiet_epochs = 0;
  double prev_l_train = std::numeric_limits<double>::quiet_NaN();

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochRecord rec;
    rec.epoch = epoch;
    try {
      SequenceRun run = identify_sequence(params, bank, recording, n_begin, n_end, zero,
                                          zero, no_snapshots, no_rotation, &cache);
      rec.l_train = training_loss(run.accumulated_ise, steps);
      if (!std::isfinite(rec.l_train)) throw numerical_failure("train: non-finite loss");
      DnnParams grads = backprop_sequence(params, bank, n_begin, n_end, cache, bptt);
      if (rec.l_train < out.best_l_train) {
        out.best_l_train = rec.l_train;
        out.best_epoch = epoch;
        out.best_params = params;
      }
      adam_step(params, grads, adam, cfg);
      consecutive_failures = 0;
    } catch (const numerical_failure&) {
      rec.failed = true;
      rec.l_train = std::numeric_limits<double>::quiet_NaN();
      ++consecutive_failures;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.log.push_back(rec);

    if (consecutive_failures >= 3) {
      out.aborted = true;
      break;
    }
    if (!rec.failed) {
      if (std::isfinite(prev_l_train)) {
        const double improvement =
            (prev_l_train - rec.l_train) / std::max(1.0, std::abs(prev_l_train));
        quiet_epochs = (improvement < cfg.convergence_tol) ? quiet_epochs + 1 : 0;
        if (quiet_epochs >= cfg.patience) {
          out.converged = true;
          break;
        }
      }
      prev_l_train = rec.l_train;
    }
  }
  return out;
}

SegmentedRun segment_and_train(const signals::ExcitationBank& bank,
                               const scenario::Recording& recording, std::size_t segments,
                               const TrainerConfig& cfg, const ident::StorePolicy& policy,
                               const scenario::RotationProfile& rotation,
                               std::size_t workers) {
  if (segments == 0) throw std::invalid_argument("segment_and_train: segments must be >= 1");
  const std::size_t n_frames = recording.samples.size();
  if (n_frames < segments)
    throw std::invalid_argument("segment_and_train: more segments than frames");
  const std::size_t d = bank.speakers * bank.taps;
  const std::size_t seg_len = (n_frames + segments - 1) / segments;  // last one truncated

  struct SegmentSlot {
    std::size_t begin = 0, end = 0;
    TrainOutcome training;
    SequenceRun run;
    std::string failure;
  };
  std::vector<SegmentSlot> slots(segments);
  for (std::size_t i = 0; i < segments; ++i) {
    slots[i].begin = i * seg_len;
    slots[i].end = std::min(n_frames, (i + 1) * seg_len);
  }

  const std::vector<double> zero(d, 0.0);
  auto process = [&](SegmentSlot& slot) {
    try {
      slot.training = train(bank, recording, slot.begin, slot.end, cfg);
      slot.run = identify_sequence(slot.training.best_params, bank, recording, slot.begin,
                                   slot.end, zero, zero, policy, rotation, nullptr);
      if (slot.training.aborted) slot.failure = "training aborted after 3 failed epochs";
    } catch (const std::exception& ex) {
      slot.failure = ex.what();
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(workers, segments));
  if (n_workers == 1) {
    for (auto& slot : slots) process(slot);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t t = 0; t < n_workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < segments; i = next.fetch_add(1))
          process(slots[i]);
      });
    }
    for (auto& th : pool) th.join();
  }

  SegmentedRun out;
  out.stitched.algo = "dnn";
  out.stitched.n_frames = n_frames;
  out.stitched.speakers = bank.speakers;
  out.stitched.taps = bank.taps;
  for (auto& slot : slots) {
    out.stitched.segment_starts.push_back(slot.begin);
    out.stitched.failures.push_back(slot.failure);
    if (slot.failure.empty()) {
      auto& r = slot.run.result;
      out.stitched.snapshot_index.insert(out.stitched.snapshot_index.end(),
                                         r.snapshot_index.begin(), r.snapshot_index.end());
      out.stitched.snapshot_azimuth_deg.insert(out.stitched.snapshot_azimuth_deg.end(),
                                               r.snapshot_azimuth_deg.begin(),
                                               r.snapshot_azimuth_deg.end());
      out.stitched.snapshots.insert(out.stitched.snapshots.end(), r.snapshots.begin(),
                                    r.snapshots.end());
      out.stitched.e_trace.insert(out.stitched.e_trace.end(), r.e_trace.begin(),
                                  r.e_trace.end());
    }
    out.segments.push_back(std::move(slot.training));
  }
  return out;
}

}  // namespace rotir::neural
