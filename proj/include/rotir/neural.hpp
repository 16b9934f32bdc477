#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "rotir/identifiers.hpp"
#include "rotir/scenario.hpp"
#include "rotir/signals.hpp"

// Trainable gated recurrent identifier: the cell that maps the ISE gradient,
// the regressor power and a hidden state to an additive estimate update, its
// exact reverse-mode differentiation through time, Adam, and the
// whole-sequence updating and optimization scheme.
namespace rotir::neural {

inline constexpr double kPowerEps = 1e-12;   // reciprocal-power guard
inline constexpr double kLossFloor = 1e-30;  // floor inside the log training loss

// All learnable tensors. d is the flat state width (speakers * taps).
struct DnnParams {
  std::size_t dim = 0;
  std::vector<double> norm_vec;                      // d; scales the reciprocal power
  std::vector<double> fc_c_w, fc_c_b;                // d*d, d; hidden-state path
  std::vector<double> gate_r_w, gate_r_u, gate_r_b;  // reset gate
  std::vector<double> gate_z_w, gate_z_u, gate_z_b;  // update gate
  std::vector<double> head1_w, head1_b;              // 3-layer output head,
  std::vector<double> head2_w, head2_b;              // tanh between layers,
  std::vector<double> head3_w, head3_b;              // linear output

  static constexpr std::size_t kTensorCount = 15;
  static const std::array<std::vector<double> DnnParams::*, kTensorCount>& tensor_members();
  static const std::array<std::string_view, kTensorCount>& tensor_names();

  // 8 d^2 + 7 d: eight square matrices, seven bias/scale vectors.
  static std::size_t expected_count(std::size_t d);
  std::size_t count() const;
  bool all_finite() const;
  void resize_zero(std::size_t d);
};

// fc_c and the head weights start as identity, gates at zero (half open),
// norm_vec at one: the first update reproduces an NLMS(mu=1) step for small
// inputs.
DnnParams init_identity(std::size_t d);

struct CellInput {
  std::vector<double> grad;  // ISE gradient, length d
  double power = 0.0;        // x . x
  std::vector<double> c;     // hidden state entering the step
};
struct CellOutput {
  std::vector<double> delta;   // additive estimate update
  std::vector<double> c_next;  // next hidden state, every entry in (-1, 1)
};
CellOutput cell_forward(const DnnParams& params, const CellInput& input);

// ln(L/N + floor)
double training_loss(double accumulated_ise, std::size_t n_frames);

// Per-step activations kept for the reverse pass.
struct SequenceCache {
  std::size_t dim = 0, steps = 0;
  std::vector<double> e, p;                    // scalars per step
  std::vector<double> c, u, r, z, g, t1, t2;   // steps x dim each
  std::vector<double> c_final;
  void resize(std::size_t d, std::size_t n);
};

struct SequenceRun {
  ident::IdentificationResult result;
  double accumulated_ise = 0.0;
  std::vector<double> h_final, c_final;
};

// Streams frames [n_begin, n_end), updating the estimate with the cell each
// sample. Passing a cache records the activations needed by
// backprop_sequence. Throws numerical_failure (with the frame index) when an
// intermediate stops being finite.
SequenceRun identify_sequence(const DnnParams& params, const signals::ExcitationBank& bank,
                              const scenario::Recording& recording, std::size_t n_begin,
                              std::size_t n_end, std::span<const double> h0,
                              std::span<const double> c0, const ident::StorePolicy& policy,
                              const scenario::RotationProfile& rotation,
                              SequenceCache* cache = nullptr);

struct BpttOptions {
  bool freeze_norm_vec = false;  // fixed-normalization ablation
};

// Exact gradient of the log training loss with respect to every tensor,
// propagated through both recurrent paths (hidden state and estimate).
DnnParams backprop_sequence(const DnnParams& params, const signals::ExcitationBank& bank,
                            std::size_t n_begin, std::size_t n_end,
                            const SequenceCache& cache, const BpttOptions& options = {});

struct TrainerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t max_epochs = 300;
  double convergence_tol = 1e-4;  // relative L_train improvement threshold
  std::size_t patience = 10;      // consecutive below-threshold epochs to stop
  double clip_norm = 0.0;         // global-norm gradient clip; 0 disables
  bool fixed_normalization = false;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AdamState {
  DnnParams m, v;
  std::size_t step = 0;
  static AdamState create(std::size_t d);
};

// Bias-corrected Adam; applies global-norm clipping to the gradients first
// when configured.
void adam_step(DnnParams& params, const DnnParams& grads, AdamState& state,
               const TrainerConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double l_train = 0.0;
  double wall_seconds = 0.0;
  bool failed = false;
};

struct TrainOutcome {
  DnnParams best_params;
  std::size_t best_epoch = 0;  // 0 when every epoch failed
  double best_l_train = 0.0;
  std::vector<EpochRecord> log;
  bool converged = false;
  bool aborted = false;  // three consecutive failed epochs
};

// One epoch = update the estimate over the whole range from zero state,
// take the log loss, backpropagate, one Adam step. Returns the parameters of
// the best epoch.
TrainOutcome train(const signals::ExcitationBank& bank, const scenario::Recording& recording,
                   std::size_t n_begin, std::size_t n_end, const TrainerConfig& cfg);

struct SegmentedRun {
  ident::IdentificationResult stitched;
  std::vector<TrainOutcome> segments;
};

// Splits [0, N) into `segments` contiguous ranges (last one truncated),
// trains each independently from zero state, then runs the trained cell over
// its segment. Segments may run on up to `workers` threads; results are
// independent of the worker count.
SegmentedRun segment_and_train(const signals::ExcitationBank& bank,
                               const scenario::Recording& recording, std::size_t segments,
                               const TrainerConfig& cfg, const ident::StorePolicy& policy,
                               const scenario::RotationProfile& rotation,
                               std::size_t workers = 1);

}  // namespace rotir::neural
