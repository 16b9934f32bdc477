#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rotir/scenario.hpp"
#include "rotir/signals.hpp"

// Classical streaming identifiers sharing one step contract:
// LMS, NLMS, JO-NLMS, random-walk Kalman.
namespace rotir::ident {

// e(n) = y(n) - x . h_hat
double estimation_error(std::span<const double> x, double y, std::span<const double> h_hat);

// grad = x * e
void ise_gradient(std::span<const double> x, double e, std::span<double> grad);

struct StepRecord {
  double e = 0.0;
  double ise = 0.0;                // e^2
  std::vector<double> grad;        // x * e
};
StepRecord make_step_record(std::span<const double> x, double y,
                            std::span<const double> h_hat);

// In-place steps; each returns the a-priori error e(n).
double lms_step(std::span<double> h_hat, std::span<const double> x, double y, double mu);
double nlms_step(std::span<double> h_hat, std::span<const double> x, double y, double mu,
                 double eps);

// Default NLMS regularizer for a given state width (guards the partially
// zero pre-roll regressors).
inline double default_nlms_eps(std::size_t dim) { return 1e-8 * static_cast<double>(dim); }

// Random-walk Kalman: P- = P + q I, g = P- x / (x' P- x + r),
// h' = h + g e, P' = P- - g (x' P-), symmetrized. The diagonal mode keeps
// only diag(P) and trades accuracy for O(dim) memory.
struct KalmanState {
  std::vector<double> h_hat;
  std::vector<double> cov;  // dim*dim (full) or dim (diagonal)
  double q = 1e-7;
  double r = 0.01;
  bool diagonal = false;

  static KalmanState create(std::size_t dim, double q, double r, double p0,
                            bool diagonal = false);
  std::size_t dim() const { return h_hat.size(); }
};
double kalman_step(KalmanState& state, std::span<const double> x, double y);

// Scalar-step NLMS variant whose step size is computed jointly from the
// misalignment-power estimate m, the measurement noise variance and the
// regressor power. With sigma_v2 == 0 the step reduces to NLMS(mu=1) with
// vanishing regularization.
struct JoNlmsState {
  std::vector<double> h_hat;
  double m = 1.0;         // misalignment-power estimate, >= 0
  double sigma_v2 = 0.0;  // measurement noise variance

  static JoNlmsState create(std::size_t dim, double sigma_v2, double m0 = 1.0);
};
double jo_nlms_step(JoNlmsState& state, std::span<const double> x, double y);

struct AlgoConfig {
  enum class Kind { Lms, Nlms, JoNlms, Kalman };
  Kind kind = Kind::Nlms;
  double mu = 0.5;          // lms / nlms
  double eps = -1.0;        // nlms; < 0 picks default_nlms_eps(dim)
  double q = 1e-7;          // kalman process noise
  double r = 0.01;          // kalman measurement noise variance
  double p0 = 1e-2;         // kalman initial covariance scale
  bool kalman_diagonal = false;
  double sigma_v2 = 0.01;   // jo-nlms
  double m0 = 1.0;          // jo-nlms initial misalignment power

  std::string name() const;
  std::map<std::string, double> hyperparameters() const;
};

struct StorePolicy {
  enum class Mode { Every, Stride, Indices };
  Mode mode = Mode::Every;
  std::size_t stride = 1;
  std::vector<std::size_t> indices;  // absolute frame indices, sorted; n == N allowed

  static StorePolicy every();
  static StorePolicy strided(std::size_t stride);
  static StorePolicy at_indices(std::vector<std::size_t> indices);
};

// Snapshot times for a list of target azimuths: for each target, the frame
// in [n_begin, n_end) whose rotation angle is circularly closest.
std::vector<std::size_t> azimuth_snapshot_indices(const scenario::RotationProfile& rotation,
                                                  std::size_t n_begin, std::size_t n_end,
                                                  std::span<const double> targets_deg);

struct IdentificationResult {
  std::string algo;
  std::map<std::string, double> hyperparameters;
  std::size_t n_frames = 0;  // N
  std::size_t speakers = 0;  // S
  std::size_t taps = 0;      // estimated IR length
  std::vector<std::size_t> snapshot_index;   // frame n of each snapshot (h before step n)
  std::vector<double> snapshot_azimuth_deg;  // theta(n) tag per snapshot
  std::vector<double> snapshots;             // count x (speakers*taps)
  std::vector<double> e_trace;               // e(n) for every processed frame
  std::vector<std::size_t> segment_starts;   // stitched results: absolute start per segment
  std::vector<std::string> failures;         // per-segment failure notes ("" = ok)

  std::span<const double> snapshot(std::size_t i) const {
    return {snapshots.data() + i * speakers * taps, speakers * taps};
  }
  std::size_t snapshot_count() const { return snapshot_index.size(); }
};

// Streams n = 0 .. N-1 through the chosen step, recording e(n) every frame
// and the estimate h_n (before the step at n) at the frames the policy
// selects; an index equal to N stores the final estimate.
IdentificationResult run_identifier(const AlgoConfig& algo,
                                    const signals::ExcitationBank& bank,
                                    const scenario::Recording& recording,
                                    const StorePolicy& policy,
                                    const scenario::RotationProfile& rotation);

}  // namespace rotir::ident
