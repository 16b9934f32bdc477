#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rotir/identifiers.hpp"
#include "rotir/neural.hpp"
#include "rotir/scenario.hpp"

// Experiment configuration: one JSON file drives the whole
// sweep -> synth -> identify -> evaluate pipeline; all randomness is keyed
// from the single seed field.
namespace rotir {

struct EarConfig {
  std::string tag = "mono";
  std::uint64_t seed_offset = 0;
  std::vector<scenario::SpeakerPick> picks;  // grid scenario
  double delay0 = 12.0;                      // fractional_delay_pan
  double delay_per_deg = 0.0;
};

struct ScenarioConfig {
  enum class Kind { Grid, Static, FractionalDelayPan, SmoothRandom };
  Kind kind = Kind::Static;
  std::filesystem::path grid_file;
  double rho = 0.999;       // smooth_random
  double amplitude = 1.0;   // smooth_random / pan
  std::size_t window_halfwidth = 6;  // pan
  std::vector<EarConfig> ears;
};

struct NoiseConfig {
  std::optional<double> variance;
  std::optional<double> snr_db;  // converted against the clean rendering power
};

struct EvaluationConfig {
  double grid_step_deg = 30.0;
  std::string band = "full";  // "full", "experiment" (200 Hz - 17 kHz) or custom
  double band_lo_hz = 0.0, band_hi_hz = 0.0;
  double max_lag_ms = 1.0;
  std::size_t fft_size = 0;  // 0: next power of two >= K
  std::size_t itd_speaker = 0;
  std::optional<double> window_t0_ms, window_t1_ms;
  std::filesystem::path otf_file;  // one-sided complex spectrum, interleaved re/im
  double otf_reg = 1e-6;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::size_t speakers = 0;  // S
  std::size_t k_true = 0;    // true IR length (grid scenarios read it from the file)
  std::size_t taps = 0;      // estimated IR length the identifiers use
  std::size_t n_frames = 0;  // N
  scenario::RotationProfile rotation;
  std::optional<std::size_t> excitation_period;  // must equal speakers*taps when set
  ScenarioConfig scenario;
  NoiseConfig noise;
  std::string algo_name = "nlms";  // lms | nlms | jo_nlms | kalman | dnn
  ident::AlgoConfig algo;
  neural::TrainerConfig trainer;
  std::size_t segments = 1;
  EvaluationConfig evaluation;
  std::filesystem::path output;

  std::size_t state_dim() const { return speakers * taps; }
  std::vector<double> evaluation_azimuths() const;

  static ExperimentConfig from_json(const nlohmann::json& j,
                                    const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
};

}  // namespace rotir
