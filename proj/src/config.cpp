#include "rotir/config.hpp"

#include <stdexcept>

#include "rotir/errors.hpp"
#include "rotir/io.hpp"

namespace rotir {

namespace {

using nlohmann::json;

std::filesystem::path resolve(const std::filesystem::path& base,
                              const std::string& value) {
  std::filesystem::path p(value);
  return p.is_absolute() ? p : base / p;
}

ScenarioConfig::Kind parse_kind(const std::string& kind) {
  if (kind == "grid") return ScenarioConfig::Kind::Grid;
  if (kind == "static") return ScenarioConfig::Kind::Static;
  if (kind == "fractional_delay_pan") return ScenarioConfig::Kind::FractionalDelayPan;
  if (kind == "smooth_random") return ScenarioConfig::Kind::SmoothRandom;
  throw std::invalid_argument("config: unknown scenario kind '" + kind + "'");
}

}  // namespace

std::vector<double> ExperimentConfig::evaluation_azimuths() const {
  std::vector<double> targets;
  for (double a = 0.0; a < 360.0 - 1e-9; a += evaluation.grid_step_deg)
    targets.push_back(a);
  return targets;
}

ExperimentConfig ExperimentConfig::from_json(const json& j,
                                             const std::filesystem::path& base_dir) {
  ExperimentConfig cfg;
  try {
    cfg.seed = j.value("seed", std::uint64_t{0});

    const auto& dims = j.at("dimensions");
    cfg.speakers = dims.at("speakers").get<std::size_t>();
    cfg.taps = dims.at("taps").get<std::size_t>();
    cfg.k_true = dims.value("k_true", cfg.taps);
    cfg.n_frames = dims.at("n_frames").get<std::size_t>();

    const auto& rot = j.at("rotation");
    cfg.rotation.theta0_deg = rot.value("theta0_deg", 0.0);
    cfg.rotation.omega_deg_per_s = rot.value("omega_deg_per_s", 0.0);
    cfg.rotation.sample_rate = rot.at("sample_rate").get<double>();

    if (j.contains("excitation") && j.at("excitation").contains("period"))
      cfg.excitation_period = j.at("excitation").at("period").get<std::size_t>();

    const auto& sc = j.at("scenario");
    cfg.scenario.kind = parse_kind(sc.at("kind").get<std::string>());
    if (sc.contains("grid_file"))
      cfg.scenario.grid_file = resolve(base_dir, sc.at("grid_file").get<std::string>());
    cfg.scenario.rho = sc.value("rho", 0.999);
    cfg.scenario.amplitude = sc.value("amplitude", 1.0);
    cfg.scenario.window_halfwidth = sc.value("window_halfwidth", std::size_t{6});
    if (sc.contains("ears")) {
      for (const auto& ear_json : sc.at("ears")) {
        EarConfig ear;
        ear.tag = ear_json.at("tag").get<std::string>();
        ear.seed_offset = ear_json.value("seed_offset", std::uint64_t{0});
        ear.delay0 = ear_json.value("delay0", 12.0);
        ear.delay_per_deg = ear_json.value("delay_per_deg", 0.0);
        if (ear_json.contains("picks")) {
          for (const auto& pick_json : ear_json.at("picks")) {
            scenario::SpeakerPick pick;
            pick.grid_row = pick_json.at("row").get<std::size_t>();
            pick.azimuth_offset_deg = pick_json.value("azimuth_offset_deg", 0.0);
            ear.picks.push_back(pick);
          }
        }
        cfg.scenario.ears.push_back(std::move(ear));
      }
    }
    if (cfg.scenario.ears.empty()) cfg.scenario.ears.push_back(EarConfig{});

    if (j.contains("noise")) {
      const auto& noise = j.at("noise");
      if (noise.contains("variance")) cfg.noise.variance = noise.at("variance").get<double>();
      if (noise.contains("snr_db")) cfg.noise.snr_db = noise.at("snr_db").get<double>();
    }

    const auto& algo = j.at("algo");
    cfg.algo_name = algo.at("name").get<std::string>();
    if (cfg.algo_name == "lms") cfg.algo.kind = ident::AlgoConfig::Kind::Lms;
    else if (cfg.algo_name == "nlms") cfg.algo.kind = ident::AlgoConfig::Kind::Nlms;
    else if (cfg.algo_name == "jo_nlms") cfg.algo.kind = ident::AlgoConfig::Kind::JoNlms;
    else if (cfg.algo_name == "kalman") cfg.algo.kind = ident::AlgoConfig::Kind::Kalman;
    else if (cfg.algo_name != "dnn")
      throw std::invalid_argument("config: unknown algo '" + cfg.algo_name + "'");
    cfg.algo.mu = algo.value("mu", 0.5);
    cfg.algo.eps = algo.value("eps", -1.0);
    cfg.algo.q = algo.value("q", 1e-7);
    cfg.algo.r = algo.value("r", 0.01);
    cfg.algo.p0 = algo.value("p0", 1e-2);
    cfg.algo.kalman_diagonal = algo.value("diagonal", false);
    cfg.algo.sigma_v2 = algo.value("sigma_v2", 0.01);
    cfg.algo.m0 = algo.value("m0", 1.0);

    if (j.contains("trainer")) {
      const auto& tr = j.at("trainer");
      cfg.trainer.lr = tr.value("lr", 1e-4);
      cfg.trainer.beta1 = tr.value("beta1", 0.9);
      cfg.trainer.beta2 = tr.value("beta2", 0.999);
      cfg.trainer.adam_eps = tr.value("adam_eps", 1e-8);
      cfg.trainer.max_epochs = tr.value("max_epochs", std::size_t{300});
      cfg.trainer.convergence_tol = tr.value("convergence_tol", 1e-4);
      cfg.trainer.patience = tr.value("patience", std::size_t{10});
      cfg.trainer.clip_norm = tr.value("clip_norm", 0.0);
      cfg.trainer.fixed_normalization = tr.value("fixed_normalization", false);
    }
    cfg.trainer.seed = cfg.seed;

    cfg.segments = j.value("segments", std::size_t{1});

    if (j.contains("evaluation")) {
      const auto& ev = j.at("evaluation");
      cfg.evaluation.grid_step_deg = ev.value("grid_step_deg", 30.0);
      if (ev.contains("band")) {
        if (ev.at("band").is_string()) {
          cfg.evaluation.band = ev.at("band").get<std::string>();
        } else {
          cfg.evaluation.band = "custom";
          cfg.evaluation.band_lo_hz = ev.at("band").at(0).get<double>();
          cfg.evaluation.band_hi_hz = ev.at("band").at(1).get<double>();
        }
      }
      cfg.evaluation.max_lag_ms = ev.value("max_lag_ms", 1.0);
      cfg.evaluation.fft_size = ev.value("fft_size", std::size_t{0});
      cfg.evaluation.itd_speaker = ev.value("itd_speaker", std::size_t{0});
      if (ev.contains("window_ms")) {
        cfg.evaluation.window_t0_ms = ev.at("window_ms").at(0).get<double>();
        cfg.evaluation.window_t1_ms = ev.at("window_ms").at(1).get<double>();
      }
      if (ev.contains("otf_file"))
        cfg.evaluation.otf_file = resolve(base_dir, ev.at("otf_file").get<std::string>());
      cfg.evaluation.otf_reg = ev.value("otf_reg", 1e-6);
    }

    cfg.output = resolve(base_dir, j.value("output", std::string{"run"}));
  } catch (const json::exception& ex) {
    throw std::invalid_argument(std::string("config: ") + ex.what());
  }
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  const auto j = io::read_json(path);
  auto cfg = from_json(j, path.has_parent_path() ? path.parent_path()
                                                 : std::filesystem::path("."));
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  if (speakers == 0 || taps == 0)
    throw std::invalid_argument("config: speakers and taps must be >= 1");
  if (n_frames == 0) throw std::invalid_argument("config: n_frames must be >= 1");
  if (k_true == 0) throw std::invalid_argument("config: k_true must be >= 1");
  if (!(rotation.sample_rate > 0.0))
    throw std::invalid_argument("config: sample_rate must be > 0");
  if (rotation.omega_deg_per_s < 0.0)
    throw std::invalid_argument("config: omega must be >= 0");
  if (excitation_period.has_value() && *excitation_period != speakers * taps)
    throw std::invalid_argument(
        "config: excitation period must equal speakers*taps");
  if ((speakers * taps) % 2 != 0)
    throw std::invalid_argument("config: speakers*taps must be even (sweep period)");
  if (scenario.kind == ScenarioConfig::Kind::Grid) {
    if (scenario.grid_file.empty())
      throw std::invalid_argument("config: grid scenario needs grid_file");
    if (!std::filesystem::exists(scenario.grid_file))
      throw std::invalid_argument("config: grid file does not exist: " +
                                  scenario.grid_file.string());
    for (const auto& ear : scenario.ears)
      if (ear.picks.size() != speakers)
        throw std::invalid_argument(
            "config: grid scenario needs one pick per speaker for every ear");
  }
  if (scenario.ears.empty()) throw std::invalid_argument("config: at least one ear");
  if (noise.variance.has_value() && *noise.variance < 0.0)
    throw std::invalid_argument("config: noise variance must be >= 0");
  if (noise.variance.has_value() && noise.snr_db.has_value())
    throw std::invalid_argument("config: give either noise variance or snr_db, not both");
  if (segments == 0) throw std::invalid_argument("config: segments must be >= 1");
  if (segments > n_frames)
    throw std::invalid_argument("config: more segments than frames");
  if (!(evaluation.grid_step_deg > 0.0 && evaluation.grid_step_deg <= 360.0))
    throw std::invalid_argument("config: evaluation grid step must lie in (0, 360]");
  if (evaluation.itd_speaker >= speakers)
    throw std::invalid_argument("config: itd_speaker out of range");
  if (evaluation.band != "full" && evaluation.band != "experiment" &&
      evaluation.band != "custom")
    throw std::invalid_argument("config: band must be full, experiment or [lo, hi]");
  if (!evaluation.otf_file.empty() && !std::filesystem::exists(evaluation.otf_file))
    throw std::invalid_argument("config: otf file does not exist: " +
                                evaluation.otf_file.string());
  if (algo_name == "dnn") trainer.validate();
}

}  // namespace rotir
