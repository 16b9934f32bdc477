#include "rotir/cli.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "rotir/config.hpp"
#include "rotir/errors.hpp"
#include "rotir/fft.hpp"
#include "rotir/io.hpp"
#include "rotir/kernels.hpp"
#include "rotir/metrics.hpp"
#include "rotir/neural.hpp"
#include "rng.hpp"

namespace rotir::cli {

namespace fs = std::filesystem;

namespace {

using nlohmann::json;

signals::ExcitationBank make_bank(const ExperimentConfig& cfg) {
  const auto sweep = signals::generate_perfect_sweep(cfg.speakers * cfg.taps);
  return signals::build_excitation_bank(sweep, cfg.speakers, cfg.taps, cfg.n_frames);
}

void ensure_out_dir(const ExperimentConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output, ec);
  if (ec) throw io_failure("cannot create output dir: " + cfg.output.string());
}

void cmd_sweep(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  const std::size_t period = cfg.speakers * cfg.taps;
  const auto sweep = signals::generate_perfect_sweep(period);
  const auto bank = make_bank(cfg);

  json sidecar{{"type", "perfect_sweep"},
               {"period", period},
               {"speakers", cfg.speakers},
               {"taps", cfg.taps},
               {"n_frames", cfg.n_frames},
               {"sample_rate", cfg.rotation.sample_rate},
               {"scaling", "unit_sample_power"}};
  io::write_json(cfg.output / "sweep.json", sidecar);
  io::write_f64(cfg.output / "sweep.f64", sweep.samples);
  io::write_wav_f32(cfg.output / "sweep.wav", sweep.samples, cfg.rotation.sample_rate);

  sidecar["type"] = "excitation_bank";
  io::write_json(cfg.output / "bank.json", sidecar);
  io::write_f64(cfg.output / "bank.f64", bank.rows);
  for (std::size_t s = 0; s < cfg.speakers; ++s) {
    std::ostringstream name;
    name << "bank_row_" << s << ".wav";
    io::write_wav_f32(cfg.output / name.str(), {bank.row(s), bank.length},
                      cfg.rotation.sample_rate);
  }
}

signals::ExcitationBank read_bank(const ExperimentConfig& cfg) {
  const json sidecar = io::read_json(cfg.output / "bank.json");
  if (sidecar.value("type", "") != "excitation_bank")
    throw io_failure("not an excitation bank: " + (cfg.output / "bank.json").string());
  signals::ExcitationBank bank;
  bank.speakers = sidecar.at("speakers").get<std::size_t>();
  bank.taps = sidecar.at("taps").get<std::size_t>();
  bank.length = sidecar.at("n_frames").get<std::size_t>();
  bank.rows = io::read_f64(cfg.output / "bank.f64");
  if (bank.rows.size() != bank.speakers * bank.length)
    throw io_failure("bank payload size mismatch: " + (cfg.output / "bank.f64").string());
  if (bank.speakers != cfg.speakers || bank.taps != cfg.taps ||
      bank.length != cfg.n_frames)
    throw std::invalid_argument("bank files do not match the configuration");
  return bank;
}

scenario::IRTrajectory build_trajectory(const ExperimentConfig& cfg, const EarConfig& ear) {
  switch (cfg.scenario.kind) {
    case ScenarioConfig::Kind::Grid: {
      const auto grid = io::read_ir_grid(cfg.scenario.grid_file);
      return scenario::trajectory_from_grid(grid, cfg.rotation, cfg.n_frames,
                                            cfg.speakers, ear.picks);
    }
    case ScenarioConfig::Kind::Static: {
      scenario::StaticParams p;
      p.speakers = cfg.speakers;
      p.taps = cfg.k_true;
      p.seed = detail::mix_seed(cfg.seed, 0x100 + ear.seed_offset);
      return scenario::synth_trajectory(p, cfg.rotation, cfg.n_frames);
    }
    case ScenarioConfig::Kind::FractionalDelayPan: {
      scenario::FractionalDelayPanParams p;
      p.speakers = cfg.speakers;
      p.taps = cfg.k_true;
      p.delay0 = ear.delay0;
      p.delay_per_deg = ear.delay_per_deg;
      p.window_halfwidth = cfg.scenario.window_halfwidth;
      p.amplitude = cfg.scenario.amplitude;
      return scenario::synth_trajectory(p, cfg.rotation, cfg.n_frames);
    }
    case ScenarioConfig::Kind::SmoothRandom: {
      scenario::SmoothRandomParams p;
      p.speakers = cfg.speakers;
      p.taps = cfg.k_true;
      p.rho = cfg.scenario.rho;
      p.amplitude = cfg.scenario.amplitude;
      p.seed = detail::mix_seed(cfg.seed, 0x100 + ear.seed_offset);
      return scenario::synth_trajectory(p, cfg.rotation, cfg.n_frames);
    }
  }
  throw std::invalid_argument("unknown scenario kind");
}

void cmd_synth(const ExperimentConfig& cfg) {
  ensure_out_dir(cfg);
  const auto bank = make_bank(cfg);
  const auto targets = cfg.evaluation_azimuths();
  const auto truth_indices =
      ident::azimuth_snapshot_indices(cfg.rotation, 0, cfg.n_frames, targets);

  for (std::size_t ear_idx = 0; ear_idx < cfg.scenario.ears.size(); ++ear_idx) {
    const auto& ear = cfg.scenario.ears[ear_idx];
    const auto traj = build_trajectory(cfg, ear);
    const std::uint64_t noise_seed = detail::mix_seed(cfg.seed, 0x200 + ear_idx);

    double variance = cfg.noise.variance.value_or(0.0);
    if (cfg.noise.snr_db.has_value()) {
      const auto clean = scenario::render(traj, bank, 0.0, noise_seed);
      const double clean_power =
          kernels::sum_sq(clean.samples.data(), clean.samples.size()) /
          static_cast<double>(clean.samples.size());
      variance = scenario::snr_to_variance(clean_power, *cfg.noise.snr_db);
    }
    const auto rec = scenario::render(traj, bank, variance, noise_seed);
    io::write_recording(cfg.output, "recording_" + ear.tag, rec, cfg.rotation.sample_rate);

    // True-trajectory snapshots at the evaluation grid, stored in the result
    // format so evaluate treats truth and estimates uniformly.
    ident::IdentificationResult truth;
    truth.algo = "truth";
    truth.n_frames = cfg.n_frames;
    truth.speakers = cfg.speakers;
    truth.taps = traj.taps();
    truth.segment_starts = {0};
    truth.failures = {""};
    std::vector<double> frame(cfg.speakers * traj.taps());
    for (const std::size_t n : truth_indices) {
      const std::size_t at = std::min(n, cfg.n_frames - 1);
      traj.frame(at, frame);
      truth.snapshot_index.push_back(at);
      truth.snapshot_azimuth_deg.push_back(cfg.rotation.angle_deg(at));
      truth.snapshots.insert(truth.snapshots.end(), frame.begin(), frame.end());
    }
    io::write_result(cfg.output, "truth_" + ear.tag, truth);
  }
}

void cmd_identify(const ExperimentConfig& cfg, std::size_t workers) {
  ensure_out_dir(cfg);
  const auto bank = read_bank(cfg);
  const auto targets = cfg.evaluation_azimuths();
  const auto snapshot_indices =
      ident::azimuth_snapshot_indices(cfg.rotation, 0, cfg.n_frames, targets);
  const auto policy = ident::StorePolicy::at_indices(snapshot_indices);

  for (const auto& ear : cfg.scenario.ears) {
    const auto rec = io::read_recording(cfg.output, "recording_" + ear.tag);
    if (rec.samples.size() != cfg.n_frames)
      throw std::invalid_argument("recording length does not match the configuration");

    if (cfg.algo_name == "dnn") {
      const auto run = neural::segment_and_train(bank, rec, cfg.segments, cfg.trainer,
                                                 policy, cfg.rotation, workers);
      ident::IdentificationResult result = run.stitched;
      result.hyperparameters = {{"segments", static_cast<double>(cfg.segments)},
                                {"lr", cfg.trainer.lr},
                                {"beta1", cfg.trainer.beta1},
                                {"beta2", cfg.trainer.beta2},
                                {"adam_eps", cfg.trainer.adam_eps},
                                {"max_epochs", static_cast<double>(cfg.trainer.max_epochs)},
                                {"convergence_tol", cfg.trainer.convergence_tol},
                                {"patience", static_cast<double>(cfg.trainer.patience)},
                                {"clip_norm", cfg.trainer.clip_norm},
                                {"fixed_normalization",
                                 cfg.trainer.fixed_normalization ? 1.0 : 0.0}};
      io::write_result(cfg.output, "result_" + ear.tag, result);
      for (std::size_t seg = 0; seg < run.segments.size(); ++seg) {
        std::ostringstream stem;
        stem << ear.tag << "_seg" << seg;
        io::write_checkpoint(cfg.output / ("checkpoint_" + stem.str() + ".ckpt"),
                             run.segments[seg].best_params);
        io::write_epoch_log(cfg.output / ("epochs_" + stem.str() + ".csv"),
                            run.segments[seg].log);
      }
    } else {
      const auto result = ident::run_identifier(cfg.algo, bank, rec, policy, cfg.rotation);
      io::write_result(cfg.output, "result_" + ear.tag, result);
    }
  }
}

struct ResolvedBand {
  double lo = 0.0, hi = 0.0;
};

ResolvedBand resolve_band(const ExperimentConfig& cfg) {
  const double nyquist = cfg.rotation.sample_rate / 2.0;
  if (cfg.evaluation.band == "experiment")
    return {200.0, std::min(17000.0, nyquist)};
  if (cfg.evaluation.band == "custom")
    return {cfg.evaluation.band_lo_hz, std::min(cfg.evaluation.band_hi_hz, nyquist)};
  return {0.0, nyquist};
}

// Per-target, per-speaker IRs after optional OTF compensation and windowing.
std::vector<std::vector<std::vector<double>>> processed_irs(
    const ExperimentConfig& cfg, const ident::IdentificationResult& res,
    std::span<const double> targets, bool apply_otf,
    const std::vector<std::complex<double>>& otf, std::size_t fft_size) {
  const auto mapped = metrics::azimuth_map(res, targets);
  std::vector<std::vector<std::vector<double>>> out(mapped.size());
  for (std::size_t i = 0; i < mapped.size(); ++i) {
    out[i].resize(res.speakers);
    for (std::size_t s = 0; s < res.speakers; ++s) {
      const auto block = metrics::speaker_ir(mapped[i].h, s, res.taps);
      std::vector<double> ir(block.begin(), block.end());
      if (apply_otf) {
        auto spec = fft::real_spectrum(ir, fft_size);
        metrics::otf_compensate(spec, otf, cfg.evaluation.otf_reg);
        // Back to time domain via the conjugate-symmetric completion.
        std::vector<std::complex<double>> full(fft_size);
        for (std::size_t b = 0; b < spec.size(); ++b) full[b] = spec[b];
        for (std::size_t b = 1; b + 1 < spec.size(); ++b)
          full[fft_size - b] = std::conj(spec[b]);
        fft::inverse(full);
        for (std::size_t k = 0; k < ir.size(); ++k) ir[k] = full[k].real();
      }
      if (cfg.evaluation.window_t0_ms.has_value()) {
        metrics::time_window(ir, *cfg.evaluation.window_t0_ms / 1e3,
                             *cfg.evaluation.window_t1_ms / 1e3,
                             cfg.rotation.sample_rate);
      }
      out[i][s] = std::move(ir);
    }
  }
  return out;
}

void cmd_evaluate(const ExperimentConfig& cfg) {
  const auto targets = cfg.evaluation_azimuths();
  const double fs = cfg.rotation.sample_rate;
  const ResolvedBand band = resolve_band(cfg);

  std::size_t fft_size = cfg.evaluation.fft_size;
  if (fft_size == 0) {
    // Grid scenarios carry their own true IR length; size the FFT from the
    // stored truth rather than trusting the configured k_true.
    const auto truth0 = io::read_result(cfg.output, "truth_" + cfg.scenario.ears[0].tag);
    fft_size = fft::next_pow2(std::max({cfg.k_true, cfg.taps, truth0.taps}));
  }

  std::vector<std::complex<double>> otf;
  const bool apply_otf = !cfg.evaluation.otf_file.empty();
  if (apply_otf) {
    const auto raw = io::read_f64(cfg.evaluation.otf_file);
    if (raw.size() != 2 * (fft_size / 2 + 1))
      throw std::invalid_argument("otf file does not hold fft_size/2+1 complex bins");
    for (std::size_t i = 0; i + 1 < raw.size(); i += 2) otf.emplace_back(raw[i], raw[i + 1]);
  }

  json per_ear = json::object();
  double nm_sum = 0.0, lsd_sum = 0.0;
  std::map<std::string, std::vector<std::vector<std::vector<double>>>> truth_by_ear,
      est_by_ear;

  for (const auto& ear : cfg.scenario.ears) {
    const auto truth_res = io::read_result(cfg.output, "truth_" + ear.tag);
    const auto est_res = io::read_result(cfg.output, "result_" + ear.tag);
    // OTF models the measurement chain, so it is divided out of the
    // estimates only; the window applies to both sides.
    auto truth_irs = processed_irs(cfg, truth_res, targets, false, otf, fft_size);
    auto est_irs = processed_irs(cfg, est_res, targets, apply_otf, otf, fft_size);

    std::vector<metrics::AlignedPair> pairs;
    pairs.reserve(targets.size() * cfg.speakers);
    for (std::size_t i = 0; i < targets.size(); ++i)
      for (std::size_t s = 0; s < cfg.speakers; ++s)
        pairs.push_back(metrics::make_aligned(truth_irs[i][s], est_irs[i][s]));

    const auto nm = metrics::normalized_misalignment(pairs);
    const double lsd = metrics::log_spectral_distortion(
        pairs, fft_size, {band.lo, band.hi}, fs);
    per_ear[ear.tag] = {{"nm_db", nm.nm_db},
                        {"lsd_db", lsd},
                        {"evaluated", nm.evaluated},
                        {"skipped_zero_norm", nm.skipped_zero_norm},
                        {"exact_match", nm.exact_match}};
    nm_sum += nm.nm_db;
    lsd_sum += lsd;
    truth_by_ear[ear.tag] = std::move(truth_irs);
    est_by_ear[ear.tag] = std::move(est_irs);
  }

  const double ear_count = static_cast<double>(cfg.scenario.ears.size());
  json report{{"type", "metrics_report"},
              {"algo", io::read_result(cfg.output, "result_" + cfg.scenario.ears[0].tag).algo},
              {"band_lo_hz", band.lo},
              {"band_hi_hz", band.hi},
              {"fft_size", fft_size},
              {"per_ear", per_ear},
              {"nm_db", nm_sum / ear_count},
              {"lsd_db", lsd_sum / ear_count}};

  // ITD table when a left/right pair is present.
  const bool binaural = truth_by_ear.count("left") && truth_by_ear.count("right");
  std::ostringstream itd_csv;
  if (binaural) {
    const std::size_t s = cfg.evaluation.itd_speaker;
    const auto max_lag = static_cast<std::size_t>(
        std::max(1.0, std::round(cfg.evaluation.max_lag_ms / 1e3 * fs)));
    std::vector<metrics::BinauralIr> truth_set, est_set;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      truth_set.push_back({truth_by_ear["left"][i][s], truth_by_ear["right"][i][s]});
      est_set.push_back({est_by_ear["left"][i][s], est_by_ear["right"][i][s]});
    }
    const std::size_t ir_len = truth_set[0].left.size();
    const auto rows = metrics::itd_error_table(truth_set, est_set, targets,
                                               std::min(max_lag, ir_len - 1), fs);
    json itd_json = json::array();
    itd_csv << "azimuth_deg,itd_us_true,itd_us_est,abs_err_us\n";
    double err_sum = 0.0, err_max = 0.0;
    for (const auto& row : rows) {
      itd_json.push_back({{"azimuth_deg", row.azimuth_deg},
                          {"itd_us_true", row.itd_true_s * 1e6},
                          {"itd_us_est", row.itd_est_s * 1e6},
                          {"abs_err_us", row.abs_err_s * 1e6}});
      itd_csv << io::csv_double(row.azimuth_deg) << ','
              << io::csv_double(row.itd_true_s * 1e6) << ','
              << io::csv_double(row.itd_est_s * 1e6) << ','
              << io::csv_double(row.abs_err_s * 1e6) << '\n';
      err_sum += row.abs_err_s * 1e6;
      err_max = std::max(err_max, row.abs_err_s * 1e6);
    }
    report["itd"] = itd_json;
    report["itd_mean_abs_err_us"] = err_sum / static_cast<double>(rows.size());
    report["itd_max_abs_err_us"] = err_max;
    io::write_text(cfg.output / "itd.csv", itd_csv.str());
  }

  io::write_json(cfg.output / "metrics.json", report);

  std::ostringstream csv;
  csv << "metric,value\n";
  csv << "nm_db," << io::csv_double(report["nm_db"].get<double>()) << '\n';
  csv << "lsd_db," << io::csv_double(report["lsd_db"].get<double>()) << '\n';
  for (const auto& ear : cfg.scenario.ears) {
    csv << "nm_db_" << ear.tag << ','
        << io::csv_double(per_ear[ear.tag]["nm_db"].get<double>()) << '\n';
    csv << "lsd_db_" << ear.tag << ','
        << io::csv_double(per_ear[ear.tag]["lsd_db"].get<double>()) << '\n';
  }
  io::write_text(cfg.output / "metrics.csv", csv.str());

  std::ostringstream txt;
  txt << "algo: " << report["algo"].get<std::string>() << '\n'
      << "NM:  " << report["nm_db"].get<double>() << " dB\n"
      << "LSD: " << report["lsd_db"].get<double>() << " dB\n"
      << "band: " << band.lo << " Hz .. " << band.hi << " Hz\n"
      << "pairs per ear: " << targets.size() * cfg.speakers << '\n';
  if (binaural)
    txt << "ITD mean |err|: " << report["itd_mean_abs_err_us"].get<double>() << " us\n";
  io::write_text(cfg.output / "metrics.txt", txt.str());
}

void cmd_report(const fs::path& runs_dir, const fs::path& out_dir) {
  if (!fs::is_directory(runs_dir))
    throw std::invalid_argument("report: not a directory: " + runs_dir.string());

  std::vector<fs::path> run_dirs;
  if (fs::exists(runs_dir / "metrics.json")) run_dirs.push_back(runs_dir);
  for (const auto& entry : fs::directory_iterator(runs_dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "metrics.json"))
      run_dirs.push_back(entry.path());
  }
  std::sort(run_dirs.begin(), run_dirs.end());
  if (run_dirs.empty())
    throw std::invalid_argument("report: no evaluated runs under " + runs_dir.string());

  json rows = json::array();
  std::ostringstream csv;
  csv << "run,algo,nm_db,lsd_db,itd_mean_abs_err_us,itd_max_abs_err_us\n";
  for (const auto& dir : run_dirs) {
    const json metrics = io::read_json(dir / "metrics.json");
    json row{{"run", dir.filename().string()},
             {"algo", metrics.value("algo", "unknown")},
             {"nm_db", metrics.at("nm_db").get<double>()},
             {"lsd_db", metrics.at("lsd_db").get<double>()}};
    csv << dir.filename().string() << ',' << metrics.value("algo", "unknown") << ','
        << io::csv_double(metrics.at("nm_db").get<double>()) << ','
        << io::csv_double(metrics.at("lsd_db").get<double>());
    if (metrics.contains("itd_mean_abs_err_us")) {
      row["itd_mean_abs_err_us"] = metrics.at("itd_mean_abs_err_us");
      row["itd_max_abs_err_us"] = metrics.at("itd_max_abs_err_us");
      row["itd"] = metrics.at("itd");
      csv << ',' << io::csv_double(metrics.at("itd_mean_abs_err_us").get<double>()) << ','
          << io::csv_double(metrics.at("itd_max_abs_err_us").get<double>());
    } else {
      csv << ",,";
    }
    csv << '\n';
    rows.push_back(std::move(row));
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw io_failure("cannot create report dir: " + out_dir.string());
  io::write_json(out_dir / "report.json", json{{"type", "comparison_report"}, {"runs", rows}});
  io::write_text(out_dir / "report.csv", csv.str());
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"continuous-rotation IR measurement simulation and identification"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed_override;
  std::string runs_dir, report_out;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
    sub->add_option("-o,--out", out_override, "override the output directory");
    sub->add_option("--seed", seed_override, "override the config seed");
    sub->add_option("-w,--workers", workers, "worker threads for per-segment jobs");
  };

  auto* sweep = app.add_subcommand("sweep", "write the perfect sweep and excitation bank");
  add_common(sweep);
  auto* synth = app.add_subcommand("synth", "render recordings and truth snapshots");
  add_common(synth);
  auto* identify = app.add_subcommand("identify", "run the configured identifier");
  add_common(identify);
  auto* evaluate = app.add_subcommand("evaluate", "score a run against its truth");
  add_common(evaluate);
  auto* report = app.add_subcommand("report", "consolidate evaluated runs into one table");
  report->add_option("--runs", runs_dir, "directory holding evaluated runs")->required();
  report->add_option("-o,--out", report_out, "report output directory");

  std::vector<const char*> argv;
  argv.push_back("rotir");
  for (const auto& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (report->parsed()) {
      cmd_report(runs_dir, report_out.empty() ? fs::path(runs_dir) : fs::path(report_out));
      return 0;
    }
    auto cfg = ExperimentConfig::load(config_path);
    if (seed_override.has_value()) {
      cfg.seed = *seed_override;
      cfg.trainer.seed = *seed_override;
    }
    if (!out_override.empty()) cfg.output = out_override;
    if (sweep->parsed()) cmd_sweep(cfg);
    if (synth->parsed()) cmd_synth(cfg);
    if (identify->parsed()) cmd_identify(cfg, std::max<std::size_t>(1, workers));
    if (evaluate->parsed()) cmd_evaluate(cfg);
    return 0;
  } catch (const io_failure& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 4;
  } catch (const numerical_failure& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
}

}  // namespace rotir::cli
