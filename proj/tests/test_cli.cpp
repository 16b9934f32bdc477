#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "rotir/cli.hpp"
#include "rotir/config.hpp"
#include "rotir/io.hpp"
#include "rotir/signals.hpp"

using namespace rotir;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  const auto dir = fs::temp_directory_path() / "rotir_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& algo,
                      std::size_t segments = 1) {
  // theta0 = 45 keeps every evaluation target away from the cold-start
  // frames; one full revolution in 400 samples.
  nlohmann::json cfg{
      {"seed", 424242},
      {"dimensions", {{"speakers", 2}, {"taps", 4}, {"k_true", 4}, {"n_frames", 400}}},
      {"rotation", {{"theta0_deg", 45.0}, {"omega_deg_per_s", 360.0}, {"sample_rate", 400.0}}},
      {"excitation", {{"period", 8}}},
      {"scenario",
       {{"kind", "smooth_random"},
        {"rho", 0.999},
        {"amplitude", 1.0},
        {"ears",
         nlohmann::json::array({{{"tag", "left"}, {"seed_offset", 1}},
                                {{"tag", "right"}, {"seed_offset", 2}}})}}},
      {"noise", {{"snr_db", 30.0}}},
      {"algo", {{"name", algo}, {"mu", 0.5}}},
      {"trainer", {{"lr", 1e-3}, {"max_epochs", 2}}},
      {"segments", segments},
      {"evaluation", {{"grid_step_deg", 90.0}, {"band", "full"}, {"max_lag_ms", 5.0}}},
      {"output", "out"}};
  const auto path = dir / "config.json";
  io::write_json(path, cfg);
  return path;
}

int run_cli(std::initializer_list<std::string> args) {
  return cli::run(std::vector<std::string>(args));
}

}  // namespace

TEST_CASE("cli pipeline on a tiny nlms run") {
  const auto dir = temp_dir("nlms");
  const auto cfg_path = write_config(dir, "nlms");

  CHECK(run_cli({"sweep", "--config", cfg_path.string()}) == 0);
  CHECK(run_cli({"synth", "--config", cfg_path.string()}) == 0);
  CHECK(run_cli({"identify", "--config", cfg_path.string()}) == 0);
  CHECK(run_cli({"evaluate", "--config", cfg_path.string()}) == 0);

  const auto out = dir / "out";
  CHECK(fs::exists(out / "sweep.f64"));
  CHECK(fs::exists(out / "bank.f64"));
  CHECK(fs::exists(out / "recording_left.f64"));
  CHECK(fs::exists(out / "truth_right.json"));
  CHECK(fs::exists(out / "result_left.f64"));
  CHECK(fs::exists(out / "metrics.json"));
  CHECK(fs::exists(out / "itd.csv"));

  // The exported sweep equals the direct library output byte for byte.
  const auto sweep = signals::generate_perfect_sweep(8);
  CHECK(io::read_f64(out / "sweep.f64") == sweep.samples);

  // The estimate beats the zero baseline on this easy scenario.
  const auto metrics = io::read_json(out / "metrics.json");
  CHECK(metrics.at("nm_db").get<double>() < -10.0);

  // report over the parent directory finds the evaluated run
  CHECK(run_cli({"report", "--runs", dir.string()}) == 0);
  CHECK(fs::exists(dir / "report.csv"));
  const auto report = io::read_json(dir / "report.json");
  CHECK(report.at("runs").size() == 1);
  CHECK(report.at("runs")[0].at("algo").get<std::string>() == "nlms");
}

TEST_CASE("cli dnn run writes checkpoints and epoch logs") {
  const auto dir = temp_dir("dnn");
  const auto cfg_path = write_config(dir, "dnn", 2);

  REQUIRE(run_cli({"sweep", "-c", cfg_path.string()}) == 0);
  REQUIRE(run_cli({"synth", "-c", cfg_path.string()}) == 0);
  REQUIRE(run_cli({"identify", "-c", cfg_path.string(), "--workers", "2"}) == 0);
  REQUIRE(run_cli({"evaluate", "-c", cfg_path.string()}) == 0);

  const auto out = dir / "out";
  CHECK(fs::exists(out / "checkpoint_left_seg0.ckpt"));
  CHECK(fs::exists(out / "checkpoint_right_seg1.ckpt"));
  CHECK(fs::exists(out / "epochs_left_seg0.csv"));
  const auto ckpt = io::read_checkpoint(out / "checkpoint_left_seg0.ckpt");
  CHECK(ckpt.dim == 8);
}

TEST_CASE("cli exit codes") {
  const auto dir = temp_dir("errors");

  SUBCASE("unknown flags and missing subcommand are usage errors") {
    CHECK(run_cli({}) == 2);
    CHECK(run_cli({"sweep", "--config", "x.json", "--bogus"}) == 2);
  }

  SUBCASE("invalid config is exit code 2") {
    nlohmann::json cfg{
        {"dimensions", {{"speakers", 2}, {"taps", 4}, {"n_frames", 100}}},
        {"rotation", {{"sample_rate", 400.0}}},
        {"excitation", {{"period", 999}}},  // P != S*taps
        {"scenario", {{"kind", "static"}}},
        {"algo", {{"name", "nlms"}}},
        {"output", "out"}};
    const auto path = dir / "bad.json";
    io::write_json(path, cfg);
    CHECK(run_cli({"sweep", "--config", path.string()}) == 2);
  }

  SUBCASE("missing inputs are io failures (exit code 4)") {
    const auto cfg_path = write_config(dir, "nlms");
    // identify without sweep/synth outputs
    CHECK(run_cli({"identify", "--config", cfg_path.string()}) == 4);
    CHECK(run_cli({"sweep", "--config", (dir / "nope.json").string()}) == 4);
  }

  SUBCASE("help exits zero") { CHECK(run_cli({"--help"}) == 0); }
}

TEST_CASE("cli grid scenario with window and otf post-processing") {
  const auto dir = temp_dir("grid");

  // Dense azimuth grid, energy concentrated in the first taps so the
  // shorter estimated IR (4 taps vs 6) can still capture it.
  scenario::IRDatasetGrid grid;
  grid.rows = 2;
  grid.taps = 6;
  grid.sample_rate = 400.0;
  for (double a = 0.0; a < 360.0; a += 15.0) grid.azimuths_deg.push_back(a);
  for (std::size_t a = 0; a < grid.azimuths_deg.size(); ++a)
    for (std::size_t r = 0; r < grid.rows; ++r)
      for (std::size_t k = 0; k < grid.taps; ++k)
        grid.irs.push_back(std::cos(0.05 * grid.azimuths_deg[a] + 1.7 * r + k) *
                           std::exp(-1.2 * static_cast<double>(k)));
  io::write_ir_grid(dir / "toy.irgrid", grid);

  // Flat one-sided OTF for fft_size = 8: five unit bins.
  std::vector<double> otf_raw;
  for (int i = 0; i < 5; ++i) {
    otf_raw.push_back(1.0);
    otf_raw.push_back(0.0);
  }
  io::write_f64(dir / "otf.f64", otf_raw);

  nlohmann::json cfg{
      {"seed", 5150},
      {"dimensions", {{"speakers", 2}, {"taps", 4}, {"k_true", 6}, {"n_frames", 3200}}},
      {"rotation", {{"theta0_deg", 45.0}, {"omega_deg_per_s", 45.0}, {"sample_rate", 400.0}}},
      {"scenario",
       {{"kind", "grid"},
        {"grid_file", "toy.irgrid"},
        {"ears",
         nlohmann::json::array(
             {{{"tag", "left"},
               {"picks", nlohmann::json::array({{{"row", 0}, {"azimuth_offset_deg", 0.0}},
                                                {{"row", 1}, {"azimuth_offset_deg", 180.0}}})}},
              {{"tag", "right"},
               {"picks",
                nlohmann::json::array({{{"row", 1}, {"azimuth_offset_deg", 0.0}},
                                       {{"row", 0}, {"azimuth_offset_deg", 180.0}}})}}})}}},
      {"noise", {{"snr_db", 40.0}}},
      {"algo", {{"name", "nlms"}, {"mu", 0.5}}},
      {"segments", 1},
      {"evaluation",
       {{"grid_step_deg", 90.0},
        {"band", "full"},
        {"max_lag_ms", 5.0},
        {"window_ms", nlohmann::json::array({0.0, 25.0})},
        {"otf_file", "otf.f64"},
        {"otf_reg", 1e-9}}},
      {"output", "out"}};
  const auto cfg_path = dir / "config.json";
  io::write_json(cfg_path, cfg);

  REQUIRE(run_cli({"sweep", "-c", cfg_path.string()}) == 0);
  REQUIRE(run_cli({"synth", "-c", cfg_path.string()}) == 0);
  REQUIRE(run_cli({"identify", "-c", cfg_path.string()}) == 0);
  REQUIRE(run_cli({"evaluate", "-c", cfg_path.string()}) == 0);

  const auto metrics = io::read_json(dir / "out" / "metrics.json");
  // Truth snapshots carry the grid's tap count; the shorter estimate is
  // zero-padded before scoring and still lands well below the zero baseline.
  CHECK(metrics.at("nm_db").get<double>() < -8.0);
  CHECK(metrics.at("lsd_db").get<double>() > 0.0);
}

TEST_CASE("cli seed override changes the synthesized noise") {
  const auto dir = temp_dir("seed");
  const auto cfg_path = write_config(dir, "nlms");
  REQUIRE(run_cli({"synth", "-c", cfg_path.string()}) == 0);
  const auto a = io::read_f64(dir / "out" / "recording_left.f64");
  REQUIRE(run_cli({"synth", "-c", cfg_path.string(), "--seed", "7"}) == 0);
  const auto b = io::read_f64(dir / "out" / "recording_left.f64");
  CHECK(a != b);
  REQUIRE(run_cli({"synth", "-c", cfg_path.string()}) == 0);
  const auto c = io::read_f64(dir / "out" / "recording_left.f64");
  CHECK(a == c);  // same seed, same bytes
}
