#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "rotir/fft.hpp"
#include "rotir/metrics.hpp"

using namespace rotir;

namespace {

std::vector<double> random_ir(std::mt19937_64& eng, std::size_t k) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(k);
  for (auto& x : v) x = dist(eng);
  return v;
}

}  // namespace

TEST_CASE("normalized misalignment identities") {
  std::mt19937_64 eng(2);
  const auto h = random_ir(eng, 16);

  SUBCASE("zero estimate scores 0 dB") {
    std::vector<metrics::AlignedPair> pairs{metrics::make_aligned(h, std::vector<double>(16, 0.0))};
    const auto nm = metrics::normalized_misalignment(pairs);
    CHECK(nm.nm_db == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(nm.evaluated == 1);
  }

  SUBCASE("half estimate scores about -6.02 dB") {
    auto est = h;
    for (auto& v : est) v *= 0.5;
    std::vector<metrics::AlignedPair> pairs{metrics::make_aligned(h, est)};
    CHECK(metrics::normalized_misalignment(pairs).nm_db ==
          doctest::Approx(10.0 * std::log10(0.25)).epsilon(1e-9));
  }

  SUBCASE("exact match floors at -300 dB with the flag set") {
    std::vector<metrics::AlignedPair> pairs{metrics::make_aligned(h, h)};
    const auto nm = metrics::normalized_misalignment(pairs);
    CHECK(nm.nm_db == -300.0);
    CHECK(nm.exact_match);
  }

  SUBCASE("scale covariance: est = a h gives 10 log10((1-a)^2)") {
    for (const double a : {0.3, 1.5, -0.2}) {
      auto est = h;
      for (auto& v : est) v *= a;
      std::vector<metrics::AlignedPair> pairs{metrics::make_aligned(h, est)};
      CHECK(metrics::normalized_misalignment(pairs).nm_db ==
            doctest::Approx(10.0 * std::log10((1.0 - a) * (1.0 - a))).epsilon(1e-9));
    }
  }

  SUBCASE("zero-norm true IRs are excluded and counted") {
    std::vector<metrics::AlignedPair> pairs{
        metrics::make_aligned(std::vector<double>(8, 0.0), random_ir(eng, 8)),
        metrics::make_aligned(h, std::vector<double>(16, 0.0))};
    const auto nm = metrics::normalized_misalignment(pairs);
    CHECK(nm.evaluated == 1);
    CHECK(nm.skipped_zero_norm == 1);
    CHECK(nm.nm_db == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("all-zero truth is an error") {
    std::vector<metrics::AlignedPair> pairs{
        metrics::make_aligned(std::vector<double>(8, 0.0), random_ir(eng, 8))};
    CHECK_THROWS_AS(metrics::normalized_misalignment(pairs), std::invalid_argument);
  }

  SUBCASE("zero padding the estimate does not change the score") {
    const auto est = random_ir(eng, 12);
    std::vector<double> est_short(est.begin(), est.begin() + 12);
    std::vector<metrics::AlignedPair> a{metrics::make_aligned(h, est_short)};
    auto padded = est_short;
    padded.resize(16, 0.0);
    std::vector<metrics::AlignedPair> b{metrics::make_aligned(h, padded)};
    CHECK(metrics::normalized_misalignment(a).nm_db ==
          metrics::normalized_misalignment(b).nm_db);
  }
}

TEST_CASE("log spectral distortion") {
  std::mt19937_64 eng(7);
  const auto h = random_ir(eng, 20);
  const double fs = 8000.0;

  SUBCASE("identical IRs score 0 dB") {
    std::vector<metrics::AlignedPair> pairs{metrics::make_aligned(h, h)};
    CHECK(metrics::log_spectral_distortion(pairs, 32, {0.0, 0.0}, fs) ==
          doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("doubling the estimate scores about 6.02 dB") {
    auto est = h;
    for (auto& v : est) v *= 2.0;
    std::vector<metrics::AlignedPair> pairs{metrics::make_aligned(h, est)};
    CHECK(metrics::log_spectral_distortion(pairs, 32, {0.0, 0.0}, fs) ==
          doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-9));
  }

  SUBCASE("matches a scalar-loop oracle on a random pair") {
    const auto est = random_ir(eng, 20);
    std::vector<metrics::AlignedPair> pairs{metrics::make_aligned(h, est)};
    const std::size_t fft_size = 32;
    const auto lib = metrics::log_spectral_distortion(pairs, fft_size, {0.0, 0.0}, fs);

    // oracle: direct DFT per bin, squared dB ratios averaged over bins 1..16
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 1; i <= fft_size / 2; ++i) {
      std::complex<double> ht(0.0), he(0.0);
      for (std::size_t k = 0; k < 20; ++k) {
        const double ang = -2.0 * 3.14159265358979323846 * static_cast<double>(i * k) /
                           static_cast<double>(fft_size);
        ht += h[k] * std::complex<double>(std::cos(ang), std::sin(ang));
        he += est[k] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      const double db = 20.0 * std::log10(std::abs(ht) / std::abs(he));
      acc += db * db;
      ++count;
    }
    CHECK(lib == doctest::Approx(std::sqrt(acc / count)).epsilon(1e-9));
  }

  SUBCASE("invariant to common positive scaling") {
    const auto est = random_ir(eng, 20);
    std::vector<metrics::AlignedPair> pairs{metrics::make_aligned(h, est)};
    auto h2 = h;
    auto est2 = est;
    for (auto& v : h2) v *= 7.3;
    for (auto& v : est2) v *= 7.3;
    std::vector<metrics::AlignedPair> scaled{metrics::make_aligned(h2, est2)};
    CHECK(metrics::log_spectral_distortion(pairs, 32, {0.0, 0.0}, fs) ==
          doctest::Approx(metrics::log_spectral_distortion(scaled, 32, {0.0, 0.0}, fs))
              .epsilon(1e-12));
  }

  SUBCASE("band restriction and empty band error") {
    std::vector<metrics::AlignedPair> pairs{metrics::make_aligned(h, h)};
    CHECK(metrics::log_spectral_distortion(pairs, 32, {200.0, 3000.0}, fs) ==
          doctest::Approx(0.0));
    CHECK_THROWS_AS(metrics::log_spectral_distortion(pairs, 32, {100.0, 101.0}, fs),
                    std::invalid_argument);
  }
}

TEST_CASE("itd") {
  const double fs = 44100.0;
  std::vector<double> pulse(64, 0.0);
  pulse[20] = 1.0;
  pulse[21] = 0.5;

  SUBCASE("identical ears give zero") {
    CHECK(metrics::itd_seconds(pulse, pulse, 30, fs) == 0.0);
  }

  SUBCASE("a 5-sample delay of the right ear reads positive 113.4 us") {
    std::vector<double> right(64, 0.0);
    right[25] = 1.0;
    right[26] = 0.5;
    CHECK(metrics::itd_seconds(pulse, right, 30, fs) ==
          doctest::Approx(5.0 / fs).epsilon(1e-12));
  }

  SUBCASE("antisymmetric under swapping ears") {
    std::mt19937_64 eng(9);
    for (int trial = 0; trial < 20; ++trial) {
      auto l = random_ir(eng, 40);
      auto r = random_ir(eng, 40);
      const double ab = metrics::itd_seconds(l, r, 20, fs);
      const double ba = metrics::itd_seconds(r, l, 20, fs);
      CHECK(ab == doctest::Approx(-ba).epsilon(1e-15));
    }
  }

  SUBCASE("zero energy input is rejected") {
    const std::vector<double> zero(64, 0.0);
    CHECK_THROWS_AS(metrics::itd_seconds(pulse, zero, 30, fs), std::invalid_argument);
  }

  SUBCASE("max_lag bounds the search") {
    std::vector<double> right(64, 0.0);
    right[40] = 1.0;  // true shift 20 exceeds max_lag 10
    const double itd = metrics::itd_seconds(pulse, right, 10, fs);
    CHECK(std::abs(itd) <= 10.0 / fs + 1e-15);
    CHECK_THROWS_AS(metrics::itd_seconds(pulse, right, 64, fs), std::invalid_argument);
  }
}

TEST_CASE("time window keeps only the configured range") {
  const double fs = 34000.0;
  std::vector<double> ir(400, 1.0);
  metrics::time_window(ir, 0.0, 6e-3, fs);
  // 6 ms at 34 kHz: first 204 samples kept
  for (std::size_t k = 0; k < 204; ++k) CHECK(ir[k] == 1.0);
  for (std::size_t k = 204; k < 400; ++k) CHECK(ir[k] == 0.0);

  std::vector<double> full(50, 2.0);
  metrics::time_window(full, 0.0, 1.0, fs);  // window covers everything
  for (const double v : full) CHECK(v == 2.0);

  CHECK_THROWS_AS(metrics::time_window(full, 0.5, 0.2, fs), std::invalid_argument);
}

TEST_CASE("otf compensation") {
  std::vector<std::complex<double>> spec{{1.0, 1.0}, {2.0, 0.0}, {0.0, -3.0}};

  SUBCASE("unit otf with zero reg is the identity") {
    auto s = spec;
    const std::vector<std::complex<double>> otf(3, {1.0, 0.0});
    metrics::otf_compensate(s, otf, 0.0);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(s[i].real() == doctest::Approx(spec[i].real()));
      CHECK(s[i].imag() == doctest::Approx(spec[i].imag()));
    }
  }

  SUBCASE("uniform gain divides out") {
    auto s = spec;
    const std::vector<std::complex<double>> otf(3, {2.0, 0.0});
    metrics::otf_compensate(s, otf, 0.0);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(std::abs(s[i] - spec[i] * 0.5) <= 1e-15);
  }

  SUBCASE("regularization keeps null bins finite") {
    auto s = spec;
    const std::vector<std::complex<double>> otf{{1.0, 0.0}, {0.0, 0.0}, {1.0, 0.0}};
    metrics::otf_compensate(s, otf, 1e-6);
    CHECK(std::isfinite(s[1].real()));
    CHECK(std::isfinite(s[1].imag()));
    CHECK(s[1] == std::complex<double>(0.0, 0.0));  // H conj(0) = 0
  }
}

TEST_CASE("azimuth_map picks the circularly closest tag") {
  ident::IdentificationResult result;
  result.speakers = 2;
  result.taps = 3;
  result.n_frames = 100;
  for (std::size_t i = 0; i < 8; ++i) {
    result.snapshot_index.push_back(i * 10);
    result.snapshot_azimuth_deg.push_back(static_cast<double>(i) * 45.0);
    for (std::size_t j = 0; j < 6; ++j)
      result.snapshots.push_back(static_cast<double>(i * 100 + j));
  }

  SUBCASE("an exact tag returns that snapshot") {
    const std::vector<double> targets{90.0};
    const auto mapped = metrics::azimuth_map(result, targets);
    REQUIRE(mapped.size() == 1);
    CHECK(mapped[0].snapshot == 2);
    CHECK(mapped[0].tag_deg == 90.0);
    CHECK(mapped[0].h[0] == 200.0);
  }

  SUBCASE("wrap-around distance counts") {
    const std::vector<double> targets{350.0};  // closest tag is 0, not 315
    const auto mapped = metrics::azimuth_map(result, targets);
    CHECK(mapped[0].snapshot == 0);
  }

  SUBCASE("dense tags land within half the tag spacing") {
    ident::IdentificationResult dense;
    dense.speakers = 1;
    dense.taps = 1;
    dense.n_frames = 3600;
    for (std::size_t i = 0; i < 3600; ++i) {
      dense.snapshot_index.push_back(i);
      dense.snapshot_azimuth_deg.push_back(static_cast<double>(i) * 0.1);
      dense.snapshots.push_back(0.0);
    }
    for (double target = 0.0; target < 360.0; target += 1.0) {
      const auto mapped = metrics::azimuth_map(dense, std::vector<double>{target});
      const double diff = std::abs(mapped[0].tag_deg - target);
      CHECK(std::min(diff, 360.0 - diff) <= 0.05 + 1e-12);
    }
  }

  SUBCASE("empty results are rejected") {
    ident::IdentificationResult empty;
    CHECK_THROWS_AS(metrics::azimuth_map(empty, std::vector<double>{0.0}),
                    std::invalid_argument);
  }

  SUBCASE("speaker_ir extracts the block of one speaker") {
    const auto mapped = metrics::azimuth_map(result, std::vector<double>{45.0});
    const auto block = metrics::speaker_ir(mapped[0].h, 1, 3);
    CHECK(block[0] == 103.0);
    CHECK(block[2] == 105.0);
    CHECK_THROWS_AS(metrics::speaker_ir(mapped[0].h, 2, 3), std::invalid_argument);
  }
}

TEST_CASE("itd error table") {
  const double fs = 48000.0;
  std::mt19937_64 eng(12);
  const std::vector<double> azimuths{0.0, 90.0, 180.0};

  std::vector<metrics::BinauralIr> truth;
  for (std::size_t i = 0; i < 3; ++i) {
    metrics::BinauralIr b;
    b.left = random_ir(eng, 32);
    b.right = b.left;
    truth.push_back(std::move(b));
  }

  SUBCASE("identical sets give zero error everywhere") {
    const auto rows = metrics::itd_error_table(truth, truth, azimuths, 10, fs);
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
      CHECK(row.abs_err_s == 0.0);
      CHECK(row.itd_true_s == row.itd_est_s);
    }
  }

  SUBCASE("missing azimuths are rejected") {
    std::vector<metrics::BinauralIr> short_set(truth.begin(), truth.begin() + 2);
    CHECK_THROWS_AS(metrics::itd_error_table(truth, short_set, azimuths, 10, fs),
                    std::invalid_argument);
  }
}
