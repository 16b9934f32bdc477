#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "rotir/identifiers.hpp"
#include "rotir/kernels.hpp"
#include "rotir/scenario.hpp"
#include "rotir/signals.hpp"

using namespace rotir;

namespace {

double norm2(std::span<const double> v) {
  double acc = 0.0;
  for (const double x : v) acc += x * x;
  return std::sqrt(acc);
}

// Per-speaker misalignment in dB, averaged, for flat block-layout vectors.
double flat_nm_db(std::span<const double> truth, std::span<const double> est,
                  std::size_t speakers, std::size_t taps) {
  double sum = 0.0;
  for (std::size_t s = 0; s < speakers; ++s) {
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < taps; ++k) {
      const double d = truth[s * taps + k] - est[s * taps + k];
      num += d * d;
      den += truth[s * taps + k] * truth[s * taps + k];
    }
    sum += 10.0 * std::log10(std::max(num / den, 1e-30));
  }
  return sum / static_cast<double>(speakers);
}

struct StaticToy {
  signals::ExcitationBank bank;
  std::vector<double> h_true;        // flat S*K
  scenario::Recording rec;
};

StaticToy make_static_toy(std::size_t s_count, std::size_t taps, std::size_t n_frames,
                          double noise_var, std::uint64_t seed) {
  StaticToy toy;
  const auto sweep = signals::generate_perfect_sweep(s_count * taps);
  toy.bank = signals::build_excitation_bank(sweep, s_count, taps, n_frames);
  scenario::StaticParams p{s_count, taps, seed};
  const auto traj =
      scenario::synth_trajectory(scenario::SynthParams{p}, {0.0, 0.0, 1000.0}, n_frames);
  toy.h_true.resize(s_count * taps);
  traj.frame(0, toy.h_true);
  toy.rec = scenario::render(traj, toy.bank, noise_var, seed + 1);
  return toy;
}

}  // namespace

TEST_CASE("estimation error and ISE gradient hand values") {
  const std::vector<double> x{2.0, 1.0};
  const std::vector<double> h{1.0, 3.0};
  CHECK(ident::estimation_error(x, 6.0, h) == doctest::Approx(1.0));
  CHECK(ident::estimation_error(x, 5.0, h) == doctest::Approx(0.0));
  const std::vector<double> zero(2, 0.0);
  CHECK(ident::estimation_error(x, 6.0, zero) == doctest::Approx(6.0));

  std::vector<double> grad(2);
  ident::ise_gradient(x, 1.0, grad);
  CHECK(grad[0] == 2.0);
  CHECK(grad[1] == 1.0);
  ident::ise_gradient(x, 0.0, grad);
  CHECK(grad[0] == 0.0);
  CHECK(grad[1] == 0.0);

  const auto rec = ident::make_step_record(x, 6.0, h);
  CHECK(rec.ise == rec.e * rec.e);
  for (std::size_t i = 0; i < 2; ++i) CHECK(rec.grad[i] == x[i] * rec.e);

  const std::vector<double> short_h{1.0};
  CHECK_THROWS_AS(ident::estimation_error(x, 1.0, short_h), std::invalid_argument);
}

TEST_CASE("lms step hand values") {
  std::vector<double> h{1.0};
  const std::vector<double> x{2.0};
  const double e = ident::lms_step(h, x, 6.0, 0.1);
  CHECK(e == doctest::Approx(4.0));
  CHECK(h[0] == doctest::Approx(1.8));

  std::vector<double> h2{1.0, 3.0};
  const std::vector<double> x2{2.0, 1.0};
  ident::lms_step(h2, x2, 5.0, 0.0);  // mu = 0: unchanged
  CHECK(h2[0] == 1.0);
  CHECK(h2[1] == 3.0);
  ident::lms_step(h2, x2, 5.0, 0.25);  // exact estimate: e = 0
  CHECK(h2[0] == 1.0);
  CHECK(h2[1] == 3.0);
}

TEST_CASE("nlms step") {
  SUBCASE("zero regressor leaves the estimate unchanged") {
    std::vector<double> h{0.5, -0.5};
    const std::vector<double> x{0.0, 0.0};
    ident::nlms_step(h, x, 3.0, 1.0, 1e-8);
    CHECK(h[0] == 0.5);
    CHECK(h[1] == -0.5);
  }

  SUBCASE("mu = 1 with tiny eps projects the error to zero") {
    std::vector<double> h{0.0, 0.0, 0.0};
    const std::vector<double> x{1.0, -2.0, 0.5};
    ident::nlms_step(h, x, 2.0, 1.0, 1e-14);
    CHECK(ident::estimation_error(x, 2.0, h) == doctest::Approx(0.0).epsilon(1e-10));
  }

  SUBCASE("update norm satisfies the scaling identity") {
    std::mt19937_64 eng(9);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> h(6), x(6);
      for (auto& v : h) v = dist(eng);
      for (auto& v : x) v = dist(eng);
      const double y = dist(eng);
      const double mu = 0.7, eps = 1e-6;
      auto h_next = h;
      const double e = ident::nlms_step(h_next, x, y, mu, eps);
      std::vector<double> update(6);
      for (std::size_t i = 0; i < 6; ++i) update[i] = h_next[i] - h[i];
      const double power = kernels::sum_sq(x.data(), x.size());
      // ||update|| (x.x + eps) == mu |e| ||x||, an algebraic identity of the
      // update rule (up to rounding).
      CHECK(norm2(update) * (power + eps) ==
            doctest::Approx(mu * std::abs(e) * norm2(x)).epsilon(1e-12));
    }
  }

  SUBCASE("static noise-free toy converges below -60 dB in 20 periods") {
    const std::size_t s_count = 2, taps = 8;
    const std::size_t period = s_count * taps;
    auto toy = make_static_toy(s_count, taps, 20 * period, 0.0, 21);
    std::vector<double> h(s_count * taps, 0.0);
    for (std::size_t n = 0; n < toy.rec.samples.size(); ++n) {
      const auto x = signals::regressor(toy.bank, n);
      ident::nlms_step(h, x, toy.rec.samples[n], 0.5, 1e-12);
    }
    CHECK(flat_nm_db(toy.h_true, h, s_count, taps) <= -60.0);
  }

  SUBCASE("matches a straight-loop reference run bit for bit") {
    const std::size_t s_count = 2, taps = 4;
    auto toy = make_static_toy(s_count, taps, 300, 0.01, 5);
    const double mu = 0.5, eps = 1e-8;

    std::vector<double> h_lib(s_count * taps, 0.0);
    std::vector<double> h_ref(s_count * taps, 0.0);
    for (std::size_t n = 0; n < toy.rec.samples.size(); ++n) {
      const auto x = signals::regressor(toy.bank, n);
      ident::nlms_step(h_lib, x, toy.rec.samples[n], mu, eps);
      // plain-loop oracle, no kernels
      double dot = 0.0, power = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        dot += x[i] * h_ref[i];
        power += x[i] * x[i];
      }
      const double e = toy.rec.samples[n] - dot;
      for (std::size_t i = 0; i < x.size(); ++i)
        h_ref[i] += mu * e * x[i] / (power + eps);
    }
    for (std::size_t i = 0; i < h_lib.size(); ++i)
      CHECK(h_lib[i] == doctest::Approx(h_ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("kalman step") {
  SUBCASE("scalar hand-computed recursion") {
    auto st = ident::KalmanState::create(1, 0.0, 1.0, 1.0);
    const std::vector<double> x{1.0};
    const double e = ident::kalman_step(st, x, 2.0);
    CHECK(e == doctest::Approx(2.0));
    CHECK(st.h_hat[0] == doctest::Approx(1.0));
    CHECK(st.cov[0] == doctest::Approx(0.5));
  }

  SUBCASE("huge measurement noise freezes the estimate") {
    auto st = ident::KalmanState::create(3, 0.0, 1e300, 1e-2);
    st.h_hat = {0.1, 0.2, 0.3};
    const auto before = st.h_hat;
    const std::vector<double> x{1.0, -1.0, 2.0};
    ident::kalman_step(st, x, 5.0);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(st.h_hat[i] == doctest::Approx(before[i]).epsilon(1e-12));
  }

  SUBCASE("covariance stays symmetric with a non-negative diagonal") {
    auto st = ident::KalmanState::create(5, 1e-7, 0.01, 1e-2);
    std::mt19937_64 eng(3);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> x(5);
    for (int n = 0; n < 200; ++n) {
      for (auto& v : x) v = dist(eng);
      ident::kalman_step(st, x, dist(eng));
      for (std::size_t i = 0; i < 5; ++i) {
        CHECK(st.cov[i * 5 + i] >= 0.0);
        for (std::size_t j = i + 1; j < 5; ++j)
          CHECK(std::abs(st.cov[i * 5 + j] - st.cov[j * 5 + i]) <= 1e-9);
      }
    }
  }

  SUBCASE("diagonal mode tracks a static system") {
    const std::size_t s_count = 1, taps = 6;
    auto toy = make_static_toy(s_count, taps, 40 * taps, 0.0, 8);
    auto st = ident::KalmanState::create(taps, 0.0, 1e-4, 1.0, true);
    for (std::size_t n = 0; n < toy.rec.samples.size(); ++n) {
      const auto x = signals::regressor(toy.bank, n);
      ident::kalman_step(st, x, toy.rec.samples[n]);
    }
    CHECK(flat_nm_db(toy.h_true, st.h_hat, s_count, taps) <= -40.0);
  }
}

TEST_CASE("jo-nlms step") {
  SUBCASE("sigma_v2 = 0 reduces to NLMS(mu=1) with vanishing regularization") {
    std::mt19937_64 eng(17);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<double> h(8), x(8);
      for (auto& v : h) v = dist(eng);
      for (auto& v : x) v = dist(eng);
      const double y = dist(eng);

      auto st = ident::JoNlmsState::create(8, 0.0, 0.5 + 0.5 * std::abs(dist(eng)));
      st.h_hat = h;
      ident::jo_nlms_step(st, x, y);

      auto h_nlms = h;
      ident::nlms_step(h_nlms, x, y, 1.0, 1e-300);
      for (std::size_t i = 0; i < 8; ++i) {
        const double scale = std::max(1e-12, std::abs(h_nlms[i]));
        CHECK(std::abs(st.h_hat[i] - h_nlms[i]) / scale <= 1e-10);
      }
    }
  }

  SUBCASE("zero regressor leaves estimate and misalignment power unchanged") {
    auto st = ident::JoNlmsState::create(4, 0.01, 1.0);
    st.h_hat = {1.0, 2.0, 3.0, 4.0};
    const std::vector<double> x(4, 0.0);
    ident::jo_nlms_step(st, x, 1.5);
    CHECK(st.m == 1.0);
    CHECK(st.h_hat[0] == 1.0);
    CHECK(st.h_hat[3] == 4.0);
  }

  SUBCASE("noisy static toy stays within 2 dB of NLMS(0.5)") {
    const std::size_t s_count = 2, taps = 8;
    const std::size_t n_frames = 60 * s_count * taps;
    auto toy = make_static_toy(s_count, taps, n_frames, 1e-4, 33);

    std::vector<double> h_nlms(s_count * taps, 0.0);
    auto st = ident::JoNlmsState::create(s_count * taps, 1e-4, 1.0);
    for (std::size_t n = 0; n < n_frames; ++n) {
      const auto x = signals::regressor(toy.bank, n);
      ident::nlms_step(h_nlms, x, toy.rec.samples[n], 0.5, 1e-8);
      ident::jo_nlms_step(st, x, toy.rec.samples[n]);
    }
    const double nm_nlms = flat_nm_db(toy.h_true, h_nlms, s_count, taps);
    const double nm_jo = flat_nm_db(toy.h_true, st.h_hat, s_count, taps);
    CHECK(nm_jo <= nm_nlms + 2.0);
  }
}

TEST_CASE("run_identifier") {
  const std::size_t s_count = 2, taps = 4;
  const std::size_t period = s_count * taps;

  SUBCASE("zero-length recording gives an empty result") {
    const auto sweep = signals::generate_perfect_sweep(period);
    const auto bank = signals::build_excitation_bank(sweep, s_count, taps, 16);
    scenario::Recording empty;
    const auto res = ident::run_identifier({}, bank, empty, ident::StorePolicy::every(),
                                           {0.0, 0.0, 1000.0});
    CHECK(res.n_frames == 0);
    CHECK(res.snapshot_count() == 0);
    CHECK(res.e_trace.empty());
  }

  SUBCASE("stride policy stores ceil(N/stride) snapshots") {
    auto toy = make_static_toy(s_count, taps, 50, 0.0, 2);
    const auto res = ident::run_identifier({}, toy.bank, toy.rec,
                                           ident::StorePolicy::strided(period),
                                           {0.0, 0.0, 1000.0});
    CHECK(res.snapshot_count() == (50 + period - 1) / period);
    CHECK(res.snapshot_index.front() == 0);
  }

  SUBCASE("error trace tail collapses on a static noise-free system") {
    auto toy = make_static_toy(s_count, taps, 40 * period, 0.0, 4);
    ident::AlgoConfig algo;
    algo.kind = ident::AlgoConfig::Kind::Nlms;
    algo.mu = 0.8;
    const auto res = ident::run_identifier(algo, toy.bank, toy.rec,
                                           ident::StorePolicy::at_indices({}),
                                           {0.0, 0.0, 1000.0});
    double head = 0.0, tail = 0.0;
    for (std::size_t n = 0; n < period; ++n) head = std::max(head, std::abs(res.e_trace[n]));
    for (std::size_t n = res.e_trace.size() - period; n < res.e_trace.size(); ++n)
      tail = std::max(tail, std::abs(res.e_trace[n]));
    CHECK(tail <= 1e-6 * head);
  }

  SUBCASE("azimuth tags follow the rotation profile") {
    auto toy = make_static_toy(s_count, taps, 100, 0.0, 6);
    const scenario::RotationProfile rot{10.0, 90.0, 100.0};
    const auto res = ident::run_identifier({}, toy.bank, toy.rec,
                                           ident::StorePolicy::at_indices({0, 50, 99}), rot);
    REQUIRE(res.snapshot_count() == 3);
    CHECK(res.snapshot_azimuth_deg[0] == doctest::Approx(10.0));
    CHECK(res.snapshot_azimuth_deg[1] == doctest::Approx(10.0 + 45.0));
    CHECK(res.snapshot_azimuth_deg[2] == doctest::Approx(10.0 + 89.1));
  }

  SUBCASE("identical configuration reruns bit-identically") {
    auto toy = make_static_toy(s_count, taps, 200, 0.01, 12);
    ident::AlgoConfig algo;
    algo.kind = ident::AlgoConfig::Kind::Kalman;
    const auto a = ident::run_identifier(algo, toy.bank, toy.rec,
                                         ident::StorePolicy::strided(10), {0, 45, 1000});
    const auto b = ident::run_identifier(algo, toy.bank, toy.rec,
                                         ident::StorePolicy::strided(10), {0, 45, 1000});
    CHECK(a.snapshots == b.snapshots);
    CHECK(a.e_trace == b.e_trace);
  }
}

TEST_CASE("azimuth snapshot indices pick the closest pass") {
  const scenario::RotationProfile rot{0.0, 9.0, 48000.0};
  const std::vector<double> targets{18.0};
  const auto idx = ident::azimuth_snapshot_indices(rot, 0, 200000, targets);
  REQUIRE(idx.size() == 1);
  CHECK(idx[0] == 96000);  // 18 deg at 9 deg/s and 48 kHz
}

TEST_CASE("default hyperparameters match the reference configuration") {
  const ident::AlgoConfig cfg;
  CHECK(cfg.mu == 0.5);
  CHECK(cfg.q == 1e-7);
  CHECK(cfg.r == 0.01);
  CHECK(cfg.p0 == 1e-2);
}
