#include <cmath>

#include "auxeff/covariate_estimators.hpp"
#include "auxeff/rng.hpp"
#include "auxeff/synthdata.hpp"
#include "doctest.h"

using namespace auxeff;

namespace {
ObservedDataset linear_world(int n, double effect, double noise_sd, std::uint64_t seed) {
  Rng rng(seed);
  ObservedDataset d;
  d.x_names = {"x"};
  for (int i = 0; i < n; ++i) {
    ObservedUnit u;
    u.x = Eigen::VectorXd::Constant(1, static_cast<double>(rng.bernoulli(0.5)));
    u.a = rng.bernoulli(0.5);
    u.s = rng.bernoulli(0.4);
    u.y = 2.0 + 0.5 * u.x[0] + effect * u.a + (noise_sd > 0 ? rng.normal(0, noise_sd) : 0.0);
    d.units.push_back(u);
  }
  return d;
}

synth::ContinuousWorldConfig setting_one() {
  synth::ContinuousWorldConfig cfg;
  cfg.stratum_probs = {0.25, 0.40, 0.05, 0.30};
  cfg.px1 = {0.5, 0.75, 0.25, 0.5};
  cfg.x_shift = 0.5;
  cfg.means_at_x0 = {{{1.0, 1.5, 0.75, 1.25}, {2.0, 2.5, 1.25, 1.75}}};
  return cfg;
}
}  // namespace

TEST_CASE("conventional fit recovers a noiseless additive effect exactly") {
  const auto d = linear_world(200, 1.5, 0.0, 3);
  const auto fit = covest::conventional_fit(d);
  CHECK(fit.effect == doctest::Approx(1.5).epsilon(1e-10));
  CHECK(fit.se == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
}

TEST_CASE("conventional fit is consistent under noise") {
  const auto d = linear_world(40000, 1.5, 1.0, 4);
  const auto fit = covest::conventional_fit(d);
  CHECK(fit.effect == doctest::Approx(1.5).epsilon(0.05));
  CHECK(fit.se > 0.0);
  CHECK(fit.se < 0.05);
}

TEST_CASE("naive contrast on a hand fixture") {
  ObservedDataset d;
  d.x_names = {};
  auto add = [&](int a, int s, double y) {
    ObservedUnit u;
    u.x = Eigen::VectorXd::Zero(0);
    u.a = a;
    u.s = s;
    u.y = y;
    d.units.push_back(u);
  };
  add(1, 1, 2.0);
  add(1, 1, 4.0);
  add(0, 1, 1.0);
  add(1, 0, 100.0);  // s = 0 rows are ignored
  add(0, 0, -50.0);
  const auto nc = covest::naive_contrast(d);
  CHECK(nc.mean_treated == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(nc.mean_control == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(nc.contrast == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(nc.n_treated == 2);
  CHECK(nc.n_control == 1);
  CHECK(nc.warning.find("post-treatment") != std::string::npos);

  ObservedDataset empty_cell;
  empty_cell.x_names = {};
  auto add2 = [&](int a, int s, double y) {
    ObservedUnit u;
    u.x = Eigen::VectorXd::Zero(0);
    u.a = a;
    u.s = s;
    u.y = y;
    empty_cell.units.push_back(u);
  };
  add2(1, 1, 2.0);
  add2(0, 0, 1.0);
  CHECK_THROWS_AS(covest::naive_contrast(empty_cell), ValidationError);
}

TEST_CASE("principal score recovers the arm-wise auxiliary law") {
  Rng rng(15);
  ObservedDataset d;
  d.x_names = {"x"};
  for (int i = 0; i < 30000; ++i) {
    ObservedUnit u;
    u.x = Eigen::VectorXd::Constant(1, static_cast<double>(rng.bernoulli(0.5)));
    u.a = rng.bernoulli(0.5);
    const double p = u.a == 1 ? (u.x[0] == 1.0 ? 0.7 : 0.3) : 0.5;
    u.s = rng.bernoulli(p);
    u.y = 0.0;
    d.units.push_back(u);
  }
  const auto ps1 = covest::fit_principal_score(d, 1);
  CHECK(ps1.arm == 1);
  CHECK_FALSE(ps1.weak);
  // fitted at x=0 and x=1 match the generating probabilities
  for (std::size_t i = 0; i < d.n(); ++i) {
    const double target = d.units[i].x[0] == 1.0 ? 0.7 : 0.3;
    CHECK(ps1.fitted_all[i] == doctest::Approx(target).epsilon(0.05));
  }
  // control arm: x carries no signal, so the score is flat -> weak flag
  const auto ps0 = covest::fit_principal_score(d, 0);
  CHECK(ps0.weak);
}

TEST_CASE("principal score requires variation") {
  ObservedDataset d;
  d.x_names = {};
  for (int i = 0; i < 10; ++i) {
    ObservedUnit u;
    u.x = Eigen::VectorXd::Zero(0);
    u.a = i % 2;
    u.s = u.a;  // constant within each arm
    u.y = 0.0;
    d.units.push_back(u);
  }
  CHECK_THROWS_AS(covest::fit_principal_score(d, 1), ValidationError);
}

TEST_CASE("expected-auxiliary fit approaches the population extrapolation") {
  const auto cfg = setting_one();
  const auto complete = synth::gen_continuous_world(cfg, 60000, 23);
  const auto obs = synth::mask(complete, 0.5, 24);
  const auto fit = covest::eas_fit(obs, oracle::EasScoreMode::OwnArm);
  CHECK(fit.extrapolated == doctest::Approx(-2.95).epsilon(0.12));
  CHECK(fit.score_min >= 0.0);
  CHECK(fit.score_max <= 1.0);
  CHECK(fit.score_max < 1.0);  // extrapolation really is outside the data
  CHECK(fit.extrapolation_warning.find("extrapolat") != std::string::npos);
  CHECK(fit.effect_at(0.0) == doctest::Approx(fit.fit.coefficients[2]).epsilon(1e-12));
}

TEST_CASE("supplying true scores is honored") {
  const auto cfg = setting_one();
  const auto complete = synth::gen_continuous_world(cfg, 20000, 29);
  const auto obs = synth::mask(complete, 0.5, 30);
  Eigen::VectorXd s0(obs.n()), s1(obs.n());
  // true per-x scores computed from the world law
  for (std::size_t i = 0; i < obs.n(); ++i) {
    const int xv = obs.units[i].x[0] == 1.0 ? 1 : 0;
    double den = 0.0, m0 = 0.0, m1 = 0.0;
    for (int k = 0; k < kNumStrata; ++k) {
      const double px = xv == 1 ? cfg.px1[k] : 1.0 - cfg.px1[k];
      const double w = cfg.stratum_probs[k] * px;
      den += w;
      const auto [a0, a1] = stratum_to_pair(static_cast<Stratum>(k));
      m0 += w * a0;
      m1 += w * a1;
    }
    s0[i] = m0 / den;
    s1[i] = m1 / den;
  }
  const auto fit = covest::eas_fit(obs, oracle::EasScoreMode::OwnArm, &s0, &s1);
  CHECK(fit.extrapolated == doctest::Approx(-2.9524602618045783).epsilon(0.1));

  Eigen::VectorXd bad(3);
  CHECK_THROWS_AS(covest::eas_fit(obs, oracle::EasScoreMode::OwnArm, &bad, nullptr),
                  ValidationError);
}

TEST_CASE("threshold subgroup contrast on a hand fixture") {
  ObservedDataset d;
  d.x_names = {};
  Eigen::VectorXd score(6);
  auto add = [&](int a, double y) {
    ObservedUnit u;
    u.x = Eigen::VectorXd::Zero(0);
    u.a = a;
    u.s = 0;
    u.y = y;
    d.units.push_back(u);
  };
  add(1, 5.0);
  add(1, 7.0);
  add(0, 2.0);
  add(0, 4.0);
  add(1, 100.0);  // below threshold, excluded
  add(0, -100.0);
  score << 0.9, 0.95, 0.85, 0.88, 0.2, 0.1;
  const auto te = covest::effect_above_threshold(d, score, 0.8);
  CHECK(te.n_subgroup == 4);
  CHECK(te.n_treated == 2);
  CHECK(te.n_control == 2);
  CHECK(te.effect == doctest::Approx(3.0).epsilon(1e-12));  // 6 - 3
  CHECK(te.threshold == 0.8);
}

TEST_CASE("joint score cells partition the sample") {
  Rng rng(31);
  ObservedDataset d;
  d.x_names = {};
  const int n = 400;
  Eigen::VectorXd s0(n), s1(n);
  for (int i = 0; i < n; ++i) {
    ObservedUnit u;
    u.x = Eigen::VectorXd::Zero(0);
    u.a = rng.bernoulli(0.5);
    u.s = 0;
    u.y = static_cast<double>(u.a);
    d.units.push_back(u);
    s0[i] = rng.uniform();
    s1[i] = rng.uniform();
  }
  const auto cells = covest::joint_score_effects(d, s0, s1, 2);
  int total = 0;
  for (const auto& c : cells) {
    total += c.n;
    CHECK(c.n > 0);
    CHECK(c.bin0 >= 0);
    CHECK(c.bin0 < 2);
    CHECK(c.bin1 >= 0);
    CHECK(c.bin1 < 2);
    if (c.estimable) {
      CHECK(c.n_treated > 0);
      CHECK(c.n_control > 0);
      CHECK(c.effect == doctest::Approx(1.0).epsilon(1e-12));  // y == a exactly
    }
  }
  CHECK(total == n);
}
