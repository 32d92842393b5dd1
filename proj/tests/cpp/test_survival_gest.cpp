#include <Eigen/Dense>
#include <cmath>

#include "auxeff/errors.hpp"
#include "auxeff/survival_gest.hpp"
#include "auxeff/synthdata.hpp"
#include "doctest.h"

using namespace auxeff;

namespace {

SurvivalUnit unit(int a, int s, double t, EventType ev, double horizon) {
  SurvivalUnit u;
  u.x = Eigen::VectorXd(0);
  u.a = a;
  u.s = s;
  u.time = t;
  u.event = ev;
  u.censor_horizon = horizon;
  return u;
}

synth::ScreeningWorldConfig screening_config() {
  synth::ScreeningWorldConfig cfg;
  cfg.cancer_prob = 0.1;
  cfg.screen_prob = 0.7;
  cfg.detect_prob = 1.0;
  cfg.psi = -0.5;
  cfg.beta_t = Eigen::Vector2d(1.5, 0.3);
  cfg.sd_t = 0.8;
  cfg.comp_rate = 0.02;
  cfg.censor_horizon = 10.0;
  cfg.n_covariates = 1;
  return cfg;
}

}  // namespace

TEST_CASE("recensored event indicator, hand cases") {
  const auto treated = unit(1, 1, 8.0, EventType::Main, 10.0);
  // log 8 + 0.3 = 2.379 falls beyond the shrunk threshold log 10 - 0.3 = 2.003
  CHECK(surv::delta_indicator(treated, 1, -0.3) == 0);
  // untransformed: log 8 = 2.079 < log 10 = 2.303
  CHECK(surv::delta_indicator(treated, 1, 0.0) == 1);
  // a positive psi does not widen the threshold: min(0, psi) = 0
  CHECK(surv::delta_indicator(unit(1, 0, 8.0, EventType::Main, 10.0), 0, 0.5) == 1);

  // non-main events never count, whatever psi
  CHECK(surv::delta_indicator(unit(1, 1, 8.0, EventType::Competing, 10.0), 1, -0.3) == 0);
  CHECK(surv::delta_indicator(unit(1, 1, 8.0, EventType::Admin, 10.0), 1, 0.0) == 0);

  // control units stay untransformed but face the same shrunk threshold
  CHECK(surv::delta_indicator(unit(0, 1, 5.0, EventType::Main, 10.0), 1, -0.3) == 1);
  CHECK(surv::delta_indicator(unit(0, 1, 8.0, EventType::Main, 10.0), 1, -0.3) == 0);
}

TEST_CASE("randomization z statistic, hand fixture") {
  SurvivalDataset sd;
  sd.units.push_back(unit(1, 0, 2.0, EventType::Main, 10.0));
  sd.units.push_back(unit(0, 0, 2.0, EventType::Main, 10.0));
  sd.units.push_back(unit(0, 0, 2.0, EventType::Main, 10.0));
  sd.units.push_back(unit(0, 0, 2.0, EventType::Main, 10.0));

  surv::SurvivalGSpec spec;
  spec.p_treat = 0.5;
  spec.weights = {1.0, 1.0, 1.0, 1.0};
  // all deltas are 1 at psi = 0: Z = (0.5 - 1.5) / sqrt(4 * 0.25) = -1
  CHECK(surv::z_stat(sd, 0.0, spec) == doctest::Approx(-1.0).epsilon(1e-12));

  spec.weights = {2.0, 1.0, 1.0, 1.0};
  // Z = (2*0.5 - 1.5) / sqrt(4*0.25 + 3*0.25) = -0.5 / sqrt(1.75)
  CHECK(surv::z_stat(sd, 0.0, spec) == doctest::Approx(-0.5 / std::sqrt(1.75)).epsilon(1e-12));

  // a competing event drops out of numerator and denominator
  sd.units[3].event = EventType::Competing;
  spec.weights = {1.0, 1.0, 1.0, 1.0};
  CHECK(surv::z_stat(sd, 0.0, spec) ==
        doctest::Approx(-0.5 / std::sqrt(3 * 0.25)).epsilon(1e-12));
}

TEST_CASE("no contributing unit raises a numerical error") {
  SurvivalDataset sd;
  sd.units.push_back(unit(1, 1, 2.0, EventType::Competing, 10.0));
  sd.units.push_back(unit(0, 0, 2.0, EventType::Admin, 10.0));
  surv::SurvivalGSpec spec;
  spec.p_treat = 0.5;
  CHECK_THROWS_AS(static_cast<void>(surv::z_stat(sd, 0.0, spec)), NumericalError);
}

TEST_CASE("without competing events the KM weights reduce to ones") {
  SurvivalDataset sd;
  sd.units.push_back(unit(1, 1, 3.0, EventType::Main, 10.0));
  sd.units.push_back(unit(1, 0, 4.0, EventType::Main, 10.0));
  sd.units.push_back(unit(0, 0, 5.0, EventType::Admin, 10.0));
  sd.units.push_back(unit(0, 1, 6.0, EventType::Main, 10.0));

  surv::SurvivalGSpec explicit_ones;
  explicit_ones.p_treat = 0.5;
  explicit_ones.weights = {1.0, 1.0, 1.0, 1.0};
  surv::SurvivalGSpec km;
  km.p_treat = 0.5;

  CHECK(surv::z_stat(sd, 0.0, km) ==
        doctest::Approx(surv::z_stat(sd, 0.0, explicit_ones)).epsilon(1e-14));
}

TEST_CASE("profile inversion recovers the screening effect") {
  const auto cfg = screening_config();
  const auto sd = synth::gen_screening_world(cfg, 20000, 1601);

  surv::SurvivalGSpec spec;
  spec.p_treat = 0.5;
  spec.grid_lo = -2.0;
  spec.grid_hi = 2.0;
  spec.grid_step = 0.01;
  spec.alpha = 0.05;
  const auto prof = surv::profile_and_invert(sd, spec);

  REQUIRE(prof.grid.size() == 401);
  CHECK(std::abs(prof.psi_hat - (-0.5)) < 0.15);
  CHECK(prof.ci_lo < -0.5);
  CHECK(prof.ci_hi > -0.5);
  CHECK_FALSE(prof.ci_lo_open);
  CHECK_FALSE(prof.ci_hi_open);
  CHECK(prof.ci_lo < prof.psi_hat);
  CHECK(prof.ci_hi > prof.psi_hat);
  // the null of no effect is clearly rejected at this sample size
  CHECK(std::abs(prof.z_at_zero) > 2.0);
  CHECK_FALSE(prof.weight_caveat.empty());

  // grid bookkeeping: points are ordered and the estimate lies inside
  for (std::size_t i = 1; i < prof.grid.size(); ++i)
    CHECK(prof.grid[i].psi > prof.grid[i - 1].psi);
  CHECK(prof.psi_hat >= spec.grid_lo);
  CHECK(prof.psi_hat <= spec.grid_hi);
}

TEST_CASE("screening and diagnosis auxiliaries give identical profiles") {
  // With detection certain among the screened, main events only happen where
  // the two auxiliary definitions agree, so the Z profiles must coincide.
  auto cfg = screening_config();
  cfg.detect_prob = 1.0;
  const auto sd = synth::gen_screening_world(cfg, 5000, 1701);

  surv::SurvivalGSpec spec;
  spec.p_treat = 0.5;
  spec.grid_lo = -1.0;
  spec.grid_hi = 1.0;
  spec.grid_step = 0.05;
  const auto res = surv::auxiliary_invariance_check(sd, "s_screen", "s", spec);
  CHECK(res.identical);
  CHECK(res.max_abs_diff == 0.0);
}

TEST_CASE("invariance check validates its preconditions") {
  const auto cfg = screening_config();
  const auto sd = synth::gen_screening_world(cfg, 2000, 1801);
  surv::SurvivalGSpec spec;
  spec.p_treat = 0.5;
  // swapped roles: diagnosed is not >= screened
  CHECK_THROWS_AS(static_cast<void>(surv::auxiliary_invariance_check(sd, "s", "s_screen", spec)),
                  ValidationError);
  // unknown auxiliary column
  CHECK_THROWS_AS(
      static_cast<void>(surv::auxiliary_invariance_check(sd, "nope", "s", spec)),
      ValidationError);
}

TEST_CASE("spec validation rejects malformed grids and levels") {
  surv::SurvivalGSpec spec;
  spec.grid_lo = 1.0;
  spec.grid_hi = -1.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);

  spec = surv::SurvivalGSpec{};
  spec.grid_step = 0.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);

  spec = surv::SurvivalGSpec{};
  spec.alpha = 1.5;
  CHECK_THROWS_AS(spec.validate(), ValidationError);

  spec = surv::SurvivalGSpec{};
  spec.p_treat = 0.0;
  CHECK_THROWS_AS(spec.validate(), ValidationError);
}

TEST_CASE("mismatched weight vector is rejected") {
  SurvivalDataset sd;
  sd.units.push_back(unit(1, 1, 2.0, EventType::Main, 10.0));
  sd.units.push_back(unit(0, 0, 3.0, EventType::Main, 10.0));
  surv::SurvivalGSpec spec;
  spec.p_treat = 0.5;
  spec.weights = {1.0};  // wrong length
  CHECK_THROWS_AS(static_cast<void>(surv::z_stat(sd, 0.0, spec)), ValidationError);
}
