#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <map>

#include "auxeff/data_model.hpp"

namespace auxeff::synth {

// Binary-outcome world with no covariates: strata drawn from fixed weights,
// a single event probability per stratum shared by both arms (a null world
// for the outcome, not for the auxiliary).
struct BinaryWorldConfig {
  std::array<double, kNumStrata> stratum_weights{};  // any nonnegative scale
  std::array<double, kNumStrata> event_prob{};       // pr(y=1 | stratum), both arms
  double p_treat = 0.5;
};

// Continuous-outcome world with one binary covariate: stratum probabilities,
// pr(x=1 | stratum), additive covariate shift, per-(arm, stratum) means at
// x=0, and a mean-zero sd-one error family.
struct ContinuousWorldConfig {
  std::array<double, kNumStrata> stratum_probs{};
  std::array<double, kNumStrata> px1{};
  double x_shift = 0.5;
  std::array<std::array<double, kNumStrata>, 2> means_at_x0{};  // [arm][stratum]
  enum class ErrorFamily { Normal, Gamma } family = ErrorFamily::Normal;
  double cross_world_corr = 0.0;  // Normal errors only
  double p_treat = 0.5;
};

// Structural world for the mediation-style model
//   y^{a,s} = beta_y.{1,x} + a*gamma1 + s*gamma2 + a*s*gamma3 + eps ,
// with s_a drawn from logistic models in x per arm.  The two potential
// auxiliaries share one uniform draw, so the world is monotone (s1 <= s0
// for every unit) whenever pr(s1=1|x) <= pr(s0=1|x) for all x.
struct MechanisticWorldConfig {
  double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0;
  Eigen::VectorXd beta_y;    // coefficients on {1, x...}
  Eigen::VectorXd alpha_s0;  // logit pr(s=1 | a=0, x) on {1, x...}
  Eigen::VectorXd alpha_s1;  // logit pr(s=1 | a=1, x) on {1, x...}
  bool zero_control_aux = false;  // force s0 = 0 (degenerate mediation case)
  int n_covariates = 2;           // iid Bernoulli(1/2) covariates
  double noise_sd = 1.0;
  double p_treat = 0.5;
};

// Survival world with a latent disease, screening only in the treated arm,
// and a log-time shift psi acting on screen-diagnosed treated subjects.
// Emits the primary auxiliary s (= screen-diagnosed) and s_screen.
struct ScreeningWorldConfig {
  double cancer_prob = 0.1;
  double screen_prob = 0.7;   // pr(screened | a=1)
  double detect_prob = 1.0;   // pr(diagnosed | screened, diseased)
  double psi = -0.5;          // multiplicative log-time effect on a*s
  Eigen::VectorXd beta_t;     // log T0 mean on {1, x...}
  double sd_t = 0.8;
  double comp_rate = 0.02;    // exponential competing hazard
  double censor_horizon = 10.0;
  int n_covariates = 1;       // iid Bernoulli(1/2) covariates
  double p_treat = 0.5;
};

CompleteDataset gen_binary_world(const BinaryWorldConfig& cfg, std::size_t n, std::uint64_t seed);
CompleteDataset gen_continuous_world(const ContinuousWorldConfig& cfg, std::size_t n,
                                     std::uint64_t seed);
CompleteDataset gen_mechanistic_world(const MechanisticWorldConfig& cfg, std::size_t n,
                                      std::uint64_t seed);
SurvivalDataset gen_screening_world(const ScreeningWorldConfig& cfg, std::size_t n,
                                    std::uint64_t seed);

// Randomized treatment assignment: reveals (x, a, s_a, y_a).
ObservedDataset mask(const CompleteDataset& complete, double p_treat, std::uint64_t seed);

}  // namespace auxeff::synth
