#include "auxeff/synthdata.hpp"

#include <cmath>
#include <limits>

#include "auxeff/rng.hpp"

namespace auxeff::synth {

namespace {

void check_prob(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw ValidationError(std::string(name) + " must lie in [0, 1]");
}

void check_p_treat(double p) {
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("p_treat must lie in (0, 1)");
}

int draw_categorical(Rng& rng, const std::array<double, kNumStrata>& probs) {
  double u = rng.uniform();
  double cum = 0.0;
  for (int k = 0; k < kNumStrata; ++k) {
    cum += probs[k];
    if (u < cum) return k;
  }
  return kNumStrata - 1;
}

double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Eigen::VectorXd with_intercept(const Eigen::VectorXd& x) {
  Eigen::VectorXd z(x.size() + 1);
  z[0] = 1.0;
  z.tail(x.size()) = x;
  return z;
}

}  // namespace

CompleteDataset gen_binary_world(const BinaryWorldConfig& cfg, std::size_t n, std::uint64_t seed) {
  double total = 0.0;
  for (double w : cfg.stratum_weights) {
    if (w < 0.0) throw ValidationError("stratum_weights must be nonnegative");
    total += w;
  }
  if (total <= 0.0) throw ValidationError("stratum_weights sum to zero");
  for (double p : cfg.event_prob) check_prob(p, "event_prob");
  check_p_treat(cfg.p_treat);

  std::array<double, kNumStrata> probs{};
  for (int k = 0; k < kNumStrata; ++k) probs[k] = cfg.stratum_weights[k] / total;

  Rng rng(seed);
  CompleteDataset d;
  d.units.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CompleteUnit u;
    int k = draw_categorical(rng, probs);
    auto [s0, s1] = stratum_to_pair(static_cast<Stratum>(k));
    u.s0 = s0;
    u.s1 = s1;
    u.y0 = rng.bernoulli(cfg.event_prob[k]);
    u.y1 = rng.bernoulli(cfg.event_prob[k]);
    u.x.resize(0);
    d.units.push_back(std::move(u));
  }
  return d;
}

CompleteDataset gen_continuous_world(const ContinuousWorldConfig& cfg, std::size_t n,
                                     std::uint64_t seed) {
  double total = 0.0;
  for (double p : cfg.stratum_probs) {
    check_prob(p, "stratum_probs");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("stratum_probs must sum to 1");
  for (double p : cfg.px1) check_prob(p, "px1");
  check_p_treat(cfg.p_treat);
  if (cfg.family == ContinuousWorldConfig::ErrorFamily::Gamma && cfg.cross_world_corr != 0.0)
    throw ValidationError("cross_world_corr is only supported for Normal errors");
  if (std::abs(cfg.cross_world_corr) > 1.0)
    throw ValidationError("cross_world_corr must lie in [-1, 1]");

  Rng rng(seed);
  CompleteDataset d;
  d.x_names = {"x"};
  d.units.reserve(n);
  const double rho = cfg.cross_world_corr;
  for (std::size_t i = 0; i < n; ++i) {
    CompleteUnit u;
    int k = draw_categorical(rng, cfg.stratum_probs);
    auto [s0, s1] = stratum_to_pair(static_cast<Stratum>(k));
    u.s0 = s0;
    u.s1 = s1;
    double xv = rng.bernoulli(cfg.px1[k]);
    u.x.resize(1);
    u.x[0] = xv;
    double mu0 = cfg.means_at_x0[0][k] + cfg.x_shift * xv;
    double mu1 = cfg.means_at_x0[1][k] + cfg.x_shift * xv;
    if (cfg.family == ContinuousWorldConfig::ErrorFamily::Normal) {
      double e0 = rng.normal();
      double z = rng.normal();
      double e1 = rho * e0 + std::sqrt(1.0 - rho * rho) * z;
      u.y0 = mu0 + e0;
      u.y1 = mu1 + e1;
    } else {
      if (mu0 <= 0.0 || mu1 <= 0.0)
        throw ValidationError("Gamma errors require positive cell means");
      u.y0 = rng.gamma(mu0 * mu0, 1.0 / mu0);
      u.y1 = rng.gamma(mu1 * mu1, 1.0 / mu1);
    }
    d.units.push_back(std::move(u));
  }
  return d;
}

CompleteDataset gen_mechanistic_world(const MechanisticWorldConfig& cfg, std::size_t n,
                                      std::uint64_t seed) {
  check_p_treat(cfg.p_treat);
  if (cfg.n_covariates < 0) throw ValidationError("n_covariates must be nonnegative");
  const int p = cfg.n_covariates + 1;
  if (cfg.beta_y.size() != p || cfg.alpha_s1.size() != p ||
      (!cfg.zero_control_aux && cfg.alpha_s0.size() != p))
    throw ValidationError("coefficient lengths must equal 1 + n_covariates");
  if (cfg.noise_sd < 0.0) throw ValidationError("noise_sd must be nonnegative");

  Rng rng(seed);
  CompleteDataset d;
  for (int j = 0; j < cfg.n_covariates; ++j) d.x_names.push_back("x" + std::to_string(j + 1));
  d.units.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    CompleteUnit u;
    u.x.resize(cfg.n_covariates);
    for (int j = 0; j < cfg.n_covariates; ++j) u.x[j] = rng.bernoulli(0.5);
    Eigen::VectorXd z = with_intercept(u.x);
    double p0 = cfg.zero_control_aux ? 0.0 : expit(cfg.alpha_s0.dot(z));
    double p1 = expit(cfg.alpha_s1.dot(z));
    // One shared uniform couples the two potential auxiliaries: whenever
    // p1 <= p0 pointwise, {s1 = 1} is a subset of {s0 = 1} unit by unit,
    // so the world is monotone (treatment never causes the auxiliary).
    double us = rng.uniform();
    u.s0 = us < p0 ? 1 : 0;
    u.s1 = us < p1 ? 1 : 0;
    double base = cfg.beta_y.dot(z);
    double e0 = rng.normal(0.0, cfg.noise_sd);
    double e1 = rng.normal(0.0, cfg.noise_sd);
    u.y0 = base + u.s0 * cfg.gamma2 + e0;
    u.y1 = base + cfg.gamma1 + u.s1 * (cfg.gamma2 + cfg.gamma3) + e1;
    d.units.push_back(std::move(u));
  }
  return d;
}

SurvivalDataset gen_screening_world(const ScreeningWorldConfig& cfg, std::size_t n,
                                    std::uint64_t seed) {
  check_prob(cfg.cancer_prob, "cancer_prob");
  check_prob(cfg.screen_prob, "screen_prob");
  check_prob(cfg.detect_prob, "detect_prob");
  check_p_treat(cfg.p_treat);
  if (cfg.n_covariates < 0) throw ValidationError("n_covariates must be nonnegative");
  if (cfg.beta_t.size() != cfg.n_covariates + 1)
    throw ValidationError("beta_t length must equal 1 + n_covariates");
  if (cfg.comp_rate < 0.0) throw ValidationError("comp_rate must be nonnegative");
  if (cfg.censor_horizon <= 0.0) throw ValidationError("censor_horizon must be positive");
  if (cfg.sd_t < 0.0) throw ValidationError("sd_t must be nonnegative");

  Rng rng(seed);
  SurvivalDataset d;
  for (int j = 0; j < cfg.n_covariates; ++j) d.x_names.push_back("x" + std::to_string(j + 1));
  d.aux_names = {"s_screen"};
  d.aux_cols.resize(1);
  d.units.reserve(n);
  const double inf = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    SurvivalUnit u;
    u.x.resize(cfg.n_covariates);
    for (int j = 0; j < cfg.n_covariates; ++j) u.x[j] = rng.bernoulli(0.5);
    u.a = rng.bernoulli(cfg.p_treat);
    int diseased = rng.bernoulli(cfg.cancer_prob);
    // unconditional draws keep the stream aligned across configurations
    int u_screen = rng.bernoulli(cfg.screen_prob);
    int u_detect = rng.bernoulli(cfg.detect_prob);
    double eps = rng.normal();
    double t_comp = cfg.comp_rate > 0.0 ? rng.exponential(cfg.comp_rate) : inf;

    int screened = (u.a == 1) ? u_screen : 0;
    int diagnosed = (screened == 1 && diseased == 1) ? u_detect : 0;
    u.s = diagnosed;

    double t_main = inf;
    if (diseased == 1) {
      double logt = cfg.beta_t.dot(with_intercept(u.x)) + cfg.sd_t * eps +
                    cfg.psi * static_cast<double>(u.a * diagnosed);
      t_main = std::exp(logt);
    }
    const double c = cfg.censor_horizon;
    if (t_main <= t_comp && t_main <= c) {
      u.time = t_main;
      u.event = EventType::Main;
    } else if (t_comp <= c) {
      u.time = t_comp;
      u.event = EventType::Competing;
    } else {
      u.time = c;
      u.event = EventType::Admin;
    }
    u.censor_horizon = c;
    d.units.push_back(std::move(u));
    d.aux_cols[0].push_back(screened);
  }
  return d;
}

ObservedDataset mask(const CompleteDataset& complete, double p_treat, std::uint64_t seed) {
  check_p_treat(p_treat);
  Rng rng(seed);
  ObservedDataset d;
  d.x_names = complete.x_names;
  d.units.reserve(complete.n());
  for (const auto& cu : complete.units) {
    ObservedUnit u;
    u.x = cu.x;
    u.a = rng.bernoulli(p_treat);
    u.s = u.a == 1 ? cu.s1 : cu.s0;
    u.y = u.a == 1 ? cu.y1 : cu.y0;
    d.units.push_back(std::move(u));
  }
  return d;
}

}  // namespace auxeff::synth
