#include "auxeff/oracle.hpp"

#include <cmath>

namespace auxeff::oracle {

namespace {

std::array<int, kNumStrata> s_under(int arm) {
  std::array<int, kNumStrata> out{};
  for (int k = 0; k < kNumStrata; ++k) {
    auto [s0, s1] = stratum_to_pair(static_cast<Stratum>(k));
    out[k] = arm == 1 ? s1 : s0;
  }
  return out;
}

double expit(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

StratumEffects realized_effects(const CompleteDataset& d) {
  if (d.n() == 0) throw ValidationError("realized_effects: empty dataset");
  std::array<double, kNumStrata> sum{};
  std::array<double, kNumStrata> cnt{};
  double total = 0.0;
  for (const auto& u : d.units) {
    int k = static_cast<int>(u.stratum());
    sum[k] += u.y1 - u.y0;
    cnt[k] += 1.0;
    total += u.y1 - u.y0;
  }
  StratumEffects out;
  for (int k = 0; k < kNumStrata; ++k) {
    out.prob[k] = cnt[k] / static_cast<double>(d.n());
    out.effect[k] = cnt[k] > 0 ? sum[k] / cnt[k] : std::nan("");
  }
  out.ate = total / static_cast<double>(d.n());
  return out;
}

double realized_single_potential_effect(const CompleteDataset& d, int arm, int s) {
  if (arm != 0 && arm != 1) throw ValidationError("arm must be 0 or 1");
  if (s != 0 && s != 1) throw ValidationError("s must be 0 or 1");
  double sum = 0.0, cnt = 0.0;
  for (const auto& u : d.units) {
    int sa = arm == 1 ? u.s1 : u.s0;
    if (sa == s) {
      sum += u.y1 - u.y0;
      cnt += 1.0;
    }
  }
  if (cnt == 0.0) throw ValidationError("realized_single_potential_effect: empty group");
  return sum / cnt;
}

SnmTruth realized_snm(const CompleteDataset& d) {
  SnmTruth t;
  t.psi0 = realized_single_potential_effect(d, 1, 0);
  t.psi1 = realized_single_potential_effect(d, 1, 1);
  return t;
}

double realized_naive_contrast(const CompleteDataset& d) {
  double s1sum = 0.0, s1cnt = 0.0, s0sum = 0.0, s0cnt = 0.0;
  for (const auto& u : d.units) {
    if (u.s1 == 1) {
      s1sum += u.y1;
      s1cnt += 1.0;
    }
    if (u.s0 == 1) {
      s0sum += u.y0;
      s0cnt += 1.0;
    }
  }
  if (s1cnt == 0.0 || s0cnt == 0.0)
    throw ValidationError("realized_naive_contrast: a conditioning group is empty");
  return s1sum / s1cnt - s0sum / s0cnt;
}

double realized_q(const CompleteDataset& d) {
  double num = 0.0, den = 0.0;
  for (const auto& u : d.units) {
    if (u.s1 == 0) {
      den += 1.0;
      if (u.s0 == 1) num += 1.0;
    }
  }
  if (den == 0.0) throw ValidationError("realized_q: no units with s1 = 0");
  return num / den;
}

BinaryCells binary_world_cells(const synth::BinaryWorldConfig& cfg) {
  double total = 0.0;
  for (double w : cfg.stratum_weights) total += w;
  if (total <= 0.0) throw ValidationError("stratum_weights sum to zero");

  auto cell = [&](int arm, int s) {
    auto sv = s_under(arm);
    double num = 0.0, den = 0.0;
    for (int k = 0; k < kNumStrata; ++k) {
      if (sv[k] == s) {
        den += cfg.stratum_weights[k];
        num += cfg.stratum_weights[k] * cfg.event_prob[k];
      }
    }
    if (den == 0.0) throw ValidationError("binary_world_cells: empty (a, s) cell");
    return num / den;
  };

  BinaryCells out;
  out.p00 = cell(0, 0);
  out.p01 = cell(0, 1);
  out.p10 = cell(1, 0);
  out.p11 = cell(1, 1);
  out.naive_contrast = out.p11 - out.p01;
  return out;
}

StratumEffects continuous_world_truth(const synth::ContinuousWorldConfig& cfg) {
  StratumEffects out;
  double ate = 0.0;
  for (int k = 0; k < kNumStrata; ++k) {
    out.prob[k] = cfg.stratum_probs[k];
    out.effect[k] = cfg.means_at_x0[1][k] - cfg.means_at_x0[0][k];
    ate += out.prob[k] * out.effect[k];
  }
  out.ate = ate;
  return out;
}

double single_potential_effect(const synth::ContinuousWorldConfig& cfg, int arm, int s) {
  if (arm != 0 && arm != 1) throw ValidationError("arm must be 0 or 1");
  if (s != 0 && s != 1) throw ValidationError("s must be 0 or 1");
  auto sv = s_under(arm);
  double num = 0.0, den = 0.0;
  for (int k = 0; k < kNumStrata; ++k) {
    if (sv[k] == s) {
      den += cfg.stratum_probs[k];
      num += cfg.stratum_probs[k] * (cfg.means_at_x0[1][k] - cfg.means_at_x0[0][k]);
    }
  }
  if (den == 0.0) throw ValidationError("single_potential_effect: group has probability zero");
  return num / den;
}

SnmTruth continuous_snm_truth(const synth::ContinuousWorldConfig& cfg) {
  SnmTruth t;
  t.psi0 = single_potential_effect(cfg, 1, 0);
  t.psi1 = single_potential_effect(cfg, 1, 1);
  return t;
}

EasLine eas_population(const synth::ContinuousWorldConfig& cfg, EasScoreMode mode) {
  // With one binary covariate the per-arm population regressions on
  // {1, score} interpolate the two x-cells exactly.
  auto pr_k_given_x = [&](int xv, int k) {
    double num = cfg.stratum_probs[k] * (xv == 1 ? cfg.px1[k] : 1.0 - cfg.px1[k]);
    double den = 0.0;
    for (int j = 0; j < kNumStrata; ++j)
      den += cfg.stratum_probs[j] * (xv == 1 ? cfg.px1[j] : 1.0 - cfg.px1[j]);
    return num / den;
  };
  auto score = [&](int arm, int xv) {
    auto sv = s_under(arm);
    double out = 0.0;
    for (int k = 0; k < kNumStrata; ++k) out += pr_k_given_x(xv, k) * sv[k];
    return out;
  };
  auto mean_y = [&](int arm, int xv) {
    double out = 0.0;
    for (int k = 0; k < kNumStrata; ++k)
      out += pr_k_given_x(xv, k) * (cfg.means_at_x0[arm][k] + cfg.x_shift * xv);
    return out;
  };

  auto line_for_arm = [&](int arm) {
    int score_arm = arm;
    if (mode == EasScoreMode::FixedControl) score_arm = 0;
    if (mode == EasScoreMode::FixedTreated) score_arm = 1;
    double m0 = score(score_arm, 0), m1 = score(score_arm, 1);
    if (std::abs(m1 - m0) < 1e-12)
      throw ValidationError("eas_population: score does not vary with x");
    double slope = (mean_y(arm, 1) - mean_y(arm, 0)) / (m1 - m0);
    double intercept = mean_y(arm, 0) - slope * m0;
    return std::pair<double, double>(intercept, slope);
  };

  auto [i0, s0] = line_for_arm(0);
  auto [i1, s1] = line_for_arm(1);
  EasLine out;
  out.b_int = i0;
  out.b_mu = s0;
  out.b_a = i1 - i0;
  out.b_mua = s1 - s0;
  return out;
}

MediationTruth mediation_truth(double gamma1, double gamma2, double gamma3, double q) {
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("q must lie in [0, 1]");
  MediationTruth t;
  t.gamma1 = gamma1;
  t.gamma2 = gamma2;
  t.gamma3 = gamma3;
  t.q = q;
  t.psi0 = gamma1 - q * gamma2;
  t.psi1 = gamma1 + gamma3;
  return t;
}

MediationTruth mechanistic_world_truth(const synth::MechanisticWorldConfig& cfg) {
  // q = pr(s0=1 | s1=0), integrating over the 2^k covariate patterns.  The
  // generator couples s0 and s1 through one shared uniform, so pr(s0=1, s1=0 | x)
  // = p0 - p1 when the world is monotone (p1 <= p0 at every x); the closed-form
  // effects psi0 = gamma1 - q*gamma2 and psi1 = gamma1 + gamma3 hold only then,
  // so a non-monotone configuration is rejected rather than silently mispriced.
  const int k = cfg.n_covariates;
  double num = 0.0, den = 0.0;
  for (int patt = 0; patt < (1 << k); ++patt) {
    Eigen::VectorXd z(k + 1);
    z[0] = 1.0;
    for (int j = 0; j < k; ++j) z[j + 1] = (patt >> j) & 1;
    double w = std::pow(0.5, k);
    double p0 = cfg.zero_control_aux ? 0.0 : expit(cfg.alpha_s0.dot(z));
    double p1 = expit(cfg.alpha_s1.dot(z));
    if (p1 > p0 + 1e-12)
      throw ValidationError(
          "mechanistic world is not monotone: pr(s1=1|x) exceeds pr(s0=1|x) at some covariate "
          "pattern, so treatment can cause the auxiliary and the mediation identities do not "
          "apply");
    num += w * (p0 - p1);
    den += w * (1.0 - p1);
  }
  double q = den > 0.0 ? num / den : 0.0;
  return mediation_truth(cfg.gamma1, cfg.gamma2, cfg.gamma3, q);
}

}  // namespace auxeff::oracle
