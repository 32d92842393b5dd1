#include "auxeff/covariate_estimators.hpp"

#include <algorithm>
#include <cmath>

namespace auxeff::covest {

namespace {

Eigen::MatrixXd design_1x(const ObservedDataset& d) {
  Eigen::MatrixXd X(d.n(), d.n_x() + 1);
  X.col(0).setOnes();
  if (d.n_x() > 0) X.rightCols(d.n_x()) = d.x_matrix();
  return X;
}

std::vector<std::string> names_1x(const ObservedDataset& d) {
  std::vector<std::string> out{"intercept"};
  out.insert(out.end(), d.x_names.begin(), d.x_names.end());
  return out;
}

void require_both_arms(const ObservedDataset& d, const char* who) {
  bool any1 = false, any0 = false;
  for (const auto& u : d.units) (u.a == 1 ? any1 : any0) = true;
  if (!any1 || !any0)
    throw ValidationError(std::string(who) + ": both treatment arms must be present");
}

}  // namespace

ConventionalFit conventional_fit(const ObservedDataset& d) {
  if (d.n() == 0) throw ValidationError("conventional_fit: empty dataset");
  require_both_arms(d, "conventional_fit");
  Eigen::MatrixXd X(d.n(), d.n_x() + 2);
  X.leftCols(d.n_x() + 1) = design_1x(d);
  X.col(d.n_x() + 1) = d.a_vector();
  auto names = names_1x(d);
  names.push_back("a");
  ConventionalFit out;
  out.fit = stats::ols(X, d.y_vector(), names);
  out.effect = out.fit.coefficients[d.n_x() + 1];
  out.se = std::sqrt(out.fit.covariance(d.n_x() + 1, d.n_x() + 1));
  return out;
}

NaiveContrast naive_contrast(const ObservedDataset& d) {
  NaiveContrast out;
  double sum1 = 0.0, sum0 = 0.0;
  for (const auto& u : d.units) {
    if (u.s != 1) continue;
    if (u.a == 1) {
      sum1 += u.y;
      ++out.n_treated;
    } else {
      sum0 += u.y;
      ++out.n_control;
    }
  }
  if (out.n_treated == 0 || out.n_control == 0)
    throw ValidationError("naive_contrast: an (a, s=1) cell is empty");
  out.mean_treated = sum1 / out.n_treated;
  out.mean_control = sum0 / out.n_control;
  out.contrast = out.mean_treated - out.mean_control;
  out.warning =
      "naive auxiliary-stratified contrast conditions on a post-treatment variable; "
      "the compared groups are not exchangeable and the contrast is not a causal effect";
  return out;
}

PrincipalScore fit_principal_score(const ObservedDataset& d, int arm) {
  if (arm != 0 && arm != 1) throw ValidationError("fit_principal_score: arm must be 0 or 1");
  std::vector<const ObservedUnit*> sel;
  for (const auto& u : d.units)
    if (u.a == arm) sel.push_back(&u);
  if (sel.empty()) throw ValidationError("fit_principal_score: arm has no units");

  bool any0 = false, any1 = false;
  for (const auto* u : sel) (u->s == 1 ? any1 : any0) = true;
  if (!any0 || !any1)
    throw ValidationError("fit_principal_score: auxiliary outcome is constant within the arm");

  Eigen::MatrixXd X(sel.size(), d.n_x() + 1);
  Eigen::VectorXd s(sel.size());
  for (std::size_t i = 0; i < sel.size(); ++i) {
    X(i, 0) = 1.0;
    for (std::size_t j = 0; j < d.n_x(); ++j) X(i, j + 1) = sel[i]->x[j];
    s[i] = sel[i]->s;
  }

  PrincipalScore out;
  out.arm = arm;
  out.fit = stats::logistic_fit(X, s, names_1x(d));

  out.fitted_all.resize(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    double eta = out.fit.coefficients[0];
    for (std::size_t j = 0; j < d.n_x(); ++j) eta += out.fit.coefficients[j + 1] * d.units[i].x[j];
    out.fitted_all[i] = 1.0 / (1.0 + std::exp(-eta));
  }
  out.weak = out.fitted_all.maxCoeff() - out.fitted_all.minCoeff() < 0.01;
  return out;
}

double EasFit::effect_at(double m) const {
  return fit.coefficients[2] + m * fit.coefficients[3];
}

EasFit eas_fit(const ObservedDataset& d, oracle::EasScoreMode mode, const Eigen::VectorXd* score0,
               const Eigen::VectorXd* score1) {
  require_both_arms(d, "eas_fit");
  const std::size_t n = d.n();
  auto check_len = [&](const Eigen::VectorXd* v) {
    if (v && static_cast<std::size_t>(v->size()) != n)
      throw ValidationError("eas_fit: score length mismatch");
  };
  check_len(score0);
  check_len(score1);

  Eigen::VectorXd s0, s1;
  bool need0 = mode != oracle::EasScoreMode::FixedTreated;
  bool need1 = mode != oracle::EasScoreMode::FixedControl;
  if (need0) s0 = score0 ? *score0 : fit_principal_score(d, 0).fitted_all;
  if (need1) s1 = score1 ? *score1 : fit_principal_score(d, 1).fitted_all;

  Eigen::VectorXd mu(n);
  for (std::size_t i = 0; i < n; ++i) {
    switch (mode) {
      case oracle::EasScoreMode::OwnArm: mu[i] = d.units[i].a == 1 ? s1[i] : s0[i]; break;
      case oracle::EasScoreMode::FixedControl: mu[i] = s0[i]; break;
      case oracle::EasScoreMode::FixedTreated: mu[i] = s1[i]; break;
    }
  }

  Eigen::MatrixXd X(n, 4);
  Eigen::VectorXd a = d.a_vector();
  X.col(0).setOnes();
  X.col(1) = mu;
  X.col(2) = a;
  X.col(3) = mu.cwiseProduct(a);

  EasFit out;
  out.mode = mode;
  out.fit = stats::ols(X, d.y_vector(), {"intercept", "mu", "a", "mu_a"});
  out.score_min = mu.minCoeff();
  out.score_max = mu.maxCoeff();
  out.extrapolated = out.effect_at(1.0);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "effect_at(1) extrapolates outside the observed score range [%.3f, %.3f]; "
                "it is a modeling extrapolation, not an in-sample contrast",
                out.score_min, out.score_max);
  out.extrapolation_warning = buf;
  return out;
}

ThresholdEffect effect_above_threshold(const ObservedDataset& d, const Eigen::VectorXd& score,
                                       double threshold, bool adjust_x) {
  if (static_cast<std::size_t>(score.size()) != d.n())
    throw ValidationError("effect_above_threshold: score length mismatch");

  std::vector<int> idx;
  for (std::size_t i = 0; i < d.n(); ++i)
    if (score[i] > threshold) idx.push_back(static_cast<int>(i));
  if (idx.empty()) throw ValidationError("effect_above_threshold: subgroup is empty");

  ThresholdEffect out;
  out.threshold = threshold;
  out.n_subgroup = static_cast<int>(idx.size());
  double sum1 = 0.0, sum0 = 0.0;
  for (int i : idx) {
    if (d.units[i].a == 1) {
      sum1 += d.units[i].y;
      ++out.n_treated;
    } else {
      sum0 += d.units[i].y;
      ++out.n_control;
    }
  }
  if (out.n_treated == 0 || out.n_control == 0)
    throw ValidationError("effect_above_threshold: subgroup lacks one treatment arm");

  if (!adjust_x) {
    out.effect = sum1 / out.n_treated - sum0 / out.n_control;
    // two-sample variance
    double v1 = 0.0, v0 = 0.0;
    double m1 = sum1 / out.n_treated, m0 = sum0 / out.n_control;
    for (int i : idx) {
      double e = d.units[i].y - (d.units[i].a == 1 ? m1 : m0);
      (d.units[i].a == 1 ? v1 : v0) += e * e;
    }
    if (out.n_treated > 1) v1 /= out.n_treated - 1;
    if (out.n_control > 1) v0 /= out.n_control - 1;
    out.se = std::sqrt(v1 / out.n_treated + v0 / out.n_control);
    return out;
  }

  Eigen::MatrixXd X(idx.size(), d.n_x() + 2);
  Eigen::VectorXd y(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const auto& u = d.units[idx[r]];
    X(r, 0) = 1.0;
    for (std::size_t j = 0; j < d.n_x(); ++j) X(r, j + 1) = u.x[j];
    X(r, d.n_x() + 1) = u.a;
    y[r] = u.y;
  }
  auto names = names_1x(d);
  names.push_back("a");
  auto fit = stats::ols(X, y, names);
  out.effect = fit.coefficients[d.n_x() + 1];
  out.se = std::sqrt(fit.covariance(d.n_x() + 1, d.n_x() + 1));
  return out;
}

std::vector<JointCell> joint_score_effects(const ObservedDataset& d, const Eigen::VectorXd& score0,
                                           const Eigen::VectorXd& score1, int bins) {
  if (bins < 1) throw ValidationError("joint_score_effects: bins must be positive");
  if (static_cast<std::size_t>(score0.size()) != d.n() ||
      static_cast<std::size_t>(score1.size()) != d.n())
    throw ValidationError("joint_score_effects: score length mismatch");

  auto bin_of = [bins](double v) {
    int b = static_cast<int>(v * bins);
    return std::clamp(b, 0, bins - 1);
  };

  struct Acc {
    double sum1 = 0, sum0 = 0;
    int n1 = 0, n0 = 0;
  };
  std::vector<Acc> cells(static_cast<std::size_t>(bins) * bins);
  for (std::size_t i = 0; i < d.n(); ++i) {
    int b0 = bin_of(score0[i]), b1 = bin_of(score1[i]);
    Acc& c = cells[static_cast<std::size_t>(b0) * bins + b1];
    if (d.units[i].a == 1) {
      c.sum1 += d.units[i].y;
      ++c.n1;
    } else {
      c.sum0 += d.units[i].y;
      ++c.n0;
    }
  }

  std::vector<JointCell> out;
  for (int b0 = 0; b0 < bins; ++b0)
    for (int b1 = 0; b1 < bins; ++b1) {
      const Acc& c = cells[static_cast<std::size_t>(b0) * bins + b1];
      if (c.n1 + c.n0 == 0) continue;
      JointCell cell;
      cell.bin0 = b0;
      cell.bin1 = b1;
      cell.n = c.n1 + c.n0;
      cell.n_treated = c.n1;
      cell.n_control = c.n0;
      cell.estimable = c.n1 > 0 && c.n0 > 0;
      cell.effect = cell.estimable ? c.sum1 / c.n1 - c.sum0 / c.n0 : std::nan("");
      out.push_back(cell);
    }
  return out;
}

}  // namespace auxeff::covest
