#include "auxeff/snm_gest.hpp"

#include <cmath>

#include "auxeff/core_stats.hpp"

namespace auxeff::snm {

namespace {

const char* kSlotNamesAux[2] = {"psi0", "psi1"};
const char* kSlotNamesMed[3] = {"gamma1", "gamma2", "gamma3"};

struct Workspace {
  Eigen::MatrixXd Q;           // thin Q of {1, x}
  Eigen::VectorXd a, s, y;
  Eigen::VectorXd w;           // a - p
  double p = 0.0;

  Eigen::VectorXd resid(const Eigen::VectorXd& v) const { return v - Q * (Q.transpose() * v); }
};

Workspace make_workspace(const ObservedDataset& d, const SnmSpec& spec) {
  if (d.n() == 0) throw ValidationError("g-estimation: empty dataset");
  Workspace ws;
  ws.a = d.a_vector();
  ws.s = d.s_vector();
  ws.y = d.y_vector();
  ws.p = spec.p_treat ? *spec.p_treat : ws.a.mean();
  if (!(ws.p > 0.0 && ws.p < 1.0))
    throw ValidationError("g-estimation: treatment probability must lie strictly in (0, 1)");
  ws.w = ws.a.array() - ws.p;

  Eigen::MatrixXd W(d.n(), d.n_x() + 1);
  W.col(0).setOnes();
  if (d.n_x() > 0) W.rightCols(d.n_x()) = d.x_matrix();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(W);
  ws.Q = Eigen::MatrixXd(qr.householderQ() * Eigen::MatrixXd::Identity(d.n(), W.cols()));
  return ws;
}

// Model design: columns multiply the parameter slots.
Eigen::MatrixXd model_design(const SnmSpec& spec, const Eigen::VectorXd& a,
                             const Eigen::VectorXd& s) {
  const Eigen::Index n = a.size();
  if (spec.model == BlipModel::ObservedAux) {
    Eigen::MatrixXd D(n, 2);
    D.col(0) = a.array() * (1.0 - s.array());
    D.col(1) = a.array() * s.array();
    return D;
  }
  Eigen::MatrixXd D(n, 3);
  D.col(0) = a;
  D.col(1) = s;
  D.col(2) = a.array() * s.array();
  return D;
}

std::vector<int> free_slots(const SnmSpec& spec) {
  std::vector<int> out;
  for (int j = 0; j < spec.n_params(); ++j)
    if (spec.free[j]) out.push_back(j);
  if (out.empty()) throw ValidationError("g-estimation: no free parameters");
  return out;
}

}  // namespace

Eigen::VectorXd blip_down(const ObservedDataset& d, double psi0, double psi1) {
  Eigen::VectorXd out(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& u = d.units[i];
    out[i] = u.y - u.a * (1 - u.s) * psi0 - u.a * u.s * psi1;
  }
  return out;
}

Eigen::VectorXd blip_down_mediation(const ObservedDataset& d, double gamma1, double gamma2,
                                    double gamma3) {
  Eigen::VectorXd out(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    const auto& u = d.units[i];
    out[i] = u.y - u.a * gamma1 - u.s * gamma2 - u.a * u.s * gamma3;
  }
  return out;
}

Eigen::MatrixXd g_bank(const ObservedDataset& d, const SnmSpec& spec) {
  auto slots = free_slots(spec);
  Eigen::VectorXd mu1, mu0;
  bool need1 = spec.model == BlipModel::ObservedAux ||
               spec.free[1] || spec.free[2];
  if (need1) mu1 = covest::fit_principal_score(d, 1).fitted_all;
  if (spec.model == BlipModel::Mediation && spec.free[1])
    mu0 = covest::fit_principal_score(d, 0).fitted_all;

  Eigen::MatrixXd G(d.n(), slots.size());
  for (std::size_t c = 0; c < slots.size(); ++c) {
    switch (spec.model) {
      case BlipModel::ObservedAux:
        G.col(c) = slots[c] == 0 ? (1.0 - mu1.array()).matrix() : mu1;
        break;
      case BlipModel::Mediation:
        if (slots[c] == 0)
          G.col(c).setOnes();
        else if (slots[c] == 1)
          G.col(c) = mu1 - mu0;
        else
          G.col(c) = mu1;
        break;
    }
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(G);
  if (qr.rank() < G.cols())
    throw NumericalError(
        "g_bank: bank is rank-deficient (the principal score may not vary enough with x to "
        "identify all free parameters)");
  return G;
}

GEstimate solve(const ObservedDataset& d, const SnmSpec& spec) {
  Workspace ws = make_workspace(d, spec);
  auto slots = free_slots(spec);
  const int q = static_cast<int>(slots.size());
  Eigen::MatrixXd D = model_design(spec, ws.a, ws.s);

  // y adjusted for pinned parameters
  Eigen::VectorXd y_adj = ws.y;
  for (int j = 0; j < spec.n_params(); ++j)
    if (!spec.free[j]) y_adj -= spec.fixed_values[j] * D.col(j);

  Eigen::MatrixXd G = g_bank(d, spec);

  Eigen::VectorXd ey = ws.resid(y_adj);
  Eigen::MatrixXd ED(d.n(), q);
  for (int c = 0; c < q; ++c) ED.col(c) = ws.resid(D.col(slots[c]));

  // moment(theta) = c0 - K theta
  Eigen::MatrixXd K = G.transpose() * ws.w.asDiagonal() * ED;
  Eigen::VectorXd c0 = G.transpose() * ws.w.cwiseProduct(ey);

  Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
  if (!lu.isInvertible())
    throw NumericalError("g-estimation: estimating equations are singular; the g-bank does not "
                         "identify the free parameters");
  Eigen::VectorXd theta = lu.solve(c0);

  // per-unit contributions at the solution
  Eigen::VectorXd e_hat = ey - ED * theta;
  Eigen::MatrixXd contrib = G.array().colwise() * (ws.w.array() * e_hat.array());
  Eigen::VectorXd total = contrib.colwise().sum();

  const double n = static_cast<double>(d.n());
  Eigen::MatrixXd B = -K / n;
  Eigen::MatrixXd M = contrib.transpose() * contrib / n;
  Eigen::MatrixXd Binv = B.inverse();

  GEstimate out;
  out.estimate = theta;
  out.covariance = Binv * M * Binv.transpose() / n;
  out.moment_norm = total.lpNorm<Eigen::Infinity>();
  out.p_used = ws.p;
  for (int c = 0; c < q; ++c)
    out.names.push_back(spec.model == BlipModel::ObservedAux ? kSlotNamesAux[slots[c]]
                                                             : kSlotNamesMed[slots[c]]);
  return out;
}

std::vector<ProfilePoint> z_profile(const ObservedDataset& d, const SnmSpec& spec,
                                    const std::vector<double>& grid) {
  auto slots = free_slots(spec);
  if (slots.size() != 1)
    throw ValidationError("z_profile: exactly one free parameter is required");

  Workspace ws = make_workspace(d, spec);
  Eigen::MatrixXd D = model_design(spec, ws.a, ws.s);
  Eigen::VectorXd y_adj = ws.y;
  for (int j = 0; j < spec.n_params(); ++j)
    if (!spec.free[j]) y_adj -= spec.fixed_values[j] * D.col(j);

  Eigen::MatrixXd G = g_bank(d, spec);
  Eigen::VectorXd g = G.col(0);
  Eigen::VectorXd ey = ws.resid(y_adj);
  Eigen::VectorXd ed = ws.resid(D.col(slots[0]));

  std::vector<ProfilePoint> out;
  out.reserve(grid.size());
  for (double psi : grid) {
    Eigen::ArrayXd m = g.array() * ws.w.array() * (ey - psi * ed).array();
    double num = m.sum();
    double den = std::sqrt(m.square().sum());
    out.push_back({psi, den > 0.0 ? num / den : 0.0});
  }
  return out;
}

MediationEstimate solve_mediation(const ObservedDataset& d, const SnmSpec& spec,
                                  std::optional<double> q) {
  if (spec.model != BlipModel::Mediation)
    throw ValidationError("solve_mediation: spec.model must be Mediation");

  int n_control_aux = 0, n_control = 0, n_treated_aux = 0, n_treated = 0;
  for (const auto& u : d.units) {
    if (u.a == 0) {
      ++n_control;
      n_control_aux += u.s;
    } else {
      ++n_treated;
      n_treated_aux += u.s;
    }
  }
  if (n_control == 0 || n_treated == 0)
    throw ValidationError("solve_mediation: both treatment arms must be present");
  if (n_control_aux == 0 && spec.free[1] && spec.free[2])
    throw ValidationError(
        "solve_mediation: the auxiliary outcome never occurs under control, so gamma2 and gamma3 "
        "are jointly inestimable; pin one of them (commonly gamma3 = 0)");

  MediationEstimate out;
  out.gest = snm::solve(d, spec);

  // full parameter vector including pinned slots
  std::array<double, 3> gam = spec.fixed_values;
  {
    int c = 0;
    for (int j = 0; j < 3; ++j)
      if (spec.free[j]) gam[j] = out.gest.estimate[c++];
  }

  double p0 = static_cast<double>(n_control_aux) / n_control;
  double p1 = static_cast<double>(n_treated_aux) / n_treated;
  if (q) {
    out.q_hat = *q;
    out.q_supplied = true;
    out.q_note = "q supplied externally";
  } else if (p1 >= 1.0) {
    out.q_hat = std::nan("");
    out.q_note = "q inestimable: no units with s=0 under treatment";
  } else if (p0 >= p1) {
    out.q_hat = (p0 - p1) / (1.0 - p1);
    out.q_note = "q estimated assuming a monotone auxiliary (s1 <= s0)";
  } else {
    out.q_hat = 0.0;
    out.q_note = "q = 0 under the opposite monotone direction (s0 <= s1)";
  }

  out.implied_psi0 = gam[0] - out.q_hat * gam[1];
  if (n_control_aux == 0) {
    out.implied_psi1 = gam[0] + gam[1] + gam[2];
    out.note =
        "auxiliary never occurs under control: the treated-with-auxiliary effect is "
        "gamma1 + gamma2 + gamma3";
  } else {
    out.implied_psi1 = gam[0] + gam[2];
  }
  return out;
}

}  // namespace auxeff::snm
