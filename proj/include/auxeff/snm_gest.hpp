#pragma once

#include <Eigen/Dense>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "auxeff/covariate_estimators.hpp"
#include "auxeff/data_model.hpp"

namespace auxeff::snm {

enum class BlipModel : int {
  ObservedAux = 0,  // y0 = y - a(1-s) psi0 - a s psi1
  Mediation = 1,    // y00 = y - a gamma1 - s gamma2 - a s gamma3
};

struct SnmSpec {
  BlipModel model = BlipModel::ObservedAux;
  // Parameter slots: ObservedAux uses {psi0, psi1}; Mediation uses
  // {gamma1, gamma2, gamma3}. Non-free slots are pinned at fixed_values.
  std::array<bool, 3> free{true, true, true};
  std::array<double, 3> fixed_values{0.0, 0.0, 0.0};
  std::optional<double> p_treat;  // known randomization probability
  int n_params() const { return model == BlipModel::ObservedAux ? 2 : 3; }
};

struct GEstimate {
  Eigen::VectorXd estimate;    // free parameters, slot order
  Eigen::MatrixXd covariance;  // sandwich
  std::vector<std::string> names;
  double moment_norm = 0.0;  // max-norm of the estimating equations at the solution
  double p_used = 0.0;
};

// Blipped-down outcome: removes the modeled treatment effect.
Eigen::VectorXd blip_down(const ObservedDataset& d, double psi0, double psi1);
Eigen::VectorXd blip_down_mediation(const ObservedDataset& d, double gamma1, double gamma2,
                                    double gamma3);

// Bank of g-functions (one column per free parameter): for ObservedAux the
// optimal pair {1 - mu1(x), mu1(x)}; for Mediation {1, mu1(x) - mu0(x),
// mu1(x)}, subset to the free slots. Raises if the bank cannot identify the
// free parameters.
Eigen::MatrixXd g_bank(const ObservedDataset& d, const SnmSpec& spec);

// Exact solution of the linear estimating equations
//   sum_i (a_i - p) g_i eps_i(theta) = 0,
// where eps is the residual of the blipped outcome on {1, x}.
GEstimate solve(const ObservedDataset& d, const SnmSpec& spec);

struct ProfilePoint {
  double psi = 0.0;
  double z = 0.0;
};

// Standardized estimating function over a grid; requires exactly one free
// parameter.
std::vector<ProfilePoint> z_profile(const ObservedDataset& d, const SnmSpec& spec,
                                    const std::vector<double>& grid);

struct MediationEstimate {
  GEstimate gest;
  double q_hat = 0.0;  // pr(s0=1 | s1=0) under a monotone auxiliary
  bool q_supplied = false;
  std::string q_note;
  double implied_psi0 = 0.0;
  double implied_psi1 = 0.0;
  std::string note;
};

// Fits the mediation blip model and reports the implied group effects.
// `q` overrides the monotonicity-based estimate of pr(s0=1 | s1=0).
MediationEstimate solve_mediation(const ObservedDataset& d, const SnmSpec& spec,
                                  std::optional<double> q = std::nullopt);

}  // namespace auxeff::snm
