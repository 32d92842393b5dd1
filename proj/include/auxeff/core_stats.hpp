#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "auxeff/data_model.hpp"
#include "auxeff/errors.hpp"

namespace auxeff::stats {

struct LinearFit {
  Eigen::VectorXd coefficients;
  Eigen::MatrixXd covariance;  // sigma2 * (X'WX)^-1
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  double sigma2 = 0.0;
  int rank = 0;
};

// Weighted least squares via rank-revealing QR. Rank deficiency is an error
// naming the redundant columns. `weights`, if given, must be nonnegative.
LinearFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
              const std::vector<std::string>& col_names = {},
              const Eigen::VectorXd* weights = nullptr);

struct LogisticFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd fitted;  // probabilities
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
};

// IRLS with step-halving; stops when the score max-norm drops below `tol`.
// Complete/quasi-complete separation raises NumericalError.
LogisticFit logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const std::vector<std::string>& col_names = {}, int max_iter = 100,
                         double tol = 1e-10);

// Inverse-probability-of-competing-event weights from a Kaplan-Meier fit that
// treats competing events as the terminating event and everything else as
// censored. Units with a competing event get weight 0; all others get
// 1 / S_comp(t-). Raises NumericalError if a needed weight is inestimable.
Eigen::VectorXd km_censoring_weights(const SurvivalDataset& d);

// Sandwich covariance for a q-dim moment estimator solved at theta_hat.
// `moments` returns the n x q matrix of per-unit contributions; `jacobian`
// (optional) returns the q x q derivative of the mean moment, otherwise it is
// approximated by central differences.
Eigen::MatrixXd sandwich_variance(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& moments,
    const Eigen::VectorXd& theta_hat,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>* jacobian = nullptr);

struct BootstrapResult {
  Eigen::VectorXd sd;
  Eigen::VectorXd p2_5;
  Eigen::VectorXd p97_5;
  int n_failed = 0;
  int reps = 0;
};

// Nonparametric bootstrap over unit indices. `refit` receives a resampled
// index multiset and returns the estimate vector; throwing counts as a
// failure. More than 20% failures raises NumericalError.
BootstrapResult bootstrap_indices(int n, int reps, std::uint64_t seed,
                                  const std::function<Eigen::VectorXd(const std::vector<int>&)>& refit);

}  // namespace auxeff::stats
