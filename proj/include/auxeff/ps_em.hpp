#pragma once

// Likelihood-based principal stratification for a binary auxiliary outcome:
// the observed (a, s, x, y) data are a four-component latent-class mixture
// over response strata, fit by EM. Two variants of the mean structure are
// provided: variant I leaves all eight (arm, stratum) means free; variant II
// additionally equates the arm contrast within {Immune, TreatPrevented} and
// within {TreatCaused, Doomed}. Both share a single additive covariate shift
// across all cells.
//
// The covariate must be absent or a single discrete column; stratum
// membership probabilities are modeled separately per covariate level.

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "auxeff/data_model.hpp"
#include "auxeff/synthdata.hpp"

namespace auxeff::ps {

enum class PsVariant : int { I = 1, II = 2 };

struct PsModel {
  PsVariant variant = PsVariant::I;
  // Distinct covariate values, ascending. Empty-covariate datasets get the
  // single pseudo-level 0.
  std::vector<double> x_levels;
  // n_levels x 4: pr(stratum | x level), rows sum to 1.
  Eigen::MatrixXd stratum_probs_by_x;
  // 2 x 4: mean of y in (arm, stratum) at x = 0. For variant II the rows
  // satisfy the two equality constraints by construction.
  Eigen::MatrixXd means;
  double delta_x = 0.0;  // shared additive covariate shift
  // Shared within-cell standard deviation (default model). When
  // per_component_sigma is set, sigma_ak (2 x 4) holds one standard
  // deviation per (arm, stratum) component and `sigma` is their pooled
  // value for reporting.
  double sigma = 1.0;
  bool per_component_sigma = false;
  Eigen::MatrixXd sigma_ak;

  // Variant II arm contrasts (valid when variant == II).
  double tau_it = 0.0;
  double tau_hd = 0.0;

  void validate() const;
};

struct EmOptions {
  PsVariant variant = PsVariant::I;
  double tol = 1e-8;     // relative log-likelihood stopping rule
  int max_iter = 5000;
  // Off by default: one variance per (arm, stratum) component instead of a
  // single shared variance. Guarded below by sigma_floor against the
  // unbounded-likelihood degeneracy of free-variance normal mixtures.
  bool per_component_sigma = false;
  double sigma_floor = 1e-3;
  // After convergence, restart the EM from component-swapped starts within
  // each observed (a, s) cell and warn when a distinct stationary point ties
  // the attained log-likelihood (within 1e-6): the mixture labeling is then
  // not identified (e.g. a 50/50 within-cell split).
  bool probe_identifiability = true;
};

struct EmFit {
  PsModel model;
  std::vector<double> loglik_trace;  // one entry per iteration, nondecreasing
  bool converged = false;
  int iterations = 0;
  // Mean posterior membership per stratum over all units.
  Eigen::Vector4d mean_responsibility = Eigen::Vector4d::Zero();
  // Stratum had total responsibility < 1e-8 in some M-step.
  std::array<bool, 4> degenerate{{false, false, false, false}};
  bool identifiability_warning = false;
  std::string warning_detail;
  // Per-stratum arm contrasts: variant I → 4 entries (one per stratum);
  // variant II → 2 entries (tau_it, tau_hd).
  Eigen::VectorXd effects;

  double final_loglik() const {
    return loglik_trace.empty() ? 0.0 : loglik_trace.back();
  }
};

// Latent strata compatible with one observed (a, s) cell, in ascending
// stratum order.
std::vector<Stratum> compatible_strata(int a, int s);

// Posterior stratum memberships under `model`; returns n x 4 with zeros on
// incompatible strata, rows summing to 1. If loglik is non-null it receives
// the observed-data log-likelihood at `model`.
Eigen::MatrixXd e_step(const ObservedDataset& d, const PsModel& model,
                       double* loglik = nullptr);

// One conditional-maximization pass given responsibilities: probabilities,
// then means (+ shared shift) by responsibility-weighted least squares under
// the variant's constraints, then variance(s). `degenerate` (optional, 4
// flags) records strata whose total responsibility fell below 1e-8.
PsModel m_step(const ObservedDataset& d, const Eigen::MatrixXd& resp,
               const PsModel& current, const EmOptions& opts,
               std::array<bool, 4>* degenerate = nullptr);

// Full EM from an explicit start.
EmFit fit(const ObservedDataset& d, const EmOptions& opts, const PsModel& start);

// Deterministic data-driven start: within-level stratum probabilities
// uniform; the two strata compatible with each observed (a, s) cell start at
// the cell mean offset by ± half the pooled sd; sigma = pooled sd.
PsModel default_start(const ObservedDataset& d, const EmOptions& opts);

// Start at the generating truth of a continuous world (the bundled studies'
// protocol): exact stratum probabilities per covariate level via Bayes'
// rule, true cell means, true shift, unit component sds.
PsModel truth_start(const synth::ContinuousWorldConfig& cfg, const EmOptions& opts);

}  // namespace auxeff::ps
