#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "auxeff/core_stats.hpp"
#include "auxeff/data_model.hpp"
#include "auxeff/oracle.hpp"

namespace auxeff::covest {

struct ConventionalFit {
  stats::LinearFit fit;  // y ~ {1, x..., a}
  double effect = 0.0;   // coefficient on a
  double se = 0.0;
};

// Covariate-adjusted mean treatment effect, ignoring the auxiliary.
ConventionalFit conventional_fit(const ObservedDataset& d);

// Naive auxiliary-stratified contrast pr-hat(y|a=1,s=1) - pr-hat(y|a=0,s=1):
// the selection-biased comparison the rest of the library exists to replace.
struct NaiveContrast {
  double contrast = 0.0;
  double mean_treated = 0.0, mean_control = 0.0;
  int n_treated = 0, n_control = 0;
  std::string warning;
};
NaiveContrast naive_contrast(const ObservedDataset& d);

struct PrincipalScore {
  stats::LogisticFit fit;  // s ~ {1, x...} within one arm
  int arm = 1;
  bool weak = false;  // fitted probabilities nearly constant
  Eigen::VectorXd fitted_all;  // evaluated at every unit's x
};

// pr(S_a = 1 | x) estimated within arm `arm`, evaluated at all units.
PrincipalScore fit_principal_score(const ObservedDataset& d, int arm);

struct EasFit {
  stats::LinearFit fit;  // y ~ {1, mu, a, mu*a}
  oracle::EasScoreMode mode = oracle::EasScoreMode::OwnArm;
  double score_min = 0.0, score_max = 0.0;  // observed regressor range
  double extrapolated = 0.0;                // effect_at(1)
  std::string extrapolation_warning;

  double effect_at(double m) const;
};

// Expected-auxiliary stratification: outcome regressed on the estimated
// score, arm, and their interaction. In OwnArm mode each subject's regressor
// is the score for their own arm; Fixed* modes use one arm's score for
// everyone. Scores may be supplied (e.g. true scores) or are fit internally.
EasFit eas_fit(const ObservedDataset& d, oracle::EasScoreMode mode = oracle::EasScoreMode::OwnArm,
               const Eigen::VectorXd* score0 = nullptr, const Eigen::VectorXd* score1 = nullptr);

struct ThresholdEffect {
  double effect = 0.0;
  double se = 0.0;
  int n_subgroup = 0, n_treated = 0, n_control = 0;
  double threshold = 0.0;
};

// Arm contrast within the subgroup {score > threshold}; optionally
// covariate-adjusted.
ThresholdEffect effect_above_threshold(const ObservedDataset& d, const Eigen::VectorXd& score,
                                       double threshold, bool adjust_x = false);

struct JointCell {
  int bin0 = 0, bin1 = 0;
  int n = 0, n_treated = 0, n_control = 0;
  double effect = 0.0;
  bool estimable = false;
};

// Arm contrasts within cells of (binned score0, binned score1); bins are
// equal-width over [0, 1]. Cells with no units are omitted.
std::vector<JointCell> joint_score_effects(const ObservedDataset& d, const Eigen::VectorXd& score0,
                                           const Eigen::VectorXd& score1, int bins);

}  // namespace auxeff::covest
