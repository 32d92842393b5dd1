#pragma once

// G-estimation for censored failure-time outcomes with a binary treatment
// and a binary post-treatment auxiliary: artificial recensoring keeps the
// transformed event indicator comparable across arms, competing risks are
// handled by inverse-probability-of-censoring weights, and inference is by
// inverting the randomization Z test over a grid of candidate effects.

#include <optional>
#include <string>
#include <vector>

#include "auxeff/data_model.hpp"

namespace auxeff::surv {

struct SurvivalGSpec {
  // Which auxiliary column defines s in the effect model. Empty selects the
  // dataset's primary s column; otherwise must name one of aux_names.
  std::string aux_name;
  // Known treatment-assignment probability; unset means "estimate as the
  // sample mean of a".
  std::optional<double> p_treat;
  double grid_lo = -2.0;
  double grid_hi = 2.0;
  double grid_step = 0.01;
  double alpha = 0.05;  // CI level: 1 - alpha coverage
  // Optional externally supplied unit weights; empty means Kaplan-Meier
  // competing-risk IPCW computed from the data.
  std::vector<double> weights;

  void validate() const;
};

struct ProfilePoint {
  double psi = 0.0;
  double z = 0.0;
  // Units actually contributing at this psi: positive weight, main event,
  // and Delta(psi) = 1.
  long n_effective = 0;
};

struct ProfileResult {
  std::vector<ProfilePoint> grid;
  double psi_hat = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  bool ci_lo_open = false;  // CI reaches the lower grid edge
  bool ci_hi_open = false;  // CI reaches the upper grid edge
  double z_at_zero = 0.0;
  // Standing caveat attached to every report: treating other-cause deaths
  // as independent censoring is a modeling convention, and the IPCW model
  // here (Kaplan-Meier for the competing-risk process) is a standard
  // stand-in rather than a uniquely determined choice.
  std::string weight_caveat;
};

struct InvarianceResult {
  bool identical = false;
  double max_abs_diff = 0.0;
};

// Recensored event indicator for one unit: the treatment-free log time is
// log t - a*s*psi for an observed main event (+infinity otherwise), and the
// recensoring threshold is log c + min(0, psi).
int delta_indicator(const SurvivalUnit& u, int s_value, double psi);

// Randomization Z statistic at one candidate psi:
//   Z = sum w_i (a_i - p) Delta_i / sqrt(sum w_i^2 (a_i - p)^2 Delta_i).
// Throws NumericalError when no unit contributes at this psi.
double z_stat(const SurvivalDataset& sd, double psi, const SurvivalGSpec& spec);

// Full grid profile, plateau-midpoint point estimate, and test-inversion CI.
ProfileResult profile_and_invert(const SurvivalDataset& sd,
                                 const SurvivalGSpec& spec);

// Do two auxiliary definitions give the same Z profile on the spec's grid?
// They must when every main event occurs in a unit where the two columns
// agree (e.g. screening vs diagnosis when deaths happen only among the
// diagnosed). Preconditions: s_diag <= s_screen unit-wise and a nonempty
// treated arm; violations raise ValidationError.
InvarianceResult auxiliary_invariance_check(const SurvivalDataset& sd,
                                            const std::string& s_screen_col,
                                            const std::string& s_diag_col,
                                            const SurvivalGSpec& spec);

}  // namespace auxeff::surv
