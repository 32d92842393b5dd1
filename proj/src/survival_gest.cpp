#include "auxeff/survival_gest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "auxeff/core_stats.hpp"
#include "auxeff/errors.hpp"

namespace auxeff::surv {

namespace {

constexpr const char* kWeightCaveat =
    "Other-cause events are treated as an independent competing-risk "
    "censoring process and reweighted by inverse Kaplan-Meier probabilities; "
    "this is a standard convention, not a uniquely determined model, and "
    "results are conditional on it.";

// Inverse standard normal CDF by Newton iteration on the upper tail.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("normal_quantile: p must lie in (0, 1)");
  }
  double z = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
    const double pdf =
        std::exp(-0.5 * z * z) / std::sqrt(2.0 * 3.14159265358979323846);
    const double step = (cdf - p) / std::max(pdf, 1e-300);
    z -= step;
    if (std::abs(step) < 1e-13) break;
  }
  return z;
}

struct Workspace {
  std::vector<int> s;
  Eigen::VectorXd w;
  double p = 0.5;
};

Workspace make_workspace(const SurvivalDataset& sd, const SurvivalGSpec& spec) {
  spec.validate();
  sd.validate();
  if (sd.n() == 0) {
    throw ValidationError("survival G-estimation needs a nonempty dataset");
  }
  Workspace ws;
  ws.s = spec.aux_name.empty() ? sd.aux_column("s") : sd.aux_column(spec.aux_name);
  if (spec.weights.empty()) {
    ws.w = stats::km_censoring_weights(sd);
  } else {
    if (spec.weights.size() != sd.n()) {
      throw ValidationError("supplied weights length does not match dataset size");
    }
    ws.w = Eigen::Map<const Eigen::VectorXd>(spec.weights.data(),
                                             static_cast<long>(spec.weights.size()));
    if ((ws.w.array() < 0.0).any()) {
      throw ValidationError("supplied weights must be nonnegative");
    }
  }
  if (spec.p_treat) {
    ws.p = *spec.p_treat;
  } else {
    double sum = 0.0;
    for (const auto& u : sd.units) sum += u.a;
    ws.p = sum / static_cast<double>(sd.n());
  }
  return ws;
}

double z_with_workspace(const SurvivalDataset& sd, const Workspace& ws,
                        double psi, long* n_effective) {
  double num = 0.0;
  double den = 0.0;
  long neff = 0;
  for (std::size_t i = 0; i < sd.n(); ++i) {
    const auto& u = sd.units[i];
    const double wi = ws.w[static_cast<long>(i)];
    if (wi <= 0.0) continue;
    if (delta_indicator(u, ws.s[i], psi) == 0) continue;
    const double contrib = wi * (static_cast<double>(u.a) - ws.p);
    num += contrib;
    den += contrib * contrib;
    ++neff;
  }
  if (den <= 0.0) {
    std::ostringstream msg;
    msg << "Z statistic undefined at psi=" << psi
        << ": no weighted events survive recensoring (narrow the grid)";
    throw NumericalError(msg.str());
  }
  if (n_effective) *n_effective = neff;
  return num / std::sqrt(den);
}

}  // namespace

void SurvivalGSpec::validate() const {
  if (!(grid_lo < grid_hi)) {
    throw ValidationError("psi grid needs grid_lo < grid_hi");
  }
  if (!(grid_step > 0.0)) {
    throw ValidationError("psi grid step must be positive");
  }
  if (!(alpha > 0.0 && alpha < 0.5)) {
    throw ValidationError("alpha must lie in (0, 0.5)");
  }
  if (p_treat && !(*p_treat > 0.0 && *p_treat < 1.0)) {
    throw ValidationError("p_treat must lie in (0, 1)");
  }
}

int delta_indicator(const SurvivalUnit& u, int s_value, double psi) {
  if (u.event != EventType::Main) return 0;
  const double shift = (u.a == 1 && s_value == 1) ? psi : 0.0;
  const double y_psi = std::log(u.time) - shift;
  const double threshold = std::log(u.censor_horizon) + std::min(0.0, psi);
  return y_psi < threshold ? 1 : 0;
}

double z_stat(const SurvivalDataset& sd, double psi, const SurvivalGSpec& spec) {
  const Workspace ws = make_workspace(sd, spec);
  return z_with_workspace(sd, ws, psi, nullptr);
}

ProfileResult profile_and_invert(const SurvivalDataset& sd,
                                 const SurvivalGSpec& spec) {
  const Workspace ws = make_workspace(sd, spec);

  ProfileResult res;
  res.weight_caveat = kWeightCaveat;

  const long n_steps =
      static_cast<long>(std::floor((spec.grid_hi - spec.grid_lo) / spec.grid_step + 0.5));
  res.grid.reserve(static_cast<std::size_t>(n_steps) + 1);
  for (long k = 0; k <= n_steps; ++k) {
    ProfilePoint pt;
    pt.psi = spec.grid_lo + static_cast<double>(k) * spec.grid_step;
    pt.z = z_with_workspace(sd, ws, pt.psi, &pt.n_effective);
    res.grid.push_back(pt);
  }

  // |Z| is a step function of psi, so plateau membership is exact equality.
  double zmin = std::numeric_limits<double>::infinity();
  for (const auto& pt : res.grid) zmin = std::min(zmin, std::abs(pt.z));

  const auto on_plateau = [&](double psi) {
    return std::abs(z_with_workspace(sd, ws, psi, nullptr)) == zmin;
  };

  // Collect maximal runs of grid points achieving the minimum, refine each
  // run's outer edges by bisection, and keep the midpoint closest to zero.
  bool have_hat = false;
  for (std::size_t i = 0; i < res.grid.size();) {
    if (std::abs(res.grid[i].z) != zmin) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < res.grid.size() && std::abs(res.grid[j + 1].z) == zmin) ++j;

    double left = res.grid[i].psi;
    if (i > 0) {
      double lo = res.grid[i - 1].psi, hi = left;
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        (on_plateau(mid) ? hi : lo) = mid;
      }
      left = hi;
    }
    double right = res.grid[j].psi;
    if (j + 1 < res.grid.size()) {
      double lo = right, hi = res.grid[j + 1].psi;
      while (hi - lo > 1e-10) {
        const double mid = 0.5 * (lo + hi);
        (on_plateau(mid) ? lo : hi) = mid;
      }
      right = lo;
    }

    const double candidate = 0.5 * (left + right);
    if (!have_hat || std::abs(candidate) < std::abs(res.psi_hat)) {
      res.psi_hat = candidate;
      have_hat = true;
    }
    i = j + 1;
  }

  const double zcrit = normal_quantile(1.0 - spec.alpha / 2.0);
  bool any_in_ci = false;
  for (const auto& pt : res.grid) {
    if (std::abs(pt.z) < zcrit) {
      if (!any_in_ci) res.ci_lo = pt.psi;
      res.ci_hi = pt.psi;
      any_in_ci = true;
    }
  }
  if (!any_in_ci) {
    throw NumericalError(
        "test-inversion confidence set is empty on the grid: the model may be "
        "grossly misspecified or the grid too narrow");
  }
  res.ci_lo_open = res.ci_lo == res.grid.front().psi;
  res.ci_hi_open = res.ci_hi == res.grid.back().psi;
  res.z_at_zero = z_with_workspace(sd, ws, 0.0, nullptr);
  return res;
}

InvarianceResult auxiliary_invariance_check(const SurvivalDataset& sd,
                                            const std::string& s_screen_col,
                                            const std::string& s_diag_col,
                                            const SurvivalGSpec& spec) {
  spec.validate();
  sd.validate();
  const std::vector<int> s_screen = sd.aux_column(s_screen_col);
  const std::vector<int> s_diag = sd.aux_column(s_diag_col);
  for (std::size_t i = 0; i < sd.n(); ++i) {
    if (s_diag[i] > s_screen[i]) {
      std::ostringstream msg;
      msg << "auxiliary invariance check: row " << i << " has " << s_diag_col
          << " > " << s_screen_col << " (the finer auxiliary must imply the coarser)";
      throw ValidationError(msg.str());
    }
  }
  const bool any_treated =
      std::any_of(sd.units.begin(), sd.units.end(),
                  [](const SurvivalUnit& u) { return u.a == 1; });
  if (!any_treated) {
    throw ValidationError("auxiliary invariance check needs a nonempty treated arm");
  }

  SurvivalGSpec screen_spec = spec;
  screen_spec.aux_name = s_screen_col;
  SurvivalGSpec diag_spec = spec;
  diag_spec.aux_name = s_diag_col;
  const ProfileResult a = profile_and_invert(sd, screen_spec);
  const ProfileResult b = profile_and_invert(sd, diag_spec);

  InvarianceResult out;
  out.max_abs_diff = 0.0;
  for (std::size_t k = 0; k < a.grid.size(); ++k) {
    out.max_abs_diff =
        std::max(out.max_abs_diff, std::abs(a.grid[k].z - b.grid[k].z));
  }
  out.identical = out.max_abs_diff == 0.0;
  return out;
}

}  // namespace auxeff::surv
