#include "auxeff/ps_em.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "auxeff/errors.hpp"

namespace auxeff::ps {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;
constexpr double kDegenerateResp = 1e-8;

// Arm contrast groupings for variant II: {Immune, TreatPrevented} share one
// contrast, {TreatCaused, Doomed} the other.
constexpr std::array<double, 4> kGroupIT{{1.0, 1.0, 0.0, 0.0}};
constexpr std::array<double, 4> kGroupHD{{0.0, 0.0, 1.0, 1.0}};

double unit_x(const ObservedUnit& u) { return u.x.size() == 0 ? 0.0 : u.x[0]; }

std::vector<double> distinct_levels(const ObservedDataset& d) {
  if (d.n_x() > 1) {
    throw ValidationError(
        "principal stratification supports at most one covariate column; got " +
        std::to_string(d.n_x()));
  }
  std::set<double> vals;
  for (const auto& u : d.units) vals.insert(unit_x(u));
  if (vals.size() > 32) {
    throw ValidationError(
        "principal stratification needs a discrete covariate (at most 32 "
        "distinct values)");
  }
  return {vals.begin(), vals.end()};
}

int level_of(const PsModel& model, double x) {
  for (std::size_t v = 0; v < model.x_levels.size(); ++v) {
    if (model.x_levels[v] == x) return static_cast<int>(v);
  }
  std::ostringstream msg;
  msg << "covariate value " << x << " does not match any model level";
  throw ValidationError(msg.str());
}

double component_sd(const PsModel& model, int a, int k) {
  return model.per_component_sigma ? model.sigma_ak(a, k) : model.sigma;
}

// Weighted-least-squares pass for the mean structure given responsibilities
// (or precision-scaled responsibilities). Updates means, delta, taus.
void update_means(const ObservedDataset& d, const Eigen::MatrixXd& w,
                  bool fit_delta, PsModel* next) {
  const std::size_t n = d.n();
  if (next->variant == PsVariant::I) {
    Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(2, 4);
    Eigen::MatrixXd swx = Eigen::MatrixXd::Zero(2, 4);
    Eigen::MatrixXd swy = Eigen::MatrixXd::Zero(2, 4);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& u = d.units[i];
      const double x = unit_x(u);
      for (int k = 0; k < kNumStrata; ++k) {
        const double wik = w(static_cast<long>(i), k);
        if (wik == 0.0) continue;
        sw(u.a, k) += wik;
        swx(u.a, k) += wik * x;
        swy(u.a, k) += wik * u.y;
        sxx += wik * x * x;
        sxy += wik * x * u.y;
      }
    }
    if (fit_delta) {
      double num = sxy, den = sxx;
      for (int a = 0; a < 2; ++a) {
        for (int k = 0; k < kNumStrata; ++k) {
          const double s = std::max(sw(a, k), 1e-12);
          num -= swx(a, k) * swy(a, k) / s;
          den -= swx(a, k) * swx(a, k) / s;
        }
      }
      if (den > 1e-12) next->delta_x = num / den;
    }
    for (int a = 0; a < 2; ++a) {
      for (int k = 0; k < kNumStrata; ++k) {
        next->means(a, k) = (swy(a, k) - next->delta_x * swx(a, k)) /
                            std::max(sw(a, k), 1e-12);
      }
    }
    return;
  }

  // Variant II: parameters (4 baselines, tau_it, tau_hd [, delta]).
  const int p = fit_delta ? 7 : 6;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = d.units[i];
    const double x = unit_x(u);
    for (int k = 0; k < kNumStrata; ++k) {
      const double wik = w(static_cast<long>(i), k);
      if (wik == 0.0) continue;
      z.setZero();
      z[k] = 1.0;
      z[4] = static_cast<double>(u.a) * kGroupIT[static_cast<std::size_t>(k)];
      z[5] = static_cast<double>(u.a) * kGroupHD[static_cast<std::size_t>(k)];
      if (fit_delta) z[6] = x;
      A.noalias() += wik * z * z.transpose();
      b.noalias() += wik * u.y * z;
    }
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) {
    throw NumericalError(
        "variant II normal equations are singular (a stratum has vanished)");
  }
  const Eigen::VectorXd theta = lu.solve(b);
  next->tau_it = theta[4];
  next->tau_hd = theta[5];
  if (fit_delta) next->delta_x = theta[6];
  for (int k = 0; k < kNumStrata; ++k) {
    next->means(0, k) = theta[k];
    next->means(1, k) = theta[k] + next->tau_it * kGroupIT[static_cast<std::size_t>(k)] +
                        next->tau_hd * kGroupHD[static_cast<std::size_t>(k)];
  }
}

EmFit fit_no_probe(const ObservedDataset& d, const EmOptions& opts,
                   const PsModel& start);

// Restart the EM from component-swapped versions of a converged model and
// report a warning when a materially different stationary point attains the
// same log-likelihood (labeling not identified).
void probe_identifiability(const ObservedDataset& d, const EmOptions& opts,
                           EmFit* fit_result) {
  EmOptions probe_opts = opts;
  probe_opts.probe_identifiability = false;
  const double ll0 = fit_result->final_loglik();
  for (int a = 0; a < 2; ++a) {
    for (int s = 0; s < 2; ++s) {
      const std::vector<Stratum> ks = compatible_strata(a, s);
      const int k1 = static_cast<int>(ks[0]);
      const int k2 = static_cast<int>(ks[1]);
      PsModel swapped = fit_result->model;
      std::swap(swapped.means(a, k1), swapped.means(a, k2));
      if (swapped.per_component_sigma) {
        std::swap(swapped.sigma_ak(a, k1), swapped.sigma_ak(a, k2));
      }
      EmFit probe;
      try {
        probe = fit_no_probe(d, probe_opts, swapped);
      } catch (const NumericalError&) {
        continue;  // a degenerate probe is not evidence of a tie
      }
      if (!probe.converged) continue;
      const double gap = std::abs(probe.final_loglik() - ll0);
      double param_diff =
          (probe.model.means - fit_result->model.means).cwiseAbs().maxCoeff();
      param_diff = std::max(param_diff,
                            (probe.model.stratum_probs_by_x -
                             fit_result->model.stratum_probs_by_x)
                                .cwiseAbs()
                                .maxCoeff());
      if (gap < 1e-6 && param_diff > 1e-3) {
        fit_result->identifiability_warning = true;
        std::ostringstream msg;
        msg << "component labeling not identified: swapping the two strata in "
               "observed cell (a="
            << a << ", s=" << s << ") reaches a distinct stationary point "
            << "(max parameter difference " << param_diff
            << ") with log-likelihood gap " << gap
            << "; within-cell mixing near 1/2 makes labels arbitrary";
        fit_result->warning_detail = msg.str();
        return;
      }
    }
  }
}

EmFit fit_no_probe(const ObservedDataset& d, const EmOptions& opts,
                   const PsModel& start) {
  if (d.n() == 0) throw ValidationError("EM needs a nonempty dataset");
  EmFit out;
  out.model = start;
  out.model.variant = opts.variant;
  out.model.per_component_sigma = opts.per_component_sigma;
  if (opts.per_component_sigma && out.model.sigma_ak.size() == 0) {
    out.model.sigma_ak = Eigen::MatrixXd::Constant(2, 4, out.model.sigma);
  }
  out.model.validate();

  Eigen::MatrixXd resp;
  double ll = -std::numeric_limits<double>::infinity();
  double ll_prev = -std::numeric_limits<double>::infinity();
  for (int it = 1; it <= opts.max_iter; ++it) {
    resp = e_step(d, out.model, &ll);
    out.loglik_trace.push_back(ll);
    out.iterations = it;
    if (std::isfinite(ll_prev) &&
        std::abs(ll - ll_prev) / (1.0 + std::abs(ll_prev)) < opts.tol) {
      out.converged = true;
      break;
    }
    ll_prev = ll;
    std::array<bool, 4> degen{};
    out.model = m_step(d, resp, out.model, opts, &degen);
    for (int k = 0; k < kNumStrata; ++k) {
      out.degenerate[static_cast<std::size_t>(k)] =
          out.degenerate[static_cast<std::size_t>(k)] || degen[static_cast<std::size_t>(k)];
    }
  }
  out.mean_responsibility = resp.colwise().mean();
  if (opts.variant == PsVariant::I) {
    out.effects = (out.model.means.row(1) - out.model.means.row(0)).transpose();
  } else {
    out.effects = Eigen::Vector2d(out.model.tau_it, out.model.tau_hd);
  }
  return out;
}

}  // namespace

void PsModel::validate() const {
  const long n_levels = static_cast<long>(x_levels.size());
  if (n_levels < 1) throw ValidationError("PsModel needs at least one covariate level");
  if (stratum_probs_by_x.rows() != n_levels || stratum_probs_by_x.cols() != 4) {
    throw ValidationError("stratum_probs_by_x must be (levels x 4)");
  }
  for (long v = 0; v < n_levels; ++v) {
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      const double p = stratum_probs_by_x(v, k);
      if (!(p >= 0.0 && p <= 1.0) || !std::isfinite(p)) {
        throw ValidationError("stratum probabilities must lie in [0, 1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ValidationError("stratum probabilities per level must sum to 1");
    }
  }
  if (means.rows() != 2 || means.cols() != 4 || !means.allFinite()) {
    throw ValidationError("means must be a finite 2 x 4 matrix");
  }
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw ValidationError("sigma must be positive");
  }
  if (per_component_sigma) {
    if (sigma_ak.rows() != 2 || sigma_ak.cols() != 4 ||
        !(sigma_ak.array() > 0.0).all()) {
      throw ValidationError("per-component sigma must be a positive 2 x 4 matrix");
    }
  }
  if (!std::isfinite(delta_x)) throw ValidationError("delta_x must be finite");
}

std::vector<Stratum> compatible_strata(int a, int s) {
  if ((a != 0 && a != 1) || (s != 0 && s != 1)) {
    throw ValidationError("compatible_strata needs binary a and s");
  }
  if (a == 1 && s == 1) return {Stratum::TreatCaused, Stratum::Doomed};
  if (a == 1 && s == 0) return {Stratum::Immune, Stratum::TreatPrevented};
  if (a == 0 && s == 1) return {Stratum::TreatPrevented, Stratum::Doomed};
  return {Stratum::Immune, Stratum::TreatCaused};
}

Eigen::MatrixXd e_step(const ObservedDataset& d, const PsModel& model,
                       double* loglik) {
  model.validate();
  const std::size_t n = d.n();
  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(static_cast<long>(n), 4);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = d.units[i];
    const int lvl = level_of(model, unit_x(u));
    const std::vector<Stratum> ks = compatible_strata(u.a, u.s);
    std::array<double, 2> logw{};
    for (int j = 0; j < 2; ++j) {
      const int k = static_cast<int>(ks[static_cast<std::size_t>(j)]);
      const double prior = model.stratum_probs_by_x(lvl, k);
      const double sd = component_sd(model, u.a, k);
      const double mu = model.means(u.a, k) + model.delta_x * unit_x(u);
      const double zres = (u.y - mu) / sd;
      logw[static_cast<std::size_t>(j)] =
          (prior > 0.0 ? std::log(prior) : -std::numeric_limits<double>::infinity()) -
          0.5 * zres * zres - std::log(sd) - kHalfLog2Pi;
    }
    const double mx = std::max(logw[0], logw[1]);
    if (!std::isfinite(mx)) {
      std::ostringstream msg;
      msg << "unit " << i << " has zero posterior mass on every compatible stratum";
      throw NumericalError(msg.str());
    }
    const double w0 = std::exp(logw[0] - mx);
    const double w1 = std::exp(logw[1] - mx);
    const double denom = w0 + w1;
    resp(static_cast<long>(i), static_cast<int>(ks[0])) = w0 / denom;
    resp(static_cast<long>(i), static_cast<int>(ks[1])) = w1 / denom;
    total += mx + std::log(denom);
  }
  if (loglik) *loglik = total;
  return resp;
}

PsModel m_step(const ObservedDataset& d, const Eigen::MatrixXd& resp,
               const PsModel& current, const EmOptions& opts,
               std::array<bool, 4>* degenerate) {
  const std::size_t n = d.n();
  if (resp.rows() != static_cast<long>(n) || resp.cols() != 4) {
    throw ValidationError("responsibilities must be (n x 4)");
  }
  PsModel next = current;
  next.variant = opts.variant;

  if (degenerate) {
    for (int k = 0; k < kNumStrata; ++k) {
      (*degenerate)[static_cast<std::size_t>(k)] = resp.col(k).sum() < kDegenerateResp;
    }
  }

  // Stratum probabilities per covariate level.
  const long n_levels = static_cast<long>(next.x_levels.size());
  Eigen::MatrixXd psum = Eigen::MatrixXd::Zero(n_levels, 4);
  Eigen::VectorXd pcount = Eigen::VectorXd::Zero(n_levels);
  for (std::size_t i = 0; i < n; ++i) {
    const int lvl = level_of(next, unit_x(d.units[i]));
    psum.row(lvl) += resp.row(static_cast<long>(i));
    pcount[lvl] += 1.0;
  }
  for (long v = 0; v < n_levels; ++v) {
    if (pcount[v] > 0.0) next.stratum_probs_by_x.row(v) = psum.row(v) / pcount[v];
  }

  // Mean structure by weighted least squares; per-component variances enter
  // as precision weights.
  Eigen::MatrixXd w = resp;
  if (opts.per_component_sigma) {
    for (std::size_t i = 0; i < n; ++i) {
      const int a = d.units[i].a;
      for (int k = 0; k < kNumStrata; ++k) {
        const double sd = current.sigma_ak(a, k);
        w(static_cast<long>(i), k) /= sd * sd;
      }
    }
  }
  const bool fit_delta = n_levels >= 2;
  update_means(d, w, fit_delta, &next);

  // Variance(s).
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(2, 4);
  Eigen::MatrixXd rs = Eigen::MatrixXd::Zero(2, 4);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = d.units[i];
    for (int k = 0; k < kNumStrata; ++k) {
      const double rik = resp(static_cast<long>(i), k);
      if (rik == 0.0) continue;
      const double res = u.y - (next.means(u.a, k) + next.delta_x * unit_x(u));
      sq(u.a, k) += rik * res * res;
      rs(u.a, k) += rik;
    }
  }
  const double pooled =
      std::max(std::sqrt(sq.sum() / static_cast<double>(n)), opts.sigma_floor);
  if (opts.per_component_sigma) {
    next.per_component_sigma = true;
    if (next.sigma_ak.size() == 0) next.sigma_ak = Eigen::MatrixXd::Constant(2, 4, 1.0);
    for (int a = 0; a < 2; ++a) {
      for (int k = 0; k < kNumStrata; ++k) {
        if (rs(a, k) >= kDegenerateResp) {
          next.sigma_ak(a, k) =
              std::max(std::sqrt(sq(a, k) / rs(a, k)), opts.sigma_floor);
        }
      }
    }
    next.sigma = pooled;
  } else {
    next.sigma = pooled;
  }
  return next;
}

EmFit fit(const ObservedDataset& d, const EmOptions& opts, const PsModel& start) {
  if (!(opts.tol > 0.0)) throw ValidationError("EM tol must be positive");
  if (opts.max_iter < 1) throw ValidationError("EM max_iter must be at least 1");
  EmFit out = fit_no_probe(d, opts, start);
  if (opts.probe_identifiability && out.converged) {
    probe_identifiability(d, opts, &out);
  }
  return out;
}

PsModel default_start(const ObservedDataset& d, const EmOptions& opts) {
  if (d.n() == 0) throw ValidationError("default start needs a nonempty dataset");
  PsModel m;
  m.variant = opts.variant;
  m.x_levels = distinct_levels(d);
  const long n_levels = static_cast<long>(m.x_levels.size());
  m.stratum_probs_by_x = Eigen::MatrixXd::Constant(n_levels, 4, 0.25);

  // Observed-cell means and pooled within-cell sd.
  Eigen::MatrixXd cell_sum = Eigen::MatrixXd::Zero(2, 2);
  Eigen::MatrixXd cell_n = Eigen::MatrixXd::Zero(2, 2);
  double grand_sum = 0.0;
  for (const auto& u : d.units) {
    cell_sum(u.a, u.s) += u.y;
    cell_n(u.a, u.s) += 1.0;
    grand_sum += u.y;
  }
  const double grand_mean = grand_sum / static_cast<double>(d.n());
  Eigen::MatrixXd cell_mean = Eigen::MatrixXd::Constant(2, 2, grand_mean);
  for (int a = 0; a < 2; ++a) {
    for (int s = 0; s < 2; ++s) {
      if (cell_n(a, s) > 0.0) cell_mean(a, s) = cell_sum(a, s) / cell_n(a, s);
    }
  }
  double ssr = 0.0;
  for (const auto& u : d.units) {
    const double res = u.y - cell_mean(u.a, u.s);
    ssr += res * res;
  }
  const double pooled_sd =
      std::max(std::sqrt(ssr / static_cast<double>(d.n())), opts.sigma_floor);

  m.means = Eigen::MatrixXd::Zero(2, 4);
  for (int a = 0; a < 2; ++a) {
    for (int s = 0; s < 2; ++s) {
      const std::vector<Stratum> ks = compatible_strata(a, s);
      m.means(a, static_cast<int>(ks[0])) = cell_mean(a, s) - 0.5 * pooled_sd;
      m.means(a, static_cast<int>(ks[1])) = cell_mean(a, s) + 0.5 * pooled_sd;
    }
  }
  m.delta_x = 0.0;
  m.sigma = pooled_sd;
  m.per_component_sigma = opts.per_component_sigma;
  if (opts.per_component_sigma) {
    m.sigma_ak = Eigen::MatrixXd::Constant(2, 4, pooled_sd);
  }
  m.tau_it = 0.5 * ((m.means(1, 0) - m.means(0, 0)) + (m.means(1, 1) - m.means(0, 1)));
  m.tau_hd = 0.5 * ((m.means(1, 2) - m.means(0, 2)) + (m.means(1, 3) - m.means(0, 3)));
  return m;
}

PsModel truth_start(const synth::ContinuousWorldConfig& cfg, const EmOptions& opts) {
  PsModel m;
  m.variant = opts.variant;
  m.x_levels = {0.0, 1.0};
  m.stratum_probs_by_x = Eigen::MatrixXd::Zero(2, 4);
  for (int v = 0; v < 2; ++v) {
    double sum = 0.0;
    for (int k = 0; k < kNumStrata; ++k) {
      const double px = v == 1 ? cfg.px1[static_cast<std::size_t>(k)]
                               : 1.0 - cfg.px1[static_cast<std::size_t>(k)];
      const double wk = cfg.stratum_probs[static_cast<std::size_t>(k)] * px;
      m.stratum_probs_by_x(v, k) = wk;
      sum += wk;
    }
    if (sum <= 0.0) throw ValidationError("truth start: empty covariate level");
    m.stratum_probs_by_x.row(v) /= sum;
  }
  m.means = Eigen::MatrixXd::Zero(2, 4);
  for (int a = 0; a < 2; ++a) {
    for (int k = 0; k < kNumStrata; ++k) {
      m.means(a, k) = cfg.means_at_x0[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)];
    }
  }
  m.delta_x = cfg.x_shift;
  m.sigma = 1.0;  // the world's error families are standardized to unit sd
  m.per_component_sigma = opts.per_component_sigma;
  if (opts.per_component_sigma) {
    m.sigma_ak = Eigen::MatrixXd::Constant(2, 4, 1.0);
  }
  m.tau_it = 0.5 * ((m.means(1, 0) - m.means(0, 0)) + (m.means(1, 1) - m.means(0, 1)));
  m.tau_hd = 0.5 * ((m.means(1, 2) - m.means(0, 2)) + (m.means(1, 3) - m.means(0, 3)));
  return m;
}

}  // namespace auxeff::ps
