#include "auxeff/core_stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "auxeff/rng.hpp"

namespace auxeff::stats {

namespace {

std::string col_label(const std::vector<std::string>& names, int j) {
  if (j < static_cast<int>(names.size())) return names[j];
  return "col" + std::to_string(j);
}

}  // namespace

LinearFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
              const std::vector<std::string>& col_names, const Eigen::VectorXd* weights) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (y.size() != n) throw ValidationError("ols: X and y dimensions disagree");
  if (n < p) throw ValidationError("ols: fewer rows than columns");

  Eigen::MatrixXd Xw = X;
  Eigen::VectorXd yw = y;
  if (weights) {
    if (weights->size() != n) throw ValidationError("ols: weight length mismatch");
    if ((weights->array() < 0).any()) throw ValidationError("ols: negative weight");
    Eigen::ArrayXd sw = weights->array().sqrt();
    Xw.array().colwise() *= sw;
    yw.array() *= sw;
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  if (qr.rank() < p) {
    std::string msg = "ols: design is rank-deficient; redundant column(s):";
    const auto& perm = qr.colsPermutation().indices();
    for (int j = qr.rank(); j < p; ++j) msg += " " + col_label(col_names, perm[j]);
    throw ValidationError(msg);
  }

  LinearFit fit;
  fit.rank = static_cast<int>(qr.rank());
  fit.coefficients = qr.solve(yw);
  fit.fitted = X * fit.coefficients;
  fit.residuals = y - fit.fitted;

  double rss;
  if (weights)
    rss = (weights->array() * fit.residuals.array().square()).sum();
  else
    rss = fit.residuals.squaredNorm();
  double dof = static_cast<double>(n - p);
  fit.sigma2 = dof > 0 ? rss / dof : 0.0;

  // (X'WX)^-1 from the R factor: X P = Q R  =>  (X'X)^-1 = P R^-1 R^-T P'.
  Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd inv = Rinv * Rinv.transpose();
  const auto& perm = qr.colsPermutation();
  fit.covariance = fit.sigma2 * (perm * inv * perm.transpose());
  return fit;
}

LogisticFit logistic_fit(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                         const std::vector<std::string>& col_names, int max_iter, double tol) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (y.size() != n) throw ValidationError("logistic_fit: X and y dimensions disagree");
  for (Eigen::Index i = 0; i < n; ++i)
    if (y[i] != 0.0 && y[i] != 1.0) throw ValidationError("logistic_fit: responses must be 0/1");

  auto loglik_at = [&](const Eigen::VectorXd& beta) {
    Eigen::ArrayXd eta = (X * beta).array();
    // log(1+exp(eta)) computed stably
    Eigen::ArrayXd lse = eta.max(0.0) + (1.0 + (-eta.abs()).exp()).log();
    return (y.array() * eta - lse).sum();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = loglik_at(beta);
  LogisticFit fit;

  for (int it = 1; it <= max_iter; ++it) {
    Eigen::ArrayXd eta = (X * beta).array().min(35.0).max(-35.0);
    Eigen::ArrayXd mu = 1.0 / (1.0 + (-eta).exp());
    Eigen::VectorXd grad = X.transpose() * (y.array() - mu).matrix();
    fit.iterations = it;
    if (grad.lpNorm<Eigen::Infinity>() < tol) {
      fit.converged = true;
      break;
    }
    Eigen::ArrayXd w = (mu * (1.0 - mu)).max(1e-10);
    Eigen::MatrixXd Xs = X;
    Xs.array().colwise() *= w.sqrt();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
    if (qr.rank() < p) {
      std::string msg = "logistic_fit: design is rank-deficient; redundant column(s):";
      const auto& perm = qr.colsPermutation().indices();
      for (int j = qr.rank(); j < p; ++j) msg += " " + col_label(col_names, perm[j]);
      throw ValidationError(msg);
    }
    Eigen::VectorXd z = (eta + (y.array() - mu) / w).matrix();
    Eigen::VectorXd znorm = (z.array() * w.sqrt()).matrix();
    Eigen::VectorXd beta_new = qr.solve(znorm);

    double ll_new = loglik_at(beta_new);
    int halvings = 0;
    while (ll_new < ll && halvings < 40) {
      beta_new = 0.5 * (beta_new + beta);
      ll_new = loglik_at(beta_new);
      ++halvings;
    }
    beta = beta_new;
    ll = ll_new;
  }

  Eigen::ArrayXd eta = (X * beta).array();
  if (!fit.converged && eta.abs().maxCoeff() > 25.0)
    throw NumericalError("logistic_fit: complete or quasi-complete separation detected");

  fit.coefficients = beta;
  fit.fitted = (1.0 / (1.0 + (-eta.min(35.0).max(-35.0)).exp())).matrix();
  fit.loglik = ll;
  return fit;
}

Eigen::VectorXd km_censoring_weights(const SurvivalDataset& d) {
  const std::size_t n = d.n();
  // Kaplan-Meier for the competing-event process: distinct competing times,
  // event counts, and at-risk counts (computed by sorting all times once).
  std::map<double, int> comp_events;
  for (const auto& u : d.units)
    if (u.event == EventType::Competing) comp_events[u.time] += 1;

  std::vector<double> all_times(n);
  for (std::size_t i = 0; i < n; ++i) all_times[i] = d.units[i].time;
  std::sort(all_times.begin(), all_times.end());

  std::vector<double> times;       // competing-event times, increasing
  std::vector<double> surv_after;  // S(t) just after each competing time
  times.reserve(comp_events.size());
  surv_after.reserve(comp_events.size());
  double s = 1.0;
  for (const auto& [t, dft] : comp_events) {
    auto it = std::lower_bound(all_times.begin(), all_times.end(), t);
    double at_risk = static_cast<double>(all_times.end() - it);
    s *= 1.0 - static_cast<double>(dft) / at_risk;
    times.push_back(t);
    surv_after.push_back(s);
  }

  auto surv_minus = [&](double t) {
    // S(t-): product over competing times strictly before t
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return 1.0;
    return surv_after[static_cast<std::size_t>(it - times.begin()) - 1];
  };

  Eigen::VectorXd w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& u = d.units[i];
    if (u.event == EventType::Competing) {
      w[i] = 0.0;
      continue;
    }
    double sm = surv_minus(u.time);
    if (sm <= 0.0)
      throw NumericalError("km_censoring_weights: survivor function reaches 0 before time " +
                           std::to_string(u.time) + "; weight inestimable");
    w[i] = 1.0 / sm;
  }
  return w;
}

Eigen::MatrixXd sandwich_variance(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& moments,
    const Eigen::VectorXd& theta_hat,
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>* jacobian) {
  Eigen::MatrixXd m0 = moments(theta_hat);
  const Eigen::Index n = m0.rows(), q = m0.cols();
  if (theta_hat.size() != q)
    throw ValidationError("sandwich_variance: moment dimension must match parameter dimension");

  Eigen::MatrixXd B(q, q);
  if (jacobian) {
    B = (*jacobian)(theta_hat);
  } else {
    for (Eigen::Index j = 0; j < q; ++j) {
      double h = 1e-5 * std::max(1.0, std::abs(theta_hat[j]));
      Eigen::VectorXd tp = theta_hat, tm = theta_hat;
      tp[j] += h;
      tm[j] -= h;
      Eigen::VectorXd diff = (moments(tp).colwise().mean() - moments(tm).colwise().mean()) / (2 * h);
      B.col(j) = diff;
    }
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
  if (!lu.isInvertible())
    throw NumericalError("sandwich_variance: singular bread matrix");
  Eigen::MatrixXd Binv = lu.inverse();
  Eigen::MatrixXd M = (m0.transpose() * m0) / static_cast<double>(n);
  return Binv * M * Binv.transpose() / static_cast<double>(n);
}

BootstrapResult bootstrap_indices(
    int n, int reps, std::uint64_t seed,
    const std::function<Eigen::VectorXd(const std::vector<int>&)>& refit) {
  if (reps < 50) throw ValidationError("bootstrap: need at least 50 replicates");
  if (n <= 0) throw ValidationError("bootstrap: empty dataset");

  Rng rng(seed);
  std::vector<Eigen::VectorXd> draws;
  int n_failed = 0;
  std::vector<int> idx(n);
  for (int r = 0; r < reps; ++r) {
    for (int i = 0; i < n; ++i) idx[i] = rng.below(n);
    try {
      draws.push_back(refit(idx));
    } catch (const std::exception&) {
      ++n_failed;
    }
  }
  if (n_failed > reps / 5)
    throw NumericalError("bootstrap: " + std::to_string(n_failed) + "/" + std::to_string(reps) +
                         " resamples failed");
  if (draws.empty()) throw NumericalError("bootstrap: all resamples failed");

  const Eigen::Index q = draws.front().size();
  const int m = static_cast<int>(draws.size());
  BootstrapResult out;
  out.reps = reps;
  out.n_failed = n_failed;
  out.sd.resize(q);
  out.p2_5.resize(q);
  out.p97_5.resize(q);

  auto percentile = [](std::vector<double>& v, double pct) {
    std::sort(v.begin(), v.end());
    double pos = pct / 100.0 * (static_cast<double>(v.size()) - 1.0);
    std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    std::size_t hi = std::min(lo + 1, v.size() - 1);
    double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };

  for (Eigen::Index j = 0; j < q; ++j) {
    std::vector<double> col(m);
    double mean = 0.0;
    for (int r = 0; r < m; ++r) {
      col[r] = draws[r][j];
      mean += col[r];
    }
    mean /= m;
    double ss = 0.0;
    for (int r = 0; r < m; ++r) ss += (col[r] - mean) * (col[r] - mean);
    out.sd[j] = m > 1 ? std::sqrt(ss / (m - 1)) : 0.0;
    out.p2_5[j] = percentile(col, 2.5);
    out.p97_5[j] = percentile(col, 97.5);
  }
  return out;
}

}  // namespace auxeff::stats
