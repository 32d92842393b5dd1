#include "auxeff/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "auxeff/covariate_estimators.hpp"
#include "auxeff/errors.hpp"
#include "auxeff/oracle.hpp"
#include "auxeff/ps_em.hpp"
#include "auxeff/rng.hpp"
#include "auxeff/snm_gest.hpp"
#include "auxeff/survival_gest.hpp"

namespace auxeff::harness {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::array<double, 4> array4(const json& j, const std::string& key) {
  const auto& arr = j.at(key);
  if (!arr.is_array() || arr.size() != 4) {
    throw ValidationError("field '" + key + "' must be an array of 4 numbers");
  }
  std::array<double, 4> out{};
  for (int k = 0; k < 4; ++k) out[static_cast<std::size_t>(k)] = arr[static_cast<std::size_t>(k)].get<double>();
  return out;
}

Eigen::VectorXd vecxd(const json& arr, const std::string& key) {
  if (!arr.is_array()) throw ValidationError("field '" + key + "' must be an array");
  Eigen::VectorXd v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<long>(i)] = arr[i].get<double>();
  return v;
}

json to_json_vec(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

double json_num(const json& j, const std::string& key, double fallback) {
  return j.contains(key) ? j.at(key).get<double>() : fallback;
}

// ---------------------------------------------------------------------------
// World JSON
// ---------------------------------------------------------------------------

WorldConfig parse_world(const json& j) {
  WorldConfig w;
  const std::string kind = j.at("kind").get<std::string>();
  w.name = j.value("name", std::string{});
  if (kind == "binary") {
    w.kind = WorldConfig::Kind::Binary;
    w.binary.stratum_weights = array4(j, "stratum_weights");
    w.binary.event_prob = array4(j, "event_prob");
    w.binary.p_treat = json_num(j, "p_treat", 0.5);
  } else if (kind == "continuous") {
    w.kind = WorldConfig::Kind::Continuous;
    auto& c = w.continuous;
    c.stratum_probs = array4(j, "stratum_probs");
    c.px1 = array4(j, "px1");
    c.x_shift = json_num(j, "x_shift", 0.5);
    const auto& m = j.at("means_at_x0");
    if (!m.is_array() || m.size() != 2) {
      throw ValidationError("means_at_x0 must be [[4 numbers],[4 numbers]]");
    }
    for (int a = 0; a < 2; ++a) {
      const auto& row = m[static_cast<std::size_t>(a)];
      if (!row.is_array() || row.size() != 4) {
        throw ValidationError("means_at_x0 rows must hold 4 numbers");
      }
      for (int k = 0; k < 4; ++k) {
        c.means_at_x0[static_cast<std::size_t>(a)][static_cast<std::size_t>(k)] =
            row[static_cast<std::size_t>(k)].get<double>();
      }
    }
    const std::string fam = j.value("error_family", std::string{"normal"});
    if (fam == "normal") {
      c.family = synth::ContinuousWorldConfig::ErrorFamily::Normal;
    } else if (fam == "gamma") {
      c.family = synth::ContinuousWorldConfig::ErrorFamily::Gamma;
    } else {
      throw ValidationError("error_family must be 'normal' or 'gamma'");
    }
    c.cross_world_corr = json_num(j, "cross_world_corr", 0.0);
    c.p_treat = json_num(j, "p_treat", 0.5);
  } else if (kind == "mechanistic") {
    w.kind = WorldConfig::Kind::Mechanistic;
    auto& m = w.mechanistic;
    m.gamma1 = j.at("gamma1").get<double>();
    m.gamma2 = j.at("gamma2").get<double>();
    m.gamma3 = j.at("gamma3").get<double>();
    m.beta_y = vecxd(j.at("beta_y"), "beta_y");
    m.zero_control_aux = j.value("zero_control_aux", false);
    if (j.contains("alpha_s0")) {
      m.alpha_s0 = vecxd(j.at("alpha_s0"), "alpha_s0");
    } else if (!m.zero_control_aux) {
      throw ValidationError("mechanistic world requires alpha_s0 unless zero_control_aux is set");
    }
    m.alpha_s1 = vecxd(j.at("alpha_s1"), "alpha_s1");
    m.n_covariates = j.value("n_covariates", 2);
    m.noise_sd = json_num(j, "noise_sd", 1.0);
    m.p_treat = json_num(j, "p_treat", 0.5);
  } else if (kind == "screening") {
    w.kind = WorldConfig::Kind::Screening;
    auto& s = w.screening;
    s.cancer_prob = json_num(j, "cancer_prob", 0.1);
    s.screen_prob = json_num(j, "screen_prob", 0.7);
    s.detect_prob = json_num(j, "detect_prob", 1.0);
    s.psi = json_num(j, "psi", -0.5);
    s.beta_t = vecxd(j.at("beta_t"), "beta_t");
    s.sd_t = json_num(j, "sd_t", 0.8);
    s.comp_rate = json_num(j, "comp_rate", 0.02);
    s.censor_horizon = json_num(j, "censor_horizon", 10.0);
    s.n_covariates = j.value("n_covariates", 1);
    s.p_treat = json_num(j, "p_treat", 0.5);
  } else {
    throw ValidationError("unknown world kind '" + kind + "'");
  }
  return w;
}

json world_json(const WorldConfig& w) {
  json j;
  if (!w.name.empty()) j["name"] = w.name;
  switch (w.kind) {
    case WorldConfig::Kind::Binary: {
      j["kind"] = "binary";
      j["stratum_weights"] = w.binary.stratum_weights;
      j["event_prob"] = w.binary.event_prob;
      j["p_treat"] = w.binary.p_treat;
      break;
    }
    case WorldConfig::Kind::Continuous: {
      const auto& c = w.continuous;
      j["kind"] = "continuous";
      j["stratum_probs"] = c.stratum_probs;
      j["px1"] = c.px1;
      j["x_shift"] = c.x_shift;
      j["means_at_x0"] = {c.means_at_x0[0], c.means_at_x0[1]};
      j["error_family"] =
          c.family == synth::ContinuousWorldConfig::ErrorFamily::Normal ? "normal" : "gamma";
      j["cross_world_corr"] = c.cross_world_corr;
      j["p_treat"] = c.p_treat;
      break;
    }
    case WorldConfig::Kind::Mechanistic: {
      const auto& m = w.mechanistic;
      j["kind"] = "mechanistic";
      j["gamma1"] = m.gamma1;
      j["gamma2"] = m.gamma2;
      j["gamma3"] = m.gamma3;
      j["beta_y"] = to_json_vec(m.beta_y);
      if (m.alpha_s0.size() > 0) j["alpha_s0"] = to_json_vec(m.alpha_s0);
      j["alpha_s1"] = to_json_vec(m.alpha_s1);
      j["zero_control_aux"] = m.zero_control_aux;
      j["n_covariates"] = m.n_covariates;
      j["noise_sd"] = m.noise_sd;
      j["p_treat"] = m.p_treat;
      break;
    }
    case WorldConfig::Kind::Screening: {
      const auto& s = w.screening;
      j["kind"] = "screening";
      j["cancer_prob"] = s.cancer_prob;
      j["screen_prob"] = s.screen_prob;
      j["detect_prob"] = s.detect_prob;
      j["psi"] = s.psi;
      j["beta_t"] = to_json_vec(s.beta_t);
      j["sd_t"] = s.sd_t;
      j["comp_rate"] = s.comp_rate;
      j["censor_horizon"] = s.censor_horizon;
      j["n_covariates"] = s.n_covariates;
      j["p_treat"] = s.p_treat;
      break;
    }
  }
  return j;
}

double world_p_treat(const WorldConfig& w) {
  switch (w.kind) {
    case WorldConfig::Kind::Binary: return w.binary.p_treat;
    case WorldConfig::Kind::Continuous: return w.continuous.p_treat;
    case WorldConfig::Kind::Mechanistic: return w.mechanistic.p_treat;
    case WorldConfig::Kind::Screening: return w.screening.p_treat;
  }
  return 0.5;
}

// E[y^1 | S^1 = 1] - E[y^0 | S^0 = 1] for a continuous world (the naive
// stratified contrast's population value).
double continuous_naive_truth(const synth::ContinuousWorldConfig& c) {
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (int k = 0; k < kNumStrata; ++k) {
    const auto ks = static_cast<std::size_t>(k);
    const auto pair = stratum_to_pair(static_cast<Stratum>(k));
    const double ex = c.px1[ks];  // E[x | stratum]
    if (pair.second == 1) {  // s1 = 1
      den1 += c.stratum_probs[ks];
      num1 += c.stratum_probs[ks] * (c.means_at_x0[1][ks] + c.x_shift * ex);
    }
    if (pair.first == 1) {  // s0 = 1
      den0 += c.stratum_probs[ks];
      num0 += c.stratum_probs[ks] * (c.means_at_x0[0][ks] + c.x_shift * ex);
    }
  }
  if (den1 == 0.0 || den0 == 0.0) return 0.0;
  return num1 / den1 - num0 / den0;
}

// ---------------------------------------------------------------------------
// Estimator plumbing
// ---------------------------------------------------------------------------

struct EstimandDef {
  std::string name;
  double truth = 0.0;
};

struct RepOutput {
  // Parallel to the estimator's declared estimands; nullopt = failed.
  std::vector<std::optional<double>> values;
  std::vector<std::string> warnings;  // only collected on replicate 0
};

// One configured estimator: declared estimand list plus a thread-safe
// replicate runner.
struct Runner {
  std::string method;
  std::vector<EstimandDef> estimands;
  json options;
};

ps::EmOptions em_options_from_json(const json& opts, ps::PsVariant variant) {
  ps::EmOptions eo;
  eo.variant = variant;
  eo.tol = json_num(opts, "tol", eo.tol);
  eo.max_iter = opts.value("max_iter", eo.max_iter);
  eo.per_component_sigma = opts.value("per_component_sigma", eo.per_component_sigma);
  eo.sigma_floor = json_num(opts, "sigma_floor", eo.sigma_floor);
  eo.probe_identifiability = opts.value("probe_identifiability", eo.probe_identifiability);
  return eo;
}

surv::SurvivalGSpec surv_spec_from_json(const json& opts) {
  surv::SurvivalGSpec spec;
  spec.aux_name = opts.value("aux", std::string{});
  if (opts.contains("p_treat")) spec.p_treat = opts.at("p_treat").get<double>();
  spec.grid_lo = json_num(opts, "grid_lo", spec.grid_lo);
  spec.grid_hi = json_num(opts, "grid_hi", spec.grid_hi);
  spec.grid_step = json_num(opts, "grid_step", spec.grid_step);
  spec.alpha = json_num(opts, "alpha", spec.alpha);
  return spec;
}

snm::SnmSpec snm_spec_from_json(const json& opts, snm::BlipModel model) {
  snm::SnmSpec spec;
  spec.model = model;
  if (opts.contains("free")) {
    const auto& f = opts.at("free");
    for (std::size_t i = 0; i < f.size() && i < 3; ++i) spec.free[i] = f[i].get<bool>();
  }
  if (opts.contains("fixed_values")) {
    const auto& f = opts.at("fixed_values");
    for (std::size_t i = 0; i < f.size() && i < 3; ++i) spec.fixed_values[i] = f[i].get<double>();
  }
  if (opts.contains("p_treat")) spec.p_treat = opts.at("p_treat").get<double>();
  return spec;
}

Runner make_runner(const EstimatorSpec& spec, const StudyConfig& cfg) {
  Runner r;
  r.method = spec.method;
  r.options = json::parse(spec.options_json.empty() ? "{}" : spec.options_json);
  const WorldConfig& w = cfg.world;

  const bool continuous = w.kind == WorldConfig::Kind::Continuous;
  oracle::StratumEffects ctruth;
  oracle::SnmTruth struth;
  oracle::EasLine easline;
  if (continuous) {
    ctruth = oracle::continuous_world_truth(w.continuous);
    struth = oracle::continuous_snm_truth(w.continuous);
    easline = oracle::eas_population(w.continuous, oracle::EasScoreMode::OwnArm);
  }
  oracle::MediationTruth mtruth;
  if (w.kind == WorldConfig::Kind::Mechanistic) {
    mtruth = oracle::mechanistic_world_truth(w.mechanistic);
  }

  if (r.method == "conventional") {
    const double t = continuous ? ctruth.ate : 0.0;
    r.estimands = {{"conventional.effect", t}};
  } else if (r.method == "naive") {
    double t = 0.0;
    if (w.kind == WorldConfig::Kind::Binary) {
      t = oracle::binary_world_cells(w.binary).naive_contrast;
    } else if (continuous) {
      t = continuous_naive_truth(w.continuous);
    }
    r.estimands = {{"naive.contrast", t}};
  } else if (r.method == "eas") {
    const double t = continuous ? easline.effect_at(1.0) : 0.0;
    r.estimands = {{"eas.extrapolated", t}};
  } else if (r.method == "snm") {
    double t0 = 0.0, t1 = 0.0;
    if (continuous) {
      t0 = struth.psi0;
      t1 = struth.psi1;
    } else if (w.kind == WorldConfig::Kind::Mechanistic) {
      t0 = mtruth.psi0;
      t1 = mtruth.psi1;
    }
    r.estimands = {{"gest.psi0", t0}, {"gest.psi1", t1}};
  } else if (r.method == "mediation") {
    if (w.kind != WorldConfig::Kind::Mechanistic) {
      throw ValidationError("mediation estimator requires a mechanistic world");
    }
    r.estimands = {{"mediation.gamma1", mtruth.gamma1},
                   {"mediation.gamma2", mtruth.gamma2},
                   {"mediation.gamma3", mtruth.gamma3},
                   {"mediation.psi0", mtruth.psi0},
                   {"mediation.psi1", mtruth.psi1}};
  } else if (r.method == "ps1") {
    if (!continuous) throw ValidationError("ps1 estimator requires a continuous world");
    r.estimands = {{"ps1.effect.immune", ctruth.effect[0]},
                   {"ps1.effect.treat_prevented", ctruth.effect[1]},
                   {"ps1.effect.treat_caused", ctruth.effect[2]},
                   {"ps1.effect.doomed", ctruth.effect[3]}};
  } else if (r.method == "ps2") {
    if (!continuous) throw ValidationError("ps2 estimator requires a continuous world");
    r.estimands = {{"ps2.tau_it", struth.psi0}, {"ps2.tau_hd", struth.psi1}};
  } else if (r.method == "survival-gest") {
    if (w.kind != WorldConfig::Kind::Screening) {
      throw ValidationError("survival-gest estimator requires a screening world");
    }
    r.estimands = {{"survival.psi_hat", w.screening.psi},
                   {"survival.ci_covers", 0.95},
                   {"survival.z_at_zero", 0.0}};
  } else {
    throw ValidationError("unknown estimator method '" + r.method + "'");
  }
  return r;
}

RepOutput run_estimator(const Runner& r, const StudyConfig& cfg,
                        const ObservedDataset* obs, const SurvivalDataset* sd,
                        bool collect_warnings) {
  RepOutput out;
  out.values.assign(r.estimands.size(), std::nullopt);
  try {
    if (r.method == "conventional") {
      out.values[0] = covest::conventional_fit(*obs).effect;
    } else if (r.method == "naive") {
      const auto nc = covest::naive_contrast(*obs);
      out.values[0] = nc.contrast;
      if (collect_warnings && !nc.warning.empty()) out.warnings.push_back(nc.warning);
    } else if (r.method == "eas") {
      const std::string mode = r.options.value("mode", std::string{"own"});
      oracle::EasScoreMode m = oracle::EasScoreMode::OwnArm;
      if (mode == "control") m = oracle::EasScoreMode::FixedControl;
      else if (mode == "treated") m = oracle::EasScoreMode::FixedTreated;
      else if (mode != "own") throw ValidationError("eas mode must be own|control|treated");
      const auto fit = covest::eas_fit(*obs, m);
      out.values[0] = fit.extrapolated;
      if (collect_warnings && !fit.extrapolation_warning.empty()) {
        out.warnings.push_back(fit.extrapolation_warning);
      }
    } else if (r.method == "snm") {
      const auto spec = snm_spec_from_json(r.options, snm::BlipModel::ObservedAux);
      const auto est = snm::solve(*obs, spec);
      int slot = 0;
      for (int p = 0; p < 2; ++p) {
        if (spec.free[static_cast<std::size_t>(p)]) {
          out.values[static_cast<std::size_t>(p)] = est.estimate[slot++];
        }
      }
    } else if (r.method == "mediation") {
      const auto spec = snm_spec_from_json(r.options, snm::BlipModel::Mediation);
      std::optional<double> q;
      if (r.options.contains("q")) q = r.options.at("q").get<double>();
      const auto est = snm::solve_mediation(*obs, spec, q);
      int slot = 0;
      std::array<double, 3> gamma = spec.fixed_values;
      for (int p = 0; p < 3; ++p) {
        if (spec.free[static_cast<std::size_t>(p)]) {
          gamma[static_cast<std::size_t>(p)] = est.gest.estimate[slot++];
        }
      }
      out.values[0] = gamma[0];
      out.values[1] = gamma[1];
      out.values[2] = gamma[2];
      out.values[3] = est.implied_psi0;
      out.values[4] = est.implied_psi1;
      if (collect_warnings && !est.note.empty()) out.warnings.push_back(est.note);
    } else if (r.method == "ps1" || r.method == "ps2") {
      const auto variant = r.method == "ps1" ? ps::PsVariant::I : ps::PsVariant::II;
      const auto eo = em_options_from_json(r.options, variant);
      const std::string start_policy =
          r.options.value("start", cfg.em_start.empty() ? std::string{"truth"} : cfg.em_start);
      ps::PsModel start;
      if (start_policy == "truth") {
        if (cfg.world.kind != WorldConfig::Kind::Continuous) {
          throw ValidationError("EM truth start requires a continuous world");
        }
        start = ps::truth_start(cfg.world.continuous, eo);
      } else if (start_policy == "default") {
        start = ps::default_start(*obs, eo);
      } else {
        throw ValidationError("EM start policy must be 'truth' or 'default'");
      }
      const auto fit = ps::fit(*obs, eo, start);
      if (fit.converged) {
        for (long i = 0; i < fit.effects.size(); ++i) {
          out.values[static_cast<std::size_t>(i)] = fit.effects[i];
        }
      }
      if (collect_warnings && fit.identifiability_warning) {
        out.warnings.push_back(fit.warning_detail);
      }
    } else if (r.method == "survival-gest") {
      const auto spec = surv_spec_from_json(r.options);
      const auto prof = surv::profile_and_invert(*sd, spec);
      out.values[0] = prof.psi_hat;
      const double truth = cfg.world.screening.psi;
      const bool covers = truth >= prof.ci_lo && truth <= prof.ci_hi;
      out.values[1] = covers ? 1.0 : 0.0;
      out.values[2] = prof.z_at_zero;
      if (collect_warnings) out.warnings.push_back(prof.weight_caveat);
    }
  } catch (const std::exception&) {
    out.values.assign(r.estimands.size(), std::nullopt);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Public JSON API
// ---------------------------------------------------------------------------

WorldConfig parse_world_json(const std::string& text) {
  return parse_world(json::parse(text));
}

WorldConfig load_world_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open world config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_world_json(ss.str());
}

std::string world_to_json(const WorldConfig& w) { return world_json(w).dump(2); }

StudyConfig parse_study_json(const std::string& text, const std::string& base_dir) {
  const json j = json::parse(text);
  StudyConfig cfg;
  cfg.name = j.value("name", std::string{});
  if (j.contains("world")) {
    cfg.world = parse_world(j.at("world"));
  } else if (j.contains("world_file")) {
    std::string p = j.at("world_file").get<std::string>();
    if (!base_dir.empty() && !p.empty() && p.front() != '/') p = base_dir + "/" + p;
    cfg.world = load_world_json(p);
  } else {
    throw ValidationError("study config needs 'world' or 'world_file'");
  }
  if (!j.contains("estimators") || !j.at("estimators").is_array() ||
      j.at("estimators").empty()) {
    throw ValidationError("study config needs a nonempty 'estimators' array");
  }
  for (const auto& e : j.at("estimators")) {
    EstimatorSpec spec;
    spec.method = e.at("method").get<std::string>();
    spec.options_json = e.value("options", json::object()).dump();
    cfg.estimators.push_back(spec);
  }
  cfg.replicates = j.value("replicates", 500);
  if (cfg.replicates < 1) throw ValidationError("replicates must be >= 1");
  cfg.n = j.value("n", static_cast<std::size_t>(5000));
  cfg.master_seed = j.value("master_seed", static_cast<std::uint64_t>(1));
  cfg.em_start = j.value("em_start", std::string{"truth"});
  cfg.exclusion_factor = json_num(j, "exclusion_factor", 100.0);
  if (j.contains("targets")) {
    for (const auto& t : j.at("targets")) {
      TargetRow row;
      row.estimand = t.at("estimand").get<std::string>();
      row.truth = json_num(t, "truth", 0.0);
      row.mean = json_num(t, "mean", 0.0);
      row.sd = json_num(t, "sd", 0.0);
      row.mean_tol = json_num(t, "mean_tol", 0.0);
      row.sd_rel_tol = json_num(t, "sd_rel_tol", 0.0);
      cfg.targets.push_back(row);
    }
  }
  cfg.config_hash = config_fingerprint(j.dump());
  return cfg;
}

StudyConfig load_study_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open study config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto slash = path.find_last_of('/');
  const std::string base_dir = slash == std::string::npos ? "" : path.substr(0, slash);
  return parse_study_json(ss.str(), base_dir);
}

std::string config_fingerprint(const std::string& canonical_text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : canonical_text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

// ---------------------------------------------------------------------------
// Study execution
// ---------------------------------------------------------------------------

StudyResult run_study(const StudyConfig& cfg, int threads) {
  const auto t_start = std::chrono::steady_clock::now();
  if (cfg.estimators.empty()) throw ValidationError("study has no estimators");
  if (cfg.replicates < 1) throw ValidationError("replicates must be >= 1");

  std::vector<Runner> runners;
  runners.reserve(cfg.estimators.size());
  for (const auto& spec : cfg.estimators) runners.push_back(make_runner(spec, cfg));

  // Flat estimand slots: per runner, per estimand, per replicate.
  struct Slot {
    const Runner* runner = nullptr;
    std::size_t index_in_runner = 0;
    std::vector<std::optional<double>> per_rep;
  };
  std::vector<Slot> slots;
  for (const auto& r : runners) {
    for (std::size_t i = 0; i < r.estimands.size(); ++i) {
      Slot s;
      s.runner = &r;
      s.index_in_runner = i;
      s.per_rep.assign(static_cast<std::size_t>(cfg.replicates), std::nullopt);
      slots.push_back(std::move(s));
    }
  }
  std::vector<std::vector<std::string>> rep0_warnings(runners.size());

  const bool screening = cfg.world.kind == WorldConfig::Kind::Screening;
  const double p_treat = world_p_treat(cfg.world);

  std::atomic<int> next_rep{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  const auto worker = [&]() {
    for (;;) {
      const int rep = next_rep.fetch_add(1);
      if (rep >= cfg.replicates) return;
      try {
        const std::uint64_t base = Rng::child_seed(cfg.master_seed, static_cast<std::uint64_t>(rep));
        const std::uint64_t gen_seed = Rng::child_seed(base, 0);
        const std::uint64_t mask_seed = Rng::child_seed(base, 1);

        ObservedDataset obs;
        SurvivalDataset sd;
        if (screening) {
          sd = synth::gen_screening_world(cfg.world.screening, cfg.n, gen_seed);
        } else {
          CompleteDataset complete;
          switch (cfg.world.kind) {
            case WorldConfig::Kind::Binary:
              complete = synth::gen_binary_world(cfg.world.binary, cfg.n, gen_seed);
              break;
            case WorldConfig::Kind::Continuous:
              complete = synth::gen_continuous_world(cfg.world.continuous, cfg.n, gen_seed);
              break;
            case WorldConfig::Kind::Mechanistic:
              complete = synth::gen_mechanistic_world(cfg.world.mechanistic, cfg.n, gen_seed);
              break;
            case WorldConfig::Kind::Screening:
              break;
          }
          obs = synth::mask(complete, p_treat, mask_seed);
        }

        std::size_t slot_base = 0;
        for (std::size_t ri = 0; ri < runners.size(); ++ri) {
          RepOutput ro = run_estimator(runners[ri], cfg, screening ? nullptr : &obs,
                                       screening ? &sd : nullptr, rep == 0);
          for (std::size_t i = 0; i < ro.values.size(); ++i) {
            slots[slot_base + i].per_rep[static_cast<std::size_t>(rep)] = ro.values[i];
          }
          if (rep == 0) rep0_warnings[ri] = std::move(ro.warnings);
          slot_base += runners[ri].estimands.size();
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  if (n_threads < 1) n_threads = 1;
  n_threads = std::min(n_threads, cfg.replicates);
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  StudyResult res;
  res.name = cfg.name;
  res.config_hash = cfg.config_hash;
  res.master_seed = cfg.master_seed;
  res.replicates = cfg.replicates;

  for (const auto& slot : slots) {
    const EstimandDef& def = slot.runner->estimands[slot.index_in_runner];
    EstimandStats st;
    st.name = def.name;
    st.truth = def.truth;
    std::vector<double> vals;
    vals.reserve(slot.per_rep.size());
    for (const auto& v : slot.per_rep) {
      if (!v.has_value()) {
        ++st.excluded;
        continue;
      }
      if (def.truth != 0.0 && std::abs(*v) > cfg.exclusion_factor * std::abs(def.truth)) {
        ++st.excluded;
        continue;
      }
      vals.push_back(*v);
    }
    st.included = static_cast<int>(vals.size());
    if (vals.empty()) {
      st.mean = st.sd = st.median = kNaN;
    } else {
      double sum = 0.0;
      for (const double v : vals) sum += v;
      st.mean = sum / static_cast<double>(vals.size());
      if (vals.size() >= 2) {
        double ss = 0.0;
        for (const double v : vals) ss += (v - st.mean) * (v - st.mean);
        st.sd = std::sqrt(ss / static_cast<double>(vals.size() - 1));
      } else {
        st.sd = kNaN;
      }
      std::sort(vals.begin(), vals.end());
      const std::size_t m = vals.size() / 2;
      st.median = vals.size() % 2 == 1 ? vals[m] : 0.5 * (vals[m - 1] + vals[m]);
    }
    res.estimands.push_back(std::move(st));
  }

  for (const auto& ws : rep0_warnings) {
    for (const auto& w : ws) {
      if (std::find(res.warnings.begin(), res.warnings.end(), w) == res.warnings.end()) {
        res.warnings.push_back(w);
      }
    }
  }
  if (!cfg.targets.empty()) res.comparisons = compare(res, cfg.targets);

  res.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

std::vector<CompareRow> compare(const StudyResult& result,
                                const std::vector<TargetRow>& targets) {
  std::vector<CompareRow> rows;
  for (const auto& t : targets) {
    const EstimandStats* st = nullptr;
    for (const auto& s : result.estimands) {
      if (s.name == t.estimand) {
        st = &s;
        break;
      }
    }
    if (!st) {
      throw ValidationError("target references unknown estimand '" + t.estimand + "'");
    }
    CompareRow row;
    row.estimand = t.estimand;
    row.target_mean = t.mean;
    row.got_mean = st->mean;
    row.mean_delta = st->mean - t.mean;
    row.target_sd = t.sd;
    row.got_sd = st->sd;
    row.sd_ratio = t.sd > 0.0 && std::isfinite(st->sd) ? st->sd / t.sd : kNaN;
    bool pass = true;
    std::ostringstream note;
    if (t.mean_tol > 0.0) {
      const bool ok = std::isfinite(st->mean) && std::abs(row.mean_delta) <= t.mean_tol;
      if (!ok) {
        pass = false;
        note << "mean off by " << row.mean_delta << " (tol " << t.mean_tol << "); ";
      }
    }
    if (t.sd_rel_tol > 0.0 && t.sd > 0.0) {
      const bool ok = std::isfinite(row.sd_ratio) &&
                      row.sd_ratio >= 1.0 - t.sd_rel_tol && row.sd_ratio <= 1.0 + t.sd_rel_tol;
      if (!ok) {
        pass = false;
        note << "sd ratio " << row.sd_ratio << " outside 1±" << t.sd_rel_tol << "; ";
      }
    }
    row.pass = pass;
    row.note = note.str();
    rows.push_back(row);
  }
  return rows;
}

namespace {
json num_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
}  // namespace

std::string result_to_json(const StudyResult& r) {
  json j;
  j["name"] = r.name;
  j["config_hash"] = r.config_hash;
  j["master_seed"] = r.master_seed;
  j["replicates"] = r.replicates;
  // runtime_seconds stays off the serialized report so identical inputs give
  // byte-identical output files.
  j["estimands"] = json::array();
  for (const auto& s : r.estimands) {
    json e;
    e["name"] = s.name;
    e["truth"] = s.truth;
    e["included"] = s.included;
    e["excluded"] = s.excluded;
    e["mean"] = num_or_null(s.mean);
    e["sd"] = num_or_null(s.sd);
    e["median"] = num_or_null(s.median);
    j["estimands"].push_back(e);
  }
  if (!r.comparisons.empty()) {
    j["comparisons"] = json::array();
    for (const auto& c : r.comparisons) {
      json e;
      e["estimand"] = c.estimand;
      e["target_mean"] = c.target_mean;
      e["got_mean"] = num_or_null(c.got_mean);
      e["mean_delta"] = num_or_null(c.mean_delta);
      e["target_sd"] = c.target_sd;
      e["got_sd"] = num_or_null(c.got_sd);
      e["sd_ratio"] = num_or_null(c.sd_ratio);
      e["pass"] = c.pass;
      e["note"] = c.note;
      j["comparisons"].push_back(e);
    }
  }
  j["warnings"] = r.warnings;
  return j.dump(2);
}

std::string truth_report_json(const WorldConfig& w) {
  json j;
  j["world"] = world_json(w);
  switch (w.kind) {
    case WorldConfig::Kind::Binary: {
      const auto cells = oracle::binary_world_cells(w.binary);
      j["cells"] = {{"p_y_a0_s0", cells.p00},
                    {"p_y_a0_s1", cells.p01},
                    {"p_y_a1_s0", cells.p10},
                    {"p_y_a1_s1", cells.p11}};
      j["naive_contrast"] = cells.naive_contrast;
      break;
    }
    case WorldConfig::Kind::Continuous: {
      const auto eff = oracle::continuous_world_truth(w.continuous);
      const auto snm = oracle::continuous_snm_truth(w.continuous);
      const auto line = oracle::eas_population(w.continuous, oracle::EasScoreMode::OwnArm);
      j["stratum_effects"] = {{"immune", eff.effect[0]},
                              {"treat_prevented", eff.effect[1]},
                              {"treat_caused", eff.effect[2]},
                              {"doomed", eff.effect[3]}};
      j["stratum_probs"] = eff.prob;
      j["ate"] = eff.ate;
      j["psi0"] = snm.psi0;
      j["psi1"] = snm.psi1;
      j["naive_contrast"] = continuous_naive_truth(w.continuous);
      j["eas_line"] = {{"b_int", line.b_int},
                       {"b_mu", line.b_mu},
                       {"b_a", line.b_a},
                       {"b_mua", line.b_mua},
                       {"extrapolated", line.effect_at(1.0)}};
      break;
    }
    case WorldConfig::Kind::Mechanistic: {
      j["gamma1"] = w.mechanistic.gamma1;
      j["gamma2"] = w.mechanistic.gamma2;
      j["gamma3"] = w.mechanistic.gamma3;
      try {
        const auto t = oracle::mechanistic_world_truth(w.mechanistic);
        j["q"] = t.q;
        j["psi0"] = t.psi0;
        j["psi1"] = t.psi1;
      } catch (const ValidationError& e) {
        // non-monotone (e.g. the auxiliary never occurs under control): the
        // group effects have no closed form, so report why instead of failing
        j["q"] = nullptr;
        j["psi0"] = nullptr;
        j["psi1"] = nullptr;
        j["warning"] = e.what();
      }
      break;
    }
    case WorldConfig::Kind::Screening: {
      j["psi"] = w.screening.psi;
      j["censor_horizon"] = w.screening.censor_horizon;
      break;
    }
  }
  return j.dump(2);
}

}  // namespace auxeff::harness
