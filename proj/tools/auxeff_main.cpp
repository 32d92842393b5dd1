// auxeff: command-line front end.
//
//   simulate   world JSON -> complete.csv + observed.csv (or survival.csv) + truth.json
//   oracle     world JSON or complete CSV -> population / realized truth report
//   estimate   observed or survival CSV -> single-fit JSON report
//   profile    survival CSV -> (psi, z, n_effective) grid as CSV
//   replicate  study JSON -> Monte Carlo result JSON
//
// Exit codes: 0 success, 1 validation error (bad flags, files, configs),
// 2 numerical failure (non-convergence, singular systems, inestimable weights).

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "auxeff/covariate_estimators.hpp"
#include "auxeff/data_model.hpp"
#include "auxeff/errors.hpp"
#include "auxeff/harness.hpp"
#include "auxeff/oracle.hpp"
#include "auxeff/ps_em.hpp"
#include "auxeff/rng.hpp"
#include "auxeff/snm_gest.hpp"
#include "auxeff/survival_gest.hpp"
#include "auxeff/synthdata.hpp"

namespace {

using nlohmann::json;
using namespace auxeff;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ValidationError("write to '" + path + "' failed");
}

// Writes to the file when `out` is nonempty, otherwise to stdout.
void emit(const std::string& out, const std::string& text) {
  if (out.empty()) {
    std::cout << text << "\n";
  } else {
    spit(out, text);
  }
}

json parse_options_file(const std::string& spec_path) {
  if (spec_path.empty()) return json::object();
  const json j = json::parse(slurp(spec_path));
  if (!j.is_object()) throw ValidationError("spec file must hold a JSON object");
  return j;
}

json vec_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (long i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json mat_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (long r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (long c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

double world_p_treat(const harness::WorldConfig& w) {
  using Kind = harness::WorldConfig::Kind;
  switch (w.kind) {
    case Kind::Binary: return w.binary.p_treat;
    case Kind::Continuous: return w.continuous.p_treat;
    case Kind::Mechanistic: return w.mechanistic.p_treat;
    case Kind::Screening: return w.screening.p_treat;
  }
  return 0.5;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string world_path;
  std::string out_dir = ".";
  std::size_t n = 5000;
  std::uint64_t seed = 1;
};

int run_simulate(const SimulateArgs& a) {
  const harness::WorldConfig w = harness::load_world_json(a.world_path);
  std::filesystem::create_directories(a.out_dir);
  const std::string dir = a.out_dir;

  const std::uint64_t gen_seed = Rng::child_seed(a.seed, 0);
  const std::uint64_t mask_seed = Rng::child_seed(a.seed, 1);

  using Kind = harness::WorldConfig::Kind;
  if (w.kind == Kind::Screening) {
    const SurvivalDataset sd = synth::gen_screening_world(w.screening, a.n, gen_seed);
    write_survival_csv(sd, dir + "/survival.csv");
  } else {
    CompleteDataset complete;
    switch (w.kind) {
      case Kind::Binary: complete = synth::gen_binary_world(w.binary, a.n, gen_seed); break;
      case Kind::Continuous:
        complete = synth::gen_continuous_world(w.continuous, a.n, gen_seed);
        break;
      case Kind::Mechanistic:
        complete = synth::gen_mechanistic_world(w.mechanistic, a.n, gen_seed);
        break;
      case Kind::Screening: break;
    }
    const ObservedDataset obs = synth::mask(complete, world_p_treat(w), mask_seed);
    write_complete_csv(complete, dir + "/complete.csv");
    write_observed_csv(obs, dir + "/observed.csv");
  }

  json truth = json::parse(harness::truth_report_json(w));
  truth["seed"] = a.seed;
  truth["n"] = a.n;
  truth["config_hash"] = harness::config_fingerprint(harness::world_to_json(w));
  spit(dir + "/truth.json", truth.dump(2));
  return 0;
}

// ---------------------------------------------------------------------------
// oracle
// ---------------------------------------------------------------------------

struct OracleArgs {
  std::string world_path;
  std::string input_path;
  std::string out;
};

int run_oracle(const OracleArgs& a) {
  if (a.world_path.empty() == a.input_path.empty()) {
    throw ValidationError("oracle needs exactly one of --world or --input");
  }
  if (!a.world_path.empty()) {
    const harness::WorldConfig w = harness::load_world_json(a.world_path);
    json truth = json::parse(harness::truth_report_json(w));
    truth["config_hash"] = harness::config_fingerprint(harness::world_to_json(w));
    emit(a.out, truth.dump(2));
    return 0;
  }
  const std::string text = slurp(a.input_path);
  const CompleteDataset d = load_complete_csv(a.input_path);
  const auto eff = oracle::realized_effects(d);
  const auto snm = oracle::realized_snm(d);
  json j;
  j["input"] = a.input_path;
  j["config_hash"] = harness::config_fingerprint(text);
  j["realized"] = {
      {"stratum_effects",
       {{"immune", eff.effect[0]},
        {"treat_prevented", eff.effect[1]},
        {"treat_caused", eff.effect[2]},
        {"doomed", eff.effect[3]}}},
      {"stratum_probs", eff.prob},
      {"ate", eff.ate},
      {"psi0", snm.psi0},
      {"psi1", snm.psi1},
      {"naive_contrast", oracle::realized_naive_contrast(d)},
      {"q", oracle::realized_q(d)},
  };
  emit(a.out, j.dump(2));
  return 0;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string method;
  std::string input_path;
  std::string spec_path;
  std::string start_path;  // ps1/ps2: world (or truth.json) for a truth start
  std::string out;
  std::uint64_t seed = 1;
  std::optional<double> tol;  // ps1/ps2 override
};

snm::SnmSpec snm_spec_from(const json& opts, snm::BlipModel model) {
  snm::SnmSpec spec;
  spec.model = model;
  if (opts.contains("free")) {
    const auto& f = opts.at("free");
    if (!f.is_array() || f.size() > 3) throw ValidationError("'free' must be <= 3 booleans");
    for (std::size_t i = 0; i < f.size(); ++i) spec.free[i] = f[i].get<bool>();
    for (std::size_t i = f.size(); i < 3; ++i) spec.free[i] = false;
    if (model == snm::BlipModel::ObservedAux) spec.free[2] = false;
  } else if (model == snm::BlipModel::ObservedAux) {
    spec.free = {true, true, false};
  }
  if (opts.contains("fixed_values")) {
    const auto& f = opts.at("fixed_values");
    for (std::size_t i = 0; i < f.size() && i < 3; ++i) spec.fixed_values[i] = f[i].get<double>();
  }
  if (opts.contains("p_treat")) spec.p_treat = opts.at("p_treat").get<double>();
  return spec;
}

json gest_json(const snm::GEstimate& g) {
  json j;
  json est = json::object();
  for (std::size_t i = 0; i < g.names.size(); ++i) {
    est[g.names[i]] = g.estimate[static_cast<long>(i)];
  }
  j["estimates"] = est;
  j["covariance"] = mat_json(g.covariance);
  json se = json::object();
  for (std::size_t i = 0; i < g.names.size(); ++i) {
    se[g.names[i]] = std::sqrt(g.covariance(static_cast<long>(i), static_cast<long>(i)));
  }
  j["se"] = se;
  j["moment_norm"] = g.moment_norm;
  j["p_treat_used"] = g.p_used;
  return j;
}

surv::SurvivalGSpec surv_spec_from(const json& opts) {
  surv::SurvivalGSpec spec;
  spec.aux_name = opts.value("aux", std::string{});
  if (opts.contains("p_treat")) spec.p_treat = opts.at("p_treat").get<double>();
  spec.grid_lo = opts.value("grid_lo", spec.grid_lo);
  spec.grid_hi = opts.value("grid_hi", spec.grid_hi);
  spec.grid_step = opts.value("grid_step", spec.grid_step);
  spec.alpha = opts.value("alpha", spec.alpha);
  return spec;
}

// Accepts either a world JSON or a simulate-style truth.json with a "world" key.
harness::WorldConfig world_from_start_file(const std::string& path) {
  const json j = json::parse(slurp(path));
  if (j.contains("world")) return harness::parse_world_json(j.at("world").dump());
  return harness::parse_world_json(j.dump());
}

int run_estimate(const EstimateArgs& a) {
  const json opts = parse_options_file(a.spec_path);
  json report;
  report["method"] = a.method;
  report["input"] = a.input_path;
  report["seed"] = a.seed;
  report["options"] = opts;
  report["config_hash"] =
      harness::config_fingerprint(a.method + "\n" + opts.dump() + "\n" + a.input_path);
  json warnings = json::array();

  if (a.method == "survival-gest") {
    const SurvivalDataset sd = load_survival_csv(a.input_path);
    const auto spec = surv_spec_from(opts);
    const auto prof = surv::profile_and_invert(sd, spec);
    report["estimates"] = {{"psi_hat", prof.psi_hat}};
    report["ci"] = {{"lo", prof.ci_lo},
                    {"hi", prof.ci_hi},
                    {"lo_open", prof.ci_lo_open},
                    {"hi_open", prof.ci_hi_open},
                    {"level", 1.0 - spec.alpha}};
    report["z_at_zero"] = prof.z_at_zero;
    report["grid_points"] = prof.grid.size();
    warnings.push_back(prof.weight_caveat);
    report["warnings"] = warnings;
    emit(a.out, report.dump(2));
    return 0;
  }

  const ObservedDataset d = load_observed_csv(a.input_path);

  if (a.method == "conventional") {
    const auto fit = covest::conventional_fit(d);
    report["estimates"] = {{"effect", fit.effect}};
    report["se"] = fit.se;
    report["coefficients"] = vec_json(fit.fit.coefficients);
  } else if (a.method == "naive") {
    const auto nc = covest::naive_contrast(d);
    report["estimates"] = {{"contrast", nc.contrast}};
    report["mean_treated"] = nc.mean_treated;
    report["mean_control"] = nc.mean_control;
    report["n_treated"] = nc.n_treated;
    report["n_control"] = nc.n_control;
    warnings.push_back(nc.warning);
  } else if (a.method == "eas") {
    const std::string mode_s = opts.value("mode", std::string{"own"});
    oracle::EasScoreMode mode = oracle::EasScoreMode::OwnArm;
    if (mode_s == "control") mode = oracle::EasScoreMode::FixedControl;
    else if (mode_s == "treated") mode = oracle::EasScoreMode::FixedTreated;
    else if (mode_s != "own") throw ValidationError("eas mode must be own|control|treated");
    const auto fit = covest::eas_fit(d, mode);
    report["estimates"] = {{"effect_at_1", fit.extrapolated}};
    report["coefficients"] = vec_json(fit.fit.coefficients);
    report["score_range"] = {{"min", fit.score_min}, {"max", fit.score_max}};
    report["mode"] = mode_s;
    warnings.push_back(fit.extrapolation_warning);
    warnings.push_back(
        "the score regressor is itself estimated; reported standard errors ignore "
        "that first-stage uncertainty");
  } else if (a.method == "eas-threshold") {
    const double threshold = opts.value("threshold", 0.8);
    const int arm = opts.value("score_arm", 1);
    const bool adjust = opts.value("adjust_x", false);
    const auto score = covest::fit_principal_score(d, arm);
    const auto eff = covest::effect_above_threshold(d, score.fitted_all, threshold, adjust);
    report["estimates"] = {{"effect", eff.effect}};
    report["se"] = eff.se;
    report["threshold"] = eff.threshold;
    report["score_arm"] = arm;
    report["n_subgroup"] = eff.n_subgroup;
    report["n_treated"] = eff.n_treated;
    report["n_control"] = eff.n_control;
    if (score.weak) warnings.push_back("principal score is nearly constant (weak score)");
  } else if (a.method == "eas-joint") {
    const int bins = opts.value("bins", 4);
    const auto s0 = covest::fit_principal_score(d, 0);
    const auto s1 = covest::fit_principal_score(d, 1);
    const auto cells = covest::joint_score_effects(d, s0.fitted_all, s1.fitted_all, bins);
    json table = json::array();
    for (const auto& c : cells) {
      table.push_back({{"bin0", c.bin0},
                       {"bin1", c.bin1},
                       {"n", c.n},
                       {"n_treated", c.n_treated},
                       {"n_control", c.n_control},
                       {"effect", c.estimable ? json(c.effect) : json(nullptr)},
                       {"estimable", c.estimable}});
    }
    report["bins"] = bins;
    report["cells"] = table;
    report["estimates"] = json::object();
  } else if (a.method == "snm") {
    const auto spec = snm_spec_from(opts, snm::BlipModel::ObservedAux);
    const auto est = snm::solve(d, spec);
    report.update(gest_json(est));
  } else if (a.method == "mediation") {
    const auto spec = snm_spec_from(opts, snm::BlipModel::Mediation);
    std::optional<double> q;
    if (opts.contains("q")) q = opts.at("q").get<double>();
    const auto est = snm::solve_mediation(d, spec, q);
    report.update(gest_json(est.gest));
    report["q"] = {{"value", est.q_hat}, {"supplied", est.q_supplied}, {"note", est.q_note}};
    report["implied"] = {{"psi0", est.implied_psi0}, {"psi1", est.implied_psi1}};
    if (!est.note.empty()) warnings.push_back(est.note);
  } else if (a.method == "ps1" || a.method == "ps2") {
    ps::EmOptions eo;
    eo.variant = a.method == "ps1" ? ps::PsVariant::I : ps::PsVariant::II;
    eo.tol = opts.value("tol", eo.tol);
    eo.max_iter = opts.value("max_iter", eo.max_iter);
    eo.per_component_sigma = opts.value("per_component_sigma", eo.per_component_sigma);
    eo.sigma_floor = opts.value("sigma_floor", eo.sigma_floor);
    eo.probe_identifiability = opts.value("probe_identifiability", eo.probe_identifiability);
    if (a.tol) eo.tol = *a.tol;
    ps::PsModel start;
    if (!a.start_path.empty()) {
      const harness::WorldConfig w = world_from_start_file(a.start_path);
      if (w.kind != harness::WorldConfig::Kind::Continuous) {
        throw ValidationError("--start requires a continuous world configuration");
      }
      start = ps::truth_start(w.continuous, eo);
    } else {
      start = ps::default_start(d, eo);
    }
    const auto fit = ps::fit(d, eo, start);
    json est = json::object();
    if (a.method == "ps1") {
      est["effect.immune"] = fit.effects[0];
      est["effect.treat_prevented"] = fit.effects[1];
      est["effect.treat_caused"] = fit.effects[2];
      est["effect.doomed"] = fit.effects[3];
    } else {
      est["tau_it"] = fit.effects[0];
      est["tau_hd"] = fit.effects[1];
    }
    report["estimates"] = est;
    report["converged"] = fit.converged;
    report["iterations"] = fit.iterations;
    report["loglik"] = fit.final_loglik();
    report["loglik_trace_length"] = fit.loglik_trace.size();
    report["x_levels"] = fit.model.x_levels;
    report["stratum_probs_by_x"] = mat_json(fit.model.stratum_probs_by_x);
    report["means"] = mat_json(fit.model.means);
    report["delta_x"] = fit.model.delta_x;
    report["sigma"] = fit.model.sigma;
    if (fit.model.per_component_sigma) report["sigma_ak"] = mat_json(fit.model.sigma_ak);
    report["mean_responsibility"] = vec_json(fit.mean_responsibility);
    report["degenerate"] = fit.degenerate;
    if (fit.identifiability_warning) warnings.push_back(fit.warning_detail);
    if (!fit.converged) {
      warnings.push_back("EM stopped at the iteration cap without meeting the tolerance");
    }
  } else {
    throw ValidationError(
        "unknown method '" + a.method +
        "' (expected conventional|eas|eas-threshold|eas-joint|snm|mediation|ps1|ps2|"
        "survival-gest|naive)");
  }

  report["warnings"] = warnings;
  emit(a.out, report.dump(2));
  return 0;
}

// ---------------------------------------------------------------------------
// profile
// ---------------------------------------------------------------------------

struct ProfileArgs {
  std::string input_path;
  std::string spec_path;
  std::string out;
};

int run_profile(const ProfileArgs& a) {
  const SurvivalDataset sd = load_survival_csv(a.input_path);
  const auto spec = surv_spec_from(parse_options_file(a.spec_path));
  const auto prof = surv::profile_and_invert(sd, spec);
  std::ostringstream csv;
  csv << "psi,z,n_effective\n";
  char buf[96];
  for (const auto& p : prof.grid) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%lld\n", p.psi, p.z,
                  static_cast<long long>(p.n_effective));
    csv << buf;
  }
  emit(a.out, csv.str());
  std::cerr << "psi_hat=" << prof.psi_hat << " ci=[" << prof.ci_lo << ", " << prof.ci_hi
            << "]\nnote: " << prof.weight_caveat << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// replicate
// ---------------------------------------------------------------------------

struct ReplicateArgs {
  std::string study_path;
  std::string out;
  int threads = 0;
};

int run_replicate(const ReplicateArgs& a) {
  const harness::StudyConfig cfg = harness::load_study_json(a.study_path);
  const harness::StudyResult res = harness::run_study(cfg, a.threads);
  emit(a.out, harness::result_to_json(res));
  std::cerr << "study '" << res.name << "': " << res.replicates << " replicates in "
            << res.runtime_seconds << "s\n";
  for (const auto& w : res.warnings) std::cerr << "note: " << w << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"effects in groups defined by a post-treatment auxiliary outcome"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "generate a synthetic dataset from a world config");
  c_sim->add_option("--world", sim.world_path, "world config JSON")->required();
  c_sim->add_option("--n", sim.n, "sample size");
  c_sim->add_option("--seed", sim.seed, "master seed");
  c_sim->add_option("--out", sim.out_dir, "output directory");

  OracleArgs ora;
  auto* c_ora = app.add_subcommand("oracle", "population or realized truth report");
  c_ora->add_option("--world", ora.world_path, "world config JSON (population truths)");
  c_ora->add_option("--input", ora.input_path, "complete-data CSV (realized truths)");
  c_ora->add_option("--out", ora.out, "output file (default: stdout)");

  EstimateArgs est;
  auto* c_est = app.add_subcommand("estimate", "fit one estimator to a dataset");
  c_est
      ->add_option("--method", est.method,
                   "conventional|eas|eas-threshold|eas-joint|snm|mediation|ps1|ps2|"
                   "survival-gest|naive")
      ->required();
  c_est->add_option("--input", est.input_path, "observed CSV (survival CSV for survival-gest)")
      ->required();
  c_est->add_option("--spec", est.spec_path, "method options JSON");
  c_est->add_option("--start", est.start_path, "ps1/ps2: world JSON or truth.json for a truth start");
  c_est->add_option("--tol", est.tol, "ps1/ps2: EM stopping tolerance override");
  c_est->add_option("--seed", est.seed, "seed (echoed into the report)");
  c_est->add_option("--out", est.out, "output file (default: stdout)");

  ProfileArgs prof;
  auto* c_prof = app.add_subcommand("profile", "survival G-estimation Z profile as CSV");
  c_prof->add_option("--input", prof.input_path, "survival CSV")->required();
  c_prof->add_option("--spec", prof.spec_path, "profile options JSON");
  c_prof->add_option("--out", prof.out, "output CSV (default: stdout)");

  ReplicateArgs rep;
  auto* c_rep = app.add_subcommand("replicate", "run a Monte Carlo study");
  c_rep->add_option("--study", rep.study_path, "study config JSON")->required();
  c_rep->add_option("--threads", rep.threads, "worker threads (0 = hardware)");
  c_rep->add_option("--out", rep.out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints message and usage pointer to stderr
    return 1;
  }

  try {
    if (c_sim->parsed()) return run_simulate(sim);
    if (c_ora->parsed()) return run_oracle(ora);
    if (c_est->parsed()) return run_estimate(est);
    if (c_prof->parsed()) return run_profile(prof);
    if (c_rep->parsed()) return run_replicate(rep);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
