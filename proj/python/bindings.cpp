// Python bindings: thin wrappers over the C++ library. Datasets are bound as
// classes; fitted results come back as plain dicts so the Python surface stays
// stable while the C++ structs evolve.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <string>
#include <vector>

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

namespace py = pybind11;
using namespace auxeff;

namespace {

ObservedDataset make_observed(const Eigen::MatrixXd& x, const std::vector<int>& a,
                              const std::vector<int>& s, const std::vector<double>& y,
                              std::vector<std::string> x_names) {
  const std::size_t n = a.size();
  if (s.size() != n || y.size() != n ||
      (x.size() != 0 && static_cast<std::size_t>(x.rows()) != n)) {
    throw ValidationError("x, a, s, y must share the same number of rows");
  }
  ObservedDataset d;
  if (x.size() != 0 && x_names.empty()) {
    for (long j = 0; j < x.cols(); ++j) x_names.push_back("x" + std::to_string(j + 1));
  }
  d.x_names = std::move(x_names);
  d.units.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& u = d.units[i];
    if (x.size() != 0) u.x = x.row(static_cast<long>(i)).transpose();
    u.a = a[i];
    u.s = s[i];
    u.y = y[i];
  }
  d.validate();
  return d;
}

py::dict gest_dict(const snm::GEstimate& g) {
  py::dict est;
  for (std::size_t i = 0; i < g.names.size(); ++i) {
    est[py::str(g.names[i])] = g.estimate[static_cast<long>(i)];
  }
  py::dict out;
  out["estimates"] = est;
  out["covariance"] = g.covariance;
  out["moment_norm"] = g.moment_norm;
  out["p_treat_used"] = g.p_used;
  return out;
}

snm::SnmSpec make_snm_spec(snm::BlipModel model, std::optional<double> p_treat) {
  snm::SnmSpec spec;
  spec.model = model;
  if (model == snm::BlipModel::ObservedAux) spec.free = {true, true, false};
  spec.p_treat = p_treat;
  return spec;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "effects in groups defined by a post-treatment auxiliary outcome";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalFailure", PyExc_ArithmeticError);

  py::class_<ObservedDataset>(m, "ObservedDataset")
      .def(py::init(&make_observed), py::arg("x"), py::arg("a"), py::arg("s"), py::arg("y"),
           py::arg("x_names") = std::vector<std::string>{})
      .def_property_readonly("n", &ObservedDataset::n)
      .def_property_readonly("x_names", [](const ObservedDataset& d) { return d.x_names; })
      .def("x_matrix", &ObservedDataset::x_matrix)
      .def("a_vector", &ObservedDataset::a_vector)
      .def("s_vector", &ObservedDataset::s_vector)
      .def("y_vector", &ObservedDataset::y_vector);

  py::class_<CompleteDataset>(m, "CompleteDataset")
      .def_property_readonly("n", &CompleteDataset::n);

  py::class_<SurvivalDataset>(m, "SurvivalDataset")
      .def_property_readonly("n", &SurvivalDataset::n)
      .def_property_readonly("aux_names", [](const SurvivalDataset& d) { return d.aux_names; });

  py::class_<harness::WorldConfig>(m, "World")
      .def_property_readonly("name", [](const harness::WorldConfig& w) { return w.name; })
      .def("to_json", &harness::world_to_json);

  m.def("parse_world", &harness::parse_world_json, py::arg("text"),
        "Parse a world configuration from JSON text.");
  m.def("load_world", &harness::load_world_json, py::arg("path"));
  m.def("truth_report", &harness::truth_report_json, py::arg("world"),
        "Population-level truths for a world, as a JSON string.");

  m.def(
      "simulate_complete",
      [](const harness::WorldConfig& w, std::size_t n, std::uint64_t seed) {
        using Kind = harness::WorldConfig::Kind;
        switch (w.kind) {
          case Kind::Binary: return synth::gen_binary_world(w.binary, n, seed);
          case Kind::Continuous: return synth::gen_continuous_world(w.continuous, n, seed);
          case Kind::Mechanistic: return synth::gen_mechanistic_world(w.mechanistic, n, seed);
          case Kind::Screening: break;
        }
        throw ValidationError("screening worlds produce survival data; use simulate_survival");
      },
      py::arg("world"), py::arg("n"), py::arg("seed"));

  m.def(
      "simulate_survival",
      [](const harness::WorldConfig& w, std::size_t n, std::uint64_t seed) {
        if (w.kind != harness::WorldConfig::Kind::Screening) {
          throw ValidationError("simulate_survival needs a screening world");
        }
        return synth::gen_screening_world(w.screening, n, seed);
      },
      py::arg("world"), py::arg("n"), py::arg("seed"));

  m.def("mask", &synth::mask, py::arg("complete"), py::arg("p_treat"), py::arg("seed"),
        "Randomized treatment assignment revealing one potential outcome per unit.");

  m.def("child_seed", &Rng::child_seed, py::arg("master"), py::arg("r"));

  m.def("load_observed_csv", &load_observed_csv, py::arg("path"));
  m.def("write_observed_csv", &write_observed_csv, py::arg("dataset"), py::arg("path"));
  m.def("load_survival_csv", &load_survival_csv, py::arg("path"));
  m.def("write_survival_csv", &write_survival_csv, py::arg("dataset"), py::arg("path"));
  m.def("load_complete_csv", &load_complete_csv, py::arg("path"));
  m.def("write_complete_csv", &write_complete_csv, py::arg("dataset"), py::arg("path"));

  m.def(
      "conventional",
      [](const ObservedDataset& d) {
        const auto fit = covest::conventional_fit(d);
        py::dict out;
        out["effect"] = fit.effect;
        out["se"] = fit.se;
        out["coefficients"] = fit.fit.coefficients;
        return out;
      },
      py::arg("dataset"));

  m.def(
      "naive_contrast",
      [](const ObservedDataset& d) {
        const auto nc = covest::naive_contrast(d);
        py::dict out;
        out["contrast"] = nc.contrast;
        out["mean_treated"] = nc.mean_treated;
        out["mean_control"] = nc.mean_control;
        out["warning"] = nc.warning;
        return out;
      },
      py::arg("dataset"));

  m.def(
      "eas",
      [](const ObservedDataset& d, const std::string& mode_s) {
        oracle::EasScoreMode mode = oracle::EasScoreMode::OwnArm;
        if (mode_s == "control") mode = oracle::EasScoreMode::FixedControl;
        else if (mode_s == "treated") mode = oracle::EasScoreMode::FixedTreated;
        else if (mode_s != "own") throw ValidationError("mode must be own|control|treated");
        const auto fit = covest::eas_fit(d, mode);
        py::dict out;
        out["effect_at_1"] = fit.extrapolated;
        out["coefficients"] = fit.fit.coefficients;
        out["score_min"] = fit.score_min;
        out["score_max"] = fit.score_max;
        out["warning"] = fit.extrapolation_warning;
        return out;
      },
      py::arg("dataset"), py::arg("mode") = "own");

  m.def(
      "snm_solve",
      [](const ObservedDataset& d, std::optional<double> p_treat) {
        return gest_dict(snm::solve(d, make_snm_spec(snm::BlipModel::ObservedAux, p_treat)));
      },
      py::arg("dataset"), py::arg("p_treat") = std::nullopt);

  m.def(
      "mediation_solve",
      [](const ObservedDataset& d, std::optional<double> q, std::optional<double> p_treat) {
        const auto est =
            snm::solve_mediation(d, make_snm_spec(snm::BlipModel::Mediation, p_treat), q);
        py::dict out = gest_dict(est.gest);
        out["q"] = est.q_hat;
        out["q_supplied"] = est.q_supplied;
        out["psi0"] = est.implied_psi0;
        out["psi1"] = est.implied_psi1;
        out["note"] = est.note;
        return out;
      },
      py::arg("dataset"), py::arg("q") = std::nullopt, py::arg("p_treat") = std::nullopt);

  m.def(
      "ps_fit",
      [](const ObservedDataset& d, int variant, double tol, int max_iter,
         bool per_component_sigma, bool probe_identifiability,
         const std::optional<harness::WorldConfig>& start_world) {
        ps::EmOptions eo;
        eo.variant = variant == 1 ? ps::PsVariant::I : ps::PsVariant::II;
        if (variant != 1 && variant != 2) throw ValidationError("variant must be 1 or 2");
        eo.tol = tol;
        eo.max_iter = max_iter;
        eo.per_component_sigma = per_component_sigma;
        eo.probe_identifiability = probe_identifiability;
        ps::PsModel start;
        if (start_world) {
          if (start_world->kind != harness::WorldConfig::Kind::Continuous) {
            throw ValidationError("start_world must be a continuous world");
          }
          start = ps::truth_start(start_world->continuous, eo);
        } else {
          start = ps::default_start(d, eo);
        }
        const auto fit = ps::fit(d, eo, start);
        py::dict out;
        out["effects"] = fit.effects;
        out["converged"] = fit.converged;
        out["iterations"] = fit.iterations;
        out["loglik"] = fit.final_loglik();
        out["stratum_probs_by_x"] = fit.model.stratum_probs_by_x;
        out["means"] = fit.model.means;
        out["delta_x"] = fit.model.delta_x;
        out["sigma"] = fit.model.sigma;
        out["identifiability_warning"] = fit.identifiability_warning;
        return out;
      },
      py::arg("dataset"), py::arg("variant") = 1, py::arg("tol") = 1e-8,
      py::arg("max_iter") = 5000, py::arg("per_component_sigma") = false,
      py::arg("probe_identifiability") = true, py::arg("start_world") = std::nullopt);

  m.def(
      "survival_profile",
      [](const SurvivalDataset& sd, const std::string& aux, std::optional<double> p_treat,
         double grid_lo, double grid_hi, double grid_step, double alpha) {
        surv::SurvivalGSpec spec;
        spec.aux_name = aux;
        spec.p_treat = p_treat;
        spec.grid_lo = grid_lo;
        spec.grid_hi = grid_hi;
        spec.grid_step = grid_step;
        spec.alpha = alpha;
        const auto prof = surv::profile_and_invert(sd, spec);
        std::vector<double> psis, zs;
        psis.reserve(prof.grid.size());
        zs.reserve(prof.grid.size());
        for (const auto& p : prof.grid) {
          psis.push_back(p.psi);
          zs.push_back(p.z);
        }
        py::dict out;
        out["psi_hat"] = prof.psi_hat;
        out["ci"] = py::make_tuple(prof.ci_lo, prof.ci_hi);
        out["z_at_zero"] = prof.z_at_zero;
        out["psi_grid"] = psis;
        out["z_grid"] = zs;
        out["note"] = prof.weight_caveat;
        return out;
      },
      py::arg("dataset"), py::arg("aux") = "", py::arg("p_treat") = std::nullopt,
      py::arg("grid_lo") = -2.0, py::arg("grid_hi") = 2.0, py::arg("grid_step") = 0.01,
      py::arg("alpha") = 0.05);

  m.def(
      "run_study",
      [](const std::string& study_json, const std::string& base_dir, int threads) {
        const auto cfg = harness::parse_study_json(study_json, base_dir);
        return harness::result_to_json(harness::run_study(cfg, threads));
      },
      py::arg("study_json"), py::arg("base_dir") = "", py::arg("threads") = 0,
      "Run a Monte Carlo study from JSON text; returns the result as JSON text.");

  m.def(
      "run_study_file",
      [](const std::string& path, int threads) {
        return harness::result_to_json(harness::run_study(harness::load_study_json(path), threads));
      },
      py::arg("path"), py::arg("threads") = 0);
}
