#pragma once

// Monte Carlo replication engine: run R replicates of (world, estimator set),
// aggregate per-estimand moments with exclusion accounting, and compare
// against target tables. All configs and results round-trip through JSON.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "auxeff/synthdata.hpp"

namespace auxeff::harness {

struct WorldConfig {
  enum class Kind { Binary, Continuous, Mechanistic, Screening };
  Kind kind = Kind::Continuous;
  std::string name;
  synth::BinaryWorldConfig binary;
  synth::ContinuousWorldConfig continuous;
  synth::MechanisticWorldConfig mechanistic;
  synth::ScreeningWorldConfig screening;
};

WorldConfig parse_world_json(const std::string& text);
WorldConfig load_world_json(const std::string& path);
std::string world_to_json(const WorldConfig& w);

struct EstimatorSpec {
  std::string method;  // conventional | naive | eas | snm | mediation | ps1 | ps2 | survival-gest
  std::string options_json = "{}";  // method-specific options (JSON object)
};

struct TargetRow {
  std::string estimand;
  double truth = 0.0;
  double mean = 0.0;
  double sd = 0.0;          // <= 0 means "no SD target"
  double mean_tol = 0.0;    // <= 0 means "no mean check"
  double sd_rel_tol = 0.0;  // relative band around sd; <= 0 means "no SD check"
};

struct StudyConfig {
  std::string name;
  WorldConfig world;
  std::vector<EstimatorSpec> estimators;
  int replicates = 500;
  std::size_t n = 5000;
  std::uint64_t master_seed = 1;
  std::string em_start = "truth";  // "truth" | "default"
  double exclusion_factor = 100.0;
  std::vector<TargetRow> targets;
  std::string config_hash;  // filled on load
};

StudyConfig parse_study_json(const std::string& text, const std::string& base_dir = "");
StudyConfig load_study_json(const std::string& path);

struct EstimandStats {
  std::string name;
  double truth = 0.0;
  int included = 0;
  int excluded = 0;  // exploded values, estimator failures, non-convergence
  double mean = 0.0;
  double sd = 0.0;  // NaN when included < 2
  double median = 0.0;
};

struct CompareRow {
  std::string estimand;
  double target_mean = 0.0, got_mean = 0.0, mean_delta = 0.0;
  double target_sd = 0.0, got_sd = 0.0, sd_ratio = 0.0;
  bool pass = true;
  std::string note;
};

struct StudyResult {
  std::string name;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  int replicates = 0;
  double runtime_seconds = 0.0;
  std::vector<EstimandStats> estimands;
  std::vector<CompareRow> comparisons;
  std::vector<std::string> warnings;
};

// Runs the study. `threads` <= 0 uses the hardware concurrency. Results are
// identical under any thread count: every replicate derives its own seeds
// from the master seed and writes into its own slot.
StudyResult run_study(const StudyConfig& cfg, int threads = 0);

std::vector<CompareRow> compare(const StudyResult& result,
                                const std::vector<TargetRow>& targets);

std::string result_to_json(const StudyResult& r);

// FNV-1a 64-bit hash of a canonicalized config text, as fixed-width hex.
std::string config_fingerprint(const std::string& canonical_text);

// Population-level oracle summary for a world, as a JSON report (used by the
// `oracle` and `simulate` commands).
std::string truth_report_json(const WorldConfig& w);

}  // namespace auxeff::harness
