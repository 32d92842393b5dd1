#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "auxeff/errors.hpp"

namespace auxeff {

// Latent response strata for a binary auxiliary outcome under binary treatment.
// (s0, s1) = auxiliary outcome under control / under treatment.
enum class Stratum : int {
  Immune = 0,        // (0, 0)
  TreatPrevented = 1,  // (1, 0) auxiliary under control only
  TreatCaused = 2,   // (0, 1) auxiliary under treatment only
  Doomed = 3,        // (1, 1)
};

constexpr int kNumStrata = 4;

Stratum stratum_from_pair(int s0, int s1);
std::pair<int, int> stratum_to_pair(Stratum k);
const char* stratum_name(Stratum k);

struct ObservedUnit {
  Eigen::VectorXd x;
  int a = 0;
  int s = 0;
  double y = 0.0;
};

struct CompleteUnit {
  Eigen::VectorXd x;
  int s0 = 0;
  int s1 = 0;
  double y0 = 0.0;
  double y1 = 0.0;
  Stratum stratum() const { return stratum_from_pair(s0, s1); }
};

enum class EventType : int { Admin = 0, Main = 1, Competing = 2 };

struct SurvivalUnit {
  Eigen::VectorXd x;
  int a = 0;
  int s = 0;
  double time = 0.0;
  EventType event = EventType::Admin;
  double censor_horizon = 0.0;
};

struct ObservedDataset {
  std::vector<std::string> x_names;
  std::vector<ObservedUnit> units;

  std::size_t n() const { return units.size(); }
  std::size_t n_x() const { return x_names.size(); }
  Eigen::MatrixXd x_matrix() const;
  Eigen::VectorXd a_vector() const;
  Eigen::VectorXd s_vector() const;
  Eigen::VectorXd y_vector() const;
  void validate() const;
};

struct CompleteDataset {
  std::vector<std::string> x_names;
  std::vector<CompleteUnit> units;

  std::size_t n() const { return units.size(); }
  Eigen::MatrixXd x_matrix() const;
  void validate() const;
};

struct SurvivalDataset {
  std::vector<std::string> x_names;
  std::vector<SurvivalUnit> units;
  // Extra binary auxiliary columns (e.g. alternative definitions of s),
  // column-major, aligned with units.
  std::vector<std::string> aux_names;
  std::vector<std::vector<int>> aux_cols;

  std::size_t n() const { return units.size(); }
  // Resolves "s" to the primary auxiliary, otherwise looks up aux_names.
  std::vector<int> aux_column(const std::string& name) const;
  void validate() const;
};

ObservedDataset load_observed_csv(const std::string& path);
CompleteDataset load_complete_csv(const std::string& path);
SurvivalDataset load_survival_csv(const std::string& path);

void write_observed_csv(const ObservedDataset& d, const std::string& path);
void write_complete_csv(const CompleteDataset& d, const std::string& path);
void write_survival_csv(const SurvivalDataset& d, const std::string& path);

}  // namespace auxeff
