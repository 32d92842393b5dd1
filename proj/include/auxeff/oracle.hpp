#pragma once

#include <array>

#include "auxeff/data_model.hpp"
#include "auxeff/synthdata.hpp"

namespace auxeff::oracle {

struct StratumEffects {
  std::array<double, kNumStrata> effect{};  // E(y1 - y0 | stratum)
  std::array<double, kNumStrata> prob{};    // pr(stratum)
  double ate = 0.0;
};

struct SnmTruth {
  double psi0 = 0.0;  // E(y1 - y0 | s1 = 0)
  double psi1 = 0.0;  // E(y1 - y0 | s1 = 1)
};

struct BinaryCells {
  double p00 = 0.0, p01 = 0.0, p10 = 0.0, p11 = 0.0;  // pr(y=1 | a, s) as p{a}{s}
  double naive_contrast = 0.0;                        // p11 - p01
};

struct EasLine {
  double b_int = 0.0, b_mu = 0.0, b_a = 0.0, b_mua = 0.0;
  double effect_at(double m) const { return b_a + m * b_mua; }
};

enum class EasScoreMode : int { OwnArm = 0, FixedControl = 1, FixedTreated = 2 };

// --- sample (realized) quantities from complete data ---

StratumEffects realized_effects(const CompleteDataset& d);
SnmTruth realized_snm(const CompleteDataset& d);
double realized_single_potential_effect(const CompleteDataset& d, int arm, int s);
double realized_naive_contrast(const CompleteDataset& d);
// pr(s0=1 | s1=0) in the sample
double realized_q(const CompleteDataset& d);

// --- population closed forms from world configurations ---

BinaryCells binary_world_cells(const synth::BinaryWorldConfig& cfg);
StratumEffects continuous_world_truth(const synth::ContinuousWorldConfig& cfg);
SnmTruth continuous_snm_truth(const synth::ContinuousWorldConfig& cfg);
double single_potential_effect(const synth::ContinuousWorldConfig& cfg, int arm, int s);
EasLine eas_population(const synth::ContinuousWorldConfig& cfg, EasScoreMode mode);

struct MediationTruth {
  double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0;
  double q = 0.0;  // pr(s0=1 | s1=0)
  double psi0 = 0.0, psi1 = 0.0;
};

MediationTruth mediation_truth(double gamma1, double gamma2, double gamma3, double q);
MediationTruth mechanistic_world_truth(const synth::MechanisticWorldConfig& cfg);

}  // namespace auxeff::oracle
