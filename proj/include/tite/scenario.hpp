#pragma once

// Ground truth for simulated trials: dose-toxicity scenarios, dropout regimes,
// per-patient outcome generation and accrual.
//
// A toxicity scenario is a per-dose base hazard H_c(d) (per cycle) and cycle
// multipliers m_j with sum_j m_j = J and m_2 = 1, so that
//   q_j(d) = 1 - exp(-m_j H_c(d))        (conditional per-cycle probability)
//   pi_J(d) = 1 - exp(-J H_c(d))         (cumulative, identical across profiles)

#include <string>
#include <vector>

#include "tite/dose_model.hpp"
#include "tite/rng.hpp"

namespace tite {

struct ToxScenario {
    std::string name;
    std::vector<double> base_hazard;  // per grid level, 1/cycle
    std::vector<double> multipliers;  // per cycle

    void validate(const DoseGrid& grid, const CyclePlan& plan) const;
};

// Truth calibrated so that cloglog(pi_J(d)) = intercept + slope * log(d / pivot_dose).
struct TruthCurve {
    double intercept = -1.2458993237072382;  // cloglog(0.25)
    double slope = 0.8;
    double pivot_dose = 160.0;
};

ToxScenario make_scenario(std::string name, const TruthCurve& curve, std::vector<double> multipliers,
                          const DoseGrid& grid, const CyclePlan& plan);

// Default multipliers: constant (1, 1, 1), increasing (0.2, 1, 1.8), decreasing (1.8, 1, 0.2).
std::vector<double> default_multipliers(const std::string& profile);

struct TrueCycleProbs {
    std::vector<double> conditional;
    double cumulative = 0.0;
};

TrueCycleProbs true_cycle_probs(const ToxScenario& scenario, std::size_t level);

struct DropoutScenario {
    std::string name;
    double rate_low = 0.0;   // probability of dropping out over J cycles, dose <= boundary
    double rate_high = 0.0;  // same, dose > boundary
    double boundary = 80.0;

    void validate() const;
    double rate_at(double dose) const { return dose <= boundary ? rate_low : rate_high; }
};

// Per-day dropout hazard of a memoryless process with the scenario's J-cycle rate.
double dropout_hazard(const DropoutScenario& scenario, double dose, const CyclePlan& plan);

struct PatientOutcome {
    int u_cycles = 0;
    int delta = 0;
    bool dropout = false;
    double exit_day = 0.0;  // days after enrollment when follow-up ended
};

// Cycle-by-cycle race between a latent DLT time (rate -log(1 - q_j) / cycle_length)
// and a latent dropout time (rate `dropout_rate`). A dropout censors at the last
// completed cycle boundary.
PatientOutcome simulate_patient(const std::vector<double>& conditional_probs, double dropout_rate,
                                const CyclePlan& plan, Rng& rng);

double sample_accrual(Rng& rng, double mean_days);

}  // namespace tite
