#pragma once

// Escalation with overdose control (EWOC), target-band classification,
// next-dose selection and MTD declaration.
//
// Risk metric by method:
//   B1   cycle-1 DLT probability of the 1-cycle BLRM
//   B3   DLT probability over the J-cycle window of the J-cycle BLRM
//   TCU  cumulative probability of a DLT by the end of cycle J
//   TCO  every conditional per-cycle probability q_j must pass EWOC; the
//        target band is classified on max_j q_j

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "tite/dose_model.hpp"
#include "tite/sampler.hpp"

namespace tite {

struct EwocThresholds {
    double pi_c = 0.33;        // overdose boundary
    double p_c = 0.25;         // feasibility bound on P(risk > pi_c)
    double target_low = 0.16;  // lower edge of the target band

    void validate() const;
};

struct EscalationRules {
    int min_patients = 6;        // at the dose, with unchanged next dose and p_target above
    double min_target_prob = 0.5;
    int min_patients_alt = 12;   // at the dose while EWOC-eligible
    bool require_same_dose = true;
    bool escalation_cap = true;  // no skipping of untried dose levels

    void validate() const;
};

enum class RiskMetric { Cycle1, CumulativeWindow, CumulativeJ, ConditionalMax };

RiskMetric risk_metric(Method method);

struct DoseAssessment {
    double dose = 0.0;
    double p_under = 0.0;
    double p_target = 0.0;
    double p_over = 0.0;
    bool ewoc_ok = false;
    RiskMetric metric = RiskMetric::Cycle1;
    // P(risk > pi_c) for every series EWOC is applied to (one per cycle for TCO).
    std::vector<double> exceedance;
};

// Posterior samples of the risk metric at one dose. `ewoc_series` holds one
// series per EWOC condition; `band` is the metric used for the target band.
struct RiskSamples {
    std::vector<double> band;
    std::vector<std::vector<double>> ewoc_series;
};

RiskSamples risk_samples(const PosteriorDraws& draws, Method method, double dose,
                         const DoseGrid& grid, const CyclePlan& plan);

DoseAssessment assess_risk_samples(double dose, const RiskSamples& samples, RiskMetric metric,
                                   const EwocThresholds& thresholds);

std::vector<DoseAssessment> assess_doses(const PosteriorDraws& draws, Method method,
                                         const DoseGrid& grid, const CyclePlan& plan,
                                         const EwocThresholds& thresholds);

class EscalationState {
public:
    explicit EscalationState(std::size_t n_levels);

    void record_cohort(std::size_t level, int n_patients);
    void set_evaluable(std::size_t level, int n);

    int enrolled_at(std::size_t level) const { return enrolled_[level]; }
    int evaluable_at(std::size_t level) const { return evaluable_[level]; }
    int total_enrolled() const;
    std::optional<std::size_t> highest_administered() const { return highest_; }
    std::optional<std::size_t> last_cohort_level() const;
    const std::vector<std::size_t>& cohort_history() const { return history_; }
    std::size_t n_levels() const { return enrolled_.size(); }

private:
    std::vector<int> enrolled_;
    std::vector<int> evaluable_;
    std::optional<std::size_t> highest_;
    std::vector<std::size_t> history_;
};

// Grid level of the next cohort, or nullopt for stopping for toxicity.
// Without any administered dose the cap is `start_level`.
std::optional<std::size_t> select_next_dose(std::span<const DoseAssessment> assessments,
                                            const EscalationState& state,
                                            const EscalationRules& rules,
                                            std::size_t start_level = 0);

// Grid level declared as MTD, or nullopt to continue.
std::optional<std::size_t> check_mtd(std::span<const DoseAssessment> assessments,
                                     const EscalationState& state, std::size_t next_level,
                                     const EscalationRules& rules);

enum class TruthCategory { Underdose, Target, Overdose };

TruthCategory classify_truth(double probability, const EwocThresholds& thresholds);
std::string_view category_name(TruthCategory c);

}  // namespace tite
