#pragma once

// Discrete-event simulation of a single dose-escalation trial.
//
// Cohorts enroll at exponential accrual gaps. After each cohort the engine
// advances study time until every enrolled patient has completed the method's
// decision window or discontinued, then fits the model to everything observed
// so far, applies EWOC and the MTD rules, and either stops, declares an MTD or
// enrolls the next cohort.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tite/escalation.hpp"
#include "tite/sampler.hpp"
#include "tite/scenario.hpp"

namespace tite {

struct TrialConfig {
    int cohort_size = 3;
    double start_dose = 20.0;
    int max_patients = 60;
    double accrual_mean_days = 10.0;
    EwocThresholds thresholds;
    EscalationRules rules;
    SamplerConfig sampler;
    ModelPriors priors;
    bool keep_audit = true;

    void validate(const DoseGrid& grid, const CyclePlan& plan) const;
};

enum class TrialOutcome { Mtd, StopToxicity, MaxPatients };

std::string_view outcome_name(TrialOutcome o);

struct FitResult {
    PosteriorDraws draws;
    bool converged = false;
    bool retried = false;
};

// Fits once; on non-convergence refits with doubled draws and accepts the
// second result whatever its diagnostics.
FitResult fit_with_retry(Method method, const Dataset& data, const ModelPriors& priors, const SamplerConfig& cfg);

struct AnalysisRecord {
    int index = 0;
    double time = 0.0;
    std::uint64_t fit_seed = 0;
    int n_enrolled = 0;
    std::vector<PatientRecord> data;
    std::vector<DoseAssessment> assessments;
    double max_rhat = 0.0;
    double min_ess = 0.0;
    bool converged = false;
    bool retried = false;
    std::string decision;  // "continue", "mtd", "stop_toxicity", "max_patients"
    std::optional<std::size_t> next_level;
};

struct TrialResult {
    Method method = Method::TCU;
    TrialOutcome outcome = TrialOutcome::StopToxicity;
    std::optional<std::size_t> mtd_level;
    std::optional<double> mtd_dose;
    int n_enrolled = 0;
    double duration_days = 0.0;
    int n_analyses = 0;
    int n_unconverged = 0;
    std::vector<PatientRecord> patients;  // final follow-up of every enrolled patient
    std::vector<AnalysisRecord> audit;    // filled when TrialConfig::keep_audit
};

// What is known about each enrolled patient at study time `now`.
struct EnrolledPatient {
    PatientRecord record;  // id, dose, enroll_time
    PatientOutcome outcome;
};

std::vector<PatientRecord> observe(const std::vector<EnrolledPatient>& patients, double now,
                                   const CyclePlan& plan);

TrialResult run_trial(const TrialConfig& cfg, const DoseGrid& grid, const CyclePlan& plan,
                      const ToxScenario& toxicity, const DropoutScenario& dropout, Method method,
                      std::uint64_t seed);

}  // namespace tite
