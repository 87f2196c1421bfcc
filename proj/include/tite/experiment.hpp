#pragma once

// Factorial simulation study: (method x toxicity x dropout) cells, each
// replicated R times with counter-derived seeds, and the cross-replication
// summaries with Monte Carlo standard errors.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tite/trial.hpp"

namespace tite {

struct Cell {
    Method method = Method::TCU;
    std::string toxicity;
    std::string dropout;

    std::string id() const;
};

struct ExperimentPlan {
    std::vector<Cell> cells;
    int replications = 1000;
    std::uint64_t master_seed = 20240611;
    int threads = 1;

    void validate() const;
};

struct Scenarios {
    std::map<std::string, ToxScenario> toxicity;
    std::map<std::string, DropoutScenario> dropout;
};

struct ExperimentSetup {
    DoseGrid grid;
    CyclePlan plan;
    TrialConfig trial;
    Scenarios scenarios;
};

std::uint64_t replication_seed(std::uint64_t master_seed, const Cell& cell, int replication);

struct Estimate {
    double value = 0.0;
    double mcse = 0.0;
};

// sqrt(p (1 - p) / R)
double proportion_mcse(double p, int replications);

struct Summary {
    double mean = 0.0;
    double mcse = 0.0;
    double min = 0.0;
    double q10 = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    double q90 = 0.0;
    double max = 0.0;
};

Summary summarize(std::vector<double> values);

struct AllocationMetrics {
    // Indexed by TruthCategory: under, target, over.
    std::array<Estimate, 3> fraction;
    long long total_patients = 0;
};

// Fraction of all enrolled patients (pooled over replications) treated at
// doses whose true cumulative risk is under/in/over the target band. The MCSE
// is that of a ratio estimator across replications.
AllocationMetrics allocation_metrics(std::span<const TrialResult> results, const ToxScenario& toxicity,
                                     const DoseGrid& grid, const EwocThresholds& thresholds);

struct CellSummary {
    Cell cell;
    int replications = 0;
    Estimate mtd_under;
    Estimate mtd_target;
    Estimate mtd_over;
    Estimate stopped;  // stop for toxicity or sample-size exhaustion
    int stopped_toxicity = 0;
    int stopped_max_patients = 0;
    AllocationMetrics allocation;
    Summary duration_days;
    Summary n_enrolled;
    int unconverged_fits = 0;
    int analyses = 0;
};

struct AggregateReport {
    std::vector<CellSummary> cells;

    const CellSummary& at(Method method, const std::string& toxicity, const std::string& dropout) const;
};

struct ReplicationRow {
    Cell cell;
    int replication = 0;
    std::uint64_t seed = 0;
    TrialOutcome outcome = TrialOutcome::StopToxicity;
    std::optional<double> mtd_dose;
    std::optional<TruthCategory> truth;
    int n_enrolled = 0;
    double duration_days = 0.0;
};

struct ExperimentResult {
    std::vector<ReplicationRow> rows;
    AggregateReport report;
};

CellSummary summarize_cell(const Cell& cell, std::span<const TrialResult> results, const ExperimentSetup& setup);

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

// Runs every (cell, replication) pair on a pool of `plan.threads` workers.
// Output is independent of the number of threads and of scheduling order.
ExperimentResult run_experiment(const ExperimentSetup& setup, const ExperimentPlan& plan,
                                const ProgressCallback& progress = {});

}  // namespace tite
