#pragma once

// File formats: per-replication CSV, JSON aggregate report, tidy figure CSVs,
// patient data CSV, prior summary CSV and the per-analysis audit log.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "tite/config.hpp"
#include "tite/experiment.hpp"

namespace tite {

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Columns: cell,method,toxicity,dropout,replication,seed,outcome,mtd_dose,truth_category,n_enrolled,duration_days
void write_replications_csv(std::ostream& os, const std::vector<ReplicationRow>& rows);
std::vector<ReplicationRow> read_replications_csv(std::istream& is);

void write_report_json(std::ostream& os, const AggregateReport& report, const ExperimentConfig& cfg);

// Tidy tables, one row per (cell, category):
//   mtd_declaration.csv     category in {underdose, target, overdose, stopped}
//   patient_allocation.csv  category in {underdose, target, overdose}
// and one row per (cell, statistic):
//   trial_duration.csv, sample_size.csv
void write_mtd_declaration_csv(std::ostream& os, const AggregateReport& report);
void write_patient_allocation_csv(std::ostream& os, const AggregateReport& report);
void write_trial_duration_csv(std::ostream& os, const AggregateReport& report);
void write_sample_size_csv(std::ostream& os, const AggregateReport& report);

// Writes every file above into `dir` (created if missing).
void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& result,
                              const ExperimentConfig& cfg);

// Patient CSV with header id,dose_mg,u_cycles,delta[,dropout]. All malformed
// rows are collected into one DataError.
std::vector<PatientRecord> read_patient_csv(std::istream& is, const DoseGrid& grid, const CyclePlan& plan);
void write_patient_csv(std::ostream& os, const std::vector<PatientRecord>& records);

struct PriorSummaryRow {
    std::string model;  // TTE, B1, B3
    double dose = 0.0;
    std::string metric;  // conditional_<j> or cumulative_<j>
    double q025 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q975 = 0.0;
    double at_prior_mean = 0.0;
};

// Prior Monte Carlo quantiles of per-cycle conditional and cumulative DLT
// probabilities for each grid dose (plus the reference dose) and model.
std::vector<PriorSummaryRow> prior_summary(const ExperimentConfig& cfg);
void write_prior_summary_csv(std::ostream& os, const std::vector<PriorSummaryRow>& rows);

// One JSON object per analysis.
void write_audit_jsonl(std::ostream& os, const TrialResult& trial);

// Human-readable per-dose table.
std::string format_assessments(const std::vector<DoseAssessment>& assessments);

}  // namespace tite
