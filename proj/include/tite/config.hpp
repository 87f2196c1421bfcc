#pragma once

// Experiment configuration file (YAML). Every key is optional except
// `reference_dose`; omitted keys take the library defaults. Unknown keys are
// rejected, and every error carries the line and column it refers to.

#include <cstdint>
#include <stdexcept>
#include <string>

#include "tite/experiment.hpp"

namespace tite {

class ConfigError : public std::runtime_error {
public:
    ConfigError(const std::string& source, int line, int column, const std::string& message);

    int line() const { return line_; }      // 1-based, 0 when unknown
    int column() const { return column_; }  // 1-based, 0 when unknown

private:
    int line_;
    int column_;
};

struct PriorSummarySettings {
    int draws = 100000;
    std::uint64_t seed = 7;
};

struct ExperimentConfig {
    ExperimentSetup setup;
    ExperimentPlan plan;
    PriorSummarySettings prior_summary;
    std::string output_dir = "results";
};

ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_config(const std::string& path);

// Default scenario tables: toxicity profiles constant/increasing/decreasing and
// dropout regimes none/constant33/constant55/decreasing/increasing.
Scenarios default_scenarios(const DoseGrid& grid, const CyclePlan& plan, const TruthCurve& curve);

}  // namespace tite
