#pragma once

// Domain types and hazard arithmetic for the multi-cycle time-to-DLT model.
//
// Time is measured in days. Each treatment cycle has the same length and the
// hazard of a DLT is piecewise constant per cycle. The total hazard in cycle j
// is the sum of a dose-dependent drug component (constant over cycles) and a
// dose-independent background component with a monotone ordinal cycle effect:
//
//   log h1     = alpha1 + beta1 * log(d / d_ref)
//   log h2_j   = alpha2 + (J - 1) * gamma2 * sum_{l < j} xi_l
//
// The binomial comparator (BLRM) combines two logit-linear components under
// independence: pi = 1 - (1 - pi1) (1 - pi2).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tite {

enum class Method { B1, B3, TCO, TCU };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);
bool is_time_to_event(Method m);

// Whether the background component contributes to the event process.
enum class Background { Enabled, Disabled };

class DoseGrid {
public:
    DoseGrid(std::vector<double> doses, double reference_dose);

    std::span<const double> doses() const { return doses_; }
    double reference_dose() const { return reference_dose_; }
    std::size_t size() const { return doses_.size(); }
    double operator[](std::size_t level) const { return doses_[level]; }

    // Grid level of an exact dose value, if the dose is on the grid.
    std::optional<std::size_t> level_of(double dose) const;

private:
    std::vector<double> doses_;
    double reference_dose_;
};

struct CyclePlan {
    int n_cycles = 3;
    double cycle_length = 42.0;
    int reference_cycle = 3;

    double reference_time() const { return reference_cycle * cycle_length; }
    void validate() const;
};

struct TteParams {
    double alpha1 = 0.0;
    double log_beta1 = 0.0;
    double alpha2 = 0.0;
    double gamma2 = 0.0;
    std::vector<double> xi;  // simplex of length J - 1

    double beta1() const;
    void validate(const CyclePlan& plan) const;
};

struct BlrmParams {
    double alpha1 = 0.0;
    double log_beta1 = 0.0;
    double alpha2 = 0.0;

    double beta1() const;
};

struct PatientRecord {
    int id = 0;
    double dose = 0.0;
    double enroll_time = 0.0;
    int u_cycles = 0;
    int delta = 0;
    bool dropout = false;

    void validate(const CyclePlan& plan) const;
};

double cloglog(double p);
double inv_cloglog(double x);
double logit(double p);
double inv_logit(double x);

// Per-cycle hazards (1/day). `drug` is constant over cycles.
struct CycleHazards {
    double drug = 0.0;
    std::vector<double> background;

    std::size_t n_cycles() const { return background.size(); }
    double total(std::size_t cycle_index) const { return drug + background[cycle_index]; }
};

CycleHazards cycle_hazards(const TteParams& params, double dose, const DoseGrid& grid,
                           const CyclePlan& plan, Background background = Background::Enabled);

// Cumulative hazard, survivor and density at the end of each cycle, index 0
// holding cycle 1. f_j is evaluated at the cycle end: f_j = h_j exp(-H_j).
struct SurvivalCurve {
    std::vector<double> cumulative_hazard;
    std::vector<double> survivor;
    std::vector<double> density;

    // S at the end of cycle j with S(0) = 1.
    double survivor_at(int cycle) const { return cycle == 0 ? 1.0 : survivor[cycle - 1]; }
};

SurvivalCurve survivor_and_density(const CycleHazards& hazards, const CyclePlan& plan);

struct EventProbabilities {
    std::vector<double> conditional;  // q_j = P(event in cycle j | no earlier event)
    double cumulative = 0.0;          // P(event by the end of cycle J)
};

EventProbabilities event_probabilities(const CycleHazards& hazards, const CyclePlan& plan);

double blrm_dlt_probability(const BlrmParams& params, double dose, const DoseGrid& grid,
                            Background background = Background::Enabled);

}  // namespace tite
