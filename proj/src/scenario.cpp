#include "tite/scenario.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace tite {

void ToxScenario::validate(const DoseGrid& grid, const CyclePlan& plan) const {
    if (base_hazard.size() != grid.size())
        throw std::invalid_argument("scenario '" + name + "': one base hazard per dose level required");
    for (double h : base_hazard)
        if (!(h >= 0.0)) throw std::invalid_argument("scenario '" + name + "': base hazards must be non-negative");
    if (multipliers.size() != static_cast<std::size_t>(plan.n_cycles))
        throw std::invalid_argument("scenario '" + name + "': one multiplier per cycle required");
    for (double m : multipliers)
        if (!(m > 0.0)) throw std::invalid_argument("scenario '" + name + "': multipliers must be positive");
    const double sum = std::accumulate(multipliers.begin(), multipliers.end(), 0.0);
    if (std::abs(sum - plan.n_cycles) > 1e-9)
        throw std::invalid_argument("scenario '" + name + "': multipliers must sum to the number of cycles");
    if (plan.n_cycles >= 2 && std::abs(multipliers[1] - 1.0) > 1e-12)
        throw std::invalid_argument("scenario '" + name + "': the cycle-2 multiplier must equal 1");
}

ToxScenario make_scenario(std::string name, const TruthCurve& curve, std::vector<double> multipliers,
                          const DoseGrid& grid, const CyclePlan& plan) {
    ToxScenario s{std::move(name), {}, std::move(multipliers)};
    for (double d : grid.doses()) {
        // -log(1 - pi_J) = exp(cloglog(pi_J)) is the J-cycle cumulative hazard.
        const double cum_hazard = std::exp(curve.intercept + curve.slope * std::log(d / curve.pivot_dose));
        s.base_hazard.push_back(cum_hazard / plan.n_cycles);
    }
    s.validate(grid, plan);
    return s;
}

std::vector<double> default_multipliers(const std::string& profile) {
    if (profile == "constant") return {1.0, 1.0, 1.0};
    if (profile == "increasing") return {0.2, 1.0, 1.8};
    if (profile == "decreasing") return {1.8, 1.0, 0.2};
    throw std::invalid_argument("unknown toxicity profile '" + profile + "'");
}

TrueCycleProbs true_cycle_probs(const ToxScenario& s, std::size_t level) {
    TrueCycleProbs p;
    const double h = s.base_hazard.at(level);
    for (double m : s.multipliers) p.conditional.push_back(-std::expm1(-m * h));
    // sum(m) = J, so every profile shares the cumulative curve exactly.
    p.cumulative = -std::expm1(-static_cast<double>(s.multipliers.size()) * h);
    return p;
}

void DropoutScenario::validate() const {
    if (!(rate_low >= 0.0 && rate_low < 1.0 && rate_high >= 0.0 && rate_high < 1.0))
        throw std::invalid_argument("dropout scenario '" + name + "': rates must lie in [0, 1)");
}

double dropout_hazard(const DropoutScenario& s, double dose, const CyclePlan& plan) {
    const double rate = s.rate_at(dose);
    return -std::log1p(-rate) / (plan.n_cycles * plan.cycle_length);
}

PatientOutcome simulate_patient(const std::vector<double>& q, double dropout_rate, const CyclePlan& plan,
                                Rng& rng) {
    if (q.size() != static_cast<std::size_t>(plan.n_cycles))
        throw std::invalid_argument("simulate_patient: one probability per cycle required");
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::uniform_real_distribution<double> uniform;
    // Inverse-CDF exponentials keep exactly two uniforms per cycle.
    auto exponential = [&](double rate) {
        const double u = uniform(rng);
        if (rate <= 0.0) return inf;
        if (std::isinf(rate)) return 0.0;
        return -std::log1p(-u) / rate;
    };
    PatientOutcome o;
    for (int j = 0; j < plan.n_cycles; ++j) {
        const double dlt_rate = q[j] >= 1.0 ? inf : -std::log1p(-q[j]) / plan.cycle_length;
        const double t_dlt = exponential(dlt_rate);
        const double t_drop = exponential(dropout_rate);
        const double start = j * plan.cycle_length;
        if (t_dlt <= plan.cycle_length && t_dlt <= t_drop) {
            o.u_cycles = j + 1;
            o.delta = 1;
            o.exit_day = start + t_dlt;
            return o;
        }
        if (t_drop < plan.cycle_length) {
            o.u_cycles = j;
            o.dropout = true;
            o.exit_day = start + t_drop;
            return o;
        }
    }
    o.u_cycles = plan.n_cycles;
    o.exit_day = plan.n_cycles * plan.cycle_length;
    return o;
}

double sample_accrual(Rng& rng, double mean_days) {
    if (!(mean_days > 0.0)) throw std::invalid_argument("accrual mean must be positive");
    std::exponential_distribution<double> gap(1.0 / mean_days);
    return gap(rng);
}

}  // namespace tite
