#include "tite/dose_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tite {

std::string_view method_name(Method m) {
    switch (m) {
        case Method::B1: return "B1";
        case Method::B3: return "B3";
        case Method::TCO: return "TCO";
        case Method::TCU: return "TCU";
    }
    return "?";
}

Method parse_method(std::string_view name) {
    if (name == "B1") return Method::B1;
    if (name == "B3") return Method::B3;
    if (name == "TCO") return Method::TCO;
    if (name == "TCU") return Method::TCU;
    throw std::invalid_argument("unknown method '" + std::string(name) + "' (expected B1, B3, TCO or TCU)");
}

bool is_time_to_event(Method m) { return m == Method::TCO || m == Method::TCU; }

DoseGrid::DoseGrid(std::vector<double> doses, double reference_dose)
    : doses_(std::move(doses)), reference_dose_(reference_dose) {
    if (doses_.empty()) throw std::invalid_argument("dose grid is empty");
    for (std::size_t i = 0; i < doses_.size(); ++i) {
        if (!(doses_[i] > 0.0)) throw std::invalid_argument("dose grid entries must be positive");
        if (i > 0 && !(doses_[i] > doses_[i - 1]))
            throw std::invalid_argument("dose grid must be strictly increasing");
    }
    if (!(reference_dose_ > 0.0)) throw std::invalid_argument("reference dose must be positive");
}

std::optional<std::size_t> DoseGrid::level_of(double dose) const {
    auto it = std::find(doses_.begin(), doses_.end(), dose);
    if (it == doses_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - doses_.begin());
}

void CyclePlan::validate() const {
    if (n_cycles < 1) throw std::invalid_argument("cycle plan needs at least one cycle");
    if (!(cycle_length > 0.0)) throw std::invalid_argument("cycle length must be positive");
    if (reference_cycle < 1 || reference_cycle > n_cycles)
        throw std::invalid_argument("reference cycle must lie in [1, n_cycles]");
}

double TteParams::beta1() const { return std::exp(log_beta1); }

void TteParams::validate(const CyclePlan& plan) const {
    const std::size_t k = plan.n_cycles > 1 ? static_cast<std::size_t>(plan.n_cycles - 1) : 0;
    if (xi.size() != k) throw std::invalid_argument("xi must have length n_cycles - 1");
    if (k == 0) return;
    double s = 0.0;
    for (double x : xi) {
        if (x < 0.0) throw std::invalid_argument("xi components must be non-negative");
        s += x;
    }
    if (std::abs(s - 1.0) > 1e-12) throw std::invalid_argument("xi must sum to one");
}

double BlrmParams::beta1() const { return std::exp(log_beta1); }

void PatientRecord::validate(const CyclePlan& plan) const {
    if (!(dose > 0.0)) throw std::invalid_argument("patient dose must be positive");
    if (u_cycles < 0 || u_cycles > plan.n_cycles)
        throw std::invalid_argument("u_cycles outside [0, n_cycles]");
    if (delta != 0 && delta != 1) throw std::invalid_argument("delta must be 0 or 1");
    if (delta == 1 && u_cycles < 1) throw std::invalid_argument("an event needs u_cycles >= 1");
}

double cloglog(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("cloglog: argument outside (0, 1)");
    return std::log(-std::log1p(-p));
}

double inv_cloglog(double x) { return -std::expm1(-std::exp(x)); }

double logit(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("logit: argument outside (0, 1)");
    return std::log(p / (1.0 - p));
}

double inv_logit(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

CycleHazards cycle_hazards(const TteParams& params, double dose, const DoseGrid& grid,
                           const CyclePlan& plan, Background background) {
    if (!(dose > 0.0)) throw std::invalid_argument("cycle_hazards: dose must be positive");
    CycleHazards h;
    h.drug = std::exp(params.alpha1 + params.beta1() * std::log(dose / grid.reference_dose()));
    h.background.assign(plan.n_cycles, 0.0);
    if (background == Background::Disabled) return h;
    const double scale = (plan.n_cycles - 1) * params.gamma2;
    double shift = 0.0;
    for (int j = 0; j < plan.n_cycles; ++j) {
        if (j > 0) shift += params.xi[j - 1];
        h.background[j] = std::exp(params.alpha2 + scale * shift);
    }
    return h;
}

SurvivalCurve survivor_and_density(const CycleHazards& hazards, const CyclePlan& plan) {
    SurvivalCurve c;
    const auto n = hazards.n_cycles();
    c.cumulative_hazard.resize(n);
    c.survivor.resize(n);
    c.density.resize(n);
    double cum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const double h = hazards.total(j);
        cum += plan.cycle_length * h;
        c.cumulative_hazard[j] = cum;
        c.survivor[j] = std::exp(-cum);
        c.density[j] = h * c.survivor[j];
    }
    return c;
}

EventProbabilities event_probabilities(const CycleHazards& hazards, const CyclePlan& plan) {
    EventProbabilities p;
    p.conditional.resize(hazards.n_cycles());
    double cum = 0.0;
    for (std::size_t j = 0; j < hazards.n_cycles(); ++j) {
        const double x = hazards.total(j) * plan.cycle_length;
        p.conditional[j] = -std::expm1(-x);
        cum += x;
    }
    p.cumulative = -std::expm1(-cum);
    return p;
}

double blrm_dlt_probability(const BlrmParams& params, double dose, const DoseGrid& grid,
                            Background background) {
    if (!(dose > 0.0)) throw std::invalid_argument("blrm_dlt_probability: dose must be positive");
    const double eta1 = params.alpha1 + params.beta1() * std::log(dose / grid.reference_dose());
    const double pi1 = inv_logit(eta1);
    if (background == Background::Disabled) return pi1;
    const double pi2 = inv_logit(params.alpha2);
    return 1.0 - (1.0 - pi1) * (1.0 - pi2);
}

}  // namespace tite
