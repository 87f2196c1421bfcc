#include "tite/escalation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace tite {

namespace {

// Risk samples for every requested dose, computed in one pass over the draws.
std::vector<RiskSamples> fill_risks(const PosteriorDraws& draws, Method method, std::span<const double> doses,
                                    const DoseGrid& grid, const CyclePlan& plan) {
    const std::size_t n = draws.size();
    const std::size_t nd = doses.size();
    const int J = plan.n_cycles;
    std::vector<RiskSamples> out(nd);
    std::vector<double> log_ratio(nd);
    for (std::size_t i = 0; i < nd; ++i) log_ratio[i] = std::log(doses[i] / grid.reference_dose());
    const auto& m = draws.matrix();

    for (auto& r : out) {
        r.band.resize(n);
        r.ewoc_series.assign(method == Method::TCO ? J : 1, std::vector<double>(n));
    }

    if (!is_time_to_event(method)) {
        if (draws.family() != ModelFamily::Blrm) throw std::invalid_argument("B1/B3 need BLRM draws");
        for (std::size_t s = 0; s < n; ++s) {
            const auto row = static_cast<Eigen::Index>(s);
            const double alpha1 = m(row, 0), beta1 = std::exp(m(row, 1));
            const double log_surv2 = -softplus(m(row, 2));
            for (std::size_t i = 0; i < nd; ++i) {
                const double log_surv = -softplus(alpha1 + beta1 * log_ratio[i]) + log_surv2;
                const double p = -std::expm1(log_surv);
                out[i].band[s] = p;
                out[i].ewoc_series[0][s] = p;
            }
        }
        return out;
    }

    if (draws.family() != ModelFamily::Tte) throw std::invalid_argument("TCO/TCU need TTE draws");
    const double dt = plan.cycle_length;
    std::vector<double> h2(J);
    for (std::size_t s = 0; s < n; ++s) {
        const auto row = static_cast<Eigen::Index>(s);
        const double alpha1 = m(row, 0), beta1 = std::exp(m(row, 1));
        const double scale = (J - 1) * m(row, 3);
        double shift = 0.0;
        double sum_h2 = 0.0;
        for (int j = 0; j < J; ++j) {
            if (j > 0) shift += m(row, 4 + j - 1);
            h2[j] = std::exp(m(row, 2) + scale * shift);
            sum_h2 += h2[j];
        }
        for (std::size_t i = 0; i < nd; ++i) {
            const double h1 = std::exp(alpha1 + beta1 * log_ratio[i]);
            if (method == Method::TCU) {
                const double p = -std::expm1(-dt * (J * h1 + sum_h2));
                out[i].band[s] = p;
                out[i].ewoc_series[0][s] = p;
            } else {
                double worst = 0.0;
                for (int j = 0; j < J; ++j) {
                    const double q = -std::expm1(-dt * (h1 + h2[j]));
                    out[i].ewoc_series[j][s] = q;
                    worst = std::max(worst, q);
                }
                out[i].band[s] = worst;
            }
        }
    }
    return out;
}

}  // namespace

void EwocThresholds::validate() const {
    if (!(target_low > 0.0 && target_low < pi_c && pi_c < 1.0))
        throw std::invalid_argument("thresholds need 0 < target_low < pi_c < 1");
    if (!(p_c > 0.0 && p_c < 1.0)) throw std::invalid_argument("p_c must lie in (0, 1)");
}

void EscalationRules::validate() const {
    if (min_patients < 1 || min_patients_alt < 1) throw std::invalid_argument("MTD patient minimums must be positive");
    if (!(min_target_prob >= 0.0 && min_target_prob < 1.0))
        throw std::invalid_argument("MTD target probability must lie in [0, 1)");
}

RiskMetric risk_metric(Method method) {
    switch (method) {
        case Method::B1: return RiskMetric::Cycle1;
        case Method::B3: return RiskMetric::CumulativeWindow;
        case Method::TCU: return RiskMetric::CumulativeJ;
        case Method::TCO: return RiskMetric::ConditionalMax;
    }
    throw std::logic_error("unhandled method");
}

RiskSamples risk_samples(const PosteriorDraws& draws, Method method, double dose, const DoseGrid& grid,
                         const CyclePlan& plan) {
    const double d[] = {dose};
    return std::move(fill_risks(draws, method, d, grid, plan).front());
}

DoseAssessment assess_risk_samples(double dose, const RiskSamples& samples, RiskMetric metric,
                                   const EwocThresholds& t) {
    if (samples.band.empty()) throw std::invalid_argument("assess_risk_samples: no samples");
    DoseAssessment a;
    a.dose = dose;
    a.metric = metric;
    std::size_t under = 0, over = 0;
    for (double p : samples.band) {
        if (p < t.target_low)
            ++under;
        else if (p > t.pi_c)
            ++over;
    }
    const double n = static_cast<double>(samples.band.size());
    a.p_under = under / n;
    a.p_over = over / n;
    a.p_target = (samples.band.size() - under - over) / n;
    a.ewoc_ok = true;
    for (const auto& series : samples.ewoc_series) {
        const auto exceed = std::count_if(series.begin(), series.end(), [&](double p) { return p > t.pi_c; });
        const double frac = static_cast<double>(exceed) / static_cast<double>(series.size());
        a.exceedance.push_back(frac);
        if (!(frac < t.p_c)) a.ewoc_ok = false;
    }
    return a;
}

std::vector<DoseAssessment> assess_doses(const PosteriorDraws& draws, Method method, const DoseGrid& grid,
                                         const CyclePlan& plan, const EwocThresholds& thresholds) {
    const auto risks = fill_risks(draws, method, grid.doses(), grid, plan);
    std::vector<DoseAssessment> out;
    out.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        out.push_back(assess_risk_samples(grid[i], risks[i], risk_metric(method), thresholds));
    return out;
}

EscalationState::EscalationState(std::size_t n_levels) : enrolled_(n_levels, 0), evaluable_(n_levels, 0) {}

void EscalationState::record_cohort(std::size_t level, int n_patients) {
    if (level >= enrolled_.size()) throw std::out_of_range("dose level outside grid");
    if (n_patients < 0) throw std::invalid_argument("negative cohort size");
    enrolled_[level] += n_patients;
    highest_ = highest_ ? std::max(*highest_, level) : level;
    history_.push_back(level);
}

void EscalationState::set_evaluable(std::size_t level, int n) {
    if (level >= evaluable_.size()) throw std::out_of_range("dose level outside grid");
    evaluable_[level] = n;
}

int EscalationState::total_enrolled() const { return std::accumulate(enrolled_.begin(), enrolled_.end(), 0); }

std::optional<std::size_t> EscalationState::last_cohort_level() const {
    if (history_.empty()) return std::nullopt;
    return history_.back();
}

std::optional<std::size_t> select_next_dose(std::span<const DoseAssessment> assessments,
                                            const EscalationState& state, const EscalationRules& rules,
                                            std::size_t start_level) {
    if (assessments.size() != state.n_levels())
        throw std::invalid_argument("assessments must cover the whole grid");
    std::size_t cap = assessments.size() - 1;
    if (rules.escalation_cap) {
        const auto highest = state.highest_administered();
        cap = highest ? std::min(*highest + 1, cap) : std::min(start_level, cap);
    }
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i <= cap; ++i) {
        if (!assessments[i].ewoc_ok) continue;
        if (!best || assessments[i].p_target >= assessments[*best].p_target) best = i;
    }
    return best;
}

std::optional<std::size_t> check_mtd(std::span<const DoseAssessment> assessments, const EscalationState& state,
                                     std::size_t next_level, const EscalationRules& rules) {
    const auto& a = assessments[next_level];
    const int treated = state.enrolled_at(next_level);
    const bool same = !rules.require_same_dose || state.last_cohort_level() == next_level;
    if (treated >= rules.min_patients && same && a.p_target > rules.min_target_prob) return next_level;
    if (treated >= rules.min_patients_alt && a.ewoc_ok) return next_level;
    return std::nullopt;
}

TruthCategory classify_truth(double p, const EwocThresholds& t) {
    if (p < t.target_low) return TruthCategory::Underdose;
    if (p <= t.pi_c) return TruthCategory::Target;
    return TruthCategory::Overdose;
}

std::string_view category_name(TruthCategory c) {
    switch (c) {
        case TruthCategory::Underdose: return "underdose";
        case TruthCategory::Target: return "target";
        case TruthCategory::Overdose: return "overdose";
    }
    return "?";
}

}  // namespace tite
