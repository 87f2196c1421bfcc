#include "tite/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tite {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

template <class Group>
Group& group_for(std::vector<Group>& groups, std::vector<double>& doses, double dose,
                 const Group& proto) {
    auto it = std::find(doses.begin(), doses.end(), dose);
    if (it != doses.end()) return groups[static_cast<std::size_t>(it - doses.begin())];
    doses.push_back(dose);
    groups.push_back(proto);
    return groups.back();
}

}  // namespace

double NormalPrior::log_density(double x) const {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - kLogSqrt2Pi;
}

double softplus(double x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

void TtePrior::validate(const CyclePlan& plan) const {
    for (const auto* p : {&alpha1, &log_beta1, &alpha2, &gamma2})
        if (!(p->sd > 0.0)) throw std::invalid_argument("TTE prior standard deviations must be positive");
    const std::size_t k = plan.n_cycles > 1 ? static_cast<std::size_t>(plan.n_cycles - 1) : 0;
    if (xi_concentration.size() != k)
        throw std::invalid_argument("xi concentration must have length n_cycles - 1");
    for (double a : xi_concentration)
        if (!(a > 0.0)) throw std::invalid_argument("Dirichlet concentrations must be positive");
}

double TtePrior::intercept_for(double p, const CyclePlan& plan) {
    return cloglog(p) - std::log(plan.reference_time());
}

TtePrior TtePrior::defaults(const CyclePlan& plan) {
    TtePrior p;
    p.alpha1 = {intercept_for(0.09, plan), 1.0};
    p.alpha2 = {intercept_for(0.11, plan), 0.5};
    p.gamma2 = {0.0, 0.5};
    p.log_beta1 = {0.0, std::log(4.0) / 1.96};
    p.xi_concentration.assign(plan.n_cycles > 1 ? plan.n_cycles - 1 : 0, 1.0);
    return p;
}

void BlrmPrior::validate() const {
    for (const auto* p : {&alpha1, &log_beta1, &alpha2})
        if (!(p->sd > 0.0)) throw std::invalid_argument("BLRM prior standard deviations must be positive");
}

BlrmPrior BlrmPrior::b1_defaults() {
    return {{logit(0.03), 1.0}, {0.0, 0.9}, {logit(0.04), 0.5}};
}

BlrmPrior BlrmPrior::b3_defaults() {
    return {{logit(0.09), 1.3}, {0.0, 1.2}, {logit(0.12), 0.7}};
}

void Dataset::validate() const {
    plan.validate();
    for (const auto& r : records) r.validate(plan);
}

WindowOutcome window_outcome(const PatientRecord& r, int window) {
    if (r.delta == 1 && r.u_cycles <= window) return WindowOutcome::Event;
    if (r.u_cycles >= window) return WindowOutcome::NoEvent;
    // DLT after the window implies the window itself was event free.
    if (r.delta == 1) return WindowOutcome::NoEvent;
    return WindowOutcome::NotEvaluable;
}

TteLikelihood::TteLikelihood(const Dataset& data) : plan_(data.plan) {
    std::vector<double> doses;
    const std::size_t J = static_cast<std::size_t>(plan_.n_cycles);
    const DoseGroup proto{0.0, std::vector<int>(J, 0), std::vector<int>(J, 0)};
    for (const auto& r : data.records) {
        if (r.u_cycles == 0) continue;
        auto& g = group_for(groups_, doses, r.dose, proto);
        g.log_ratio = std::log(r.dose / data.grid.reference_dose());
        if (r.delta == 1)
            ++g.events[r.u_cycles - 1];
        else
            ++g.censored[r.u_cycles - 1];
    }
}

double TteLikelihood::evaluate(double alpha1, double beta1, double alpha2, double gamma2,
                               const double* xi) const {
    const int J = plan_.n_cycles;
    const double delta_t = plan_.cycle_length;
    // Background hazard per cycle and its running sum.
    double h2[16];
    double cum_h2[16];
    std::vector<double> h2v, cumv;
    double* bg = h2;
    double* cbg = cum_h2;
    if (J > 16) {
        h2v.resize(J);
        cumv.resize(J);
        bg = h2v.data();
        cbg = cumv.data();
    }
    const double scale = (J - 1) * gamma2;
    double shift = 0.0;
    double running = 0.0;
    for (int j = 0; j < J; ++j) {
        if (j > 0) shift += xi[j - 1];
        bg[j] = std::exp(alpha2 + scale * shift);
        running += bg[j];
        cbg[j] = running;
    }
    double ll = 0.0;
    for (const auto& g : groups_) {
        const double h1 = std::exp(alpha1 + beta1 * g.log_ratio);
        for (int j = 0; j < J; ++j) {
            const int ev = g.events[j];
            const int n = ev + g.censored[j];
            if (n == 0) continue;
            const double H = delta_t * ((j + 1) * h1 + cbg[j]);
            ll -= n * H;
            if (ev > 0) ll += ev * std::log(h1 + bg[j]);
        }
    }
    return ll;
}

double TteLikelihood::operator()(const TteParams& p) const {
    return evaluate(p.alpha1, p.beta1(), p.alpha2, p.gamma2, p.xi.data());
}

BlrmLikelihood::BlrmLikelihood(const Dataset& data, int window_cycles) {
    if (window_cycles < 1) throw std::invalid_argument("BLRM window must be at least one cycle");
    std::vector<double> doses;
    for (const auto& r : data.records) {
        const auto outcome = window_outcome(r, window_cycles);
        if (outcome == WindowOutcome::NotEvaluable) continue;
        auto& g = group_for(groups_, doses, r.dose, DoseGroup{0.0, 0, 0});
        g.log_ratio = std::log(r.dose / data.grid.reference_dose());
        ++g.n;
        if (outcome == WindowOutcome::Event) ++g.events;
        ++n_evaluable_;
    }
}

double BlrmLikelihood::evaluate(double alpha1, double beta1, double alpha2) const {
    // log(1 - pi) = log(1 - pi1) + log(1 - pi2) with log(1 - inv_logit(x)) = -softplus(x).
    const double log_surv2 = -softplus(alpha2);
    double ll = 0.0;
    for (const auto& g : groups_) {
        const double log_surv = -softplus(alpha1 + beta1 * g.log_ratio) + log_surv2;
        ll += (g.n - g.events) * log_surv;
        if (g.events > 0) ll += g.events * std::log(-std::expm1(log_surv));
    }
    return ll;
}

double BlrmLikelihood::operator()(const BlrmParams& p) const {
    return evaluate(p.alpha1, p.beta1(), p.alpha2);
}

double log_likelihood_tte(const TteParams& params, const Dataset& data) {
    return TteLikelihood(data)(params);
}

double log_likelihood_blrm(const BlrmParams& params, const Dataset& data, int window_cycles) {
    return BlrmLikelihood(data, window_cycles)(params);
}

double log_dirichlet(const std::vector<double>& x, const std::vector<double>& a) {
    if (x.size() != a.size()) throw std::invalid_argument("log_dirichlet: size mismatch");
    if (x.size() <= 1) return 0.0;
    double sum_a = 0.0;
    double out = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        sum_a += a[k];
        out += (a[k] - 1.0) * std::log(x[k]) - std::lgamma(a[k]);
    }
    return out + std::lgamma(sum_a);
}

double log_prior_tte(const TteParams& params, const TtePrior& prior) {
    return prior.alpha1.log_density(params.alpha1) + prior.log_beta1.log_density(params.log_beta1) +
           prior.alpha2.log_density(params.alpha2) + prior.gamma2.log_density(params.gamma2) +
           log_dirichlet(params.xi, prior.xi_concentration);
}

double log_prior_blrm(const BlrmParams& params, const BlrmPrior& prior) {
    return prior.alpha1.log_density(params.alpha1) + prior.log_beta1.log_density(params.log_beta1) +
           prior.alpha2.log_density(params.alpha2);
}

}  // namespace tite
