#include "tite/quadrature.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tite {

namespace {

struct Axis {
    std::vector<double> nodes;
    std::vector<double> log_weights;  // trapezoid weight times prior density
};

Axis make_axis(const NormalPrior& prior, const QuadratureSpec& spec) {
    Axis a;
    const int n = spec.nodes_per_axis;
    const double lo = prior.mean - spec.half_width_sd * prior.sd;
    const double h = 2.0 * spec.half_width_sd * prior.sd / (n - 1);
    for (int i = 0; i < n; ++i) {
        const double x = lo + i * h;
        const double w = (i == 0 || i == n - 1) ? 0.5 * h : h;
        a.nodes.push_back(x);
        a.log_weights.push_back(std::log(w) + prior.log_density(x));
    }
    return a;
}

}  // namespace

QuadratureResult quadrature_oracle(Method method, const Dataset& data, const BlrmPrior& prior,
                                   const EwocThresholds& thresholds, const QuadratureSpec& spec) {
    if (is_time_to_event(method))
        throw std::invalid_argument("quadrature oracle supports only the 3-parameter BLRM (B1/B3)");
    if (spec.nodes_per_axis < 3) throw std::invalid_argument("quadrature needs at least 3 nodes per axis");
    data.validate();
    const int window = decision_window(method, data.plan);
    const BlrmLikelihood likelihood(data, window);

    const Axis a1 = make_axis(prior.alpha1, spec);
    const Axis lb = make_axis(prior.log_beta1, spec);
    const Axis a2 = make_axis(prior.alpha2, spec);
    const int n = spec.nodes_per_axis;
    const auto& grid = data.grid;
    const std::size_t nd = grid.size();
    std::vector<double> log_ratio(nd);
    for (std::size_t d = 0; d < nd; ++d) log_ratio[d] = std::log(grid[d] / grid.reference_dose());

    // Pass 1: maximum of the log integrand for a stable exponent.
    double max_log = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double beta1 = std::exp(lb.nodes[j]);
            for (int k = 0; k < n; ++k) {
                const double v = a1.log_weights[i] + lb.log_weights[j] + a2.log_weights[k] +
                                 likelihood.evaluate(a1.nodes[i], beta1, a2.nodes[k]);
                max_log = std::max(max_log, v);
            }
        }

    // Pass 2: accumulate weighted functionals.
    double total = 0.0, s_a1 = 0.0, s_lb = 0.0, s_a2 = 0.0;
    std::vector<double> under(nd, 0.0), over(nd, 0.0);
    std::vector<double> log_surv2(n);
    for (int k = 0; k < n; ++k) log_surv2[k] = -softplus(a2.nodes[k]);
    std::vector<double> log_surv1(nd);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double beta1 = std::exp(lb.nodes[j]);
            for (std::size_t d = 0; d < nd; ++d) log_surv1[d] = -softplus(a1.nodes[i] + beta1 * log_ratio[d]);
            for (int k = 0; k < n; ++k) {
                const double w = std::exp(a1.log_weights[i] + lb.log_weights[j] + a2.log_weights[k] +
                                          likelihood.evaluate(a1.nodes[i], beta1, a2.nodes[k]) - max_log);
                if (w == 0.0) continue;
                total += w;
                s_a1 += w * a1.nodes[i];
                s_lb += w * lb.nodes[j];
                s_a2 += w * a2.nodes[k];
                for (std::size_t d = 0; d < nd; ++d) {
                    const double p = -std::expm1(log_surv1[d] + log_surv2[k]);
                    if (p < thresholds.target_low)
                        under[d] += w;
                    else if (p > thresholds.pi_c)
                        over[d] += w;
                }
            }
        }

    QuadratureResult r;
    r.log_normalizer = std::log(total) + max_log;
    r.mean_alpha1 = s_a1 / total;
    r.mean_log_beta1 = s_lb / total;
    r.mean_alpha2 = s_a2 / total;
    for (std::size_t d = 0; d < nd; ++d) {
        r.p_under.push_back(under[d] / total);
        r.p_over.push_back(over[d] / total);
        r.p_target.push_back(1.0 - r.p_under.back() - r.p_over.back());
    }
    return r;
}

}  // namespace tite
