#pragma once

// Deterministic tensor-product quadrature over the three BLRM parameters, used
// as an independent reference for the sampler in tests and acceptance runs.

#include <vector>

#include "tite/escalation.hpp"
#include "tite/likelihood.hpp"

namespace tite {

struct QuadratureSpec {
    int nodes_per_axis = 161;
    double half_width_sd = 6.0;
};

struct QuadratureResult {
    double log_normalizer = 0.0;  // log of the integral of likelihood x prior over the box
    double mean_alpha1 = 0.0;
    double mean_log_beta1 = 0.0;
    double mean_alpha2 = 0.0;
    // Per grid dose.
    std::vector<double> p_under;
    std::vector<double> p_target;
    std::vector<double> p_over;
};

// Supported for B1 and B3 only; TCO/TCU throw std::invalid_argument.
QuadratureResult quadrature_oracle(Method method, const Dataset& data, const BlrmPrior& prior,
                                   const EwocThresholds& thresholds, const QuadratureSpec& spec = {});

}  // namespace tite
