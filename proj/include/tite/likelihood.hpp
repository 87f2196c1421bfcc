#pragma once

// Log-likelihoods and log-priors for the time-to-event model and the binomial
// comparators.
//
// The time-to-event likelihood treats each patient's observation (U, delta)
// as recorded at a cycle boundary: an event in cycle u contributes
// log h_u - H_u, a censoring after u cycles contributes -H_u, and a patient
// with u = 0 contributes nothing.

#include <cstddef>
#include <vector>

#include "tite/dose_model.hpp"

namespace tite {

struct NormalPrior {
    double mean = 0.0;
    double sd = 1.0;

    double log_density(double x) const;
};

struct TtePrior {
    NormalPrior alpha1;
    NormalPrior log_beta1;
    NormalPrior alpha2;
    NormalPrior gamma2;
    std::vector<double> xi_concentration;  // Dirichlet, length J - 1

    void validate(const CyclePlan& plan) const;

    // Intercept mean placing P(event by the reference time) at `p` for the
    // component alone: cloglog(p) - log(reference_time).
    static double intercept_for(double p, const CyclePlan& plan);

    // alpha1 ~ N(cloglog(.09) - log t_ref, 1), alpha2 ~ N(cloglog(.11) - log t_ref, .5),
    // gamma2 ~ N(0, .5), log beta1 ~ N(0, log(4)/1.96), xi ~ Dirichlet(1, ..., 1).
    static TtePrior defaults(const CyclePlan& plan);
};

struct BlrmPrior {
    NormalPrior alpha1;
    NormalPrior log_beta1;
    NormalPrior alpha2;

    void validate() const;

    static BlrmPrior b1_defaults();
    static BlrmPrior b3_defaults();
};

struct Dataset {
    std::vector<PatientRecord> records;
    DoseGrid grid;
    CyclePlan plan;

    void validate() const;
};

enum class WindowOutcome { NotEvaluable, NoEvent, Event };

// Reduction of a cycle-level record to a binary outcome over the first
// `window` cycles. A DLT after the window counts as a window without event.
WindowOutcome window_outcome(const PatientRecord& r, int window);

// Sufficient statistics of a dataset for the time-to-event likelihood, grouped
// by dose. Construct once per dataset, evaluate many times.
class TteLikelihood {
public:
    explicit TteLikelihood(const Dataset& data);

    double operator()(const TteParams& params) const;
    double evaluate(double alpha1, double beta1, double alpha2, double gamma2,
                    const double* xi) const;

private:
    struct DoseGroup {
        double log_ratio;
        std::vector<int> events;    // index u - 1
        std::vector<int> censored;  // index u - 1
    };
    std::vector<DoseGroup> groups_;
    CyclePlan plan_;
};

class BlrmLikelihood {
public:
    BlrmLikelihood(const Dataset& data, int window_cycles);

    double operator()(const BlrmParams& params) const;
    double evaluate(double alpha1, double beta1, double alpha2) const;
    int n_evaluable() const { return n_evaluable_; }

private:
    struct DoseGroup {
        double log_ratio;
        int n;
        int events;
    };
    std::vector<DoseGroup> groups_;
    int n_evaluable_ = 0;
};

double log_likelihood_tte(const TteParams& params, const Dataset& data);
double log_likelihood_blrm(const BlrmParams& params, const Dataset& data, int window_cycles);

double log_prior_tte(const TteParams& params, const TtePrior& prior);
double log_prior_blrm(const BlrmParams& params, const BlrmPrior& prior);

double log_dirichlet(const std::vector<double>& x, const std::vector<double>& concentration);

// log(1 + exp(x)) without overflow.
double softplus(double x);

}  // namespace tite
