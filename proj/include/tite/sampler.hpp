#pragma once

// Posterior sampling for the time-to-event model and the binomial comparators.
//
// The sampler is an adaptive random-walk Metropolis on an unconstrained
// parameterization. During warmup the proposal covariance is re-estimated over
// doubling windows and the global step scale follows a Robbins-Monro recursion
// towards the target acceptance rate; both are frozen for the retained draws.
// The simplex xi is mapped through an additive log-ratio transform with
// Jacobian correction.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tite/dose_model.hpp"
#include "tite/likelihood.hpp"
#include "tite/rng.hpp"

namespace tite {

struct SamplerConfig {
    int n_chains = 4;
    int n_warmup = 1000;
    int n_draws = 1000;
    std::uint64_t seed = 1;
    double target_accept = 0.30;
    double initial_scale = 1.0;
    double rhat_max = 1.05;
    double ess_min = 400.0;
    bool parallel_chains = false;

    void validate() const;
};

enum class ModelFamily { Tte, Blrm };

struct ModelPriors {
    TtePrior tte;
    BlrmPrior b1;
    BlrmPrior b3;

    static ModelPriors defaults(const CyclePlan& plan);
};

struct FitDiagnostics {
    std::vector<double> rhat;   // per constrained column
    std::vector<double> ess;    // per constrained column
    std::vector<double> acceptance;  // per chain, retained phase
    double max_rhat = 0.0;      // over free parameters
    double min_ess = 0.0;       // over free parameters
};

class PosteriorDraws {
public:
    PosteriorDraws() = default;
    PosteriorDraws(ModelFamily family, int window, std::vector<std::string> names,
                   Eigen::MatrixXd draws, int n_chains, int n_free);

    // Single-chain draws from explicit parameter values (no diagnostics).
    static PosteriorDraws from_tte(const std::vector<TteParams>& draws);
    static PosteriorDraws from_blrm(const std::vector<BlrmParams>& draws, int window);

    ModelFamily family() const { return family_; }
    int window() const { return window_; }
    const std::vector<std::string>& names() const { return names_; }
    const Eigen::MatrixXd& matrix() const { return draws_; }
    std::size_t size() const { return static_cast<std::size_t>(draws_.rows()); }
    int n_chains() const { return n_chains_; }
    int draws_per_chain() const { return n_chains_ > 0 ? static_cast<int>(draws_.rows()) / n_chains_ : 0; }
    int n_free() const { return n_free_; }

    TteParams tte(std::size_t row) const;
    BlrmParams blrm(std::size_t row) const;

    // Draws of one column split by chain.
    std::vector<std::vector<double>> chains_of(int column) const;

    const FitDiagnostics& diagnostics() const { return diagnostics_; }
    bool converged(const SamplerConfig& cfg) const;
    void compute_diagnostics();
    void set_acceptance(std::vector<double> acceptance) { diagnostics_.acceptance = std::move(acceptance); }

private:
    ModelFamily family_ = ModelFamily::Blrm;
    int window_ = 1;
    std::vector<std::string> names_;
    Eigen::MatrixXd draws_;
    int n_chains_ = 0;
    int n_free_ = 0;
    FitDiagnostics diagnostics_;
};

// A log density on an unconstrained space together with the map back to the
// model's parameter columns.
class SamplingTarget {
public:
    virtual ~SamplingTarget() = default;
    virtual int dim() const = 0;
    virtual double log_density(const double* theta) const = 0;
    virtual void draw_initial(Rng& rng, double* theta) const = 0;
    // Per-coordinate scale used for the first proposal covariance.
    virtual double initial_scale(int coordinate) const = 0;
    virtual std::vector<std::string> column_names() const = 0;
    virtual void constrain(const double* theta, double* columns) const = 0;
};

// Draws of the unconstrained parameters: rows are iterations, one matrix per chain.
std::vector<Eigen::MatrixXd> run_metropolis(const SamplingTarget& target, const SamplerConfig& cfg,
                                            std::vector<double>* acceptance = nullptr);

using TteLogLikelihood = std::function<double(const TteParams&)>;

PosteriorDraws fit_tte(const Dataset& data, const TtePrior& prior, const SamplerConfig& cfg);

// Same model and prior with a caller-supplied likelihood.
PosteriorDraws fit_tte_with(const TteLogLikelihood& log_likelihood, const CyclePlan& plan,
                            const TtePrior& prior, const SamplerConfig& cfg);

PosteriorDraws fit_blrm(const Dataset& data, const BlrmPrior& prior, int window_cycles,
                        const SamplerConfig& cfg);

// Dispatch on the escalation method: B1/B3 fit the BLRM with a 1-/J-cycle window,
// TCO/TCU fit the time-to-event model.
PosteriorDraws fit(Method method, const Dataset& data, const ModelPriors& priors,
                   const SamplerConfig& cfg);

int decision_window(Method method, const CyclePlan& plan);

// Unconstrained <-> simplex helpers (additive log-ratio, last component as reference).
std::vector<double> simplex_from_alr(const double* z, std::size_t k);
std::vector<double> alr_from_simplex(const std::vector<double>& xi);

// Independent draws from the priors.
TteParams draw_tte_prior(const TtePrior& prior, Rng& rng);
BlrmParams draw_blrm_prior(const BlrmPrior& prior, Rng& rng);

}  // namespace tite
