#include "tite/sampler.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "tite/diagnostics.hpp"

namespace tite {

namespace {

constexpr int kMaxSimplex = 32;

// log(1 + sum exp(z_k)), the ALR normalizer.
double alr_log_normalizer(const double* z, std::size_t n) {
    double m = 0.0;
    for (std::size_t k = 0; k < n; ++k) m = std::max(m, z[k]);
    double s = std::exp(-m);
    for (std::size_t k = 0; k < n; ++k) s += std::exp(z[k] - m);
    return m + std::log(s);
}

class TteTarget final : public SamplingTarget {
public:
    TteTarget(const CyclePlan& plan, const TtePrior& prior, const TteLikelihood* likelihood,
              const TteLogLikelihood* custom)
        : plan_(plan), prior_(prior), likelihood_(likelihood), custom_(custom) {
        plan_.validate();
        prior_.validate(plan_);
        simplex_ = plan_.n_cycles > 1 ? plan_.n_cycles - 1 : 0;
        if (simplex_ > kMaxSimplex) throw std::invalid_argument("too many cycles for the TTE sampler");
        for (int k = 0; k < simplex_; ++k) concentration_sum_ += prior_.xi_concentration[k];
    }

    int dim() const override { return 4 + std::max(simplex_ - 1, 0); }

    double log_density(const double* t) const override {
        const double alpha1 = t[0], log_beta1 = t[1], alpha2 = t[2], gamma2 = t[3];
        double lp = prior_.alpha1.log_density(alpha1) + prior_.log_beta1.log_density(log_beta1) +
                    prior_.alpha2.log_density(alpha2) + prior_.gamma2.log_density(gamma2);
        std::array<double, kMaxSimplex> xi{};
        if (simplex_ == 1) {
            xi[0] = 1.0;
        } else if (simplex_ > 1) {
            const double* z = t + 4;
            const std::size_t free = static_cast<std::size_t>(simplex_ - 1);
            const double lse = alr_log_normalizer(z, free);
            // Dirichlet density times the ALR Jacobian prod_k xi_k: sum_k a_k log xi_k.
            for (std::size_t k = 0; k < free; ++k) {
                const double log_xi = z[k] - lse;
                xi[k] = std::exp(log_xi);
                lp += prior_.xi_concentration[k] * log_xi;
            }
            xi[free] = std::exp(-lse);
            lp += prior_.xi_concentration[free] * (-lse);
            lp += std::lgamma(concentration_sum_);
            for (int k = 0; k < simplex_; ++k) lp -= std::lgamma(prior_.xi_concentration[k]);
        }
        const double beta1 = std::exp(log_beta1);
        double ll;
        if (custom_ != nullptr) {
            TteParams p{alpha1, log_beta1, alpha2, gamma2, std::vector<double>(xi.begin(), xi.begin() + simplex_)};
            ll = (*custom_)(p);
        } else {
            ll = likelihood_->evaluate(alpha1, beta1, alpha2, gamma2, xi.data());
        }
        const double out = lp + ll;
        return std::isfinite(out) ? out : -std::numeric_limits<double>::infinity();
    }

    void draw_initial(Rng& rng, double* t) const override {
        const TteParams p = draw_tte_prior(prior_, rng);
        t[0] = p.alpha1;
        t[1] = p.log_beta1;
        t[2] = p.alpha2;
        t[3] = p.gamma2;
        if (simplex_ > 1) {
            const auto z = alr_from_simplex(p.xi);
            for (std::size_t k = 0; k < z.size(); ++k) t[4 + k] = z[k];
        }
    }

    double initial_scale(int c) const override {
        switch (c) {
            case 0: return prior_.alpha1.sd;
            case 1: return prior_.log_beta1.sd;
            case 2: return prior_.alpha2.sd;
            case 3: return prior_.gamma2.sd;
            default: return 1.0;
        }
    }

    std::vector<std::string> column_names() const override {
        std::vector<std::string> n{"alpha1", "log_beta1", "alpha2", "gamma2"};
        for (int k = 0; k < simplex_; ++k) n.push_back("xi_" + std::to_string(k + 1));
        return n;
    }

    void constrain(const double* t, double* out) const override {
        for (int i = 0; i < 4; ++i) out[i] = t[i];
        if (simplex_ == 1) out[4] = 1.0;
        if (simplex_ > 1) {
            const auto xi = simplex_from_alr(t + 4, static_cast<std::size_t>(simplex_ - 1));
            for (int k = 0; k < simplex_; ++k) out[4 + k] = xi[k];
        }
    }

    int n_columns() const { return 4 + simplex_; }

private:
    CyclePlan plan_;
    TtePrior prior_;
    const TteLikelihood* likelihood_;
    const TteLogLikelihood* custom_;
    int simplex_ = 0;
    double concentration_sum_ = 0.0;
};

class BlrmTarget final : public SamplingTarget {
public:
    BlrmTarget(const BlrmPrior& prior, const BlrmLikelihood& likelihood)
        : prior_(prior), likelihood_(likelihood) {
        prior_.validate();
    }

    int dim() const override { return 3; }

    double log_density(const double* t) const override {
        const double out = prior_.alpha1.log_density(t[0]) + prior_.log_beta1.log_density(t[1]) +
                           prior_.alpha2.log_density(t[2]) +
                           likelihood_.evaluate(t[0], std::exp(t[1]), t[2]);
        return std::isfinite(out) ? out : -std::numeric_limits<double>::infinity();
    }

    void draw_initial(Rng& rng, double* t) const override {
        const BlrmParams p = draw_blrm_prior(prior_, rng);
        t[0] = p.alpha1;
        t[1] = p.log_beta1;
        t[2] = p.alpha2;
    }

    double initial_scale(int c) const override {
        return c == 0 ? prior_.alpha1.sd : c == 1 ? prior_.log_beta1.sd : prior_.alpha2.sd;
    }

    std::vector<std::string> column_names() const override { return {"alpha1", "log_beta1", "alpha2"}; }

    void constrain(const double* t, double* out) const override {
        for (int i = 0; i < 3; ++i) out[i] = t[i];
    }

private:
    BlrmPrior prior_;
    const BlrmLikelihood& likelihood_;
};

struct Window {
    int begin;
    int end;
};

// Doubling covariance-adaptation windows between an initial and a terminal buffer.
std::vector<Window> adaptation_windows(int n_warmup) {
    std::vector<Window> out;
    if (n_warmup < 20) return out;
    int init = 75, term = 50, base = 25;
    if (init + term + base > n_warmup) {
        init = static_cast<int>(0.15 * n_warmup);
        term = static_cast<int>(0.1 * n_warmup);
        base = n_warmup - init - term;
    }
    const int last = n_warmup - term;
    int start = init;
    int size = base;
    while (start < last) {
        int end = start + size;
        if (end + 2 * size > last) end = last;
        out.push_back({start, end});
        start = end;
        size *= 2;
    }
    return out;
}

// Welford accumulator for a sample covariance.
class CovarianceAccumulator {
public:
    explicit CovarianceAccumulator(int d) : mean_(Eigen::VectorXd::Zero(d)), m2_(Eigen::MatrixXd::Zero(d, d)) {}

    void add(const Eigen::VectorXd& x) {
        ++n_;
        const Eigen::VectorXd delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_).transpose();
    }

    int count() const { return n_; }

    Eigen::MatrixXd regularized() const {
        const double n = n_;
        const auto d = mean_.size();
        Eigen::MatrixXd s = m2_ / (n - 1.0);
        return (n / (n + 5.0)) * s + 1e-3 * (5.0 / (n + 5.0)) * Eigen::MatrixXd::Identity(d, d);
    }

    void reset() {
        n_ = 0;
        mean_.setZero();
        m2_.setZero();
    }

private:
    int n_ = 0;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd m2_;
};

Eigen::MatrixXd run_chain(const SamplingTarget& target, const SamplerConfig& cfg, int chain,
                          double& acceptance) {
    const int d = target.dim();
    Rng rng = make_rng(split_seed(cfg.seed, {static_cast<std::uint64_t>(chain)}));
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;

    Eigen::VectorXd theta(d);
    double lp = -std::numeric_limits<double>::infinity();
    for (int attempt = 0; attempt < 100 && !std::isfinite(lp); ++attempt) {
        target.draw_initial(rng, theta.data());
        lp = target.log_density(theta.data());
    }
    if (!std::isfinite(lp)) throw std::runtime_error("sampler: no finite initial value");

    Eigen::MatrixXd chol = Eigen::MatrixXd::Zero(d, d);
    for (int k = 0; k < d; ++k) chol(k, k) = target.initial_scale(k);
    const double log_step0 = std::log(cfg.initial_scale * 2.38 / std::sqrt(static_cast<double>(d)));
    double log_step = log_step0;
    int rm_count = 0;

    const auto windows = adaptation_windows(cfg.n_warmup);
    std::size_t window_idx = 0;
    CovarianceAccumulator acc(d);
    const int term_begin = windows.empty() ? 0 : windows.back().end;
    double term_log_step_sum = 0.0;
    int term_count = 0;

    Eigen::MatrixXd out(cfg.n_draws, d);
    Eigen::VectorXd z(d), proposal(d);
    int accepted = 0;
    const int total = cfg.n_warmup + cfg.n_draws;
    for (int it = 0; it < total; ++it) {
        for (int k = 0; k < d; ++k) z[k] = normal(rng);
        proposal = theta + std::exp(log_step) * (chol * z);
        const double lp_prop = target.log_density(proposal.data());
        double accept_prob = 0.0;
        if (std::isfinite(lp_prop)) accept_prob = lp_prop >= lp ? 1.0 : std::exp(lp_prop - lp);
        if (uniform(rng) < accept_prob) {
            theta = proposal;
            lp = lp_prop;
            if (it >= cfg.n_warmup) ++accepted;
        }

        if (it < cfg.n_warmup) {
            ++rm_count;
            log_step += (accept_prob - cfg.target_accept) / std::pow(rm_count + 10.0, 0.6);
            if (window_idx < windows.size() && it >= windows[window_idx].begin) {
                acc.add(theta);
                if (it + 1 == windows[window_idx].end) {
                    Eigen::LLT<Eigen::MatrixXd> llt(acc.regularized());
                    if (llt.info() == Eigen::Success) {
                        chol = llt.matrixL();
                        log_step = log_step0;
                        rm_count = 0;
                    }
                    acc.reset();
                    ++window_idx;
                }
            }
            if (it >= term_begin) {
                term_log_step_sum += log_step;
                ++term_count;
            }
            if (it + 1 == cfg.n_warmup && term_count > 0) log_step = term_log_step_sum / term_count;
        } else {
            out.row(it - cfg.n_warmup) = theta.transpose();
        }
    }
    acceptance = static_cast<double>(accepted) / cfg.n_draws;
    return out;
}

PosteriorDraws assemble(const SamplingTarget& target, int n_columns, ModelFamily family, int window,
                        const SamplerConfig& cfg) {
    std::vector<double> acceptance;
    const auto chains = run_metropolis(target, cfg, &acceptance);
    Eigen::MatrixXd draws(static_cast<Eigen::Index>(cfg.n_chains) * cfg.n_draws, n_columns);
    std::vector<double> row(n_columns);
    for (int c = 0; c < cfg.n_chains; ++c) {
        for (int i = 0; i < cfg.n_draws; ++i) {
            const Eigen::VectorXd theta = chains[c].row(i).transpose();
            target.constrain(theta.data(), row.data());
            for (int k = 0; k < n_columns; ++k) draws(c * cfg.n_draws + i, k) = row[k];
        }
    }
    PosteriorDraws out(family, window, target.column_names(), std::move(draws), cfg.n_chains, target.dim());
    out.set_acceptance(std::move(acceptance));
    out.compute_diagnostics();
    return out;
}

}  // namespace

void SamplerConfig::validate() const {
    if (n_chains < 2) throw std::invalid_argument("sampler needs at least two chains");
    if (n_warmup < 0 || n_draws < 4) throw std::invalid_argument("sampler needs n_warmup >= 0 and n_draws >= 4");
    if (!(target_accept > 0.0 && target_accept < 1.0))
        throw std::invalid_argument("target acceptance must lie in (0, 1)");
    if (!(initial_scale > 0.0)) throw std::invalid_argument("initial step scale must be positive");
}

ModelPriors ModelPriors::defaults(const CyclePlan& plan) {
    return {TtePrior::defaults(plan), BlrmPrior::b1_defaults(), BlrmPrior::b3_defaults()};
}

PosteriorDraws::PosteriorDraws(ModelFamily family, int window, std::vector<std::string> names,
                               Eigen::MatrixXd draws, int n_chains, int n_free)
    : family_(family), window_(window), names_(std::move(names)), draws_(std::move(draws)),
      n_chains_(n_chains), n_free_(n_free) {}

PosteriorDraws PosteriorDraws::from_tte(const std::vector<TteParams>& draws) {
    if (draws.empty()) throw std::invalid_argument("from_tte: no draws");
    const auto k = draws.front().xi.size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(draws.size()), static_cast<Eigen::Index>(4 + k));
    std::vector<std::string> names{"alpha1", "log_beta1", "alpha2", "gamma2"};
    for (std::size_t j = 0; j < k; ++j) names.push_back("xi_" + std::to_string(j + 1));
    for (std::size_t i = 0; i < draws.size(); ++i) {
        const auto& p = draws[i];
        if (p.xi.size() != k) throw std::invalid_argument("from_tte: inconsistent xi length");
        m(i, 0) = p.alpha1;
        m(i, 1) = p.log_beta1;
        m(i, 2) = p.alpha2;
        m(i, 3) = p.gamma2;
        for (std::size_t j = 0; j < k; ++j) m(i, 4 + j) = p.xi[j];
    }
    return PosteriorDraws(ModelFamily::Tte, 1, std::move(names), std::move(m), 1,
                          4 + static_cast<int>(k > 1 ? k - 1 : 0));
}

PosteriorDraws PosteriorDraws::from_blrm(const std::vector<BlrmParams>& draws, int window) {
    if (draws.empty()) throw std::invalid_argument("from_blrm: no draws");
    Eigen::MatrixXd m(static_cast<Eigen::Index>(draws.size()), 3);
    for (std::size_t i = 0; i < draws.size(); ++i) {
        m(i, 0) = draws[i].alpha1;
        m(i, 1) = draws[i].log_beta1;
        m(i, 2) = draws[i].alpha2;
    }
    return PosteriorDraws(ModelFamily::Blrm, window, {"alpha1", "log_beta1", "alpha2"}, std::move(m), 1, 3);
}

TteParams PosteriorDraws::tte(std::size_t row) const {
    if (family_ != ModelFamily::Tte) throw std::logic_error("draws are not from the TTE model");
    const auto r = static_cast<Eigen::Index>(row);
    TteParams p{draws_(r, 0), draws_(r, 1), draws_(r, 2), draws_(r, 3), {}};
    for (Eigen::Index k = 4; k < draws_.cols(); ++k) p.xi.push_back(draws_(r, k));
    return p;
}

BlrmParams PosteriorDraws::blrm(std::size_t row) const {
    if (family_ != ModelFamily::Blrm) throw std::logic_error("draws are not from a BLRM");
    const auto r = static_cast<Eigen::Index>(row);
    return {draws_(r, 0), draws_(r, 1), draws_(r, 2)};
}

std::vector<std::vector<double>> PosteriorDraws::chains_of(int column) const {
    std::vector<std::vector<double>> out(n_chains_);
    const int per = draws_per_chain();
    for (int c = 0; c < n_chains_; ++c) {
        out[c].resize(per);
        for (int i = 0; i < per; ++i) out[c][i] = draws_(c * per + i, column);
    }
    return out;
}

void PosteriorDraws::compute_diagnostics() {
    auto& d = diagnostics_;
    d.rhat.assign(draws_.cols(), std::numeric_limits<double>::quiet_NaN());
    d.ess.assign(draws_.cols(), std::numeric_limits<double>::quiet_NaN());
    d.max_rhat = std::numeric_limits<double>::quiet_NaN();
    d.min_ess = std::numeric_limits<double>::quiet_NaN();
    if (n_chains_ < 2 || draws_per_chain() < 4) return;
    d.max_rhat = 0.0;
    d.min_ess = std::numeric_limits<double>::infinity();
    for (Eigen::Index k = 0; k < draws_.cols(); ++k) {
        const auto chains = chains_of(static_cast<int>(k));
        d.rhat[k] = split_rhat(chains);
        d.ess[k] = std::isfinite(d.rhat[k]) ? bulk_ess(chains) : 0.0;
        if (k < n_free_) {
            d.max_rhat = std::max(d.max_rhat, d.rhat[k]);
            d.min_ess = std::min(d.min_ess, d.ess[k]);
        }
    }
}

bool PosteriorDraws::converged(const SamplerConfig& cfg) const {
    const auto& d = diagnostics_;
    return d.max_rhat <= cfg.rhat_max && d.min_ess >= cfg.ess_min;
}

std::vector<Eigen::MatrixXd> run_metropolis(const SamplingTarget& target, const SamplerConfig& cfg,
                                            std::vector<double>* acceptance) {
    cfg.validate();
    std::vector<Eigen::MatrixXd> chains(cfg.n_chains);
    std::vector<double> acc(cfg.n_chains, 0.0);
    if (cfg.parallel_chains) {
        std::vector<std::exception_ptr> errors(cfg.n_chains);
        std::vector<std::thread> workers;
        for (int c = 0; c < cfg.n_chains; ++c) {
            workers.emplace_back([&, c] {
                try {
                    chains[c] = run_chain(target, cfg, c, acc[c]);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        }
        for (auto& w : workers) w.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    } else {
        for (int c = 0; c < cfg.n_chains; ++c) chains[c] = run_chain(target, cfg, c, acc[c]);
    }
    if (acceptance != nullptr) *acceptance = std::move(acc);
    return chains;
}

PosteriorDraws fit_tte(const Dataset& data, const TtePrior& prior, const SamplerConfig& cfg) {
    data.validate();
    const TteLikelihood likelihood(data);
    const TteTarget target(data.plan, prior, &likelihood, nullptr);
    return assemble(target, target.n_columns(), ModelFamily::Tte, 1, cfg);
}

PosteriorDraws fit_tte_with(const TteLogLikelihood& log_likelihood, const CyclePlan& plan,
                            const TtePrior& prior, const SamplerConfig& cfg) {
    const TteTarget target(plan, prior, nullptr, &log_likelihood);
    return assemble(target, target.n_columns(), ModelFamily::Tte, 1, cfg);
}

PosteriorDraws fit_blrm(const Dataset& data, const BlrmPrior& prior, int window_cycles,
                        const SamplerConfig& cfg) {
    data.validate();
    const BlrmLikelihood likelihood(data, window_cycles);
    const BlrmTarget target(prior, likelihood);
    return assemble(target, 3, ModelFamily::Blrm, window_cycles, cfg);
}

int decision_window(Method method, const CyclePlan& plan) {
    return method == Method::B3 ? plan.n_cycles : 1;
}

PosteriorDraws fit(Method method, const Dataset& data, const ModelPriors& priors, const SamplerConfig& cfg) {
    switch (method) {
        case Method::B1: return fit_blrm(data, priors.b1, 1, cfg);
        case Method::B3: return fit_blrm(data, priors.b3, data.plan.n_cycles, cfg);
        case Method::TCO:
        case Method::TCU: return fit_tte(data, priors.tte, cfg);
    }
    throw std::logic_error("unhandled method");
}

std::vector<double> simplex_from_alr(const double* z, std::size_t k) {
    const double lse = alr_log_normalizer(z, k);
    std::vector<double> xi(k + 1);
    for (std::size_t i = 0; i < k; ++i) xi[i] = std::exp(z[i] - lse);
    xi[k] = std::exp(-lse);
    return xi;
}

std::vector<double> alr_from_simplex(const std::vector<double>& xi) {
    if (xi.size() < 2) return {};
    std::vector<double> z(xi.size() - 1);
    const double ref = std::log(xi.back());
    for (std::size_t i = 0; i + 1 < xi.size(); ++i) z[i] = std::log(xi[i]) - ref;
    return z;
}

TteParams draw_tte_prior(const TtePrior& prior, Rng& rng) {
    std::normal_distribution<double> normal;
    TteParams p;
    p.alpha1 = prior.alpha1.mean + prior.alpha1.sd * normal(rng);
    p.log_beta1 = prior.log_beta1.mean + prior.log_beta1.sd * normal(rng);
    p.alpha2 = prior.alpha2.mean + prior.alpha2.sd * normal(rng);
    p.gamma2 = prior.gamma2.mean + prior.gamma2.sd * normal(rng);
    const auto k = prior.xi_concentration.size();
    if (k == 1) p.xi = {1.0};
    if (k > 1) {
        p.xi.resize(k);
        double s = 0.0;
        for (std::size_t i = 0; i < k; ++i) {
            std::gamma_distribution<double> g(prior.xi_concentration[i], 1.0);
            // Guard against exact zeros, which the ALR map cannot represent.
            p.xi[i] = std::max(g(rng), std::numeric_limits<double>::min());
            s += p.xi[i];
        }
        for (auto& x : p.xi) x /= s;
    }
    return p;
}

BlrmParams draw_blrm_prior(const BlrmPrior& prior, Rng& rng) {
    std::normal_distribution<double> normal;
    BlrmParams p;
    p.alpha1 = prior.alpha1.mean + prior.alpha1.sd * normal(rng);
    p.log_beta1 = prior.log_beta1.mean + prior.log_beta1.sd * normal(rng);
    p.alpha2 = prior.alpha2.mean + prior.alpha2.sd * normal(rng);
    return p;
}

}  // namespace tite
