#include <doctest.h>

#include <boost/math/distributions/normal.hpp>

#include "support.hpp"
#include "tite/diagnostics.hpp"
#include "tite/escalation.hpp"
#include "tite/quadrature.hpp"
#include "tite/sampler.hpp"

using namespace tite;
using doctest::Approx;

namespace {

ChainSet normal_chains(Rng& rng, int chains, int n, double phi = 0.0) {
    std::normal_distribution<double> z;
    ChainSet out(chains, std::vector<double>(n));
    for (auto& c : out) {
        double x = z(rng) / std::sqrt(1 - phi * phi);
        for (auto& v : c) {
            x = phi * x + z(rng);
            v = x;
        }
    }
    return out;
}

// Textbook R-hat on already split chains.
double classic_rhat(const ChainSet& chains) {
    const double m = chains.size(), n = chains[0].size();
    std::vector<double> means;
    double w = 0.0;
    for (const auto& c : chains) {
        double mu = 0.0;
        for (double v : c) mu += v;
        mu /= n;
        means.push_back(mu);
        double s = 0.0;
        for (double v : c) s += (v - mu) * (v - mu);
        w += s / (n - 1);
    }
    w /= m;
    double grand = 0.0;
    for (double mu : means) grand += mu;
    grand /= m;
    double b = 0.0;
    for (double mu : means) b += (mu - grand) * (mu - grand);
    b *= n / (m - 1);
    return std::sqrt(((n - 1) / n * w + b / n) / w);
}

// The 6-patient reference dataset: 3 at 20 mg without DLT, 3 at 40 mg with one cycle-1 DLT.
std::vector<PatientRecord> six_patients() {
    return {testing::record(1, 20, 3, 0), testing::record(2, 20, 3, 0), testing::record(3, 20, 3, 0),
            testing::record(4, 40, 1, 1), testing::record(5, 40, 3, 0), testing::record(6, 40, 3, 0)};
}

double mean_exceedance(const PosteriorDraws& d, Method m, double dose, const DoseGrid& g, const CyclePlan& p) {
    const auto rs = risk_samples(d, m, dose, g, p);
    double n = 0;
    for (double v : rs.ewoc_series[0]) n += v > 0.33;
    return n / static_cast<double>(rs.ewoc_series[0].size());
}

}  // namespace

TEST_CASE("diagnostics: degenerate and synthetic chains") {
    CHECK(std::isinf(split_rhat({{1, 1, 1, 1, 1, 1}, {1, 1, 1, 1, 1, 1}})));
    CHECK(std::isinf(potential_scale_reduction({{2, 2, 2, 2}, {2, 2, 2, 2}})));
    CHECK_THROWS(split_rhat({{1, 2, 3, 4}}));
    CHECK_THROWS(split_rhat({{1, 2, 3}, {1, 2, 3}}));

    auto rng = make_rng(11);
    int in_range = 0;
    for (int rep = 0; rep < 50; ++rep) {
        const auto chains = normal_chains(rng, 4, 1000);
        const double r = split_rhat(chains);
        in_range += r >= 0.99 && r <= 1.02;
        const double ess = bulk_ess(chains);
        CHECK(ess == Approx(4000).epsilon(0.2));
    }
    CHECK(in_range >= 48);

    // AR(1) with phi = 0.5 has ESS = N (1 - phi) / (1 + phi).
    const auto ar = normal_chains(rng, 4, 5000, 0.5);
    CHECK(effective_sample_size(ar) == Approx(20000.0 / 3.0).epsilon(0.2));

    // Chains stuck in different places are flagged.
    ChainSet shifted = normal_chains(rng, 4, 500);
    for (auto& v : shifted[0]) v += 3.0;
    CHECK(split_rhat(shifted) > 1.1);
}

TEST_CASE("diagnostics: plain R-hat agrees with the textbook formula") {
    auto rng = make_rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        auto chains = normal_chains(rng, 3, 200, 0.3);
        chains[1][5] += 2.0;
        CHECK(potential_scale_reduction(chains) == Approx(classic_rhat(chains)).epsilon(1e-12));
    }
}

TEST_CASE("diagnostics: rank normalization") {
    const ChainSet c{{3.0, 1.0, 2.0}, {6.0, 5.0, 4.0}};
    const auto z = rank_normalize(c);
    // Ranks 1..6 map through Phi^{-1}((r - 3/8) / (n + 1/4)).
    boost::math::normal_distribution<> nd;
    CHECK(z[0][1] == Approx(boost::math::quantile(nd, (1 - 0.375) / 6.25)).epsilon(1e-12));
    CHECK(z[1][0] == Approx(boost::math::quantile(nd, (6 - 0.375) / 6.25)).epsilon(1e-12));
    const auto s = split_chains({{1, 2, 3, 4, 5}, {6, 7, 8, 9, 10}});
    REQUIRE(s.size() == 4);
    CHECK(s[0] == std::vector<double>{1, 2});
    CHECK(s[1] == std::vector<double>{4, 5});
}

TEST_CASE("ALR simplex transform round trips") {
    auto rng = make_rng(testing::kPropertySeed + 20);
    for (int i = 0; i < testing::kPropertyCases; ++i) {
        const int k = testing::uniform_int(rng, 2, 6);
        const auto xi = testing::random_simplex(rng, k);
        const auto z = alr_from_simplex(xi);
        REQUIRE(z.size() == static_cast<std::size_t>(k - 1));
        const auto back = simplex_from_alr(z.data(), z.size());
        for (int j = 0; j < k; ++j) REQUIRE(back[j] == Approx(xi[j]).epsilon(1e-10));
    }
}

TEST_CASE("sampler config validation") {
    SamplerConfig c;
    CHECK_NOTHROW(c.validate());
    c.n_chains = 1;
    CHECK_THROWS(c.validate());
    c = SamplerConfig{};
    c.n_draws = 0;
    CHECK_THROWS(c.validate());
    c = SamplerConfig{};
    c.target_accept = 1.2;
    CHECK_THROWS(c.validate());
}

TEST_CASE("fit is deterministic in its inputs") {
    const auto grid = testing::default_grid();
    const auto plan = testing::default_plan();
    const Dataset data{six_patients(), grid, plan};
    const auto priors = ModelPriors::defaults(plan);
    for (Method m : {Method::B1, Method::B3, Method::TCU}) {
        const auto a = fit(m, data, priors, testing::quick_sampler(5));
        const auto b = fit(m, data, priors, testing::quick_sampler(5));
        CHECK(a.matrix() == b.matrix());
        const auto c = fit(m, data, priors, testing::quick_sampler(6));
        CHECK(a.matrix() != c.matrix());
    }
    // Chain-parallel execution gives the same draws.
    auto cfg = testing::quick_sampler(5);
    cfg.parallel_chains = true;
    CHECK(fit(Method::TCU, data, priors, cfg).matrix() == fit(Method::TCU, data, priors, testing::quick_sampler(5)).matrix());
}

TEST_CASE("empty data: TTE posterior reproduces the prior predictive") {
    const auto grid = testing::default_grid();
    const auto plan = testing::default_plan();
    const auto prior = TtePrior::defaults(plan);

    // Prior-predictive oracle with its own sampler: 10^6 draws.
    auto rng = make_rng(99);
    std::normal_distribution<double> z;
    std::gamma_distribution<double> g(1.0, 1.0);
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
        const double a1 = prior.alpha1.mean + prior.alpha1.sd * z(rng);
        z(rng);  // log_beta1 is irrelevant at the reference dose
        const double a2 = prior.alpha2.mean + prior.alpha2.sd * z(rng);
        const double g2 = prior.gamma2.sd * z(rng);
        const double x1 = g(rng), x2 = g(rng);
        const double xi1 = x1 / (x1 + x2);
        const double H = 42.0 * (3 * std::exp(a1) + std::exp(a2) + std::exp(a2 + 2 * g2 * xi1) + std::exp(a2 + 2 * g2));
        acc += -std::expm1(-H);
    }
    const double oracle = acc / n;

    SamplerConfig cfg;
    cfg.seed = 3;
    cfg.n_draws = 4000;
    const auto draws = fit_tte(Dataset{{}, grid, plan}, prior, cfg);
    const auto rs = risk_samples(draws, Method::TCU, 160.0, grid, plan);
    double mean = 0.0;
    for (double v : rs.band) mean += v;
    mean /= static_cast<double>(rs.band.size());
    CHECK(std::abs(mean - oracle) <= 0.02);
}

TEST_CASE("B1: no-DLT data lowers the overdose probability") {
    const auto grid = testing::default_grid();
    const auto plan = testing::default_plan();
    const auto prior = BlrmPrior::b1_defaults();
    const EwocThresholds t;
    const Dataset empty{{}, grid, plan};
    std::vector<PatientRecord> recs;
    for (int i = 0; i < 6; ++i) recs.push_back(testing::record(i + 1, 320, 1, 0));
    const Dataset data{recs, grid, plan};
    const auto q_prior = quadrature_oracle(Method::B1, empty, prior, t);
    // Three patients at 20 mg: exact, since the prior exceedance there is already tiny.
    const Dataset small{{testing::record(1, 20, 1, 0), testing::record(2, 20, 1, 0), testing::record(3, 20, 1, 0)},
                        grid, plan};
    CHECK(quadrature_oracle(Method::B1, small, prior, t).p_over[1] < q_prior.p_over[1]);
    const auto q_post = quadrature_oracle(Method::B1, data, prior, t);
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (q_prior.p_over[k] > 1e-3) CHECK(q_post.p_over[k] < q_prior.p_over[k]);
    SamplerConfig cfg;
    cfg.n_draws = 4000;
    const auto post = fit_blrm(data, prior, 1, cfg);
    for (std::size_t level : {5u, 6u, 7u}) {
        REQUIRE(q_prior.p_over[level] - q_post.p_over[level] > 0.05);
        CHECK(mean_exceedance(post, Method::B1, grid[level], grid, plan) < q_prior.p_over[level]);
    }
}

TEST_CASE("six-patient dataset: MCMC matches quadrature within 0.02") {
    const auto grid = testing::default_grid();
    const auto plan = testing::default_plan();
    const Dataset data{six_patients(), grid, plan};
    const EwocThresholds t;
    SamplerConfig cfg;
    cfg.seed = 17;
    cfg.n_draws = 20000;
    for (Method m : {Method::B1, Method::B3}) {
        const auto prior = m == Method::B1 ? BlrmPrior::b1_defaults() : BlrmPrior::b3_defaults();
        const auto q = quadrature_oracle(m, data, prior, t);
        const auto draws = fit_blrm(data, prior, decision_window(m, plan), cfg);
        const auto a = assess_doses(draws, m, grid, plan, t);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            CHECK(std::abs(a[i].p_over - q.p_over[i]) <= 0.02);
            CHECK(std::abs(a[i].p_target - q.p_target[i]) <= 0.02);
            CHECK(std::abs(a[i].p_under - q.p_under[i]) <= 0.02);
        }
    }
}

TEST_CASE("quadrature oracle sanity") {
    const auto grid = testing::default_grid();
    const auto plan = testing::default_plan();
    const auto prior = BlrmPrior::b3_defaults();
    const EwocThresholds t;
    const auto q = quadrature_oracle(Method::B3, Dataset{{}, grid, plan}, prior, t);
    CHECK(q.mean_alpha1 == Approx(prior.alpha1.mean).epsilon(1e-6));
    CHECK(q.mean_log_beta1 == Approx(prior.log_beta1.mean).scale(1.0).epsilon(1e-6));
    CHECK(q.mean_alpha2 == Approx(prior.alpha2.mean).epsilon(1e-6));
    // The box holds all but ~2e-9 of each prior marginal.
    CHECK(std::abs(q.log_normalizer) < 1e-6);

    const Dataset data{six_patients(), grid, plan};
    const auto coarse = quadrature_oracle(Method::B1, data, BlrmPrior::b1_defaults(), t, {161, 6.0});
    const auto fine = quadrature_oracle(Method::B1, data, BlrmPrior::b1_defaults(), t, {321, 6.0});
    CHECK(std::abs(std::expm1(coarse.log_normalizer - fine.log_normalizer)) < 1e-4);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(coarse.p_under[i] + coarse.p_target[i] + coarse.p_over[i] == Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(coarse.p_over[i] - fine.p_over[i]) < 1e-3);
    }
    CHECK_THROWS_AS(quadrature_oracle(Method::TCU, data, prior, t), std::invalid_argument);
    CHECK_THROWS_AS(quadrature_oracle(Method::TCO, data, prior, t), std::invalid_argument);
}

TEST_CASE("quadrature agrees with prior importance sampling") {
    // Independent estimate: weight 10^6 prior draws by the likelihood.
    const auto grid = testing::default_grid();
    const auto plan = testing::default_plan();
    const Dataset data{six_patients(), grid, plan};
    const auto prior = BlrmPrior::b1_defaults();
    const EwocThresholds t;
    auto rng = make_rng(123);
    std::normal_distribution<double> z;
    const int n = 1000000;
    double wsum = 0.0, wover = 0.0;
    for (int i = 0; i < n; ++i) {
        const BlrmParams p{prior.alpha1.mean + prior.alpha1.sd * z(rng), prior.log_beta1.sd * z(rng),
                           prior.alpha2.mean + prior.alpha2.sd * z(rng)};
        const double w = std::exp(log_likelihood_blrm(p, data, 1));
        wsum += w;
        wover += w * (blrm_dlt_probability(p, 80.0, grid) > 0.33);
    }
    const auto q = quadrature_oracle(Method::B1, data, prior, t);
    CHECK(std::abs(q.p_over[3] - wover / wsum) < 0.005);
}

TEST_CASE("property: retained draws respect parameter constraints") {
    auto rng = make_rng(testing::kPropertySeed + 21);
    const auto grid = testing::default_grid();
    const auto plan = testing::default_plan();
    const auto priors = ModelPriors::defaults(plan);
    SamplerConfig cfg;
    cfg.n_chains = 2;
    cfg.n_warmup = 40;
    cfg.n_draws = 20;
    for (int i = 0; i < testing::kPropertyCases; ++i) {
        const Dataset data{testing::random_records(rng, grid, plan, testing::uniform_int(rng, 0, 15)), grid, plan};
        cfg.seed = static_cast<std::uint64_t>(i + 1);
        const auto tte = fit_tte(data, priors.tte, cfg);
        for (std::size_t r = 0; r < tte.size(); ++r) {
            const auto p = tte.tte(r);
            REQUIRE(p.beta1() > 0.0);
            REQUIRE(p.xi.size() == 2);
            REQUIRE(p.xi[0] >= 0.0);
            REQUIRE(p.xi[1] >= 0.0);
            REQUIRE(std::abs(p.xi[0] + p.xi[1] - 1.0) <= 1e-12);
        }
        const auto b = fit_blrm(data, priors.b3, testing::uniform_int(rng, 1, 3), cfg);
        for (std::size_t r = 0; r < b.size(); ++r) REQUIRE(b.blrm(r).beta1() > 0.0);
    }
}

TEST_CASE("posterior contraction: 30 no-DLT patients lower the overdose probability") {
    const auto grid = testing::default_grid();
    const auto plan = testing::default_plan();
    const auto priors = ModelPriors::defaults(plan);
    std::vector<PatientRecord> recs;
    for (int i = 0; i < 30; ++i) recs.push_back(testing::record(i + 1, 640, 3, 0));
    const Dataset empty{{}, grid, plan}, data{recs, grid, plan};
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto cfg = testing::quick_sampler(seed);
        cfg.n_warmup = 500;
        cfg.n_draws = 1000;
        for (Method m : {Method::B1, Method::B3, Method::TCU}) {
            const double before = mean_exceedance(fit(m, empty, priors, cfg), m, 640, grid, plan);
            const double after = mean_exceedance(fit(m, data, priors, cfg), m, 640, grid, plan);
            CHECK(after < before);
        }
    }
}

TEST_CASE("custom likelihood hook uses the production prior and sampler") {
    const auto plan = testing::default_plan();
    const auto prior = TtePrior::defaults(plan);
    auto cfg = testing::quick_sampler(8);
    cfg.n_draws = 2000;
    const auto flat = fit_tte_with([](const TteParams&) { return 0.0; }, plan, prior, cfg);
    double m = 0.0;
    for (std::size_t r = 0; r < flat.size(); ++r) m += flat.tte(r).alpha1;
    m /= static_cast<double>(flat.size());
    CHECK(std::abs(m - prior.alpha1.mean) < 0.15);
}
