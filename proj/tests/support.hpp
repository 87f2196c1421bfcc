#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "tite/config.hpp"
#include "tite/rng.hpp"

namespace testing {

constexpr int kPropertyCases = 1000;
constexpr std::uint64_t kPropertySeed = 0x5eed'2024;

inline tite::DoseGrid default_grid(double reference = 160.0) {
    return tite::DoseGrid({10, 20, 40, 80, 160, 320, 640, 1280}, reference);
}

inline tite::CyclePlan default_plan() { return tite::CyclePlan{}; }

inline double uniform(tite::Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(tite::Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::vector<double> random_simplex(tite::Rng& rng, int k) {
    std::vector<double> x(k);
    double s = 0.0;
    for (auto& v : x) {
        v = std::exponential_distribution<double>(1.0)(rng);
        s += v;
    }
    for (auto& v : x) v /= s;
    return x;
}

// Parameters spread well beyond the prior, but keeping hazards finite.
inline tite::TteParams random_tte(tite::Rng& rng, const tite::CyclePlan& plan) {
    tite::TteParams p;
    p.alpha1 = uniform(rng, -11.0, -3.0);
    p.log_beta1 = uniform(rng, -2.0, 1.5);
    p.alpha2 = uniform(rng, -11.0, -3.0);
    p.gamma2 = uniform(rng, -2.0, 2.0);
    p.xi = random_simplex(rng, std::max(plan.n_cycles - 1, 0));
    return p;
}

inline tite::BlrmParams random_blrm(tite::Rng& rng) {
    return {uniform(rng, -6.0, 2.0), uniform(rng, -2.0, 1.5), uniform(rng, -6.0, 2.0)};
}

// Random valid patient records on the grid.
inline std::vector<tite::PatientRecord> random_records(tite::Rng& rng, const tite::DoseGrid& grid,
                                                       const tite::CyclePlan& plan, int n) {
    std::vector<tite::PatientRecord> out;
    for (int i = 0; i < n; ++i) {
        tite::PatientRecord r;
        r.id = i + 1;
        r.dose = grid[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(grid.size()) - 1))];
        r.u_cycles = uniform_int(rng, 0, plan.n_cycles);
        r.delta = r.u_cycles > 0 && uniform(rng, 0, 1) < 0.3 ? 1 : 0;
        r.dropout = r.delta == 0 && r.u_cycles < plan.n_cycles;
        out.push_back(r);
    }
    return out;
}

inline tite::PatientRecord record(int id, double dose, int u, int delta, bool dropout = false) {
    tite::PatientRecord r;
    r.id = id;
    r.dose = dose;
    r.u_cycles = u;
    r.delta = delta;
    r.dropout = dropout;
    return r;
}

inline tite::SamplerConfig quick_sampler(std::uint64_t seed = 1) {
    tite::SamplerConfig c;
    c.n_chains = 2;
    c.n_warmup = 300;
    c.n_draws = 300;
    c.seed = seed;
    return c;
}

}  // namespace testing
