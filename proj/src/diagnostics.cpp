#include "tite/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace tite {

namespace {

void check_layout(const ChainSet& chains) {
    if (chains.size() < 2) throw std::invalid_argument("diagnostics need at least two chains");
    const auto n = chains.front().size();
    if (n < 4) throw std::invalid_argument("diagnostics need at least four draws per chain");
    for (const auto& c : chains)
        if (c.size() != n) throw std::invalid_argument("all chains must have equal length");
}

double mean_of(const std::vector<double>& x) {
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(const std::vector<double>& x, double m) {
    double s = 0.0;
    for (double v : x) s += (v - m) * (v - m);
    return s / static_cast<double>(x.size() - 1);
}

}  // namespace

ChainSet split_chains(const ChainSet& chains) {
    ChainSet out;
    out.reserve(chains.size() * 2);
    for (const auto& c : chains) {
        const auto half = c.size() / 2;
        out.emplace_back(c.begin(), c.begin() + static_cast<std::ptrdiff_t>(half));
        out.emplace_back(c.end() - static_cast<std::ptrdiff_t>(half), c.end());
    }
    return out;
}

ChainSet rank_normalize(const ChainSet& chains) {
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t m = 0; m < chains.size(); ++m)
        for (std::size_t i = 0; i < chains[m].size(); ++i) pooled.emplace_back(chains[m][i], pooled.size());
    const auto total = pooled.size();
    std::vector<double> ranks(total);
    std::sort(pooled.begin(), pooled.end());
    for (std::size_t i = 0; i < total;) {
        std::size_t j = i;
        while (j + 1 < total && pooled[j + 1].first == pooled[i].first) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[pooled[k].second] = avg;
        i = j + 1;
    }
    const boost::math::normal_distribution<> std_normal;
    ChainSet out(chains.size());
    std::size_t idx = 0;
    for (std::size_t m = 0; m < chains.size(); ++m) {
        out[m].resize(chains[m].size());
        for (auto& v : out[m]) {
            const double u = (ranks[idx++] - 0.375) / (static_cast<double>(total) + 0.25);
            v = boost::math::quantile(std_normal, u);
        }
    }
    return out;
}

double potential_scale_reduction(const ChainSet& chains) {
    const auto m = static_cast<double>(chains.size());
    const auto n = static_cast<double>(chains.front().size());
    std::vector<double> means, vars;
    for (const auto& c : chains) {
        means.push_back(mean_of(c));
        vars.push_back(variance_of(c, means.back()));
    }
    const double w = mean_of(vars);
    const double grand = mean_of(means);
    double b_over_n = 0.0;
    for (double mu : means) b_over_n += (mu - grand) * (mu - grand);
    b_over_n /= (m - 1.0);
    if (!(w > 0.0)) return std::numeric_limits<double>::infinity();
    const double var_plus = (n - 1.0) / n * w + b_over_n;
    return std::sqrt(var_plus / w);
}

double effective_sample_size(const ChainSet& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = chains.front().size();
    std::vector<double> means(m), acov0(m);
    for (std::size_t c = 0; c < m; ++c) means[c] = mean_of(chains[c]);

    auto mean_autocov = [&](std::size_t lag) {
        double total = 0.0;
        for (std::size_t c = 0; c < m; ++c) {
            const auto& x = chains[c];
            double s = 0.0;
            for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - means[c]) * (x[i + lag] - means[c]);
            total += s / static_cast<double>(n);
        }
        return total / static_cast<double>(m);
    };

    const double mean_var = mean_autocov(0) * static_cast<double>(n) / static_cast<double>(n - 1);
    double b_over_n = 0.0;
    const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(m);
    for (double mu : means) b_over_n += (mu - grand) * (mu - grand);
    b_over_n /= static_cast<double>(m - 1);
    const double var_plus = mean_var * static_cast<double>(n - 1) / static_cast<double>(n) + b_over_n;
    if (!(var_plus > 0.0)) return std::numeric_limits<double>::quiet_NaN();

    auto rho = [&](std::size_t lag) {
        return lag == 0 ? 1.0 : 1.0 - (mean_var - mean_autocov(lag)) / var_plus;
    };

    // Geyer initial positive sequence over lag pairs, made monotone.
    double sum_pairs = 0.0;
    double prev_pair = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t + 1 < n; t += 2) {
        double pair = rho(t) + rho(t + 1);
        if (!(pair > 0.0)) break;
        pair = std::min(pair, prev_pair);
        prev_pair = pair;
        sum_pairs += pair;
    }
    const double total = static_cast<double>(m * n);
    const double tau = std::max(-1.0 + 2.0 * sum_pairs, 1.0 / std::log10(total));
    return total / tau;
}

double split_rhat(const ChainSet& chains) {
    check_layout(chains);
    const auto split = split_chains(chains);
    for (const auto& c : split) {
        const double mu = mean_of(c);
        if (!(variance_of(c, mu) > 0.0)) return std::numeric_limits<double>::infinity();
    }
    return potential_scale_reduction(rank_normalize(split));
}

double bulk_ess(const ChainSet& chains) {
    check_layout(chains);
    return effective_sample_size(rank_normalize(split_chains(chains)));
}

}  // namespace tite
