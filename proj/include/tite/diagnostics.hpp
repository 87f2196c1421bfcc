#pragma once

// Convergence diagnostics for multi-chain MCMC output: rank-normalized
// split-R-hat and bulk effective sample size.

#include <vector>

namespace tite {

using ChainSet = std::vector<std::vector<double>>;

// Splits every chain in half (dropping the middle draw of odd-length chains).
ChainSet split_chains(const ChainSet& chains);

// Pools all draws, replaces them by average ranks and maps the ranks through
// the inverse normal CDF, preserving the chain layout.
ChainSet rank_normalize(const ChainSet& chains);

// Classic potential scale reduction on the given chains (no splitting).
// Returns +inf when the within-chain variance is zero.
double potential_scale_reduction(const ChainSet& chains);

// Autocorrelation-corrected effective sample size on the given chains using
// Geyer's initial monotone sequence.
double effective_sample_size(const ChainSet& chains);

// Rank-normalized split-R-hat. Requires >= 2 chains with >= 4 draws each.
double split_rhat(const ChainSet& chains);

// Rank-normalized split bulk ESS. Requires >= 2 chains with >= 4 draws each.
double bulk_ess(const ChainSet& chains);

}  // namespace tite
