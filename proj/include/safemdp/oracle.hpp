#pragma once

#include "safemdp/core.hpp"
#include "safemdp/uncertainty.hpp"

#include <utility>

namespace safemdp {

/// Brute-force references used by tests. Deliberately simple and slow, and
/// independent of the operations they verify.

/// min of p^T v over the L1 ball intersected with the simplex: dense grid
/// (dimension <= 4; the step is coarsened automatically for dimension 4)
/// refined by per-receiver greedy enumeration over all donor orders.
double brute_force_worst_response(std::span<const double> nominal_row, double budget,
                                  std::span<const double> values, double grid_step = 1e-3);

/// Exhaustive maximum of return_of over all deterministic policies.
std::pair<Policy, double> enumerate_optimal_policy(const Mdp& mdp);

/// min of rho(pi, M(P)) over the Cartesian product of per-row candidate
/// extremes (every receiver coordinate x every donor order, plus the
/// nominal row).
double brute_force_robust_return(const UncertaintySet& set, const Policy& pi);

/// Candidate-set minimum of rho(pi, P) - rho(baseline, P) over the same
/// per-row extreme products (tiny instances only).
double brute_force_coupled_min(const UncertaintySet& set, const Policy& pi,
                               const Policy& baseline);

} // namespace safemdp
