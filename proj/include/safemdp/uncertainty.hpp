#pragma once

#include "safemdp/core.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace safemdp {

/// Per-(state, action) L1 budget e(x,a) in [0, 2].
struct ErrorFunction {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> budget; // [x * n_actions + a]

    static ErrorFunction zero(int n_states, int n_actions);
    static ErrorFunction uniform(int n_states, int n_actions, double e);

    double at(int x, int a) const { return budget[std::size_t(x) * n_actions + a]; }
    double& at(int x, int a) { return budget[std::size_t(x) * n_actions + a]; }
    double max_budget() const;

    void validate() const;
};

/// Transition sample counts and the empirical model they induce.
struct CountTable {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::int64_t> counts; // [(x*n_actions+a)*n_states + x']

    std::int64_t visits(int x, int a) const;
    /// Empirical row; unvisited (x,a) pairs fall back to the uniform row.
    std::vector<double> empirical_row(int x, int a) const;
    std::int64_t total() const;
};

/// L1-rectangular uncertainty set around a nominal model.
struct UncertaintySet {
    Mdp nominal;
    ErrorFunction error;

    void validate();
};

/// Weissman-style error function from visit counts:
///   e(x,a) = sqrt( (2 / N(x,a)) * ln(|X||A| (2^|X| - 2) / delta) ),
/// clipped to [0, 2]; unvisited pairs get the vacuous budget 2.
ErrorFunction error_from_counts(const CountTable& counts, double delta, int n_states,
                                int n_actions);

struct WorstCaseRow {
    std::vector<double> row;
    double value = 0.0;
};

/// Exact minimizer of p^T v over { p in simplex : ||p - nominal||_1 <= e }.
/// Greedy: shift min(e/2, headroom) mass onto the lowest-v state, taken from
/// donors in descending v order; all ties break to the lowest state index.
WorstCaseRow worst_case_response(std::span<const double> nominal_row, double budget,
                                 std::span<const double> values);

/// Membership test for a full transition function (flat [x][a][x'] layout).
bool contains(const UncertaintySet& set, std::span<const double> candidate);

/// Max over rows of ||P1 - P2||_1 for two members; always <= 2 max e.
double mirror_membership_bound(const UncertaintySet& set, std::span<const double> p1,
                               std::span<const double> p2);

/// Replaces the nominal transition function (used by test harnesses to plant
/// a "true" model inside the set).
Mdp with_transition(const Mdp& base, std::span<const double> transition);

/// Seeded random member of the set (flat [x][a][x'] layout).
std::vector<double> random_member(const UncertaintySet& set, std::uint64_t seed);

} // namespace safemdp
