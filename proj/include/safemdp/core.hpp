#pragma once

#include <span>
#include <string>
#include <vector>

namespace safemdp {

constexpr double kRowSumTol = 1e-9;

/// Finite discounted MDP <X, A, r, P, p0, gamma> stored densely.
/// reward is indexed [x * n_actions + a], transition rows are
/// [(x * n_actions + a) * n_states + x'].
struct Mdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> reward;
    std::vector<double> transition;
    std::vector<double> initial_dist;
    double discount = 0.0;
    double r_max = 0.0;

    double r(int x, int a) const { return reward[std::size_t(x) * n_actions + a]; }
    double& r(int x, int a) { return reward[std::size_t(x) * n_actions + a]; }

    std::span<const double> row(int x, int a) const {
        return {transition.data() + (std::size_t(x) * n_actions + a) * n_states,
                std::size_t(n_states)};
    }
    std::span<double> row(int x, int a) {
        return {transition.data() + (std::size_t(x) * n_actions + a) * n_states,
                std::size_t(n_states)};
    }

    /// Checks all structural invariants; renormalizes rows that are within
    /// kRowSumTol of stochastic (JSON round-trip noise). Throws
    /// std::invalid_argument otherwise.
    void validate(bool enforce_reward_bound = true);
};

/// Stationary Markov policy; deterministic policies are stored one-hot.
struct Policy {
    int n_states = 0;
    int n_actions = 0;
    bool deterministic = true;
    std::vector<double> action_dist; // [x * n_actions + a]

    static Policy from_actions(const std::vector<int>& actions, int n_actions);
    static Policy stochastic(int n_states, int n_actions, std::vector<double> dist);

    std::span<const double> row(int x) const {
        return {action_dist.data() + std::size_t(x) * n_actions, std::size_t(n_actions)};
    }
    /// Action of a deterministic policy at x.
    int action(int x) const;

    void validate() const;
    bool same_rows(const Policy& other, int x) const;
};

using ValueFunction = std::vector<double>;
using Occupancy = std::vector<double>;

/// Policy-marginalized kernel: P_pi rows and r_pi vector.
struct InducedKernel {
    std::vector<double> transition; // [x * n_states + x']
    std::vector<double> reward;     // [x]
};

InducedKernel induced_kernel(const Mdp& mdp, const Policy& pi);

/// Exact value of pi: solves V = r_pi + gamma P_pi V (direct solve up to
/// 2000 states, value iteration beyond).
ValueFunction evaluate_policy(const Mdp& mdp, const Policy& pi);

/// rho(pi, M) = p0^T V^pi.
double return_of(const Mdp& mdp, const Policy& pi);

struct OptimalSolution {
    Policy policy;
    ValueFunction value;
};

/// Optimal deterministic policy via value iteration; greedy ties break to
/// the lowest action index.
OptimalSolution solve_optimal(const Mdp& mdp, double tol = 1e-8);

/// Normalized discounted state occupancy u = (1-gamma)(I - gamma P_pi^T)^{-1} p0.
Occupancy occupancy(const Mdp& mdp, const Policy& pi);

// Shared helpers.
double dot(std::span<const double> a, std::span<const double> b);
double sup_norm_diff(std::span<const double> a, std::span<const double> b);
double l1_distance(std::span<const double> a, std::span<const double> b);

} // namespace safemdp
