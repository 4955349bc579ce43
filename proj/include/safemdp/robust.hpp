#pragma once

#include "safemdp/core.hpp"
#include "safemdp/uncertainty.hpp"

namespace safemdp {

/// Fixed point of the robust Bellman operator together with the greedy
/// policy and the worst-case model re-derived from the final values.
struct RobustSolution {
    ValueFunction value;
    Policy policy;
    std::vector<double> worst_model; // flat [x][a][x'] layout
    int iterations = 0;
    double residual = 0.0;
};

/// One application of T[V](x) = max_a { r(x,a) + gamma min_{p in row set} p^T V }.
ValueFunction robust_bellman_apply(const UncertaintySet& set, const ValueFunction& v);

/// Robust value iteration; stops when the successive sup-norm difference
/// drops below tol (1-gamma) / (2 gamma).
RobustSolution robust_value_iteration(const UncertaintySet& set, double tol = 1e-8);

struct RobustEvaluation {
    double value = 0.0;
    std::vector<double> worst_model; // attains the returned value
    ValueFunction state_values;
};

/// min_{P in U} rho(pi, M(P)) with an attaining member. Value iteration to
/// tol, then the adversary rows are fixed and the pair is polished by an
/// exact linear solve.
RobustEvaluation robust_evaluate_policy(const UncertaintySet& set, const Policy& pi,
                                        double tol = 1e-8);

/// max_{P in U} rho(pi, M(P)); the optimistic mirror of robust_evaluate_policy.
RobustEvaluation best_case_evaluate_full(const UncertaintySet& set, const Policy& pi,
                                         double tol = 1e-8);
double best_case_evaluate(const UncertaintySet& set, const Policy& pi, double tol = 1e-8);

} // namespace safemdp
