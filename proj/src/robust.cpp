#include "safemdp/robust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace safemdp {

namespace {

// Worst (sign = +1) or best (sign = -1) transition row response for (x,a).
WorstCaseRow row_response(const UncertaintySet& set, int x, int a, const ValueFunction& v,
                          double sign) {
    if (sign > 0) return worst_case_response(set.nominal.row(x, a), set.error.at(x, a), v);
    ValueFunction neg(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) neg[i] = -v[i];
    WorstCaseRow r = worst_case_response(set.nominal.row(x, a), set.error.at(x, a), neg);
    r.value = -r.value;
    return r;
}

std::vector<double> adversary_model(const UncertaintySet& set, const ValueFunction& v,
                                    double sign) {
    const Mdp& m = set.nominal;
    std::vector<double> model(m.transition.size());
    for (int x = 0; x < m.n_states; ++x)
        for (int a = 0; a < m.n_actions; ++a) {
            WorstCaseRow r = row_response(set, x, a, v, sign);
            std::copy(r.row.begin(), r.row.end(),
                      model.begin() + (std::size_t(x) * m.n_actions + a) * m.n_states);
        }
    return model;
}

RobustEvaluation extremal_evaluate(const UncertaintySet& set, const Policy& pi, double tol,
                                   double sign) {
    const Mdp& m = set.nominal;
    const int n = m.n_states;
    const double gamma = m.discount;
    if (pi.n_states != n || pi.n_actions != m.n_actions)
        throw std::invalid_argument("robust evaluation: policy dimension mismatch");
    if (tol <= 0.0) throw std::invalid_argument("robust evaluation: tol must be positive");

    const double stop = tol * (1.0 - gamma) / (2.0 * gamma);
    ValueFunction v(n, 0.0), next(n, 0.0);
    for (int iter = 0; iter < 10000000; ++iter) {
        for (int x = 0; x < n; ++x) {
            double vx = 0.0;
            auto pr = pi.row(x);
            for (int a = 0; a < m.n_actions; ++a) {
                if (pr[a] == 0.0) continue;
                vx += pr[a] * (m.r(x, a) + gamma * row_response(set, x, a, v, sign).value);
            }
            next[x] = vx;
        }
        const double diff = sup_norm_diff(next, v);
        v.swap(next);
        if (diff <= stop) break;
    }

    // Fix the adversary rows from the final values and polish with exact
    // solves; the adversary response is re-derived until stationary.
    RobustEvaluation out;
    for (int round = 0; round < 50; ++round) {
        out.worst_model = adversary_model(set, v, sign);
        Mdp fixed = m;
        fixed.transition = out.worst_model;
        ValueFunction exact = evaluate_policy(fixed, pi);
        const double change = sup_norm_diff(exact, v);
        v = std::move(exact);
        if (change <= 1e-13) break;
    }
    out.state_values = v;
    out.value = dot(m.initial_dist, v);
    return out;
}

} // namespace

ValueFunction robust_bellman_apply(const UncertaintySet& set, const ValueFunction& v) {
    const Mdp& m = set.nominal;
    if (int(v.size()) != m.n_states)
        throw std::invalid_argument("robust_bellman_apply: dimension mismatch");
    ValueFunction out(m.n_states);
    for (int x = 0; x < m.n_states; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < m.n_actions; ++a)
            best = std::max(best,
                            m.r(x, a) + m.discount * row_response(set, x, a, v, +1.0).value);
        out[x] = best;
    }
    return out;
}

RobustSolution robust_value_iteration(const UncertaintySet& set, double tol) {
    if (tol <= 0.0) throw std::invalid_argument("robust_value_iteration: tol must be positive");
    const Mdp& m = set.nominal;
    const int n = m.n_states;
    const double gamma = m.discount;
    const double stop = tol * (1.0 - gamma) / (2.0 * gamma);

    RobustSolution sol;
    ValueFunction v(n, 0.0);
    int iters = 0;
    for (;; ++iters) {
        ValueFunction next = robust_bellman_apply(set, v);
        const double diff = sup_norm_diff(next, v);
        v = std::move(next);
        if (diff <= stop || iters > 10000000) break;
    }

    // One extra sweep: greedy policy and a worst-case model consistent with
    // the converged values.
    std::vector<int> greedy(n, 0);
    for (int x = 0; x < n; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < m.n_actions; ++a) {
            const double q = m.r(x, a) + gamma * row_response(set, x, a, v, +1.0).value;
            if (q > best + 1e-13) {
                best = q;
                greedy[x] = a;
            }
        }
    }
    sol.policy = Policy::from_actions(greedy, m.n_actions);
    sol.worst_model = adversary_model(set, v, +1.0);
    sol.residual = sup_norm_diff(robust_bellman_apply(set, v), v);
    sol.value = std::move(v);
    sol.iterations = iters + 1;
    return sol;
}

RobustEvaluation robust_evaluate_policy(const UncertaintySet& set, const Policy& pi,
                                        double tol) {
    return extremal_evaluate(set, pi, tol, +1.0);
}

RobustEvaluation best_case_evaluate_full(const UncertaintySet& set, const Policy& pi,
                                         double tol) {
    return extremal_evaluate(set, pi, tol, -1.0);
}

double best_case_evaluate(const UncertaintySet& set, const Policy& pi, double tol) {
    return best_case_evaluate_full(set, pi, tol).value;
}

} // namespace safemdp
