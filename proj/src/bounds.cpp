#include "safemdp/bounds.hpp"

#include "safemdp/robust.hpp"
#include "safemdp/safe_policy.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace safemdp {

double performance_loss(const Mdp& true_mdp, const Policy& pi) {
    OptimalSolution opt = solve_optimal(true_mdp);
    return dot(true_mdp.initial_dist, opt.value) - return_of(true_mdp, pi);
}

double lemma1_bound(const Mdp& true_mdp, const ErrorFunction& e, const Policy& pi) {
    if (e.n_states != true_mdp.n_states || e.n_actions != true_mdp.n_actions)
        throw std::invalid_argument("lemma1_bound: error dimensions mismatch");
    const double gamma = true_mdp.discount;
    Occupancy u = occupancy(true_mdp, pi);
    // p0^T (I - gamma P_pi)^{-1} = u^T / (1-gamma)
    const double norm = weighted_error_norm(e, pi, u);
    return gamma * true_mdp.r_max / ((1.0 - gamma) * (1.0 - gamma)) * norm;
}

Lemma2Sandwich lemma2_bounds(const Mdp& m1, const Mdp& m2, const Policy& pi1,
                             const Policy& pi2, std::span<const double> g) {
    if (m1.n_states != m2.n_states || m1.discount != m2.discount)
        throw std::invalid_argument("lemma2_bounds: MDPs must share states and discount");
    const int n = m1.n_states;
    if (int(g.size()) != n) throw std::invalid_argument("lemma2_bounds: g dimension mismatch");
    const double gamma = m1.discount;

    InducedKernel k1 = induced_kernel(m1, pi1);
    InducedKernel k2 = induced_kernel(m2, pi2);
    for (int x = 0; x < n; ++x) {
        std::span<const double> r1{k1.transition.data() + std::size_t(x) * n, std::size_t(n)};
        std::span<const double> r2{k2.transition.data() + std::size_t(x) * n, std::size_t(n)};
        if (l1_distance(r1, r2) > g[x] + 1e-9)
            throw std::invalid_argument("lemma2_bounds: g violated by the induced kernels");
    }

    const double scale = gamma * m2.r_max / (1.0 - gamma);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) a(x, y) -= gamma * k1.transition[std::size_t(x) * n + y];
    Eigen::PartialPivLU<Eigen::MatrixXd> lu = a.partialPivLu();

    Lemma2Sandwich out;
    Eigen::VectorXd b(n);
    for (int x = 0; x < n; ++x) b(x) = k1.reward[x] - k2.reward[x] - scale * g[x];
    Eigen::VectorXd lo = lu.solve(b);
    for (int x = 0; x < n; ++x) b(x) = k1.reward[x] - k2.reward[x] + scale * g[x];
    Eigen::VectorXd hi = lu.solve(b);
    out.lower.assign(lo.data(), lo.data() + n);
    out.upper.assign(hi.data(), hi.data() + n);
    return out;
}

double thm1_bound(double gamma, double r_max, const ErrorFunction& e) {
    if (!(gamma > 0.0 && gamma < 1.0) || !(r_max > 0.0))
        throw std::invalid_argument("thm1_bound: invalid gamma or r_max");
    return 2.0 * gamma * r_max / ((1.0 - gamma) * (1.0 - gamma)) * e.max_budget();
}

double weighted_error_norm(const ErrorFunction& e, const Policy& pi, const Occupancy& u) {
    if (pi.n_states != e.n_states || pi.n_actions != e.n_actions ||
        int(u.size()) != e.n_states)
        throw std::invalid_argument("weighted_error_norm: dimension mismatch");
    double s = 0.0;
    for (int x = 0; x < e.n_states; ++x) {
        auto prow = pi.row(x);
        double epi = 0.0;
        for (int a = 0; a < e.n_actions; ++a) epi += prow[a] * e.at(x, a);
        s += u[x] * epi;
    }
    return s;
}

double thm2_4_bound(const Mdp& true_mdp, const ErrorFunction& e, double baseline_loss) {
    const double gamma = true_mdp.discount;
    OptimalSolution opt = solve_optimal(true_mdp);
    Occupancy u = occupancy(true_mdp, opt.policy);
    const double first = 2.0 * gamma * true_mdp.r_max / ((1.0 - gamma) * (1.0 - gamma)) *
                         weighted_error_norm(e, opt.policy, u);
    return std::min(first, baseline_loss);
}

Thm5Terms thm5_terms(const Mdp& true_mdp, const ErrorFunction& e, const Policy& baseline) {
    const double gamma = true_mdp.discount;
    OptimalSolution opt = solve_optimal(true_mdp);
    Occupancy u_star = occupancy(true_mdp, opt.policy);
    Occupancy u_base = occupancy(true_mdp, baseline);

    Thm5Terms t;
    t.optimal_norm = weighted_error_norm(e, opt.policy, u_star);
    t.baseline_norm = weighted_error_norm(e, baseline, u_base);
    t.first_branch = 2.0 * gamma * true_mdp.r_max / ((1.0 - gamma) * (1.0 - gamma)) *
                     (t.optimal_norm + t.baseline_norm);
    t.baseline_loss =
        dot(true_mdp.initial_dist, opt.value) - return_of(true_mdp, baseline);
    t.bound = std::min(t.first_branch, t.baseline_loss);
    return t;
}

double thm5_bound(const Mdp& true_mdp, const ErrorFunction& e, const Policy& baseline) {
    return thm5_terms(true_mdp, e, baseline).bound;
}

double bellman_residual(BellmanOperatorKind kind, const BellmanContext& ctx,
                        const ValueFunction& v) {
    switch (kind) {
    case BellmanOperatorKind::adjusted_nominal: {
        if (!ctx.adjusted)
            throw std::invalid_argument("bellman_residual: missing MDP context");
        const Mdp& m = *ctx.adjusted;
        if (int(v.size()) != m.n_states)
            throw std::invalid_argument("bellman_residual: dimension mismatch");
        double br = 0.0;
        for (int x = 0; x < m.n_states; ++x) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < m.n_actions; ++a)
                best = std::max(best, m.r(x, a) + m.discount * dot(m.row(x, a), v));
            br = std::max(br, std::abs(best - v[x]));
        }
        return br;
    }
    case BellmanOperatorKind::robust: {
        if (!ctx.set) throw std::invalid_argument("bellman_residual: missing set context");
        return sup_norm_diff(robust_bellman_apply(*ctx.set, v), v);
    }
    case BellmanOperatorKind::augmented_robust: {
        if (!ctx.set) throw std::invalid_argument("bellman_residual: missing set context");
        return sup_norm_diff(augmented_robust_apply(*ctx.set, ctx.lambda1, ctx.lambda2, v),
                             v);
    }
    }
    throw std::invalid_argument("bellman_residual: unknown operator kind");
}

double corollary_bound(double br, double gamma, double norm_term, double baseline_loss) {
    if (br < 0.0 || norm_term < 0.0)
        throw std::invalid_argument("corollary_bound: negative inputs");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("corollary_bound: invalid gamma");
    return std::min(br / (1.0 - gamma) + norm_term, baseline_loss);
}

} // namespace safemdp
