#include "safemdp/core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace safemdp {

namespace {

void check(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

void renormalize_row(std::span<double> row, const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
        check(p >= -1e-12, what + ": negative probability entry");
        sum += p;
    }
    check(std::abs(sum - 1.0) <= kRowSumTol, what + ": row does not sum to 1");
    for (double& p : row) p = std::max(p, 0.0) / sum;
}

} // namespace

void Mdp::validate(bool enforce_reward_bound) {
    check(n_states >= 1 && n_actions >= 1, "Mdp: empty state or action space");
    check(discount > 0.0 && discount < 1.0, "Mdp: discount must be in (0,1)");
    check(r_max > 0.0, "Mdp: r_max must be positive");
    check(reward.size() == std::size_t(n_states) * n_actions, "Mdp: reward size mismatch");
    check(transition.size() == std::size_t(n_states) * n_actions * n_states,
          "Mdp: transition size mismatch");
    check(initial_dist.size() == std::size_t(n_states), "Mdp: initial_dist size mismatch");
    if (enforce_reward_bound) {
        for (double rv : reward)
            check(std::abs(rv) <= r_max + 1e-12, "Mdp: reward exceeds r_max");
    }
    for (int x = 0; x < n_states; ++x)
        for (int a = 0; a < n_actions; ++a) renormalize_row(row(x, a), "Mdp transition");
    renormalize_row(initial_dist, "Mdp initial_dist");
}

Policy Policy::from_actions(const std::vector<int>& actions, int n_actions) {
    Policy pi;
    pi.n_states = int(actions.size());
    pi.n_actions = n_actions;
    pi.deterministic = true;
    pi.action_dist.assign(std::size_t(pi.n_states) * n_actions, 0.0);
    for (int x = 0; x < pi.n_states; ++x) {
        if (actions[x] < 0 || actions[x] >= n_actions)
            throw std::invalid_argument("Policy: action index out of range");
        pi.action_dist[std::size_t(x) * n_actions + actions[x]] = 1.0;
    }
    return pi;
}

Policy Policy::stochastic(int n_states, int n_actions, std::vector<double> dist) {
    Policy pi;
    pi.n_states = n_states;
    pi.n_actions = n_actions;
    pi.deterministic = false;
    pi.action_dist = std::move(dist);
    pi.validate();
    return pi;
}

int Policy::action(int x) const {
    auto r = row(x);
    for (int a = 0; a < n_actions; ++a)
        if (r[a] == 1.0) return a;
    // stochastic row: most probable action, lowest index on ties
    int best = 0;
    for (int a = 1; a < n_actions; ++a)
        if (r[a] > r[best]) best = a;
    return best;
}

void Policy::validate() const {
    if (action_dist.size() != std::size_t(n_states) * n_actions)
        throw std::invalid_argument("Policy: dimension mismatch");
    for (int x = 0; x < n_states; ++x) {
        double sum = 0.0;
        int ones = 0;
        for (double p : row(x)) {
            if (p < 0.0) throw std::invalid_argument("Policy: negative probability");
            if (p == 1.0) ++ones;
            sum += p;
        }
        if (std::abs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("Policy: row does not sum to 1");
        if (deterministic && ones != 1)
            throw std::invalid_argument("Policy: deterministic rows must be one-hot");
    }
}

bool Policy::same_rows(const Policy& other, int x) const {
    auto a = row(x);
    auto b = other.row(x);
    for (int i = 0; i < n_actions; ++i)
        if (a[i] != b[i]) return false;
    return true;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double sup_norm_diff(std::span<const double> a, std::span<const double> b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

InducedKernel induced_kernel(const Mdp& mdp, const Policy& pi) {
    if (pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions)
        throw std::invalid_argument("induced_kernel: policy/MDP dimension mismatch");
    const int n = mdp.n_states;
    InducedKernel k;
    k.transition.assign(std::size_t(n) * n, 0.0);
    k.reward.assign(n, 0.0);
    for (int x = 0; x < n; ++x) {
        auto pr = pi.row(x);
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double w = pr[a];
            if (w == 0.0) continue;
            k.reward[x] += w * mdp.r(x, a);
            auto tr = mdp.row(x, a);
            for (int y = 0; y < n; ++y) k.transition[std::size_t(x) * n + y] += w * tr[y];
        }
    }
    return k;
}

namespace {

constexpr int kDirectSolveLimit = 2000;

ValueFunction solve_linear_value(const InducedKernel& k, double gamma, int n) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) A(x, y) -= gamma * k.transition[std::size_t(x) * n + y];
    Eigen::VectorXd b(n);
    for (int x = 0; x < n; ++x) b(x) = k.reward[x];
    Eigen::VectorXd v = A.partialPivLu().solve(b);
    return ValueFunction(v.data(), v.data() + n);
}

} // namespace

ValueFunction evaluate_policy(const Mdp& mdp, const Policy& pi) {
    const int n = mdp.n_states;
    const double gamma = mdp.discount;
    InducedKernel k = induced_kernel(mdp, pi);
    if (n <= kDirectSolveLimit) return solve_linear_value(k, gamma, n);

    const double target = 1e-10 * mdp.r_max / (1.0 - gamma);
    ValueFunction v(n, 0.0), next(n, 0.0);
    for (int iter = 0; iter < 1000000; ++iter) {
        for (int x = 0; x < n; ++x)
            next[x] = k.reward[x] +
                      gamma * dot({k.transition.data() + std::size_t(x) * n, std::size_t(n)}, v);
        const double diff = sup_norm_diff(next, v);
        v.swap(next);
        if (diff * gamma / (1.0 - gamma) <= target) break;
    }
    return v;
}

double return_of(const Mdp& mdp, const Policy& pi) {
    return dot(mdp.initial_dist, evaluate_policy(mdp, pi));
}

OptimalSolution solve_optimal(const Mdp& mdp, double tol) {
    const int n = mdp.n_states;
    const double gamma = mdp.discount;
    const double stop = tol * (1.0 - gamma) / (2.0 * gamma);

    ValueFunction v(n, 0.0), next(n, 0.0);
    for (int iter = 0; iter < 10000000; ++iter) {
        for (int x = 0; x < n; ++x) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < mdp.n_actions; ++a)
                best = std::max(best, mdp.r(x, a) + gamma * dot(mdp.row(x, a), v));
            next[x] = best;
        }
        const double diff = sup_norm_diff(next, v);
        v.swap(next);
        if (diff <= stop) break;
    }
    std::vector<int> greedy(n, 0);
    for (int x = 0; x < n; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double q = mdp.r(x, a) + gamma * dot(mdp.row(x, a), v);
            if (q > best + 1e-13) {
                best = q;
                greedy[x] = a;
            }
        }
    }
    OptimalSolution sol;
    sol.policy = Policy::from_actions(greedy, mdp.n_actions);
    sol.value = evaluate_policy(mdp, sol.policy);
    return sol;
}

Occupancy occupancy(const Mdp& mdp, const Policy& pi) {
    const int n = mdp.n_states;
    const double gamma = mdp.discount;
    InducedKernel k = induced_kernel(mdp, pi);
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n);
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) A(y, x) -= gamma * k.transition[std::size_t(x) * n + y];
    Eigen::VectorXd b(n);
    for (int x = 0; x < n; ++x) b(x) = (1.0 - gamma) * mdp.initial_dist[x];
    Eigen::VectorXd u = A.partialPivLu().solve(b);
    Occupancy out(u.data(), u.data() + n);
    for (double& w : out) w = std::max(w, 0.0);
    return out;
}

} // namespace safemdp
