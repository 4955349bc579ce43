#include "safemdp/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace safemdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// All per-row extreme candidates: the nominal row plus, for every receiver
// coordinate and every donor order, the row that shifts min(e/2, headroom)
// mass onto the receiver.
std::vector<std::vector<double>> row_extremes(std::span<const double> nominal, double budget) {
    const int n = int(nominal.size());
    std::vector<std::vector<double>> out;
    out.emplace_back(nominal.begin(), nominal.end());
    if (budget <= 0.0) return out;
    const double e = std::min(budget, 2.0);

    for (int recv = 0; recv < n; ++recv) {
        std::vector<int> donors;
        for (int i = 0; i < n; ++i)
            if (i != recv) donors.push_back(i);
        std::sort(donors.begin(), donors.end());
        do {
            std::vector<double> row(nominal.begin(), nominal.end());
            const double eps = std::min(e / 2.0, 1.0 - row[recv]);
            row[recv] += eps;
            double remaining = eps;
            for (int d : donors) {
                const double take = std::min(row[d], remaining);
                row[d] -= take;
                remaining -= take;
                if (remaining <= 0.0) break;
            }
            out.push_back(std::move(row));
        } while (std::next_permutation(donors.begin(), donors.end()));
    }
    return out;
}

} // namespace

double brute_force_worst_response(std::span<const double> nominal_row, double budget,
                                  std::span<const double> values, double grid_step) {
    const int n = int(nominal_row.size());
    if (int(values.size()) != n)
        throw std::invalid_argument("brute_force_worst_response: dimension mismatch");
    if (n > 4)
        throw std::invalid_argument("brute_force_worst_response: dimension too large");
    if (grid_step <= 0.0)
        throw std::invalid_argument("brute_force_worst_response: invalid grid step");
    const double e = std::min(std::max(budget, 0.0), 2.0);

    double best = dot(nominal_row, values);

    // Greedy refinement: exact among extreme points.
    for (const auto& row : row_extremes(nominal_row, e))
        best = std::min(best, dot(row, values));

    // Dense grid over the simplex in integer steps of h.
    const double h = n >= 4 ? std::max(grid_step, 0.02) : grid_step;
    const int steps = int(std::lround(1.0 / h));
    std::vector<double> p(n, 0.0);
    auto feasible_value = [&]() {
        double l1 = 0.0;
        for (int i = 0; i < n; ++i) l1 += std::abs(p[i] - nominal_row[i]);
        if (l1 > e + 1e-12) return;
        best = std::min(best, dot(p, values));
    };
    if (n == 1) {
        p[0] = 1.0;
        feasible_value();
    } else if (n == 2) {
        for (int i = 0; i <= steps; ++i) {
            p[0] = double(i) / steps;
            p[1] = 1.0 - p[0];
            feasible_value();
        }
    } else if (n == 3) {
        for (int i = 0; i <= steps; ++i)
            for (int j = 0; j <= steps - i; ++j) {
                p[0] = double(i) / steps;
                p[1] = double(j) / steps;
                p[2] = 1.0 - p[0] - p[1];
                feasible_value();
            }
    } else {
        for (int i = 0; i <= steps; ++i)
            for (int j = 0; j <= steps - i; ++j)
                for (int k = 0; k <= steps - i - j; ++k) {
                    p[0] = double(i) / steps;
                    p[1] = double(j) / steps;
                    p[2] = double(k) / steps;
                    p[3] = 1.0 - p[0] - p[1] - p[2];
                    feasible_value();
                }
    }
    return best;
}

std::pair<Policy, double> enumerate_optimal_policy(const Mdp& mdp) {
    const int n = mdp.n_states;
    const int na = mdp.n_actions;
    double combos = std::pow(double(na), double(n));
    if (combos > 1e6)
        throw std::invalid_argument("enumerate_optimal_policy: instance too large");

    std::vector<int> actions(n, 0);
    Policy best_pi;
    double best = -kInf;
    for (;;) {
        Policy pi = Policy::from_actions(actions, na);
        const double rho = return_of(mdp, pi);
        if (rho > best + 1e-15) {
            best = rho;
            best_pi = pi;
        }
        int k = n - 1;
        while (k >= 0 && actions[k] == na - 1) actions[k--] = 0;
        if (k < 0) break;
        ++actions[k];
    }
    return {best_pi, best};
}

namespace {

// Minimize `objective` over the Cartesian product of extreme candidates for
// every row in `rows`, editing a scratch transition table in place.
double candidate_product_min(const UncertaintySet& set, const std::vector<int>& rows,
                             const std::function<double(const std::vector<double>&)>& objective) {
    const Mdp& m = set.nominal;
    const int n = m.n_states;
    const int na = m.n_actions;

    std::vector<std::vector<std::vector<double>>> cands;
    double total = 1.0;
    for (int idx : rows) {
        const int x = idx / na, a = idx % na;
        cands.push_back(row_extremes(m.row(x, a), set.error.at(x, a)));
        total *= double(cands.back().size());
        if (total > 2e5)
            throw std::invalid_argument("oracle: candidate product too large");
    }

    std::vector<double> p = m.transition;
    std::vector<std::size_t> pick(rows.size(), 0);
    double best = kInf;
    for (;;) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& row = cands[i][pick[i]];
            std::copy(row.begin(), row.end(), p.begin() + std::size_t(rows[i]) * n);
        }
        best = std::min(best, objective(p));
        int k = int(rows.size()) - 1;
        while (k >= 0 && pick[k] == cands[k].size() - 1) pick[k--] = 0;
        if (k < 0) break;
        ++pick[k];
    }
    return best;
}

std::vector<int> support_rows(const Mdp& m, const Policy& pi, const Policy* pi2) {
    std::vector<int> rows;
    for (int x = 0; x < m.n_states; ++x)
        for (int a = 0; a < m.n_actions; ++a) {
            const bool used =
                pi.row(x)[a] > 0.0 || (pi2 != nullptr && pi2->row(x)[a] > 0.0);
            if (used) rows.push_back(x * m.n_actions + a);
        }
    return rows;
}

} // namespace

double brute_force_robust_return(const UncertaintySet& set, const Policy& pi) {
    const Mdp& m = set.nominal;
    if (pi.n_states != m.n_states || pi.n_actions != m.n_actions)
        throw std::invalid_argument("brute_force_robust_return: dimension mismatch");
    return candidate_product_min(set, support_rows(m, pi, nullptr),
                                 [&](const std::vector<double>& p) {
                                     Mdp cur = m;
                                     cur.transition = p;
                                     return return_of(cur, pi);
                                 });
}

double brute_force_coupled_min(const UncertaintySet& set, const Policy& pi,
                               const Policy& baseline) {
    const Mdp& m = set.nominal;
    if (m.n_states > 4 || m.n_actions > 2)
        throw std::invalid_argument("brute_force_coupled_min: instance too large");
    if (pi.n_states != m.n_states || pi.n_actions != m.n_actions ||
        baseline.n_states != m.n_states || baseline.n_actions != m.n_actions)
        throw std::invalid_argument("brute_force_coupled_min: dimension mismatch");
    return candidate_product_min(set, support_rows(m, pi, &baseline),
                                 [&](const std::vector<double>& p) {
                                     Mdp cur = m;
                                     cur.transition = p;
                                     return return_of(cur, pi) - return_of(cur, baseline);
                                 });
}

} // namespace safemdp
