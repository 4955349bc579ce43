#include "safemdp/uncertainty.hpp"

#include "safemdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace safemdp {

ErrorFunction ErrorFunction::zero(int n_states, int n_actions) {
    return uniform(n_states, n_actions, 0.0);
}

ErrorFunction ErrorFunction::uniform(int n_states, int n_actions, double e) {
    ErrorFunction f;
    f.n_states = n_states;
    f.n_actions = n_actions;
    f.budget.assign(std::size_t(n_states) * n_actions, e);
    f.validate();
    return f;
}

double ErrorFunction::max_budget() const {
    double m = 0.0;
    for (double e : budget) m = std::max(m, e);
    return m;
}

void ErrorFunction::validate() const {
    if (budget.size() != std::size_t(n_states) * n_actions)
        throw std::invalid_argument("ErrorFunction: dimension mismatch");
    for (double e : budget)
        if (e < 0.0 || e > 2.0)
            throw std::invalid_argument("ErrorFunction: budget outside [0, 2]");
}

std::int64_t CountTable::visits(int x, int a) const {
    const auto* base = counts.data() + (std::size_t(x) * n_actions + a) * n_states;
    return std::accumulate(base, base + n_states, std::int64_t(0));
}

std::vector<double> CountTable::empirical_row(int x, int a) const {
    const std::int64_t n = visits(x, a);
    std::vector<double> row(n_states);
    if (n == 0) {
        std::fill(row.begin(), row.end(), 1.0 / n_states);
        return row;
    }
    const auto* base = counts.data() + (std::size_t(x) * n_actions + a) * n_states;
    for (int y = 0; y < n_states; ++y) row[y] = double(base[y]) / double(n);
    return row;
}

std::int64_t CountTable::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t(0));
}

void UncertaintySet::validate() {
    nominal.validate();
    error.validate();
    if (error.n_states != nominal.n_states || error.n_actions != nominal.n_actions)
        throw std::invalid_argument("UncertaintySet: error dimensions mismatch");
}

ErrorFunction error_from_counts(const CountTable& counts, double delta, int n_states,
                                int n_actions) {
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("error_from_counts: delta must be in (0,1)");
    if (counts.n_states != n_states || counts.n_actions != n_actions)
        throw std::invalid_argument("error_from_counts: dimension mismatch");

    // ln(|X||A| (2^|X| - 2) / delta), computed in log space so large state
    // spaces do not overflow. A single-state space has exactly one possible
    // row, so the concentration term vanishes.
    const double m = double(n_states);
    const double log_pow = m * std::log(2.0) + std::log1p(-std::pow(2.0, 1.0 - m));
    const double log_term = n_states < 2
                                ? 0.0
                                : std::log(double(n_states) * double(n_actions)) +
                                      log_pow - std::log(delta);

    ErrorFunction f;
    f.n_states = n_states;
    f.n_actions = n_actions;
    f.budget.resize(std::size_t(n_states) * n_actions);
    for (int x = 0; x < n_states; ++x)
        for (int a = 0; a < n_actions; ++a) {
            const std::int64_t n = counts.visits(x, a);
            double e = n == 0 ? 2.0 : std::sqrt(std::max(0.0, 2.0 / double(n) * log_term));
            f.at(x, a) = std::clamp(e, 0.0, 2.0);
        }
    return f;
}

WorstCaseRow worst_case_response(std::span<const double> nominal_row, double budget,
                                 std::span<const double> values) {
    const int n = int(nominal_row.size());
    if (int(values.size()) != n)
        throw std::invalid_argument("worst_case_response: dimension mismatch");
    if (budget < 0.0) throw std::invalid_argument("worst_case_response: negative budget");
    double sum = 0.0;
    for (double p : nominal_row) {
        if (p < -1e-12) throw std::invalid_argument("worst_case_response: invalid distribution");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
        throw std::invalid_argument("worst_case_response: row does not sum to 1");

    const double e = std::min(budget, 2.0);

    int receiver = 0;
    for (int i = 1; i < n; ++i)
        if (values[i] < values[receiver]) receiver = i;

    WorstCaseRow out;
    out.row.assign(nominal_row.begin(), nominal_row.end());
    const double eps = std::min(e / 2.0, 1.0 - out.row[receiver]);
    out.row[receiver] += eps;

    // donors in descending value, ties to the lowest index
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (values[a] != values[b]) return values[a] > values[b];
        return a < b;
    });
    double remaining = eps;
    for (int j : order) {
        if (j == receiver) continue;
        const double take = std::min(out.row[j], remaining);
        out.row[j] -= take;
        remaining -= take;
        if (remaining <= 0.0) break;
    }
    out.value = dot(out.row, values);
    return out;
}

bool contains(const UncertaintySet& set, std::span<const double> candidate) {
    const Mdp& m = set.nominal;
    if (candidate.size() != m.transition.size())
        throw std::invalid_argument("contains: transition dimension mismatch");
    const int n = m.n_states;
    for (int x = 0; x < n; ++x)
        for (int a = 0; a < m.n_actions; ++a) {
            const auto* base = candidate.data() + (std::size_t(x) * m.n_actions + a) * n;
            std::span<const double> row{base, std::size_t(n)};
            double sum = 0.0;
            for (double p : row) {
                if (p < -1e-12) return false;
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTol) return false;
            if (l1_distance(row, m.row(x, a)) > set.error.at(x, a) + 1e-12) return false;
        }
    return true;
}

double mirror_membership_bound(const UncertaintySet& set, std::span<const double> p1,
                               std::span<const double> p2) {
    if (!contains(set, p1) || !contains(set, p2))
        throw std::invalid_argument("mirror_membership_bound: membership violated");
    const int n = set.nominal.n_states;
    double worst = 0.0;
    for (std::size_t r = 0; r < p1.size(); r += n)
        worst = std::max(worst, l1_distance(p1.subspan(r, n), p2.subspan(r, n)));
    return worst;
}

std::vector<double> random_member(const UncertaintySet& set, std::uint64_t seed) {
    const Mdp& m = set.nominal;
    const int n = m.n_states;
    SplitMix64 rng(seed);
    std::vector<double> model(m.transition.size());
    for (int x = 0; x < n; ++x)
        for (int a = 0; a < m.n_actions; ++a) {
            auto nom = m.row(x, a);
            std::vector<double> q(nom.begin(), nom.end());
            // Random mass moves; the conservative L1 accounting (2 * moved
            // mass) keeps the row inside the budget.
            double remaining = set.error.at(x, a);
            for (int k = 0; k < 2 * n && remaining > 1e-15; ++k) {
                const int i = int(rng.uniform_int(std::uint64_t(n)));
                const int j = int(rng.uniform_int(std::uint64_t(n)));
                if (i == j) continue;
                const double d =
                    rng.uniform01() * std::min({remaining / 2.0, q[i], 1.0 - q[j]});
                q[i] -= d;
                q[j] += d;
                remaining -= 2.0 * d;
            }
            std::copy(q.begin(), q.end(),
                      model.begin() + (std::size_t(x) * m.n_actions + a) * n);
        }
    return model;
}

Mdp with_transition(const Mdp& base, std::span<const double> transition) {
    Mdp m = base;
    if (transition.size() != m.transition.size())
        throw std::invalid_argument("with_transition: dimension mismatch");
    m.transition.assign(transition.begin(), transition.end());
    m.validate();
    return m;
}

} // namespace safemdp
