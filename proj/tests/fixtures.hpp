#pragma once

// Shared hand-constructed instances and random-instance generators used by
// the unit tests and the acceptance harness.

#include "safemdp/core.hpp"
#include "safemdp/rng.hpp"
#include "safemdp/uncertainty.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace safemdp::fixtures {

inline Mdp make_mdp(int n, int na, double gamma, double r_max) {
    Mdp m;
    m.n_states = n;
    m.n_actions = na;
    m.discount = gamma;
    m.r_max = r_max;
    m.reward.assign(std::size_t(n) * na, 0.0);
    m.transition.assign(std::size_t(n) * na * n, 0.0);
    m.initial_dist.assign(n, 0.0);
    return m;
}

inline void set_row(Mdp& m, int x, int a, const std::vector<double>& p) {
    auto row = m.row(x, a);
    for (int y = 0; y < m.n_states; ++y) row[y] = p[y];
}

inline void self_loop(Mdp& m, int x, int a, double r) {
    m.r(x, a) = r;
    m.row(x, a)[x] = 1.0;
}

/// Single state, single action, r = 1, gamma = 0.9: V = 10.
inline Mdp single_state() {
    Mdp m = make_mdp(1, 1, 0.9, 1.0);
    self_loop(m, 0, 0, 1.0);
    m.initial_dist = {1.0};
    m.validate();
    return m;
}

/// Chain: s0 -> s1 (r=0), s1 self-loop (r=1), gamma = 0.5: V = [1, 2].
inline Mdp chain2() {
    Mdp m = make_mdp(2, 1, 0.5, 1.0);
    m.r(0, 0) = 0.0;
    set_row(m, 0, 0, {0.0, 1.0});
    self_loop(m, 1, 0, 1.0);
    m.initial_dist = {1.0, 0.0};
    m.validate();
    return m;
}

/// Chain plus a second action b at s0: self-loop r = 0.9; optimal picks b,
/// V(s0) = 1.8.
inline Mdp chain2_with_b() {
    Mdp m = make_mdp(2, 2, 0.5, 1.0);
    m.r(0, 0) = 0.0;
    set_row(m, 0, 0, {0.0, 1.0});
    self_loop(m, 0, 1, 0.9);
    m.r(1, 0) = 1.0;
    set_row(m, 1, 0, {0.0, 1.0});
    m.r(1, 1) = 1.0;
    set_row(m, 1, 1, {0.0, 1.0});
    m.initial_dist = {1.0, 0.0};
    m.validate();
    return m;
}

/// Two absorbing states: g (r=1, nominal row [1,0], e=0.2) and b (r=0, e=0),
/// gamma = 0.5. Robust fixed point: V(g) = 1/(1-0.45), V(b) = 0.
inline UncertaintySet robust2() {
    Mdp m = make_mdp(2, 1, 0.5, 1.0);
    self_loop(m, 0, 0, 1.0);
    self_loop(m, 1, 0, 0.0);
    m.initial_dist = {1.0, 0.0};
    m.validate();
    ErrorFunction e = ErrorFunction::zero(2, 1);
    e.at(0, 0) = 0.2;
    UncertaintySet set{std::move(m), std::move(e)};
    set.validate();
    return set;
}

/// A two-branch uncertain tail shared by the fixtures below: s1's single
/// effective action splits mass xi-hat to a good absorbing state and the rest
/// to a bad one, with an L1 budget around xi-hat.
///
/// Conservative-rejection instance: both actions at s0 lead to the same
/// uncertain tail, but a1 pays +1 immediately. a1 therefore dominates a0 by
/// exactly +1 under EVERY member of the uncertainty set, yet the robust
/// method compares a1's worst case against the baseline's true-model return
/// and rejects.
/// States: s0=0, s1=1, G=2, B=3. Actions: a0 (baseline), a1.
struct DominatedRejection {
    UncertaintySet set;
    Policy baseline;       // a0 everywhere
    Policy improving;      // a1 at s0, a0 elsewhere
    std::vector<double> true_transition; // planted member: xi* = 0.7
    double baseline_return = 0.0;        // rho(baseline, true model)
};

inline DominatedRejection dominated_rejection() {
    Mdp m = make_mdp(4, 2, 0.9, 1.0);
    // s0: both actions move to s1; a1 pays +1.
    m.r(0, 0) = 0.0;
    set_row(m, 0, 0, {0.0, 1.0, 0.0, 0.0});
    m.r(0, 1) = 1.0;
    set_row(m, 0, 1, {0.0, 1.0, 0.0, 0.0});
    // s1: nominal split 0.5/0.5 between G and B, both actions identical.
    for (int a = 0; a < 2; ++a) {
        m.r(1, a) = 0.0;
        set_row(m, 1, a, {0.0, 0.0, 0.5, 0.5});
    }
    // G: +1 absorbing; B: -1 absorbing.
    for (int a = 0; a < 2; ++a) {
        self_loop(m, 2, a, 1.0);
        self_loop(m, 3, a, -1.0);
    }
    m.initial_dist = {1.0, 0.0, 0.0, 0.0};
    m.validate();

    ErrorFunction e = ErrorFunction::zero(4, 2);
    e.at(1, 0) = 0.4; // xi ranges over [0.3, 0.7]
    e.at(1, 1) = 0.4;

    DominatedRejection f;
    f.set = UncertaintySet{std::move(m), std::move(e)};
    f.set.validate();
    f.baseline = Policy::from_actions({0, 0, 0, 0}, 2);
    f.improving = Policy::from_actions({1, 0, 0, 0}, 2);
    f.true_transition = f.set.nominal.transition;
    for (int a = 0; a < 2; ++a) {
        auto row = std::span<double>{
            f.true_transition.data() + (std::size_t(1) * 2 + a) * 4, 4};
        row[2] = 0.7; // favorable true split
        row[3] = 0.3;
    }
    // rho(baseline, true) = gamma * V_true(s1) = 0.9 * (0.9*10*(2*0.7-1)).
    f.baseline_return = 0.9 * (0.9 * 10.0 * 0.4);
    return f;
}

/// Shared-tail instance: a1 at s0 collects +10 before an uncertain tail that
/// both policies then traverse identically, so the improvement is exactly
/// 10 * p0(s0) under every member. The decoupled robust comparison rejects;
/// the coupled regret certificate recovers the full +10.
/// States: s0=0, s1=1, G=2, B=3. Actions: a0 (baseline), a1.
struct SharedTail {
    UncertaintySet set;
    Policy baseline;
    Policy improving;
    std::vector<double> true_transition; // xi* = 0.7
    double baseline_return = 0.0;
};

inline SharedTail shared_tail() {
    Mdp m = make_mdp(4, 2, 0.9, 10.0);
    m.r(0, 0) = 0.0;
    set_row(m, 0, 0, {0.0, 1.0, 0.0, 0.0});
    m.r(0, 1) = 10.0;
    set_row(m, 0, 1, {0.0, 1.0, 0.0, 0.0});
    for (int a = 0; a < 2; ++a) {
        m.r(1, a) = 0.0;
        set_row(m, 1, a, {0.0, 0.0, 0.5, 0.5});
        self_loop(m, 2, a, 10.0);
        self_loop(m, 3, a, -10.0);
    }
    m.initial_dist = {1.0, 0.0, 0.0, 0.0};
    m.validate();

    ErrorFunction e = ErrorFunction::zero(4, 2);
    e.at(1, 0) = 0.4;
    e.at(1, 1) = 0.4;

    SharedTail f;
    f.set = UncertaintySet{std::move(m), std::move(e)};
    f.set.validate();
    f.baseline = Policy::from_actions({0, 0, 0, 0}, 2);
    f.improving = Policy::from_actions({1, 0, 0, 0}, 2);
    f.true_transition = f.set.nominal.transition;
    for (int a = 0; a < 2; ++a) {
        auto row = std::span<double>{
            f.true_transition.data() + (std::size_t(1) * 2 + a) * 4, 4};
        row[2] = 0.7;
        row[3] = 0.3;
    }
    f.baseline_return = 0.9 * (0.9 * 100.0 * 0.4);
    return f;
}

/// Two independent components started with equal probability: u0 has precise
/// rows (a1 pays 0.5 per step), w0 has a vacuously uncertain improving action
/// (a1 pays 0.6 nominally but the adversary can divert all mass to the -1
/// absorbing state D). The best certified policy optimizes u0 and keeps the
/// baseline at w0.
/// States: u0=0, w0=1, D=2. Actions: a0 (baseline), a1.
struct TwoComponent {
    UncertaintySet set;
    Policy baseline;
    double expected_certificate = 0.0; // 0.5 * 0.5 / (1 - 0.9)
};

inline TwoComponent two_component() {
    Mdp m = make_mdp(3, 2, 0.9, 1.0);
    self_loop(m, 0, 0, 0.0);
    self_loop(m, 0, 1, 0.5);
    self_loop(m, 1, 0, 0.0);
    self_loop(m, 1, 1, 0.6);
    self_loop(m, 2, 0, -1.0);
    self_loop(m, 2, 1, -1.0);
    m.initial_dist = {0.5, 0.5, 0.0};
    m.validate();

    ErrorFunction e = ErrorFunction::zero(3, 2);
    e.at(1, 1) = 2.0; // the improving action at w0 is vacuously uncertain

    TwoComponent f;
    f.set = UncertaintySet{std::move(m), std::move(e)};
    f.set.validate();
    f.baseline = Policy::from_actions({0, 0, 0}, 2);
    f.expected_certificate = 0.5 * 0.5 / (1.0 - 0.9);
    return f;
}

/// Tightness instance: one decision state with two uncertain two-outcome
/// actions into +/-Rmax absorbing states. Budgets and the true split are
/// chosen so the worst-case improvement of switching is exactly 0 (the
/// certified method must keep the baseline) while the baseline's true loss
/// equals the additive error-norm bound exactly.
/// States: s0=0, H=1 (+1 absorbing), L=2 (-1 absorbing). gamma=0.9.
/// a0 (baseline): nominal h=0.3, e=0.2 -> h in [0.2, 0.4]; true h=0.2.
/// a1: nominal h=0.5, e=0.2 -> h in [0.4, 0.6]; true h=0.6.
struct Tightness {
    UncertaintySet set;
    Policy baseline;
    Policy switching; // a1 at s0
    std::vector<double> true_transition;
    Mdp true_mdp;
    double baseline_loss = 0.0; // Phi(baseline) on the true model = 7.2
};

inline Tightness tightness() {
    Mdp m = make_mdp(3, 2, 0.9, 1.0);
    m.r(0, 0) = 0.0;
    set_row(m, 0, 0, {0.0, 0.3, 0.7});
    m.r(0, 1) = 0.0;
    set_row(m, 0, 1, {0.0, 0.5, 0.5});
    for (int a = 0; a < 2; ++a) {
        self_loop(m, 1, a, 1.0);
        self_loop(m, 2, a, -1.0);
    }
    m.initial_dist = {1.0, 0.0, 0.0};
    m.validate();

    ErrorFunction e = ErrorFunction::zero(3, 2);
    e.at(0, 0) = 0.2;
    e.at(0, 1) = 0.2;

    Tightness f;
    f.set = UncertaintySet{std::move(m), std::move(e)};
    f.set.validate();
    f.baseline = Policy::from_actions({0, 0, 0}, 2);
    f.switching = Policy::from_actions({1, 0, 0}, 2);
    f.true_transition = f.set.nominal.transition;
    {
        auto r0 = std::span<double>{f.true_transition.data() + 0, 3};
        r0[1] = 0.2;
        r0[2] = 0.8;
        auto r1 = std::span<double>{f.true_transition.data() + 3, 3};
        r1[1] = 0.6;
        r1[2] = 0.4;
    }
    f.true_mdp = with_transition(f.set.nominal, f.true_transition);
    // rho(a1, true) - rho(a0, true) = 9*(2*0.6-1) - 9*(2*0.2-1) = 1.8+5.4.
    f.baseline_loss = 7.2;
    return f;
}

/// Reward adjustment over-penalizes a high-budget state whose successors all
/// have equal value: the adjusted method falls back to the baseline while
/// the robust method accepts the pass-through route.
/// States: s0=0, s1=1, G=2. Actions: a0 (baseline self-loop r=0.3),
/// a1 (r=0 -> s1); s1 has budget e=1 around the deterministic hop to G
/// (r=0.6 absorbing).
struct Overpenalized {
    UncertaintySet set;
    Policy baseline;
    double baseline_return = 3.0; // rho(a0, nominal) = 0.3 / 0.1
};

inline Overpenalized overpenalized() {
    Mdp m = make_mdp(3, 2, 0.9, 1.0);
    self_loop(m, 0, 0, 0.3);
    m.r(0, 1) = 0.0;
    set_row(m, 0, 1, {0.0, 1.0, 0.0});
    for (int a = 0; a < 2; ++a) {
        m.r(1, a) = 0.0;
        set_row(m, 1, a, {0.0, 0.0, 1.0});
        self_loop(m, 2, a, 0.6);
    }
    m.initial_dist = {1.0, 0.0, 0.0};
    m.validate();

    ErrorFunction e = ErrorFunction::zero(3, 2);
    e.at(1, 0) = 1.0;
    e.at(1, 1) = 1.0;

    Overpenalized f;
    f.set = UncertaintySet{std::move(m), std::move(e)};
    f.set.validate();
    f.baseline = Policy::from_actions({0, 0, 0}, 2);
    return f;
}

/// Small feasible instance for the saddle-point search: independent
/// self-loop states with modest budgets. The baseline return is far below
/// the worst-case value of every greedy augmented policy, so the improvement
/// constraint is strictly slack at every multiplier and the subgradient
/// iteration drives lambda to 0 and keeps it there.
struct Feasible {
    UncertaintySet set;
    Policy baseline;
    double baseline_return = 0.0;
};

inline Feasible feasible_saddle() {
    Mdp m = make_mdp(2, 2, 0.9, 1.0);
    // a1 dominates a0 at both states on identical self-loop transitions, so
    // the greedy augmented policy is the same at every multiplier and its
    // worst-case true-side return stays far above the baseline.
    self_loop(m, 0, 0, 0.0);
    self_loop(m, 0, 1, 0.8);
    self_loop(m, 1, 0, 0.02);
    self_loop(m, 1, 1, 0.7);
    m.initial_dist = {0.5, 0.5};
    m.validate();
    ErrorFunction e = ErrorFunction::uniform(2, 2, 0.1);

    Feasible f;
    f.set = UncertaintySet{std::move(m), std::move(e)};
    f.set.validate();
    f.baseline = Policy::from_actions({0, 0}, 2);
    // rho(baseline, nominal) = 0.5*0 + 0.5*0.2 = 0.1.
    f.baseline_return = 0.1;
    return f;
}

/// Random dense MDP with rewards in [-1, 1], random transition rows, a
/// random initial distribution, and budgets e(x,a) ~ U[0, max_budget].
struct RandomInstance {
    UncertaintySet set;
    Policy baseline;
};

inline std::vector<double> random_dist(SplitMix64& g, int n) {
    std::vector<double> p(n);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        p[i] = -std::log(1.0 - g.uniform01() + 1e-300);
        total += p[i];
    }
    for (int i = 0; i < n; ++i) p[i] /= total;
    // renormalize exactly
    double s = 0.0;
    for (int i = 0; i + 1 < n; ++i) s += p[i];
    p[n - 1] = 1.0 - s;
    if (p[n - 1] < 0.0) p[n - 1] = 0.0;
    return p;
}

inline RandomInstance random_instance(std::uint64_t seed, int n = 4, int na = 3,
                                      double gamma = 0.85, double max_budget = 0.6) {
    SplitMix64 g(seed);
    Mdp m = make_mdp(n, na, gamma, 1.0);
    for (int x = 0; x < n; ++x)
        for (int a = 0; a < na; ++a) {
            m.r(x, a) = 2.0 * g.uniform01() - 1.0;
            set_row(m, x, a, random_dist(g, n));
        }
    m.initial_dist = random_dist(g, n);
    m.validate();

    ErrorFunction e = ErrorFunction::zero(n, na);
    for (int x = 0; x < n; ++x)
        for (int a = 0; a < na; ++a) e.at(x, a) = max_budget * g.uniform01();

    RandomInstance inst;
    inst.set = UncertaintySet{std::move(m), std::move(e)};
    inst.set.validate();
    std::vector<int> acts(n);
    for (int x = 0; x < n; ++x) acts[x] = int(g.uniform_int(std::uint64_t(na)));
    inst.baseline = Policy::from_actions(acts, na);
    return inst;
}

/// Random stochastic or deterministic policy.
inline Policy random_policy(SplitMix64& g, int n, int na) {
    if (g.uniform01() < 0.5) {
        std::vector<int> acts(n);
        for (int x = 0; x < n; ++x) acts[x] = int(g.uniform_int(std::uint64_t(na)));
        return Policy::from_actions(acts, na);
    }
    std::vector<double> dist;
    dist.reserve(std::size_t(n) * na);
    for (int x = 0; x < n; ++x) {
        auto row = random_dist(g, na);
        dist.insert(dist.end(), row.begin(), row.end());
    }
    return Policy::stochastic(n, na, std::move(dist));
}

} // namespace safemdp::fixtures
