#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "fixtures.hpp"
#include "safemdp/bounds.hpp"
#include "safemdp/oracle.hpp"
#include "safemdp/rng.hpp"
#include "safemdp/robust.hpp"
#include "safemdp/safe_policy.hpp"

#include <cmath>
#include <stdexcept>

using namespace safemdp;
using namespace safemdp::fixtures;

TEST_CASE("performance_loss") {
    RandomInstance inst = random_instance(30);
    const Mdp& m = inst.set.nominal;
    SUBCASE("zero at the optimum") {
        OptimalSolution opt = solve_optimal(m);
        CHECK(performance_loss(m, opt.policy) == doctest::Approx(0.0).epsilon(1e-7));
    }
    SUBCASE("single-action degenerate") {
        Mdp c = chain2();
        CHECK(performance_loss(c, Policy::from_actions({0, 0}, 1)) ==
              doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("matches the enumeration oracle") {
        auto [pi_star, rho_star] = enumerate_optimal_policy(m);
        SplitMix64 g(2);
        Policy pi = random_policy(g, m.n_states, m.n_actions);
        CHECK(performance_loss(m, pi) ==
              doctest::Approx(rho_star - return_of(m, pi)).epsilon(1e-7));
    }
}

TEST_CASE("lemma1_bound") {
    SUBCASE("zero budget") {
        RandomInstance inst = random_instance(31);
        const Mdp& m = inst.set.nominal;
        ErrorFunction zero = ErrorFunction::zero(m.n_states, m.n_actions);
        CHECK(lemma1_bound(m, zero, inst.baseline) == doctest::Approx(0.0));
    }
    SUBCASE("single-state closed form") {
        Mdp m = single_state();
        ErrorFunction e = ErrorFunction::uniform(1, 1, 0.1);
        Policy pi = Policy::from_actions({0}, 1);
        // (gamma Rmax/(1-gamma)) * (1/(1-gamma)) * e = 9 * 10 * 0.1 = 9.
        CHECK(lemma1_bound(m, e, pi) == doctest::Approx(9.0).epsilon(1e-9));
    }
    SUBCASE("bounds the return gap over sampled simulators") {
        for (int k = 0; k < 20; ++k) {
            RandomInstance inst = random_instance(20000 + k, 3, 2);
            const Mdp& truth = inst.set.nominal;
            double rho_true = return_of(truth, inst.baseline);
            double bound = lemma1_bound(truth, inst.set.error, inst.baseline);
            for (int s = 0; s < 5; ++s) {
                auto p = random_member(inst.set, derive_seed(41, std::uint64_t(k * 8 + s)));
                double rho_sim = return_of(with_transition(truth, p), inst.baseline);
                CHECK(std::abs(rho_sim - rho_true) <= bound + 1e-9);
            }
        }
    }
    SUBCASE("uniform budget recovers the sup-norm specialization") {
        RandomInstance inst = random_instance(32);
        const Mdp& m = inst.set.nominal;
        double c = 0.17;
        ErrorFunction e = ErrorFunction::uniform(m.n_states, m.n_actions, c);
        double expect = m.discount * m.r_max * c / ((1.0 - m.discount) * (1.0 - m.discount));
        CHECK(lemma1_bound(m, e, inst.baseline) == doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("lemma2_bounds") {
    SUBCASE("identical inputs collapse to zero") {
        RandomInstance inst = random_instance(33, 3, 2);
        const Mdp& m = inst.set.nominal;
        std::vector<double> g(m.n_states, 0.0);
        Lemma2Sandwich s = lemma2_bounds(m, m, inst.baseline, inst.baseline, g);
        for (int x = 0; x < m.n_states; ++x) {
            CHECK(s.lower[x] == doctest::Approx(0.0).epsilon(1e-10));
            CHECK(s.upper[x] == doctest::Approx(0.0).epsilon(1e-10));
        }
    }
    SUBCASE("reward-only difference is exact") {
        RandomInstance inst = random_instance(34, 3, 2);
        Mdp m1 = inst.set.nominal;
        Mdp m2 = m1;
        SplitMix64 g(9);
        for (auto& r : m2.reward) r *= 0.5;
        std::vector<double> zero(m1.n_states, 0.0);
        Lemma2Sandwich s = lemma2_bounds(m1, m2, inst.baseline, inst.baseline, zero);
        ValueFunction v1 = evaluate_policy(m1, inst.baseline);
        ValueFunction v2 = evaluate_policy(m2, inst.baseline);
        for (int x = 0; x < m1.n_states; ++x) {
            CHECK(s.lower[x] == doctest::Approx(v1[x] - v2[x]).epsilon(1e-9));
            CHECK(s.upper[x] == doctest::Approx(v1[x] - v2[x]).epsilon(1e-9));
        }
    }
    SUBCASE("sandwich holds entrywise on random pairs") {
        for (int k = 0; k < 200; ++k) {
            RandomInstance a = random_instance(21000 + k, 3, 2);
            auto p = random_member(a.set, derive_seed(51, std::uint64_t(k)));
            Mdp m2 = with_transition(a.set.nominal, p);
            SplitMix64 g(k);
            Policy pi1 = random_policy(g, 3, 2);
            Policy pi2 = random_policy(g, 3, 2);
            InducedKernel k1 = induced_kernel(a.set.nominal, pi1);
            InducedKernel k2 = induced_kernel(m2, pi2);
            std::vector<double> gb(3);
            for (int x = 0; x < 3; ++x) {
                std::span<const double> r1{k1.transition.data() + std::size_t(x) * 3, 3};
                std::span<const double> r2{k2.transition.data() + std::size_t(x) * 3, 3};
                gb[x] = l1_distance(r1, r2);
            }
            Lemma2Sandwich s = lemma2_bounds(a.set.nominal, m2, pi1, pi2, gb);
            ValueFunction v1 = evaluate_policy(a.set.nominal, pi1);
            ValueFunction v2 = evaluate_policy(m2, pi2);
            for (int x = 0; x < 3; ++x) {
                CHECK(s.lower[x] <= v1[x] - v2[x] + 1e-9);
                CHECK(s.upper[x] >= v1[x] - v2[x] - 1e-9);
            }
        }
    }
    SUBCASE("understated g is rejected") {
        RandomInstance inst = random_instance(35, 3, 2);
        auto p = random_member(inst.set, 3);
        Mdp m2 = with_transition(inst.set.nominal, p);
        std::vector<double> zero(3, 0.0);
        CHECK_THROWS_AS(
            lemma2_bounds(inst.set.nominal, m2, inst.baseline, inst.baseline, zero),
            std::invalid_argument);
    }
}

TEST_CASE("thm1_bound") {
    ErrorFunction e = ErrorFunction::uniform(2, 2, 0.1);
    CHECK(thm1_bound(0.9, 1.0, e) == doctest::Approx(18.0).epsilon(1e-9));
    ErrorFunction zero = ErrorFunction::zero(2, 2);
    CHECK(thm1_bound(0.9, 1.0, zero) == 0.0);

    SUBCASE("bounds the simulator-optimal loss") {
        for (int k = 0; k < 100; ++k) {
            RandomInstance inst = random_instance(22000 + k, 3, 2, 0.85, 0.3);
            const Mdp& truth = inst.set.nominal;
            auto p = random_member(inst.set, derive_seed(61, std::uint64_t(k)));
            Mdp sim = with_transition(truth, p);
            OptimalSolution s = solve_optimal(sim);
            double phi = performance_loss(truth, s.policy);
            // the sampled simulator sits within e of the truth, but the bound
            // is stated for twice the one-sided budget
            CHECK(phi <= thm1_bound(truth.discount, truth.r_max, inst.set.error) + 1e-9);
        }
    }
}

TEST_CASE("weighted_error_norm") {
    SUBCASE("dot-product case") {
        ErrorFunction e = ErrorFunction::zero(2, 1);
        e.at(0, 0) = 0.1;
        e.at(1, 0) = 0.3;
        Policy pi = Policy::from_actions({0, 0}, 1);
        Occupancy u{0.5, 0.5};
        CHECK(weighted_error_norm(e, pi, u) == doctest::Approx(0.2).epsilon(1e-12));
    }
    SUBCASE("constant budget is preserved and sup-norm dominates") {
        SplitMix64 g(12);
        for (int k = 0; k < 1000; ++k) {
            int n = 2 + int(g.uniform_int(3));
            int na = 1 + int(g.uniform_int(2));
            ErrorFunction e = ErrorFunction::zero(n, na);
            for (int x = 0; x < n; ++x)
                for (int a = 0; a < na; ++a) e.at(x, a) = 2.0 * g.uniform01();
            Policy pi = random_policy(g, n, na);
            Occupancy u = random_dist(g, n);
            double norm = weighted_error_norm(e, pi, u);
            CHECK(norm <= e.max_budget() + 1e-12);
        }
        ErrorFunction c = ErrorFunction::uniform(3, 2, 0.37);
        Policy pi = Policy::from_actions({0, 1, 0}, 2);
        Occupancy u{0.2, 0.5, 0.3};
        CHECK(weighted_error_norm(c, pi, u) == doctest::Approx(0.37).epsilon(1e-12));
    }
}

TEST_CASE("thm2_4_bound and thm5_bound") {
    SUBCASE("zero budget") {
        RandomInstance inst = random_instance(36);
        const Mdp& m = inst.set.nominal;
        ErrorFunction zero = ErrorFunction::zero(m.n_states, m.n_actions);
        CHECK(thm2_4_bound(m, zero, 0.5) == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(thm5_bound(m, zero, inst.baseline) == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("optimal baseline zeroes the min") {
        RandomInstance inst = random_instance(37);
        const Mdp& m = inst.set.nominal;
        CHECK(thm2_4_bound(m, inst.set.error, 0.0) == doctest::Approx(0.0));
        OptimalSolution opt = solve_optimal(m);
        CHECK(thm5_bound(m, inst.set.error, opt.policy) <= 1e-6);
    }
    SUBCASE("baseline-regret branch dominates the two-sided branch") {
        for (int k = 0; k < 50; ++k) {
            RandomInstance inst = random_instance(23000 + k);
            const Mdp& m = inst.set.nominal;
            Thm5Terms t = thm5_terms(m, inst.set.error, inst.baseline);
            double phi_b = performance_loss(m, inst.baseline);
            CHECK(t.baseline_loss == doctest::Approx(phi_b).epsilon(1e-7));
            CHECK(t.first_branch >=
                  2.0 * m.discount * m.r_max / std::pow(1.0 - m.discount, 2) *
                          t.optimal_norm -
                      1e-12);
            CHECK(thm5_bound(m, inst.set.error, inst.baseline) ==
                  doctest::Approx(std::min(t.first_branch, t.baseline_loss))
                      .epsilon(1e-12));
            // the extra baseline term only widens the first branch
            CHECK(thm5_bound(m, inst.set.error, inst.baseline) >=
                  thm2_4_bound(m, inst.set.error, phi_b) - 1e-9);
        }
    }
}

TEST_CASE("tightness fixture meets the additive bound exactly") {
    Tightness f = tightness();
    // The certified method keeps the baseline: both candidate certificates
    // are exactly zero.
    CHECK(coupled_regret_bound(f.set, f.switching, f.baseline) ==
          doctest::Approx(0.0).epsilon(1e-9));
    SafePolicyResult res = solve_rbc(f.set, f.baseline);
    CHECK_FALSE(res.accepted);
    CHECK(res.policy.action_dist == f.baseline.action_dist);

    double phi = performance_loss(f.true_mdp, res.policy);
    CHECK(phi == doctest::Approx(f.baseline_loss).epsilon(1e-9));

    Thm5Terms t = thm5_terms(f.true_mdp, f.set.error, f.baseline);
    CHECK(t.first_branch == doctest::Approx(7.2).epsilon(1e-9));
    CHECK(phi == doctest::Approx(t.first_branch).epsilon(1e-9));
    CHECK(thm5_bound(f.true_mdp, f.set.error, f.baseline) ==
          doctest::Approx(phi).epsilon(1e-9));
}

TEST_CASE("bellman_residual") {
    RandomInstance inst = random_instance(38, 3, 2);
    const Mdp& m = inst.set.nominal;

    SUBCASE("zero at fixed points, shift identity") {
        OptimalSolution opt = solve_optimal(m, 1e-12);
        BellmanContext ctx;
        ctx.adjusted = &m;
        double br = bellman_residual(BellmanOperatorKind::adjusted_nominal, ctx, opt.value);
        CHECK(br <= 1e-8);
        ValueFunction shifted = opt.value;
        for (auto& v : shifted) v += 0.5;
        double br2 =
            bellman_residual(BellmanOperatorKind::adjusted_nominal, ctx, shifted);
        CHECK(br2 == doctest::Approx((1.0 - m.discount) * 0.5).epsilon(1e-6));
    }
    SUBCASE("robust operator residual") {
        RobustSolution rs = robust_value_iteration(inst.set, 1e-10);
        BellmanContext ctx;
        ctx.set = &inst.set;
        CHECK(bellman_residual(BellmanOperatorKind::robust, ctx, rs.value) <= 1e-7);
        ValueFunction v{1.0, -2.0, 0.5};
        ValueFunction tv = robust_bellman_apply(inst.set, v);
        double expect = 0.0;
        for (int x = 0; x < 3; ++x) expect = std::max(expect, std::abs(tv[x] - v[x]));
        CHECK(bellman_residual(BellmanOperatorKind::robust, ctx, v) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
    SUBCASE("augmented robust operator residual") {
        BellmanContext ctx;
        ctx.set = &inst.set;
        ctx.lambda1 = 1.0;
        ctx.lambda2 = 0.0;
        ValueFunction v(9, 0.25);
        ValueFunction tv = augmented_robust_apply(inst.set, 1.0, 0.0, v);
        double expect = 0.0;
        for (int z = 0; z < 9; ++z) expect = std::max(expect, std::abs(tv[z] - v[z]));
        CHECK(bellman_residual(BellmanOperatorKind::augmented_robust, ctx, v) ==
              doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("corollary_bound") {
    CHECK(corollary_bound(0.0, 0.9, 0.0, 5.0) == 0.0);
    CHECK(corollary_bound(0.1, 0.5, 0.0, 10.0) == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(corollary_bound(1.0, 0.5, 1.0, 0.5) == doctest::Approx(0.5).epsilon(1e-12));

    SUBCASE("bounds the adjusted method's loss with the policy-max term") {
        for (int k = 0; k < 20; ++k) {
            RandomInstance inst = random_instance(24000 + k, 3, 2, 0.85, 0.3);
            const Mdp& truth = inst.set.nominal;
            auto p = random_member(inst.set, derive_seed(71, std::uint64_t(k)));
            Mdp sim = with_transition(truth, p);
            Mdp adjusted = adjust_rewards(sim, inst.set.error);
            double rho_b = return_of(truth, inst.baseline);
            SafePolicyResult ra =
                solve_ramdp(sim, inst.set.error, inst.baseline, rho_b);
            double phi = performance_loss(truth, ra.policy);
            double phi_b = performance_loss(truth, inst.baseline);
            BellmanContext ctx;
            ctx.adjusted = &adjusted;
            double br = bellman_residual(BellmanOperatorKind::adjusted_nominal, ctx,
                                         evaluate_policy(adjusted, ra.policy));
            // max over deterministic policies of the weighted error norm
            double norm_term = 0.0;
            for (int a0 = 0; a0 < 2; ++a0)
                for (int a1 = 0; a1 < 2; ++a1)
                    for (int a2 = 0; a2 < 2; ++a2) {
                        Policy pi = Policy::from_actions({a0, a1, a2}, 2);
                        Occupancy u = occupancy(truth, pi);
                        norm_term = std::max(
                            norm_term, weighted_error_norm(inst.set.error, pi, u));
                    }
            norm_term *= 2.0 * truth.discount * truth.r_max /
                         std::pow(1.0 - truth.discount, 2);
            double bound = corollary_bound(br, truth.discount, norm_term, phi_b);
            CHECK(phi <= bound + 1e-9);
        }
    }
}
