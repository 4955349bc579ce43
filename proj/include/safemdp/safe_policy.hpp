#pragma once

#include "safemdp/core.hpp"
#include "safemdp/robust.hpp"
#include "safemdp/uncertainty.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace safemdp {

enum class SafeMethod { ramdp, rmdp, armdp, rbc };

/// Outcome of a safe-policy search. When accepted is false the returned
/// policy is exactly the provided baseline. Policies produced by the
/// augmented method live on the product state space (augmented = true).
struct SafePolicyResult {
    Policy policy;
    double certified_value = 0.0;
    bool accepted = false;
    SafeMethod method = SafeMethod::ramdp;
    bool augmented = false;
    std::map<std::string, double> diagnostics;
};

/// Reward-adjusted MDP: r_hat(x,a) = r(x,a) - (gamma Rmax / (1-gamma)) e(x,a).
/// The result keeps r_max but its rewards may fall below -r_max; it is
/// validated with the reward bound relaxed.
Mdp adjust_rewards(const Mdp& simulator, const ErrorFunction& e);

/// Algorithm: solve the reward-adjusted MDP, accept its optimum iff its
/// adjusted return strictly beats baseline_return.
SafePolicyResult solve_ramdp(const Mdp& simulator, const ErrorFunction& e,
                             const Policy& baseline, double baseline_return);

/// Algorithm: robust value iteration, accept the robust policy iff its
/// worst-case return strictly beats baseline_return.
SafePolicyResult solve_rmdp_safe(const UncertaintySet& set, const Policy& baseline,
                                 double baseline_return);

/// Product-state MDP coupling an uncertain chain (x-side, rows from
/// uncertain_transition) with the simulator chain (y-side, rows from the
/// simulator). Augmented state index is z = x * n + y.
struct AugmentedMdp {
    Mdp base;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    int n_base = 0;

    int index(int x, int y) const { return x * n_base + y; }
    int x_of(int z) const { return z / n_base; }
    int y_of(int z) const { return z % n_base; }
};

AugmentedMdp build_augmented(const Mdp& simulator, std::span<const double> uncertain_transition,
                             double lambda1, double lambda2);

/// Lagrangian L(pi, lambda) = rho(pi, aug) - lambda * baseline_return, for an
/// augmented MDP built with (lambda1, lambda2) = (lambda, 1).
double lagrangian_value(const AugmentedMdp& aug, const Policy& pi, double lambda,
                        double baseline_return);

/// Projected subgradient update lambda' = max(0, lambda - alpha * violation).
double subgradient_step(double lambda, double alpha, double violation);

/// Step sizes alpha_j = alpha0 / (j + 1): non-summable, square-summable.
struct SubgradientSchedule {
    double alpha0 = 1.0;
    int max_iters = 200;
    double lambda_cap = 1e3;
    double lambda_init = 1.0;

    static SubgradientSchedule defaults(double r_max, double gamma);
};

/// Per-iteration record of the subgradient loop (multiplier, dual value, and
/// the best dual estimate so far).
struct ArmdpTrace {
    std::vector<double> lambda_history;
    std::vector<double> dual_history;
    std::vector<double> f_min_history;
};

/// Lagrangian saddle-point search on the augmented robust MDP. Uncertainty
/// applies only to the x-side rows; the y-side is pinned to the nominal
/// model. Accepts when the dual sequence converges below the cap and the
/// worst-case true-side return of the best candidate strictly beats
/// baseline_return.
SafePolicyResult solve_augmented_rmdp(const UncertaintySet& set, const Policy& baseline,
                                      double baseline_return, const SubgradientSchedule& sched,
                                      ArmdpTrace* trace = nullptr);

/// One application of the (lambda1, lambda2)-weighted augmented robust
/// Bellman operator to a value function over product states z = x * n + y.
ValueFunction augmented_robust_apply(const UncertaintySet& set, double lambda1, double lambda2,
                                     const ValueFunction& v);

/// Exact worst-case true-side return of an augmented policy:
/// min over P in U of the product-chain return with reward r(x,a).
struct AugmentedEvaluation {
    double value = 0.0;
    ValueFunction state_values; // over product states z = x * n + y
};
AugmentedEvaluation augmented_robust_true_evaluate(const UncertaintySet& set,
                                                   const Policy& aug_pi, double tol = 1e-8);
double augmented_robust_true_return(const UncertaintySet& set, const Policy& aug_pi,
                                    double tol = 1e-8);

/// True-side return of an augmented policy on a planted true model:
/// product chain with true_transition on the x rows, nominal on the y rows,
/// reward r(x,a), exact solve.
double augmented_true_return(const Mdp& simulator, std::span<const double> true_transition,
                             const Policy& aug_pi);

struct RbcOptions {
    double tol = 1e-8;
    int max_alternations = 20;
    int random_inits = 2;
    std::uint64_t seed = 0x5afe5afeULL;
    /// Accept on the coordinate-descent estimate instead of the certified
    /// bound (flagged in diagnostics; not safety-certified).
    bool uncertified = false;
};

/// Robust baseline-regret search: maximize a certified lower bound on
/// min_{P in U} (rho(pi, P) - rho(baseline, P)). Falls back to the baseline
/// (regret 0) when no candidate certifies a nonnegative improvement.
SafePolicyResult solve_rbc(const UncertaintySet& set, const Policy& baseline,
                           const RbcOptions& opts = {});

/// Coordinate-descent local search for the coupled inner minimum: returns a
/// member P and D = rho(pi, P) - rho(baseline, P) (an upper bound on the
/// true minimum, and >= the decoupled certified bound).
struct CoupledWorstCase {
    std::vector<double> transition;
    double regret = 0.0;
};
CoupledWorstCase coupled_worstcase(const UncertaintySet& set, const Policy& pi,
                                   const Policy& baseline, std::span<const double> init);

/// Certified coupled lower bound on min_{P in U} (rho(pi,P) - rho(pi_B,P)):
/// robust value iteration on the pair chain (x under pi, y under pi_B) with
/// maximal action coupling on diagonal states, so agreeing trajectories
/// cancel exactly. Always a sound lower bound; tighter than the decoupled
/// difference when the policies share structure.
double coupled_regret_bound(const UncertaintySet& set, const Policy& pi,
                            const Policy& baseline, double tol = 1e-8);

} // namespace safemdp
