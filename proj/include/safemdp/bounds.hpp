#pragma once

#include "safemdp/core.hpp"
#include "safemdp/uncertainty.hpp"

#include <map>
#include <optional>
#include <string>

namespace safemdp {

/// A named bound evaluation; `holds` is set when the bounded quantity is
/// also computable, `relaxed` flags the ||e||_inf fallback for the
/// policy-max term of the corollary bounds.
struct BoundReport {
    std::string bound_name;
    double value = 0.0;
    std::map<std::string, double> inputs;
    std::optional<bool> holds;
    bool relaxed = false;
};

/// Phi(pi) = rho(pi*, M*) - rho(pi, M*).
double performance_loss(const Mdp& true_mdp, const Policy& pi);

/// (gamma Rmax / (1-gamma)) p0^T (I - gamma P_pi)^{-1} e_pi, bounding the
/// return gap between the true model and any simulator within the budgets.
double lemma1_bound(const Mdp& true_mdp, const ErrorFunction& e, const Policy& pi);

/// Two-sided value-difference sandwich between (M1, pi1) and (M2, pi2)
/// given per-state L1 bounds g on the induced-kernel rows:
///   (I - gamma P1)^{-1} (r1 - r2 -/+ gamma Rmax g / (1-gamma)).
struct Lemma2Sandwich {
    ValueFunction lower;
    ValueFunction upper;
};
Lemma2Sandwich lemma2_bounds(const Mdp& m1, const Mdp& m2, const Policy& pi1,
                             const Policy& pi2, std::span<const double> g);

/// 2 gamma Rmax / (1-gamma)^2 * ||e||_inf.
double thm1_bound(double gamma, double r_max, const ErrorFunction& e);

/// ||e_pi||_{1,u} = sum_x u(x) sum_a pi(a|x) e(x,a).
double weighted_error_norm(const ErrorFunction& e, const Policy& pi, const Occupancy& u);

/// min{ 2 gamma Rmax/(1-gamma)^2 ||e_{pi*}||_{1,u*}, baseline_loss }, with
/// pi* and u* computed from the true model (diagnostic-only bound).
double thm2_4_bound(const Mdp& true_mdp, const ErrorFunction& e, double baseline_loss);

/// The baseline-regret bound: first branch adds the baseline's weighted
/// error norm to the optimal policy's.
struct Thm5Terms {
    double optimal_norm = 0.0;
    double baseline_norm = 0.0;
    double first_branch = 0.0;
    double baseline_loss = 0.0;
    double bound = 0.0;
};
Thm5Terms thm5_terms(const Mdp& true_mdp, const ErrorFunction& e, const Policy& baseline);
double thm5_bound(const Mdp& true_mdp, const ErrorFunction& e, const Policy& baseline);

/// Bellman residual max_x |T[v](x) - v(x)| for the three operator variants.
enum class BellmanOperatorKind { adjusted_nominal, robust, augmented_robust };
struct BellmanContext {
    const Mdp* adjusted = nullptr;       // adjusted_nominal: the (adjusted) MDP
    const UncertaintySet* set = nullptr; // robust / augmented_robust
    double lambda1 = 1.0;                // augmented_robust weights
    double lambda2 = 0.0;
};
double bellman_residual(BellmanOperatorKind kind, const BellmanContext& ctx,
                        const ValueFunction& v);

/// min{ br/(1-gamma) + norm_term, baseline_loss } (Bellman-residual
/// alternative to the occupancy-weighted bounds).
double corollary_bound(double br, double gamma, double norm_term, double baseline_loss);

} // namespace safemdp
