// Command-line front end: solve, safe, benchmark, and bounds subcommands.
// Exit codes: 0 success (including baseline fallback), 2 usage/validation
// error, 3 internal invariant violation.

#include "CLI11.hpp"
#include "json.hpp"

#include "safemdp/benchmark.hpp"
#include "safemdp/bounds.hpp"
#include "safemdp/model_io.hpp"
#include "safemdp/robust.hpp"
#include "safemdp/safe_policy.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace safemdp;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitInternal = 3;

json policy_to_json(const Policy& pi) {
    json j;
    j["n_states"] = pi.n_states;
    j["n_actions"] = pi.n_actions;
    j["deterministic"] = pi.deterministic;
    if (pi.deterministic) {
        std::vector<int> actions(pi.n_states);
        for (int x = 0; x < pi.n_states; ++x) actions[x] = pi.action(x);
        j["actions"] = actions;
    } else {
        std::vector<std::vector<double>> rows(pi.n_states);
        for (int x = 0; x < pi.n_states; ++x) {
            auto r = pi.row(x);
            rows[x].assign(r.begin(), r.end());
        }
        j["action_dist"] = rows;
    }
    return j;
}

const char* method_name(SafeMethod m) {
    switch (m) {
    case SafeMethod::ramdp: return "ramdp";
    case SafeMethod::rmdp: return "rmdp";
    case SafeMethod::armdp: return "armdp";
    case SafeMethod::rbc: return "rbc";
    }
    return "unknown";
}

/// Resolves the error function from the document per --error {auto|counts|inline}.
ErrorFunction resolve_error(const ModelDocument& doc, const std::string& source,
                            double delta) {
    const Mdp& m = doc.mdp;
    if (source == "inline" || (source == "auto" && doc.error.has_value())) {
        if (!doc.error.has_value())
            throw std::invalid_argument("--error inline requires an 'error' field");
        return *doc.error;
    }
    if (source == "counts" || (source == "auto" && doc.counts.has_value())) {
        if (!doc.counts.has_value())
            throw std::invalid_argument("--error counts requires a 'counts' field");
        return error_from_counts(*doc.counts, delta, m.n_states, m.n_actions);
    }
    return ErrorFunction::zero(m.n_states, m.n_actions);
}

int cmd_solve(const std::string& model_path) {
    ModelDocument doc = load_model(model_path);
    OptimalSolution opt = solve_optimal(doc.mdp);
    json out;
    out["policy"] = policy_to_json(opt.policy);
    out["value"] = opt.value;
    out["return"] = dot(doc.mdp.initial_dist, opt.value);
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

int cmd_safe(const std::string& model_path, const std::string& method,
             const std::string& baseline_path,
             const std::optional<double>& baseline_return, const std::string& error_source,
             double delta) {
    if (method == "rbc" && baseline_return.has_value())
        throw std::invalid_argument(
            "--baseline-return is forbidden for rbc (no baseline performance needed)");
    if (method != "rbc" && !baseline_return.has_value())
        throw std::invalid_argument("--baseline-return is required for " + method);

    ModelDocument doc = load_model(model_path);
    ErrorFunction e = resolve_error(doc, error_source, delta);
    UncertaintySet set{doc.mdp, e};
    set.validate();
    Policy baseline = load_policy(baseline_path, doc.mdp.n_states, doc.mdp.n_actions);

    SafePolicyResult result;
    if (method == "ramdp") {
        result = solve_ramdp(doc.mdp, e, baseline, *baseline_return);
    } else if (method == "rmdp") {
        result = solve_rmdp_safe(set, baseline, *baseline_return);
    } else if (method == "armdp") {
        result = solve_augmented_rmdp(
            set, baseline, *baseline_return,
            SubgradientSchedule::defaults(doc.mdp.r_max, doc.mdp.discount));
    } else if (method == "rbc") {
        result = solve_rbc(set, baseline);
    } else {
        throw std::invalid_argument("unknown method " + method);
    }

    json out;
    out["method"] = method_name(result.method);
    out["accepted"] = result.accepted;
    out["certified_value"] = result.certified_value;
    out["augmented"] = result.augmented;
    out["policy"] = policy_to_json(result.policy);
    out["diagnostics"] = result.diagnostics;
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

BenchmarkConfig parse_benchmark_config(const std::string& path) {
    std::ifstream in(path);
    if (!in.good())
        throw std::invalid_argument("cannot open config file: " + path);
    json j = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded())
        throw std::invalid_argument("config is not valid JSON: " + path);

    BenchmarkConfig cfg;
    cfg.dim1 = j.value("dim1", cfg.dim1);
    cfg.dim2 = j.value("dim2", cfg.dim2);
    cfg.success_base = j.value("success_base", cfg.success_base);
    cfg.success_slope = j.value("success_slope", cfg.success_slope);
    cfg.gamma = j.value("gamma", cfg.gamma);
    cfg.r_max = j.value("r_max", cfg.r_max);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.delta = j.value("delta", cfg.delta);
    cfg.n_trials = j.value("n_trials", cfg.n_trials);
    if (j.contains("sample_sizes"))
        cfg.sample_sizes = j.at("sample_sizes").get<std::vector<long long>>();
    if (j.contains("behavior")) {
        const std::string kind = j.at("behavior").get<std::string>();
        if (kind == "uniform") {
            cfg.behavior.kind = SamplingBehavior::Kind::uniform;
        } else if (kind == "baseline_mix") {
            cfg.behavior.kind = SamplingBehavior::Kind::baseline_mix;
        } else {
            throw std::invalid_argument("unknown behavior: " + kind);
        }
    }
    cfg.behavior.mix_eps = j.value("mix_eps", cfg.behavior.mix_eps);
    cfg.validate();
    return cfg;
}

int cmd_benchmark(const std::string& config_path, const std::string& out_path) {
    BenchmarkConfig cfg;
    if (!config_path.empty()) cfg = parse_benchmark_config(config_path);
    ExperimentResult result = run_experiment(cfg);
    write_experiment_csv(result, out_path);
    write_experiment_metadata(result, out_path + ".meta.json");
    std::cerr << "wrote " << result.rows.size() << " rows to " << out_path
              << " (membership violation rate "
              << result.membership_violation_rate << ")\n";
    return kExitOk;
}

json report_to_json(const std::string& name, double value, double phi) {
    json j;
    j["bound_name"] = name;
    j["value"] = value;
    j["loss"] = phi;
    j["holds"] = phi <= value + 1e-9;
    return j;
}

int cmd_bounds(const std::string& true_path, const std::string& sim_path,
               const std::string& policy_path, const std::string& error_source,
               double delta) {
    ModelDocument truth_doc = load_model(true_path);
    ModelDocument sim_doc = load_model(sim_path);
    const Mdp& truth = truth_doc.mdp;
    const Mdp& sim = sim_doc.mdp;
    if (truth.n_states != sim.n_states || truth.n_actions != sim.n_actions ||
        truth.discount != sim.discount)
        throw std::invalid_argument("true and simulator models are dimension-mismatched");

    ErrorFunction e = resolve_error(sim_doc, error_source, delta);
    Policy pi = load_policy(policy_path, truth.n_states, truth.n_actions);

    // Each bound constrains the loss of a specific object: lemma 1 the
    // simulator-vs-truth return gap of the supplied policy, theorem 1 the
    // simulator's optimum, theorems 2-4 the adjusted-MDP method's output, and
    // theorem 5 the certified baseline-regret output (pi as the baseline).
    const double phi = performance_loss(truth, pi);
    const double baseline_loss = phi;
    const double rho_b = return_of(truth, pi);
    const double gap = std::abs(rho_b - return_of(sim, pi));
    UncertaintySet set{sim, e};
    set.validate();

    json reports = json::array();
    reports.push_back(report_to_json("lemma1", lemma1_bound(truth, e, pi), gap));
    reports.push_back(report_to_json(
        "theorem1", thm1_bound(truth.discount, truth.r_max, e),
        performance_loss(truth, solve_optimal(sim).policy)));
    reports.push_back(report_to_json(
        "theorem2_4", thm2_4_bound(truth, e, baseline_loss),
        performance_loss(truth, solve_ramdp(sim, e, pi, rho_b).policy)));
    Thm5Terms t5 = thm5_terms(truth, e, pi);
    json j5 = report_to_json("theorem5", t5.bound,
                             performance_loss(truth, solve_rbc(set, pi).policy));
    j5["first_branch"] = t5.first_branch;
    j5["optimal_norm"] = t5.optimal_norm;
    j5["baseline_norm"] = t5.baseline_norm;
    reports.push_back(j5);

    json out;
    out["performance_loss"] = phi;
    out["reports"] = reports;
    std::cout << out.dump(2) << "\n";
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Safe policy search for tabular MDPs under L1 model uncertainty"};
    app.require_subcommand(1);

    std::string model_path, baseline_path, method = "rmdp", error_source = "auto";
    std::optional<double> baseline_return;
    double delta = 0.05;
    std::string config_path, out_path = "benchmark.csv";
    std::string true_path, sim_path, policy_path;

    CLI::App* solve = app.add_subcommand("solve", "Optimal policy for a model");
    solve->add_option("model", model_path, "Model JSON path")->required();

    CLI::App* safe = app.add_subcommand("safe", "Safe policy search");
    safe->add_option("model", model_path, "Simulator model JSON path")->required();
    safe->add_option("--method", method, "ramdp|rmdp|armdp|rbc")
        ->check(CLI::IsMember({"ramdp", "rmdp", "armdp", "rbc"}));
    safe->add_option("--baseline-policy", baseline_path, "Baseline policy JSON path")
        ->required();
    safe->add_option("--baseline-return", baseline_return,
                     "Known true-model baseline return");
    safe->add_option("--error", error_source, "Error source: auto|counts|inline")
        ->check(CLI::IsMember({"auto", "counts", "inline"}));
    safe->add_option("--delta", delta, "Confidence parameter for counts");

    CLI::App* bench = app.add_subcommand("benchmark", "Grid benchmark experiment");
    bench->add_option("--config", config_path, "Benchmark config JSON path");
    bench->add_option("--out", out_path, "Output CSV path");

    CLI::App* bounds = app.add_subcommand("bounds", "Performance-loss bound reports");
    bounds->add_option("model_true", true_path, "True model JSON path")->required();
    bounds->add_option("model_sim", sim_path, "Simulator model JSON path")->required();
    bounds->add_option("--policy", policy_path, "Policy JSON path")->required();
    bounds->add_option("--error", error_source, "Error source: auto|counts|inline")
        ->check(CLI::IsMember({"auto", "counts", "inline"}));
    bounds->add_option("--delta", delta, "Confidence parameter for counts");

    try {
        app.parse(argc, argv);
        if (solve->parsed()) return cmd_solve(model_path);
        if (safe->parsed())
            return cmd_safe(model_path, method, baseline_path, baseline_return,
                            error_source, delta);
        if (bench->parsed()) return cmd_benchmark(config_path, out_path);
        if (bounds->parsed())
            return cmd_bounds(true_path, sim_path, policy_path, error_source, delta);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitInternal;
    }
    return kExitUsage;
}
