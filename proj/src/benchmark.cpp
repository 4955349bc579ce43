#include "safemdp/benchmark.hpp"

#include "safemdp/bounds.hpp"
#include "safemdp/rng.hpp"
#include "safemdp/robust.hpp"
#include "safemdp/safe_policy.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <thread>

namespace safemdp {

void BenchmarkConfig::validate() const {
    if (dim1 < 1 || dim2 < 1) throw std::invalid_argument("BenchmarkConfig: dims must be >= 1");
    if (!(success_base > 0.0 && success_base <= 1.0))
        throw std::invalid_argument("BenchmarkConfig: success_base outside (0,1]");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw std::invalid_argument("BenchmarkConfig: gamma outside (0,1)");
    if (!(r_max > 0.0)) throw std::invalid_argument("BenchmarkConfig: r_max must be positive");
    if (!(delta > 0.0 && delta < 1.0))
        throw std::invalid_argument("BenchmarkConfig: delta outside (0,1)");
    if (n_trials < 1) throw std::invalid_argument("BenchmarkConfig: n_trials must be >= 1");
    if (sample_sizes.empty())
        throw std::invalid_argument("BenchmarkConfig: sample_sizes must be nonempty");
    for (long long s : sample_sizes)
        if (s < 0) throw std::invalid_argument("BenchmarkConfig: negative sample size");
}

namespace {

// Actions of the grid benchmark.
enum GridAction { kInc1 = 0, kDec1 = 1, kInc2 = 2, kDec2 = 3 };
constexpr int kGridActions = 4;

double success_prob(const BenchmarkConfig& cfg, int j) {
    const double frac = cfg.dim2 > 1 ? double(j) / double(cfg.dim2 - 1) : 0.0;
    return std::clamp(cfg.success_base + cfg.success_slope * frac, 0.05, 1.0);
}

} // namespace

GridBenchmark make_grid_benchmark(const BenchmarkConfig& cfg) {
    cfg.validate();
    const int n1 = cfg.dim1, n2 = cfg.dim2;
    const int n = n1 * n2;

    GridBenchmark out;
    Mdp& m = out.true_mdp;
    m.n_states = n;
    m.n_actions = kGridActions;
    m.discount = cfg.gamma;
    m.r_max = cfg.r_max;
    m.reward.assign(std::size_t(n) * kGridActions, 0.0);
    m.transition.assign(std::size_t(n) * kGridActions * n, 0.0);
    m.initial_dist.assign(n, 0.0);
    m.initial_dist[0] = 1.0; // start at (0, 0)

    auto idx = [n2](int i, int j) { return i * n2 + j; };
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) {
            const int z = idx(i, j);
            const double r = cfg.r_max * (n1 > 1 ? double(i) / double(n1 - 1) : 1.0);
            const double q = success_prob(cfg, j);
            for (int a = 0; a < kGridActions; ++a) {
                m.r(z, a) = r;
                int ti = i, tj = j;
                switch (a) {
                case kInc1: ti = std::min(i + 1, n1 - 1); break;
                case kDec1: ti = std::max(i - 1, 0); break;
                case kInc2: tj = std::min(j + 1, n2 - 1); break;
                case kDec2: tj = std::max(j - 1, 0); break;
                }
                auto row = m.row(z, a);
                row[idx(ti, tj)] += q;
                row[z] += 1.0 - q;
            }
        }
    m.validate();

    // Projection MDP over dimension 1: transitions averaged over j; the
    // baseline is its optimal policy lifted to the grid (constant in j).
    Mdp proj;
    proj.n_states = n1;
    proj.n_actions = kGridActions;
    proj.discount = cfg.gamma;
    proj.r_max = cfg.r_max;
    proj.reward.assign(std::size_t(n1) * kGridActions, 0.0);
    proj.transition.assign(std::size_t(n1) * kGridActions * n1, 0.0);
    proj.initial_dist.assign(n1, 0.0);
    proj.initial_dist[0] = 1.0;
    double qbar = 0.0;
    for (int j = 0; j < n2; ++j) qbar += success_prob(cfg, j);
    qbar /= double(n2);
    for (int i = 0; i < n1; ++i) {
        const double r = cfg.r_max * (n1 > 1 ? double(i) / double(n1 - 1) : 1.0);
        for (int a = 0; a < kGridActions; ++a) {
            proj.r(i, a) = r;
            int ti = i;
            if (a == kInc1) ti = std::min(i + 1, n1 - 1);
            if (a == kDec1) ti = std::max(i - 1, 0);
            auto row = proj.row(i, a);
            row[ti] += qbar;
            row[i] += 1.0 - qbar;
        }
    }
    proj.validate();
    OptimalSolution popt = solve_optimal(proj);

    std::vector<int> actions(n, 0);
    for (int i = 0; i < n1; ++i)
        for (int j = 0; j < n2; ++j) actions[idx(i, j)] = popt.policy.action(i);
    out.baseline = Policy::from_actions(actions, kGridActions);
    return out;
}

CountTable sample_model(const Mdp& true_mdp, long long n_samples,
                        const SamplingBehavior& behavior, std::uint64_t seed) {
    if (n_samples < 0) throw std::invalid_argument("sample_model: negative sample count");
    if (behavior.kind == SamplingBehavior::Kind::baseline_mix && behavior.baseline == nullptr)
        throw std::invalid_argument("sample_model: baseline_mix requires a baseline policy");

    const int n = true_mdp.n_states;
    const int na = true_mdp.n_actions;
    CountTable counts;
    counts.n_states = n;
    counts.n_actions = na;
    counts.counts.assign(std::size_t(n) * na * n, 0);

    SplitMix64 rng(seed);
    for (long long s = 0; s < n_samples; ++s) {
        int x, a;
        if (behavior.kind == SamplingBehavior::Kind::uniform) {
            const auto pick = rng.uniform_int(std::uint64_t(n) * na);
            x = int(pick / std::uint64_t(na));
            a = int(pick % std::uint64_t(na));
        } else {
            x = int(rng.uniform_int(std::uint64_t(n)));
            if (rng.uniform01() < behavior.mix_eps)
                a = int(rng.uniform_int(std::uint64_t(na)));
            else
                a = int(rng.categorical(behavior.baseline->row(x)));
        }
        const int xp = int(rng.categorical(true_mdp.row(x, a)));
        ++counts.counts[(std::size_t(x) * na + a) * n + xp];
    }
    return counts;
}

namespace {

int thread_budget(int n_tasks) {
    int budget = 0;
    if (const char* env = std::getenv("SAFE_MDP_THREADS")) {
        budget = std::atoi(env);
        if (budget < 0) budget = 0;
    }
    if (budget == 0) budget = int(std::thread::hardware_concurrency());
    if (budget <= 0) budget = 1;
    return std::min(budget, n_tasks);
}

} // namespace

ExperimentResult run_experiment(const BenchmarkConfig& cfg) {
    cfg.validate();
    GridBenchmark bench = make_grid_benchmark(cfg);
    const Mdp& truth = bench.true_mdp;
    const int n = truth.n_states;
    const int na = truth.n_actions;

    OptimalSolution opt = solve_optimal(truth);
    const double rho_opt = dot(truth.initial_dist, opt.value);
    const double rho_base = return_of(truth, bench.baseline);
    const double denom = std::abs(rho_opt - rho_base);
    const bool degenerate = denom < 1e-12;

    SamplingBehavior behavior = cfg.behavior;
    if (behavior.kind == SamplingBehavior::Kind::baseline_mix)
        behavior.baseline = &bench.baseline;

    const int n_sizes = int(cfg.sample_sizes.size());
    std::vector<std::vector<TrialRecord>> per_trial(cfg.n_trials);

    auto run_trial = [&](int trial) {
        std::vector<TrialRecord>& rows = per_trial[trial];
        for (int si = 0; si < n_sizes; ++si) {
            const long long size = cfg.sample_sizes[si];
            const std::uint64_t seed =
                derive_seed(cfg.seed, std::uint64_t(trial) * 1000 + std::uint64_t(si));
            CountTable counts = sample_model(truth, size, behavior, seed);

            Mdp empirical = truth;
            for (int x = 0; x < n; ++x)
                for (int a = 0; a < na; ++a) {
                    std::vector<double> row = counts.empirical_row(x, a);
                    std::copy(row.begin(), row.end(), empirical.row(x, a).begin());
                }
            empirical.validate();

            ErrorFunction e = error_from_counts(counts, cfg.delta, n, na);
            UncertaintySet set{empirical, e};
            const bool member = contains(set, truth.transition);

            auto improvement = [&](const Policy& pi) {
                if (degenerate) return 0.0;
                return 100.0 * (return_of(truth, pi) - rho_base) / denom;
            };
            auto push = [&](const std::string& method, double value) {
                rows.push_back({method, size, trial, value, member});
            };

            push("EXP", improvement(solve_optimal(empirical).policy));
            push("RWA", improvement(
                            solve_ramdp(empirical, e, bench.baseline, rho_base).policy));
            push("ROB",
                 improvement(solve_rmdp_safe(set, bench.baseline, rho_base).policy));
            RbcOptions rbc_opts;
            rbc_opts.seed = derive_seed(cfg.seed, 0xabcdULL + std::uint64_t(trial));
            push("RBC", improvement(solve_rbc(set, bench.baseline, rbc_opts).policy));
            push("OPT", 100.0);
        }
    };

    const int n_threads = thread_budget(cfg.n_trials);
    if (n_threads <= 1) {
        for (int t = 0; t < cfg.n_trials; ++t) run_trial(t);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < n_threads; ++w)
            pool.emplace_back([&, w]() {
                for (int t = w; t < cfg.n_trials; t += n_threads) run_trial(t);
            });
        for (auto& th : pool) th.join();
    }

    ExperimentResult result;
    result.config = cfg;
    long long violations = 0, total = 0;
    for (const auto& rows : per_trial)
        for (const auto& rec : rows) {
            result.rows.push_back(rec);
            if (rec.method == "EXP") { // count each trial/size once
                ++total;
                if (!rec.assumption_holds) ++violations;
            }
        }
    result.membership_violation_rate = total > 0 ? double(violations) / double(total) : 0.0;
    return result;
}

void write_experiment_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("write_experiment_csv: cannot open " + path);
    out << "method,sample_size,trial,improvement_pct\n";
    char buf[64];
    for (const auto& rec : result.rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", rec.improvement_pct);
        out << rec.method << ',' << rec.sample_size << ',' << rec.trial << ',' << buf
            << '\n';
    }
}

void write_experiment_metadata(const ExperimentResult& result, const std::string& path) {
    const BenchmarkConfig& c = result.config;
    nlohmann::json j;
    j["config"] = {{"dim1", c.dim1},
                   {"dim2", c.dim2},
                   {"success_base", c.success_base},
                   {"success_slope", c.success_slope},
                   {"gamma", c.gamma},
                   {"r_max", c.r_max},
                   {"seed", c.seed},
                   {"sample_sizes", c.sample_sizes},
                   {"delta", c.delta},
                   {"behavior", c.behavior.kind == SamplingBehavior::Kind::uniform
                                    ? "uniform"
                                    : "baseline_mix"},
                   {"mix_eps", c.behavior.mix_eps},
                   {"n_trials", c.n_trials}};
    j["membership_violation_rate"] = result.membership_violation_rate;
    j["n_rows"] = result.rows.size();
    std::ofstream out(path);
    if (!out) throw std::invalid_argument("write_experiment_metadata: cannot open " + path);
    out << j.dump(2) << '\n';
}

} // namespace safemdp
