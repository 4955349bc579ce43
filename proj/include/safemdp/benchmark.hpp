#pragma once

#include "safemdp/core.hpp"
#include "safemdp/uncertainty.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace safemdp {

/// How sample transitions are drawn: uniformly over (x,a), or mostly the
/// baseline action with an epsilon of exploration.
struct SamplingBehavior {
    enum class Kind { uniform, baseline_mix };
    Kind kind = Kind::uniform;
    double mix_eps = 0.1;
    const Policy* baseline = nullptr; // required for baseline_mix
};

/// Grid benchmark configuration. Rewards vary only along dimension 1,
/// transition success probabilities only along dimension 2; the baseline is
/// optimal when dimension 2 is ignored.
struct BenchmarkConfig {
    int dim1 = 4;
    int dim2 = 2;
    double success_base = 0.1;
    double success_slope = 0.9;
    double gamma = 0.85;
    double r_max = 1.0;
    std::uint64_t seed = 20260824;
    std::vector<long long> sample_sizes = {50, 200, 2000, 10000, 100000, 10000000};
    double delta = 0.05;
    SamplingBehavior behavior;
    int n_trials = 20;

    void validate() const;
};

struct GridBenchmark {
    Mdp true_mdp;
    Policy baseline;
};

/// Build the grid MDP and the dimension-1 projection baseline policy.
GridBenchmark make_grid_benchmark(const BenchmarkConfig& cfg);

/// Draw n_samples transitions ((x,a) per the behavior, x' from the true
/// model) into a count table; bit-deterministic given the seed.
CountTable sample_model(const Mdp& true_mdp, long long n_samples,
                        const SamplingBehavior& behavior, std::uint64_t seed);

struct TrialRecord {
    std::string method; // EXP, RWA, ROB, RBC, OPT
    long long sample_size = 0;
    int trial = 0;
    double improvement_pct = 0.0;
    bool assumption_holds = true; // true model inside the trial's uncertainty set
};

struct ExperimentResult {
    BenchmarkConfig config;
    std::vector<TrialRecord> rows;
    double membership_violation_rate = 0.0;
};

/// Full experiment: per trial and sample size, build the empirical model and
/// error function, run the four methods, and score each returned policy on
/// the true model as 100 * (rho(pi) - rho(base)) / |rho(opt) - rho(base)|.
/// Trials run in parallel up to SAFE_MDP_THREADS (0/unset = auto).
ExperimentResult run_experiment(const BenchmarkConfig& cfg);

/// CSV with header method,sample_size,trial,improvement_pct.
void write_experiment_csv(const ExperimentResult& result, const std::string& path);
/// JSON sidecar with the config echo and the membership violation rate.
void write_experiment_metadata(const ExperimentResult& result, const std::string& path);

} // namespace safemdp
