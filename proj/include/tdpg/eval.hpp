#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdpg/envs.hpp"
#include "tdpg/nets.hpp"

namespace tdpg {

struct Histogram {
    std::vector<double> edges;        // bins + 1, uniform, covering [lo, hi]
    std::vector<std::size_t> counts;  // bins; counts sum to the sample count
};

// Uniform bins over [lo, hi]. Values are clamped into the range, so the
// counts always sum to values.size(). A degenerate range (hi == lo) is
// widened to one unit.
Histogram make_histogram(const std::vector<double>& values, std::size_t bins, double lo, double hi);
// Range taken from the values themselves.
Histogram make_histogram(const std::vector<double>& values, std::size_t bins);

// Performance of one frozen policy under one test scenario. final_dist is
// |d_T - 3| for lava (terminal distance to the goal position) and
// |d_T - bx_T| for ball-catching.
struct EvalReport {
    std::string scenario;
    std::size_t n = 0;
    double cost_mean = 0.0, cost_std = 0.0;
    double dist_mean = 0.0, dist_std = 0.0;
    std::vector<double> costs;       // per rollout
    std::vector<double> final_dists; // per rollout
    Histogram hist;                  // of costs, over their own range
};

struct EvalOptions {
    EnvId env = EnvId::lava;
    EnvShiftSpec shift;
    std::string scenario = "training";
    std::size_t scenario_index = 0;  // distinguishes sampling streams per scenario
    std::size_t n = 1000;
    std::uint64_t seed = 0;
    double action_clamp = 0.0;  // match the training setting
    std::size_t bins = 30;
    unsigned threads = 1;
};

// Rolls the frozen policy stochastically (fresh action and TRV noise every
// rollout, no training) and aggregates. Deterministic given (seed,
// scenario_index); never mutates params.
EvalReport evaluate(const PolicyParams& params, const EvalOptions& opt);

struct RiskEstimate {
    double beta = 0.0;
    double rho = 0.0;  // (1/beta) log E[exp(beta c)]
    std::size_t n = 0;
};

// Empirical entropic risk, computed with max-subtraction so large costs
// cannot overflow. rho >= sample mean for every beta > 0.
RiskEstimate entropic_risk(const std::vector<double>& costs, double beta);

// Diagnostic comparison of sum_t (rho_beta[c_t] + mi_t) against the
// empirical expected total cost. NON-BINDING: the MI estimates are lower
// bounds and the premise relating the two sides is not verified here, so
// the gap is reported, never asserted.
struct BoundReport {
    double beta = 0.0;
    double bound_sum = 0.0;       // sum_t rho_beta[c_t] + sum_t mi_t
    double empirical_cost = 0.0;  // mean of the per-rollout total costs
    double gap = 0.0;             // bound_sum - empirical_cost
    std::string note = "NON-BINDING";
};

// stage_costs is [T+1][n] as stored in a TrajectoryBatch; mi may have fewer
// entries than stage_costs (missing timesteps contribute zero).
BoundReport bound_diagnostic(const std::vector<std::vector<double>>& stage_costs,
                             const std::vector<double>& mi, double beta);
std::string bound_to_string(const BoundReport& r);

struct EvalScenario {
    std::string name;
    EnvShiftSpec shift;
};

// The benchmark's test suites: training distribution plus, for lava, sensor
// noise sigma^2 in {1e-3, 1e-2, 1e-1, 1}; for ball-catching, pixel noise
// sigma in {0.10, 0.15, 0.20, 0.25} plus test backdrops 1..7.
std::vector<EvalScenario> paper_scenarios(EnvId env);
EvalScenario training_scenario(EnvId env);

// "paper", "training", or a comma list of noise:VALUE / texture:ID tokens
// (textures are ball-catching only). Scenario names are stable for diffing.
std::vector<EvalScenario> parse_scenario_spec(const std::string& spec, EnvId env);

// Summary CSV: scenario,n,cost_mean,cost_std,dist_mean,dist_std.
void write_eval_csv(const std::vector<EvalReport>& reports, const std::string& path);
// Raw per-rollout CSV: rollout,cost,final_dist.
void write_rollouts_csv(const EvalReport& report, const std::string& path);

// Writes path_prefix + ".csv" (bin_lo,bin_hi,count) and path_prefix + ".svg".
void export_histogram(const EvalReport& report, const std::string& path_prefix);
// Same, with both reports re-binned over their pooled cost range so the two
// series share axes; CSV columns bin_lo,bin_hi,count_a,count_b.
void export_histogram_pair(const EvalReport& a, const EvalReport& b, std::size_t bins,
                           const std::string& path_prefix);

}  // namespace tdpg
