#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tdpg/envs.hpp"
#include "tdpg/mine.hpp"
#include "tdpg/nets.hpp"

namespace tdpg {

enum class Algo { pg, tdpg };

Algo algo_from_string(const std::string& s);
std::string algo_to_string(Algo a);

struct EpochRecord {
    std::size_t epoch = 0;
    double beta = 0.0;
    double cost_mean = 0.0, cost_std = 0.0;
    std::vector<double> mi;  // reported per-timestep estimates (>= 0, smoothed when enabled)
    double j_hat = 0.0;      // beta * cost_mean + sum(mi), exactly
    std::string checkpoint_file;
};

struct TrainConfig {
    EnvId env = EnvId::lava;
    Algo algo = Algo::tdpg;
    double beta = 0.01;
    std::size_t rollouts = 500;        // N per policy epoch
    std::size_t mine_minibatch = 50;   // B
    double lr_policy = 8e-4;
    double lr_mine = 5e-5;
    std::size_t epochs = 300;
    std::size_t mine_epochs = 100;
    std::size_t mine_epochs_first = 5000;
    double ema_alpha = 5e-5;           // denominator-debias EMA
    double value_ema_alpha = 0.9;      // reported-MI smoothing
    bool use_value_ema = false;
    double cost_cap = 40.0;
    std::uint64_t seed = 0;
    EnvShiftSpec shift;                // training distribution
    std::size_t horizon = 5;
    std::size_t trv_dim = 2;
    std::size_t image_size = 16;       // ballcatch only
    std::size_t mine_hidden = 32;
    bool time_varying = true;
    double action_clamp = 2.0;         // 0 disables
    bool baseline = true;              // mean-cost variance reduction
    bool reward_to_go = false;
    bool terminal_mi = false;          // include an I[x_T; trv_T] term
    double grad_clip = 10.0;           // per-block L2 cap, 0 disables
    std::size_t checkpoint_every = 1;  // plus always the final epoch
    std::size_t mine_log_every = 1;
    bool early_stop = false;           // 20-epoch moving-average plateau
    std::string warm_start;            // checkpoint to initialize from
    unsigned threads = 1;
    std::string out_dir = "runs";
    std::string label = "run";
    std::function<void(const EpochRecord&)> on_epoch;  // progress hook, may be empty

    std::string run_dir() const { return out_dir + "/" + label; }
    std::size_t mi_terms() const {
        return algo == Algo::tdpg ? horizon + (terminal_mi ? 1 : 0) : horizon;
    }
    std::size_t state_dim() const { return env == EnvId::lava ? 2 : 5; }
};

// Paper hyperparameters for each benchmark.
TrainConfig default_config(EnvId env);
std::vector<double> default_beta_sweep(EnvId env);

std::string epoch_csv_header(std::size_t mi_terms);
std::string epoch_csv_row(const EpochRecord& r);
std::vector<EpochRecord> read_records_csv(const std::string& path);

struct RolloutOptions {
    EnvId env = EnvId::lava;
    EnvShiftSpec shift;
    std::size_t n = 1;
    double action_clamp = 0.0;
    bool deterministic = false;  // force all sampling noise to zero
    bool terminal_trv = false;
    unsigned threads = 1;
};

// N independent rollouts. Rollout i draws everything it needs, in a fixed
// order, from epoch_rng.child(i), so the batch is identical at any thread
// count and any N prefix.
TrajectoryBatch rollout_batch(const PolicyParams& params, const RolloutOptions& opt,
                              const Rng& epoch_rng);

// Score-function gradient of the expected cost, scaled by `scale`,
// accumulated into the policy gradient slots. Full-return weighting with an
// optional mean-cost baseline; per-decision cost-to-go behind reward_to_go.
void pg_gradient(const TrajectoryBatch& batch, const PolicyParams& params, bool baseline,
                 bool reward_to_go, double scale);

// beta-scaled score-function cost term plus the pathwise MINE terms.
// The controller receives only the cost term. Returns the raw per-timestep
// DV estimates from the gradient pass.
std::vector<double> tdpg_gradient(const TrajectoryBatch& batch, const PolicyParams& params,
                                  const std::vector<MineEstimator>& ests, double beta,
                                  bool baseline, bool reward_to_go,
                                  const std::vector<std::vector<std::size_t>>& marg_rows);

struct TrainResult {
    std::vector<EpochRecord> records;
    PolicyParams params;  // state after the final update
};

// Algorithm loop: rollout batch, per-timestep MINE training (extra epochs on
// the first policy epoch), policy update. Writes records.csv, mine_log.csv
// and per-epoch checkpoints under cfg.run_dir(); rows are flushed as they
// are produced, so a failed run keeps its history.
TrainResult train(const TrainConfig& cfg);

// Builds the policy architecture (and, when requested, the MINE critics)
// for cfg, drawing initialization from the seed's init stream. The policy
// draws come first, so pg and tdpg runs with the same seed start from
// identical policy parameters.
PolicyParams build_policy(const TrainConfig& cfg, std::vector<MineCritic>* critics = nullptr);

class InfeasibleSweep : public std::runtime_error {
public:
    explicit InfeasibleSweep(const std::string& what) : std::runtime_error(what) {}
};

struct SweepCandidate {
    double beta = 0.0;
    EpochRecord record;
};

struct Selection {
    double beta = 0.0;
    EpochRecord record;
    double mi_sum = 0.0;
};

// Among checkpointed records with cost_mean <= cost_cap, the one minimizing
// the MI sum; ties broken by lower cost, then lower epoch, then lower beta.
// Throws InfeasibleSweep naming the best cost seen when nothing qualifies.
Selection select_policy(const std::vector<SweepCandidate>& candidates, double cost_cap);

}  // namespace tdpg
