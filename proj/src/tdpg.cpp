#include "tdpg/tdpg.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "tdpg/checkpoint.hpp"
#include "tdpg/csv.hpp"
#include "tdpg/render.hpp"
#include "tdpg/threading.hpp"

namespace tdpg {

Algo algo_from_string(const std::string& s) {
    if (s == "pg") return Algo::pg;
    if (s == "tdpg") return Algo::tdpg;
    throw ContractViolation("unknown algorithm '" + s + "' (expected pg or tdpg)");
}

std::string algo_to_string(Algo a) { return a == Algo::pg ? "pg" : "tdpg"; }

TrainConfig default_config(EnvId env) {
    TrainConfig c;
    c.env = env;
    if (env == EnvId::lava) {
        c.beta = 1.0 / 100.0;
        c.rollouts = 500;
        c.mine_minibatch = 50;
        c.lr_policy = 8e-4;
        c.lr_mine = 5e-5;
        c.epochs = 300;
        c.mine_epochs = 100;
        c.mine_epochs_first = 5000;
        c.cost_cap = 40.0;
        c.shift = lava_training_shift();
        c.horizon = 5;
        c.trv_dim = 2;
        c.mine_hidden = 32;
        c.time_varying = true;
        c.action_clamp = 2.0;
    } else {
        c.beta = 1.0 / 24.0;
        c.rollouts = 200;
        c.mine_minibatch = 20;
        c.lr_policy = 1e-3;
        c.lr_mine = 5e-5;
        c.epochs = 100;
        c.mine_epochs = 100;
        c.mine_epochs_first = 100000;
        c.cost_cap = 24.0;
        c.shift = ballcatch_training_shift();
        c.horizon = 25;
        c.trv_dim = 8;
        c.image_size = 16;
        c.mine_hidden = 64;
        c.time_varying = false;
        c.action_clamp = 0.0;
        c.mine_log_every = 100;
    }
    return c;
}

std::vector<double> default_beta_sweep(EnvId env) {
    std::vector<double> betas;
    if (env == EnvId::lava) {
        for (double d : {25.0, 50.0, 75.0, 100.0}) betas.push_back(1.0 / d);
    } else {
        for (double d = 16.0; d <= 40.0; d += 2.0) betas.push_back(1.0 / d);
    }
    return betas;
}

std::string epoch_csv_header(std::size_t mi_terms) {
    std::vector<std::string> cols = {"epoch", "beta", "cost_mean", "cost_std"};
    for (std::size_t t = 0; t < mi_terms; ++t) cols.push_back("mi_t" + std::to_string(t));
    cols.push_back("j_hat");
    cols.push_back("checkpoint_file");
    return join_csv(cols);
}

std::string epoch_csv_row(const EpochRecord& r) {
    std::vector<std::string> cols = {std::to_string(r.epoch), fmt_double(r.beta),
                                     fmt_double(r.cost_mean), fmt_double(r.cost_std)};
    for (double m : r.mi) cols.push_back(fmt_double(m));
    cols.push_back(fmt_double(r.j_hat));
    cols.push_back(r.checkpoint_file);
    return join_csv(cols);
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace

std::vector<EpochRecord> read_records_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ContractViolation("cannot open records file '" + path + "'");
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), "records file '" + path + "' is empty");
    const std::vector<std::string> header = split_csv(line);
    require(header.size() >= 6 && header[0] == "epoch" && header.back() == "checkpoint_file",
            "records file '" + path + "' has an unexpected header");
    const std::size_t mi_terms = header.size() - 6;
    std::vector<EpochRecord> records;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> f = split_csv(line);
        require(f.size() == header.size(), "records row width mismatch in '" + path + "'");
        EpochRecord r;
        r.epoch = static_cast<std::size_t>(std::stoull(f[0]));
        r.beta = std::stod(f[1]);
        r.cost_mean = std::stod(f[2]);
        r.cost_std = std::stod(f[3]);
        for (std::size_t t = 0; t < mi_terms; ++t) r.mi.push_back(std::stod(f[4 + t]));
        r.j_hat = std::stod(f[4 + mi_terms]);
        r.checkpoint_file = f[5 + mi_terms];
        records.push_back(std::move(r));
    }
    return records;
}

namespace {

struct EnvDims {
    std::size_t state_dim, obs_dim;
};

EnvDims env_dims(EnvId env, std::size_t image_size) {
    if (env == EnvId::lava) return {2, 2};
    return {5, 3 * image_size * image_size};
}

void store_row(std::vector<double>& dst, std::size_t row, const double* src, std::size_t dim) {
    std::copy(src, src + dim, dst.begin() + static_cast<std::ptrdiff_t>(row * dim));
}

// Rolls out rows [lo, hi). All sampling for rollout i comes from
// epoch_rng.child(i) in a fixed order: initial state, then per timestep the
// observation noise, the TRV noise, and the action noise.
void rollout_chunk(const PolicyParams& params, const RolloutOptions& opt, const Rng& epoch_rng,
                   std::size_t lo, std::size_t hi, TrajectoryBatch& batch) {
    const std::size_t m = hi - lo;
    const std::size_t T = params.horizon;
    const std::size_t trv_steps = batch.trvs.size();
    const EnvDims dims = env_dims(opt.env, params.image_size);

    std::vector<Rng> streams;
    streams.reserve(m);
    for (std::size_t k = 0; k < m; ++k) streams.push_back(epoch_rng.child(lo + k));

    std::vector<LavaState> lava(opt.env == EnvId::lava ? m : 0);
    std::vector<BallCatchState> ball(opt.env == EnvId::ballcatch ? m : 0);
    std::vector<double> state_row(dims.state_dim);
    auto write_state = [&](std::size_t t, std::size_t k) {
        if (opt.env == EnvId::lava) {
            state_row[0] = lava[k].d;
            state_row[1] = lava[k].v;
        } else {
            state_row = {ball[k].d, ball[k].bx, ball[k].by, ball[k].vx, ball[k].vy};
        }
        for (double v : state_row)
            if (!std::isfinite(v))
                throw NumericError("rollout " + std::to_string(lo + k) +
                                   ": non-finite state at t=" + std::to_string(t));
        store_row(batch.states[t], lo + k, state_row.data(), dims.state_dim);
    };

    for (std::size_t k = 0; k < m; ++k) {
        if (opt.env == EnvId::lava)
            lava[k] = lava_sample_initial(opt.shift, streams[k]);
        else
            ball[k] = ballcatch_sample_initial(opt.shift, streams[k]);
        write_state(0, k);
    }

    std::vector<double> obs_rows(m * dims.obs_dim);
    std::vector<double> eps_q(m * batch.trv_dim), eps_pi(m * batch.action_dim);
    Tensor prev_trv = Tensor::zeros({m, batch.trv_dim});

    for (std::size_t t = 0; t < trv_steps; ++t) {
        const bool acting = t < T;  // the optional extra step only emits a terminal TRV
        for (std::size_t k = 0; k < m; ++k) {
            double* orow = obs_rows.data() + k * dims.obs_dim;
            if (opt.env == EnvId::lava)
                lava_observe(lava[k], opt.shift.sensor_noise, streams[k], orow);
            else
                ballcatch_render(ball[k], opt.shift, params.image_size, streams[k], orow);
            for (std::size_t d = 0; d < batch.trv_dim; ++d)
                eps_q[k * batch.trv_dim + d] = opt.deterministic ? 0.0 : streams[k].normal();
            if (acting)
                for (std::size_t d = 0; d < batch.action_dim; ++d)
                    eps_pi[k * batch.action_dim + d] =
                        opt.deterministic ? 0.0 : streams[k].normal();
        }
        std::copy(obs_rows.begin(), obs_rows.end(),
                  batch.obs[t].begin() + static_cast<std::ptrdiff_t>(lo * dims.obs_dim));
        std::copy(eps_q.begin(), eps_q.end(),
                  batch.eps[t].begin() + static_cast<std::ptrdiff_t>(lo * batch.trv_dim));

        const GaussianNet& qnet = params.q_at(std::min(t, T - 1));
        GaussOut g;
        if (params.image_size > 0) {
            const Tensor img = Tensor::from_values({m, 3, params.image_size, params.image_size},
                                                   obs_rows);
            g = gauss_forward(qnet, img, prev_trv);
        } else {
            g = gauss_forward(qnet, Tensor(),
                              concat_cols(prev_trv, batch_matrix(obs_rows, m, dims.obs_dim)));
        }
        const Tensor trv =
            add(g.mean, mul(exp(g.log_std), batch_matrix(eps_q, m, batch.trv_dim)));
        std::copy(trv.values().begin(), trv.values().end(),
                  batch.trvs[t].begin() + static_cast<std::ptrdiff_t>(lo * batch.trv_dim));
        // Re-wrapped as a constant so each step's graph is independent.
        prev_trv = Tensor::from_values({m, batch.trv_dim}, trv.values());

        if (!acting) break;

        const GaussOut a = gauss_forward(params.pi_at(t), Tensor(), prev_trv);
        const Tensor act =
            add(a.mean, mul(exp(a.log_std), batch_matrix(eps_pi, m, batch.action_dim)));
        std::copy(act.values().begin(), act.values().end(),
                  batch.actions[t].begin() + static_cast<std::ptrdiff_t>(lo * batch.action_dim));

        for (std::size_t k = 0; k < m; ++k) {
            double u = act.values()[k * batch.action_dim];
            if (!std::isfinite(u))
                throw NumericError("rollout " + std::to_string(lo + k) +
                                   ": non-finite action at t=" + std::to_string(t));
            if (opt.action_clamp > 0.0)
                u = std::clamp(u, -opt.action_clamp, opt.action_clamp);
            if (opt.env == EnvId::lava) {
                batch.stage_costs[t][lo + k] = lava_cost(lava[k], t, T);
                lava[k] = lava_step(lava[k], u);
            } else {
                batch.stage_costs[t][lo + k] = ballcatch_cost(ball[k], u, t, T);
                ball[k] = ballcatch_step(ball[k], u);
            }
            write_state(t + 1, k);
        }
    }

    for (std::size_t k = 0; k < m; ++k) {
        batch.stage_costs[T][lo + k] =
            opt.env == EnvId::lava ? lava_cost(lava[k], T, T)
                                   : ballcatch_cost(ball[k], 0.0, T, T);
    }
}

}  // namespace

TrajectoryBatch rollout_batch(const PolicyParams& params, const RolloutOptions& opt,
                              const Rng& epoch_rng) {
    require(opt.n >= 1, "rollout_batch: need at least one rollout");
    require(params.horizon >= 1, "rollout_batch: zero horizon");
    const std::size_t T = params.horizon;
    const std::size_t trv_steps = T + (opt.terminal_trv ? 1 : 0);
    const EnvDims dims = env_dims(opt.env, params.image_size);

    TrajectoryBatch batch;
    batch.n = opt.n;
    batch.horizon = T;
    batch.state_dim = dims.state_dim;
    batch.obs_dim = dims.obs_dim;
    batch.trv_dim = params.trv_dim;
    batch.action_dim = params.action_dim;
    batch.states.assign(T + 1, std::vector<double>(opt.n * dims.state_dim));
    batch.obs.assign(trv_steps, std::vector<double>(opt.n * dims.obs_dim));
    batch.trvs.assign(trv_steps, std::vector<double>(opt.n * params.trv_dim));
    batch.eps.assign(trv_steps, std::vector<double>(opt.n * params.trv_dim));
    batch.actions.assign(T, std::vector<double>(opt.n * params.action_dim));
    batch.stage_costs.assign(T + 1, std::vector<double>(opt.n));
    batch.total_costs.assign(opt.n, 0.0);

    const unsigned workers = opt.threads == 0 ? hardware_threads() : opt.threads;
    const std::size_t chunks = std::min<std::size_t>(workers, opt.n);
    parallel_for(chunks, workers, [&](std::size_t ci) {
        const std::size_t lo = ci * opt.n / chunks;
        const std::size_t hi = (ci + 1) * opt.n / chunks;
        if (lo < hi) rollout_chunk(params, opt, epoch_rng, lo, hi, batch);
    });

    for (std::size_t i = 0; i < opt.n; ++i) {
        double total = 0.0;
        for (std::size_t t = 0; t <= T; ++t) total += batch.stage_costs[t][i];
        batch.total_costs[i] = total;
    }
    return batch;
}

namespace {

// Per-timestep score weights: scaled, optionally baselined cost signal.
std::vector<std::vector<double>> score_weights(const TrajectoryBatch& batch, bool baseline,
                                               bool reward_to_go, double scale) {
    const std::size_t n = batch.n, T = batch.horizon;
    std::vector<std::vector<double>> w(T, std::vector<double>(n));
    if (!reward_to_go) {
        double b = 0.0;
        if (baseline) {
            for (double c : batch.total_costs) b += c;
            b /= static_cast<double>(n);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double wi = scale * (batch.total_costs[i] - b);
            for (std::size_t t = 0; t < T; ++t) w[t][i] = wi;
        }
        return w;
    }
    std::vector<double> ctg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) ctg[i] = batch.stage_costs[T][i];
    for (std::size_t t = T; t-- > 0;) {
        for (std::size_t i = 0; i < n; ++i) ctg[i] += batch.stage_costs[t][i];
        double b = 0.0;
        if (baseline) {
            for (double c : ctg) b += c;
            b /= static_cast<double>(n);
        }
        for (std::size_t i = 0; i < n; ++i) w[t][i] = scale * (ctg[i] - b);
    }
    return w;
}

}  // namespace

void pg_gradient(const TrajectoryBatch& batch, const PolicyParams& params, bool baseline,
                 bool reward_to_go, double scale) {
    require(batch.horizon == params.horizon, "pg_gradient: horizon mismatch");
    const std::size_t n = batch.n, T = batch.horizon;
    const auto w = score_weights(batch, baseline, reward_to_go, scale);

    Tensor surrogate;
    for (std::size_t t = 0; t < T; ++t) {
        const Tensor wcol = Tensor::from_values({n}, w[t]);
        const Tensor prev = t == 0 ? Tensor::zeros({n, batch.trv_dim})
                                   : batch_matrix(batch.trvs[t - 1], n, batch.trv_dim);
        const Tensor trv_t = batch_matrix(batch.trvs[t], n, batch.trv_dim);
        const Tensor act_t = batch_matrix(batch.actions[t], n, batch.action_dim);

        GaussOut g;
        if (params.image_size > 0) {
            g = gauss_forward(params.q_at(t), batch_obs_tensor(batch, params, t), prev);
        } else {
            g = gauss_forward(params.q_at(t), Tensor(),
                              concat_cols(prev, batch_obs_tensor(batch, params, t)));
        }
        const Tensor logq = gaussian_log_prob(trv_t, g.mean, g.log_std);
        const GaussOut a = gauss_forward(params.pi_at(t), Tensor(), trv_t);
        const Tensor logpi = gaussian_log_prob(act_t, a.mean, a.log_std);

        const Tensor term = add(mean(mul(logq, wcol)), mean(mul(logpi, wcol)));
        surrogate = t == 0 ? term : add(surrogate, term);
    }
    backward(surrogate);
}

std::vector<double> tdpg_gradient(const TrajectoryBatch& batch, const PolicyParams& params,
                                  const std::vector<MineEstimator>& ests, double beta,
                                  bool baseline, bool reward_to_go,
                                  const std::vector<std::vector<std::size_t>>& marg_rows) {
    require(ests.size() == batch.trvs.size(),
            "tdpg_gradient: estimator count does not match the horizon");
    pg_gradient(batch, params, baseline, reward_to_go, beta);
    return mine_grad_wrt_policy_all(ests, batch, params, marg_rows);
}

PolicyParams build_policy(const TrainConfig& cfg, std::vector<MineCritic>* critics) {
    Rng master(cfg.seed);
    Rng init = master.child(stream::kInit);
    PolicyParams params;
    if (cfg.env == EnvId::lava) {
        params = build_lava_nets(cfg.trv_dim, cfg.horizon, init, cfg.time_varying);
    } else {
        require(!cfg.time_varying, "ballcatch nets are shared across time");
        params = build_ballcatch_nets(cfg.image_size, cfg.trv_dim, cfg.horizon, init);
    }
    if (critics) {
        *critics = build_mine_critics(cfg.state_dim(), cfg.trv_dim, cfg.mi_terms(),
                                      cfg.mine_hidden, init);
    }
    return params;
}

namespace {

void validate(const TrainConfig& cfg) {
    require(cfg.rollouts >= 2, "config: rollouts must be >= 2");
    require(cfg.horizon >= 1, "config: horizon must be >= 1");
    require(cfg.epochs >= 1, "config: epochs must be >= 1");
    require(cfg.lr_policy > 0.0 && cfg.lr_mine > 0.0, "config: learning rates must be positive");
    require(cfg.ema_alpha >= 0.0 && cfg.ema_alpha < 1.0, "config: ema_alpha must lie in [0, 1)");
    require(cfg.value_ema_alpha >= 0.0 && cfg.value_ema_alpha < 1.0,
            "config: value_ema_alpha must lie in [0, 1)");
    if (cfg.algo == Algo::tdpg) {
        require(cfg.beta > 0.0, "config: beta must be positive for tdpg");
        require(cfg.mine_minibatch >= 1 && cfg.mine_minibatch < cfg.rollouts,
                "config: mine_minibatch must satisfy 1 <= B < rollouts");
    }
    if (cfg.env == EnvId::ballcatch)
        require(cfg.image_size == 16 || cfg.image_size == 32 || cfg.image_size == 64,
                "config: image_size must be 16, 32, or 64");
}

double sample_std(const std::vector<double>& xs, double mean) {
    if (xs.size() < 2) return 0.0;
    double sq = 0.0;
    for (double x : xs) sq += (x - mean) * (x - mean);
    return std::sqrt(sq / static_cast<double>(xs.size() - 1));
}

}  // namespace

TrainResult train(const TrainConfig& cfg) {
    validate(cfg);
    namespace fs = std::filesystem;
    const std::string run_dir = cfg.run_dir();
    fs::create_directories(run_dir + "/checkpoints");

    Rng master(cfg.seed);
    std::vector<MineCritic> critics;
    PolicyParams params = build_policy(cfg, cfg.algo == Algo::tdpg ? &critics : nullptr);
    if (!cfg.warm_start.empty())
        assign_blocks(params.blocks(), load_checkpoint(cfg.warm_start));

    AdamConfig ac;
    ac.lr = cfg.lr_policy;
    Adam opt(ac);  // warm starts get fresh moments
    opt.register_blocks(params.blocks());

    std::vector<MineEstimator> ests;
    for (MineCritic& c : critics)
        ests.push_back(make_mine_estimator(std::move(c), cfg.lr_mine, cfg.ema_alpha,
                                           cfg.value_ema_alpha));

    std::ofstream records_os(run_dir + "/records.csv", std::ios::trunc);
    if (!records_os) throw ContractViolation("cannot write " + run_dir + "/records.csv");
    records_os << epoch_csv_header(cfg.mi_terms()) << "\n" << std::flush;
    std::ofstream mine_os;
    if (cfg.algo == Algo::tdpg) {
        mine_os.open(run_dir + "/mine_log.csv", std::ios::trunc);
        if (!mine_os) throw ContractViolation("cannot write " + run_dir + "/mine_log.csv");
        mine_os << "epoch,timestep,j_dv,ema_denominator\n" << std::flush;
    }

    RolloutOptions ro;
    ro.env = cfg.env;
    ro.shift = cfg.shift;
    ro.n = cfg.rollouts;
    ro.action_clamp = cfg.action_clamp;
    ro.terminal_trv = cfg.algo == Algo::tdpg && cfg.terminal_mi;
    ro.threads = cfg.threads;

    TrainResult result;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
        const TrajectoryBatch batch = rollout_batch(params, ro, master.child(stream::kRollout, e));

        EpochRecord rec;
        rec.epoch = e;
        rec.beta = cfg.beta;
        double mean_cost = 0.0;
        for (double c : batch.total_costs) mean_cost += c;
        mean_cost /= static_cast<double>(batch.n);
        rec.cost_mean = mean_cost;
        rec.cost_std = sample_std(batch.total_costs, mean_cost);

        // The checkpoint precedes the update: it is the policy that produced
        // this epoch's statistics.
        if (cfg.checkpoint_every > 0 &&
            (e % cfg.checkpoint_every == 0 || e + 1 == cfg.epochs)) {
            rec.checkpoint_file = "checkpoints/epoch" + std::to_string(e) + ".bin";
            save_checkpoint(run_dir + "/" + rec.checkpoint_file, params.blocks());
        }

        if (cfg.algo == Algo::tdpg) {
            const std::size_t mine_epochs = e == 0 ? cfg.mine_epochs_first : cfg.mine_epochs;
            Rng mine_rng = master.child(stream::kMine, e);
            std::vector<std::vector<MineLogRow>> logs(ests.size());
            parallel_for(ests.size(), cfg.threads, [&](std::size_t t) {
                SamplePairBatch pairs;
                pairs.x = batch_matrix(batch.states[t], batch.n, batch.state_dim);
                pairs.xt = batch_matrix(batch.trvs[t], batch.n, batch.trv_dim);
                Rng r = mine_rng.child(t);
                train_mine(ests[t], pairs, mine_epochs, cfg.mine_minibatch, r, t, &logs[t],
                           cfg.mine_log_every);
            });
            for (const auto& rows : logs)
                for (const MineLogRow& row : rows)
                    mine_os << row.epoch << "," << row.timestep << "," << fmt_double(row.j_dv)
                            << "," << fmt_double(row.ema_denominator) << "\n";
            mine_os << std::flush;

            Rng shuffle_rng = master.child(stream::kShuffle, e);
            std::vector<std::vector<std::size_t>> marg(ests.size());
            for (std::size_t t = 0; t < ests.size(); ++t) {
                Rng r = shuffle_rng.child(t);
                marg[t] = derangement(batch.n, r);
            }

            params.clear_grads();
            const std::vector<double> mi_raw =
                tdpg_gradient(batch, params, ests, cfg.beta, cfg.baseline, cfg.reward_to_go,
                              marg);
            rec.mi.resize(mi_raw.size());
            for (std::size_t t = 0; t < mi_raw.size(); ++t) {
                MineEstimator& est = ests[t];
                est.value_ema = est.value_ema_initialized
                                    ? ema_update(est.value_ema, mi_raw[t], est.value_ema_alpha)
                                    : mi_raw[t];
                est.value_ema_initialized = true;
                const double reported = cfg.use_value_ema ? est.value_ema : mi_raw[t];
                rec.mi[t] = std::max(0.0, reported);
            }
        } else {
            params.clear_grads();
            pg_gradient(batch, params, cfg.baseline, cfg.reward_to_go, 1.0);
            rec.mi.assign(cfg.mi_terms(), 0.0);
        }

        rec.j_hat = rec.beta * rec.cost_mean;
        for (double m : rec.mi) rec.j_hat += m;

        for (auto& [name, t] : params.blocks()) {
            (void)name;
            clip_grad_norm(t, cfg.grad_clip);
        }
        opt.step();

        records_os << epoch_csv_row(rec) << "\n" << std::flush;
        if (cfg.on_epoch) cfg.on_epoch(rec);
        result.records.push_back(std::move(rec));

        if (cfg.early_stop && e >= 39) {
            auto metric = [&](const EpochRecord& r) {
                return cfg.algo == Algo::tdpg ? r.j_hat : r.cost_mean;
            };
            double recent = 0.0, previous = 0.0;
            for (std::size_t i = 0; i < 20; ++i) {
                recent += metric(result.records[e - i]);
                previous += metric(result.records[e - 20 - i]);
            }
            if (recent >= previous - 1e-9) break;
        }
    }

    result.params = std::move(params);
    return result;
}

Selection select_policy(const std::vector<SweepCandidate>& candidates, double cost_cap) {
    require(!candidates.empty(), "select_policy: no candidates");
    bool have_best = false;
    Selection best;
    double lowest_cost = std::numeric_limits<double>::infinity();
    for (const SweepCandidate& c : candidates) {
        lowest_cost = std::min(lowest_cost, c.record.cost_mean);
        if (c.record.checkpoint_file.empty()) continue;  // nothing to load for this epoch
        if (c.record.cost_mean > cost_cap) continue;
        double mi_sum = 0.0;
        for (double m : c.record.mi) mi_sum += m;
        const auto key = std::make_tuple(mi_sum, c.record.cost_mean, c.record.epoch, c.beta);
        const auto best_key =
            std::make_tuple(best.mi_sum, best.record.cost_mean, best.record.epoch, best.beta);
        if (!have_best || key < best_key) {
            best.beta = c.beta;
            best.record = c.record;
            best.mi_sum = mi_sum;
            have_best = true;
        }
    }
    if (!have_best)
        throw InfeasibleSweep("no policy satisfies the cost cap " + fmt_double(cost_cap) +
                              "; best mean cost seen was " + fmt_double(lowest_cost));
    return best;
}

}  // namespace tdpg
