#include "tdpg/mine.hpp"

#include <cmath>

namespace tdpg {

double ema_update(double prev, double next, double alpha) {
    require(alpha >= 0.0 && alpha < 1.0, "ema_update: alpha must lie in [0, 1)");
    return (1.0 - alpha) * next + alpha * prev;
}

MineEstimator make_mine_estimator(MineCritic critic, double lr, double ema_alpha,
                                  double value_ema_alpha) {
    MineEstimator est;
    est.critic = std::move(critic);
    AdamConfig ac;
    ac.lr = lr;
    est.opt = Adam(ac);
    for (std::size_t li = 0; li < est.critic.layers.size(); ++li) {
        est.opt.register_block("layer" + std::to_string(li) + "/weight",
                               est.critic.layers[li].w);
        est.opt.register_block("layer" + std::to_string(li) + "/bias", est.critic.layers[li].b);
    }
    est.ema_alpha = ema_alpha;
    est.value_ema_alpha = value_ema_alpha;
    return est;
}

Tensor dv_objective(const MineCritic& critic, const Tensor& joint_x, const Tensor& joint_xt,
                    const Tensor& marg_x, const Tensor& marg_xt) {
    require(joint_x.defined() && joint_x.shape()[0] > 0, "dv_objective: empty joint batch");
    require(marg_x.defined() && marg_x.shape()[0] > 0, "dv_objective: empty marginal batch");
    const Tensor f_joint = critic_forward(critic, concat_cols(joint_x, joint_xt));
    const Tensor f_marg = critic_forward(critic, concat_cols(marg_x, marg_xt));
    const double m = static_cast<double>(f_marg.shape()[0]);
    const Tensor log_mean_exp = shift(logsumexp(f_marg), -std::log(m));
    return sub(mean(f_joint), log_mean_exp);
}

namespace {

void clear_critic_grads(const MineCritic& critic) {
    for (const DenseLayer& l : critic.layers) {
        Tensor w = l.w, b = l.b;
        w.clear_grad();
        b.clear_grad();
    }
}

double critic_param_norm(const MineCritic& critic) {
    double sq = 0.0;
    for (const DenseLayer& l : critic.layers) {
        for (double v : l.w.values()) sq += v * v;
        for (double v : l.b.values()) sq += v * v;
    }
    return std::sqrt(sq);
}

std::string batch_stats(const Tensor& t) {
    double lo = t.values()[0], hi = lo, sum = 0.0;
    for (double v : t.values()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        sum += v;
    }
    return "min=" + std::to_string(lo) + " max=" + std::to_string(hi) +
           " mean=" + std::to_string(sum / static_cast<double>(t.size()));
}

}  // namespace

void train_mine(MineEstimator& est, const SamplePairBatch& batch, std::size_t epochs,
                std::size_t minibatch, Rng& rng, std::size_t timestep,
                std::vector<MineLogRow>* log, std::size_t log_every) {
    const std::size_t n = batch.size();
    require(n >= 2, "train_mine: batch must hold at least two pairs");
    require(minibatch >= 1 && minibatch < n,
            "train_mine: minibatch size must satisfy 1 <= B < N");
    if (log_every == 0) log_every = 1;

    for (std::size_t e = 0; e < epochs; ++e) {
        std::vector<std::size_t> j(minibatch), m(minibatch);
        for (std::size_t b = 0; b < minibatch; ++b) j[b] = rng.index(n);
        for (std::size_t b = 0; b < minibatch; ++b) m[b] = rng.index(n);

        const Tensor joint_x = gather_rows(batch.x, j);
        const Tensor joint_xt = gather_rows(batch.xt, j);
        const Tensor marg_xt = gather_rows(batch.xt, m);

        const Tensor f_joint = critic_forward(est.critic, concat_cols(joint_x, joint_xt));
        const Tensor f_marg = critic_forward(est.critic, concat_cols(joint_x, marg_xt));
        const Tensor mean_joint = mean(f_joint);
        const Tensor mean_exp_marg = mean(exp(f_marg));

        const double denom = mean_exp_marg.item();
        est.ema_denominator = est.ema_initialized
                                  ? ema_update(est.ema_denominator, denom, est.ema_alpha)
                                  : denom;
        est.ema_initialized = true;

        const double j_dv =
            mean_joint.item() - (logsumexp(f_marg).item() - std::log(double(minibatch)));
        if (!std::isfinite(j_dv) || !std::isfinite(est.ema_denominator) ||
            est.ema_denominator <= 0.0)
            throw NumericError(
                "train_mine: estimate diverged at epoch " + std::to_string(est.trained_epochs) +
                " (J_dv=" + std::to_string(j_dv) + ", ema=" + std::to_string(est.ema_denominator) +
                ", |theta|=" + std::to_string(critic_param_norm(est.critic)) +
                ", x " + batch_stats(batch.x) + ", xt " + batch_stats(batch.xt) + ")");

        // Ascend mean(F_joint) - mean(exp F_marg) / ema; the EMA enters as a
        // constant, which is what debiases the minibatch gradient.
        const Tensor surrogate =
            sub(mean_joint, scale(mean_exp_marg, 1.0 / est.ema_denominator));
        clear_critic_grads(est.critic);
        backward(neg(surrogate));
        est.opt.step();

        if (log && (est.trained_epochs % log_every == 0))
            log->push_back({est.trained_epochs, timestep, j_dv, est.ema_denominator});
        ++est.trained_epochs;
    }
}

std::vector<std::size_t> derangement(std::size_t n, Rng& rng) {
    require(n >= 2, "derangement: need at least two elements");
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n - 1; i >= 1; --i) {
        const std::size_t j = rng.index(i);  // 0 <= j < i: single-cycle shuffle
        std::swap(p[i], p[j]);
    }
    return p;
}

double mine_value(const MineEstimator& est, const Tensor& x, const Tensor& xt,
                  const std::vector<std::size_t>& marg_rows) {
    require(x.shape()[0] >= 2, "mine_value: batch must hold at least two pairs");
    require(marg_rows.size() == x.shape()[0], "mine_value: marginal assignment size mismatch");
    const Tensor marg_xt = gather_rows(xt, marg_rows);
    return dv_objective(est.critic, x, xt, x, marg_xt).item();
}

double mine_estimate(const MineEstimator& est, const Tensor& x, const Tensor& xt, Rng& rng) {
    return mine_value(est, x, xt, derangement(x.shape()[0], rng));
}

namespace {

// DV term at one timestep given the differentiable TRV matrix.
Tensor dv_term(const MineEstimator& est, const TrajectoryBatch& batch, std::size_t t,
               const Tensor& trv, const std::vector<std::size_t>& marg_rows) {
    require(marg_rows.size() == batch.n, "mine gradient: marginal assignment size mismatch");
    const Tensor state = batch_matrix(batch.states[t], batch.n, batch.state_dim);
    const Tensor f_joint = critic_forward(est.critic, concat_cols(state, trv));
    const Tensor f_marg =
        critic_forward(est.critic, concat_cols(state, gather_rows(trv, marg_rows)));
    const Tensor log_mean_exp =
        shift(logsumexp(f_marg), -std::log(static_cast<double>(batch.n)));
    return sub(mean(f_joint), log_mean_exp);
}

}  // namespace

double mine_grad_wrt_policy(const MineEstimator& est, const TrajectoryBatch& batch,
                            const PolicyParams& params, std::size_t t,
                            const std::vector<std::size_t>& marg_rows) {
    require(t < batch.trvs.size(), "mine_grad_wrt_policy: timestep out of range");
    const std::vector<Tensor> trvs = unroll_trvs(params, batch);
    const Tensor term = dv_term(est, batch, t, trvs[t], marg_rows);
    backward(term);
    clear_critic_grads(est.critic);
    return term.item();
}

std::vector<double> mine_grad_wrt_policy_all(
    const std::vector<MineEstimator>& ests, const TrajectoryBatch& batch,
    const PolicyParams& params, const std::vector<std::vector<std::size_t>>& marg_rows) {
    require(ests.size() == batch.trvs.size(),
            "mine_grad_wrt_policy_all: estimator count does not match TRV count");
    require(marg_rows.size() == ests.size(),
            "mine_grad_wrt_policy_all: marginal assignment count mismatch");
    const std::vector<Tensor> trvs = unroll_trvs(params, batch);
    std::vector<Tensor> terms;
    terms.reserve(ests.size());
    for (std::size_t t = 0; t < ests.size(); ++t)
        terms.push_back(dv_term(ests[t], batch, t, trvs[t], marg_rows[t]));
    Tensor total = terms[0];
    for (std::size_t t = 1; t < terms.size(); ++t) total = add(total, terms[t]);
    backward(total);
    for (const MineEstimator& est : ests) clear_critic_grads(est.critic);
    std::vector<double> values;
    values.reserve(terms.size());
    for (const Tensor& term : terms) values.push_back(term.item());
    return values;
}

std::vector<MineSelftestCase> mine_gaussian_selftest(std::uint64_t seed) {
    const double rhos[3] = {0.0, 0.5, 0.9};
    const double tols[3] = {0.05, 0.05, 0.13};
    const std::size_t n = 10000;
    const std::size_t epochs = 3000;
    const std::size_t minibatch = 256;

    std::vector<MineSelftestCase> cases;
    Rng master(seed);
    for (int k = 0; k < 3; ++k) {
        const double rho = rhos[k];
        Rng data_rng = master.child(0x60, static_cast<std::uint64_t>(k));
        auto draw = [&](std::size_t count) {
            std::vector<double> xs(count), ys(count);
            const double s = std::sqrt(1.0 - rho * rho);
            for (std::size_t i = 0; i < count; ++i) {
                const double a = data_rng.normal();
                const double b = data_rng.normal();
                xs[i] = a;
                ys[i] = rho * a + s * b;
            }
            SamplePairBatch batch;
            batch.x = Tensor::from_values({count, 1}, std::move(xs));
            batch.xt = Tensor::from_values({count, 1}, std::move(ys));
            return batch;
        };
        const SamplePairBatch train_batch = draw(n);
        const SamplePairBatch held_out = draw(n);

        Rng init_rng = master.child(0x61, static_cast<std::uint64_t>(k));
        MineEstimator est = make_mine_estimator(
            build_mine_critics(1, 1, 1, 64, init_rng)[0], 1e-3, 0.01, 0.9);
        Rng train_rng = master.child(0x62, static_cast<std::uint64_t>(k));
        train_mine(est, train_batch, epochs, minibatch, train_rng, 0, nullptr);

        Rng shuffle_rng = master.child(0x63, static_cast<std::uint64_t>(k));
        MineSelftestCase c;
        c.rho = rho;
        c.target = -0.5 * std::log(1.0 - rho * rho);
        c.tolerance = tols[k];
        c.estimate = mine_estimate(est, held_out.x, held_out.xt, shuffle_rng);
        c.pass = std::fabs(c.estimate - c.target) <= c.tolerance;
        cases.push_back(c);
    }
    return cases;
}

}  // namespace tdpg
