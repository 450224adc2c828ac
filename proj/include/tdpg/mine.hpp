#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tdpg/adam.hpp"
#include "tdpg/nets.hpp"
#include "tdpg/rng.hpp"
#include "tdpg/tensor.hpp"

namespace tdpg {

// f_t = (1 - alpha) * a_t + alpha * f_{t-1}
double ema_update(double prev, double next, double alpha);

// Donsker-Varadhan critic plus the moving-average state used to debias its
// minibatch gradient (the denominator EMA) and to smooth reported values.
struct MineEstimator {
    MineCritic critic;
    Adam opt;
    double ema_alpha = 5e-5;
    double ema_denominator = 0.0;
    bool ema_initialized = false;
    double value_ema_alpha = 0.9;
    double value_ema = 0.0;
    bool value_ema_initialized = false;
    std::size_t trained_epochs = 0;
};

MineEstimator make_mine_estimator(MineCritic critic, double lr, double ema_alpha,
                                  double value_ema_alpha);

// Joint draws from one timestep: rows of x (state) paired with rows of
// xt (TRV). Both are constant [n x d] tensors.
struct SamplePairBatch {
    Tensor x, xt;
    std::size_t size() const { return x.defined() ? x.shape()[0] : 0; }
};

// J_dv = mean_joint F - log-mean-exp_marginal F, as a differentiable scalar.
// The log-mean-exp is max-subtracted, so finite critic outputs cannot
// overflow it.
Tensor dv_objective(const MineCritic& critic, const Tensor& joint_x, const Tensor& joint_xt,
                    const Tensor& marg_x, const Tensor& marg_xt);

struct MineLogRow {
    std::size_t epoch = 0;  // cumulative per-estimator training epoch
    std::size_t timestep = 0;
    double j_dv = 0.0;
    double ema_denominator = 0.0;
};

// Algorithm: per epoch, sample a joint minibatch (x^j, xt^j) and a marginal
// minibatch (x^j, xt^m) with independently drawn m, then ascend
// mean(F_joint) - mean(exp F_marg) / ema(denominator). Throws NumericError
// with diagnostics if the estimate goes non-finite.
void train_mine(MineEstimator& est, const SamplePairBatch& batch, std::size_t epochs,
                std::size_t minibatch, Rng& rng, std::size_t timestep,
                std::vector<MineLogRow>* log, std::size_t log_every = 1);

// Sattolo single-cycle shuffle: a permutation with no fixed points, used to
// realize the product-of-marginals column.
std::vector<std::size_t> derangement(std::size_t n, Rng& rng);

// Full-batch DV estimate with an explicit marginal row assignment.
double mine_value(const MineEstimator& est, const Tensor& x, const Tensor& xt,
                  const std::vector<std::size_t>& marg_rows);

// Full-batch DV estimate; the marginal pairing is a fresh derangement of the
// xt column. May be slightly negative; callers clamp for reporting only.
double mine_estimate(const MineEstimator& est, const Tensor& x, const Tensor& xt, Rng& rng);

// Pathwise (reparameterized) gradient of the fixed-critic DV estimate at
// timestep t with respect to the encoder parameters; accumulates into the
// q-block gradient slots and returns the estimate. States, observations and
// noises are constants; the critic gradient slots are cleared afterwards.
double mine_grad_wrt_policy(const MineEstimator& est, const TrajectoryBatch& batch,
                            const PolicyParams& params, std::size_t t,
                            const std::vector<std::size_t>& marg_rows);

// All timesteps through one shared unroll; gradient equals the per-t sum.
std::vector<double> mine_grad_wrt_policy_all(const std::vector<MineEstimator>& ests,
                                             const TrajectoryBatch& batch,
                                             const PolicyParams& params,
                                             const std::vector<std::vector<std::size_t>>& marg_rows);

struct MineSelftestCase {
    double rho = 0.0;
    double target = 0.0;
    double tolerance = 0.0;
    double estimate = 0.0;
    bool pass = false;
};

// Bivariate-Gaussian oracle: trains a fresh estimator per correlation and
// evaluates on held-out samples against -0.5 * ln(1 - rho^2).
std::vector<MineSelftestCase> mine_gaussian_selftest(std::uint64_t seed);

}  // namespace tdpg
