#pragma once

#include <string>
#include <utility>
#include <vector>

#include "tdpg/envs.hpp"
#include "tdpg/rng.hpp"
#include "tdpg/tensor.hpp"

namespace tdpg {

enum class Act { none, elu, tanh };

struct DenseLayer {
    Tensor w, b;
    Act act = Act::none;
};

struct ConvLayer {
    Tensor k;
    std::size_t stride = 1;
    Act act = Act::none;
};

struct GaussOut {
    Tensor mean, log_std;
};

// Map from features to a diagonal-covariance Gaussian: optional conv trunk
// over an image, flattened and concatenated with a vector input, a dense
// stack, and parallel linear mean / log-std heads. The emitted log-std is
// clamped to [min_log_std, max_log_std].
struct GaussianNet {
    std::vector<ConvLayer> conv;
    std::vector<DenseLayer> dense;
    DenseLayer mean_head, logstd_head;
    double min_log_std = -5.0, max_log_std = 2.0;
    std::size_t vec_width = 0;  // vector-input width (after any conv features)
    std::size_t out_dim = 0;
    std::size_t image_channels = 0, image_size = 0;  // 0 when there is no conv trunk
};

// Batched forward pass. image is [n x ci x h x w] (leave undefined when the
// net has no conv trunk); vec is [n x vec_width] (undefined when vec_width
// is 0). Throws NumericError naming the layer on non-finite activations.
GaussOut gauss_forward(const GaussianNet& net, const Tensor& image, const Tensor& vec);

// Scalar critic F(x, trv): MLP with ELU hidden layers and a linear output.
struct MineCritic {
    std::vector<DenseLayer> layers;
    std::size_t in_width = 0;
};

// [n x in_width] -> [n]
Tensor critic_forward(const MineCritic& critic, const Tensor& xy);

// Encoder q (TRV given previous TRV and observation) and controller pi
// (action given TRV), each either shared across time or one copy per step.
struct PolicyParams {
    std::vector<GaussianNet> q, pi;
    bool time_varying = false;
    std::size_t horizon = 0, trv_dim = 0, action_dim = 0;
    std::size_t obs_dim = 0;    // vector observation width; 0 for image envs
    std::size_t image_size = 0;  // image side length; 0 for vector envs

    const GaussianNet& q_at(std::size_t t) const;
    const GaussianNet& pi_at(std::size_t t) const;
    // Named parameter blocks in a stable order: q/t{t}/layer{i}/{weight|bias}
    // then pi/... The checkpoint format serializes exactly this list.
    std::vector<std::pair<std::string, Tensor>> blocks() const;
    void clear_grads() const;
};

// MLP encoder/controller with two 64-unit ELU hidden layers, one copy per
// timestep (time-varying) unless shared weights are requested.
PolicyParams build_lava_nets(std::size_t trv_dim, std::size_t horizon, Rng& rng,
                             bool time_varying = true);

// Conv encoder (3->6 k4 s2, ELU, 6->6 k4 s2), flatten, concat previous TRV,
// two 32-unit tanh layers; linear controller. Shared across time.
PolicyParams build_ballcatch_nets(std::size_t image_size, std::size_t trv_dim,
                                  std::size_t horizon, Rng& rng);

// One critic per timestep 0..horizon-1, each [state+trv -> hidden -> hidden -> 1].
std::vector<MineCritic> build_mine_critics(std::size_t state_dim, std::size_t trv_dim,
                                           std::size_t horizon, std::size_t hidden, Rng& rng);
std::vector<std::pair<std::string, Tensor>> mine_blocks(const std::vector<MineCritic>& critics);
void clear_mine_grads(const std::vector<MineCritic>& critics);

struct GaussSample {
    Tensor sample, log_prob, eps;
};

// Reparameterized draw through a dense-path net: eps ~ N(0, I) row by row,
// sample = mean + exp(log_std) * eps, log_prob the density of the sample.
GaussSample sample_gaussian(const GaussianNet& net, const Tensor& input, Rng& rng);

// The TRV sequence as a differentiable function of the encoder parameters:
// recurrent unroll from a zero initial TRV with the recorded observations
// and noises held constant. Returns [n x trv_dim] per timestep.
std::vector<Tensor> unroll_trvs(const PolicyParams& params, const TrajectoryBatch& batch);

// Constant (no-grad) tensors over rollout storage.
Tensor batch_obs_tensor(const TrajectoryBatch& batch, const PolicyParams& params, std::size_t t);
Tensor batch_matrix(const std::vector<double>& flat, std::size_t n, std::size_t dim);

}  // namespace tdpg
