#include "tdpg/nets.hpp"

#include <cmath>

namespace tdpg {

namespace {

void check_finite(const Tensor& t, const std::string& label) {
    for (double v : t.values())
        if (!std::isfinite(v)) throw NumericError("non-finite activation in " + label);
}

Tensor apply_act(const Tensor& x, Act act) {
    switch (act) {
        case Act::none: return x;
        case Act::elu: return elu(x);
        case Act::tanh: return tanh(x);
    }
    throw ContractViolation("unknown activation");
}

Tensor init_weight(const Shape& shape, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<double> v(numel(shape));
    for (double& x : v) x = rng.uniform(-bound, bound);
    return Tensor::from_values(shape, std::move(v), true);
}

DenseLayer make_dense(std::size_t in, std::size_t out, Act act, Rng& rng) {
    DenseLayer l;
    l.w = init_weight({in, out}, in, rng);
    l.b = Tensor::zeros({out}, true);
    l.act = act;
    return l;
}

ConvLayer make_conv(std::size_t ci, std::size_t co, std::size_t k, std::size_t stride, Act act,
                    Rng& rng) {
    ConvLayer l;
    l.k = init_weight({co, ci, k, k}, ci * k * k, rng);
    l.stride = stride;
    l.act = act;
    return l;
}

// Two parallel linear heads on top of the shared trunk output.
void add_heads(GaussianNet& net, std::size_t in, std::size_t out, Rng& rng) {
    net.mean_head = make_dense(in, out, Act::none, rng);
    net.logstd_head = make_dense(in, out, Act::none, rng);
    net.out_dim = out;
}

void collect_net_blocks(const GaussianNet& net, const std::string& prefix,
                        std::vector<std::pair<std::string, Tensor>>& out) {
    std::size_t li = 0;
    for (const ConvLayer& c : net.conv)
        out.emplace_back(prefix + "/layer" + std::to_string(li++) + "/weight", c.k);
    for (const DenseLayer& d : net.dense) {
        out.emplace_back(prefix + "/layer" + std::to_string(li) + "/weight", d.w);
        out.emplace_back(prefix + "/layer" + std::to_string(li) + "/bias", d.b);
        ++li;
    }
    out.emplace_back(prefix + "/layer" + std::to_string(li) + "/weight", net.mean_head.w);
    out.emplace_back(prefix + "/layer" + std::to_string(li) + "/bias", net.mean_head.b);
    ++li;
    out.emplace_back(prefix + "/layer" + std::to_string(li) + "/weight", net.logstd_head.w);
    out.emplace_back(prefix + "/layer" + std::to_string(li) + "/bias", net.logstd_head.b);
}

}  // namespace

GaussOut gauss_forward(const GaussianNet& net, const Tensor& image, const Tensor& vec) {
    Tensor h;
    std::size_t li = 0;
    if (!net.conv.empty()) {
        require(image.defined() && image.rank() == 4,
                "gauss_forward: conv net needs an [n x c x h x w] image input");
        h = image;
        for (const ConvLayer& c : net.conv) {
            h = apply_act(conv2d(h, c.k, c.stride), c.act);
            check_finite(h, "conv layer" + std::to_string(li++));
        }
        h = reshape(h, {h.shape()[0], h.size() / h.shape()[0]});
        if (net.vec_width > 0) {
            require(vec.defined(), "gauss_forward: missing vector input");
            h = concat_cols(h, vec);
        }
    } else {
        require(vec.defined(), "gauss_forward: missing vector input");
        h = vec;
    }
    for (const DenseLayer& d : net.dense) {
        h = apply_act(affine(h, d.w, d.b), d.act);
        check_finite(h, "dense layer" + std::to_string(li++));
    }
    GaussOut out;
    out.mean = affine(h, net.mean_head.w, net.mean_head.b);
    check_finite(out.mean, "mean head");
    out.log_std = clamp(affine(h, net.logstd_head.w, net.logstd_head.b), net.min_log_std,
                        net.max_log_std);
    check_finite(out.log_std, "log-std head");
    return out;
}

Tensor critic_forward(const MineCritic& critic, const Tensor& xy) {
    require(xy.rank() == 2 && xy.shape()[1] == critic.in_width,
            "critic_forward: expected [n x " + std::to_string(critic.in_width) + "], got " +
                shape_str(xy.shape()));
    Tensor h = xy;
    std::size_t li = 0;
    for (const DenseLayer& d : critic.layers) {
        h = apply_act(affine(h, d.w, d.b), d.act);
        check_finite(h, "critic layer" + std::to_string(li++));
    }
    return reshape(h, {h.shape()[0]});
}

const GaussianNet& PolicyParams::q_at(std::size_t t) const {
    require(t < horizon, "q_at: timestep out of range");
    return q[time_varying ? t : 0];
}

const GaussianNet& PolicyParams::pi_at(std::size_t t) const {
    require(t < horizon, "pi_at: timestep out of range");
    return pi[time_varying ? t : 0];
}

std::vector<std::pair<std::string, Tensor>> PolicyParams::blocks() const {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t t = 0; t < q.size(); ++t)
        collect_net_blocks(q[t], "q/t" + std::to_string(t), out);
    for (std::size_t t = 0; t < pi.size(); ++t)
        collect_net_blocks(pi[t], "pi/t" + std::to_string(t), out);
    return out;
}

void PolicyParams::clear_grads() const {
    for (auto& [name, t] : blocks()) {
        (void)name;
        Tensor tt = t;
        tt.clear_grad();
    }
}

PolicyParams build_lava_nets(std::size_t trv_dim, std::size_t horizon, Rng& rng,
                             bool time_varying) {
    require(trv_dim >= 1, "build_lava_nets: trv_dim must be >= 1");
    require(horizon >= 1, "build_lava_nets: horizon must be >= 1");
    PolicyParams p;
    p.time_varying = time_varying;
    p.horizon = horizon;
    p.trv_dim = trv_dim;
    p.action_dim = 1;
    p.obs_dim = 2;
    const std::size_t copies = time_varying ? horizon : 1;
    for (std::size_t t = 0; t < copies; ++t) {
        GaussianNet q;
        q.vec_width = trv_dim + p.obs_dim;
        q.dense.push_back(make_dense(q.vec_width, 64, Act::elu, rng));
        q.dense.push_back(make_dense(64, 64, Act::elu, rng));
        add_heads(q, 64, trv_dim, rng);
        p.q.push_back(std::move(q));
    }
    for (std::size_t t = 0; t < copies; ++t) {
        GaussianNet pi;
        pi.vec_width = trv_dim;
        pi.dense.push_back(make_dense(trv_dim, 64, Act::elu, rng));
        pi.dense.push_back(make_dense(64, 64, Act::elu, rng));
        add_heads(pi, 64, p.action_dim, rng);
        p.pi.push_back(std::move(pi));
    }
    return p;
}

PolicyParams build_ballcatch_nets(std::size_t image_size, std::size_t trv_dim,
                                  std::size_t horizon, Rng& rng) {
    require(image_size == 16 || image_size == 32 || image_size == 64,
            "build_ballcatch_nets: image size must be 16, 32, or 64 (two stride-2 k=4 convs)");
    require(trv_dim >= 1, "build_ballcatch_nets: trv_dim must be >= 1");
    PolicyParams p;
    p.time_varying = false;
    p.horizon = horizon;
    p.trv_dim = trv_dim;
    p.action_dim = 1;
    p.obs_dim = 0;
    p.image_size = image_size;

    GaussianNet q;
    q.image_channels = 3;
    q.image_size = image_size;
    q.conv.push_back(make_conv(3, 6, 4, 2, Act::elu, rng));
    q.conv.push_back(make_conv(6, 6, 4, 2, Act::none, rng));
    const std::size_t s1 = (image_size - 4) / 2 + 1;
    const std::size_t s2 = (s1 - 4) / 2 + 1;
    const std::size_t flat = 6 * s2 * s2;
    q.vec_width = trv_dim;
    q.dense.push_back(make_dense(flat + trv_dim, 32, Act::tanh, rng));
    q.dense.push_back(make_dense(32, 32, Act::tanh, rng));
    add_heads(q, 32, trv_dim, rng);
    p.q.push_back(std::move(q));

    GaussianNet pi;  // single linear layer
    pi.vec_width = trv_dim;
    add_heads(pi, trv_dim, p.action_dim, rng);
    p.pi.push_back(std::move(pi));
    return p;
}

std::vector<MineCritic> build_mine_critics(std::size_t state_dim, std::size_t trv_dim,
                                           std::size_t horizon, std::size_t hidden, Rng& rng) {
    require(hidden >= 1, "build_mine_critics: hidden width must be >= 1");
    std::vector<MineCritic> critics;
    critics.reserve(horizon);
    for (std::size_t t = 0; t < horizon; ++t) {
        MineCritic c;
        c.in_width = state_dim + trv_dim;
        c.layers.push_back(make_dense(c.in_width, hidden, Act::elu, rng));
        c.layers.push_back(make_dense(hidden, hidden, Act::elu, rng));
        c.layers.push_back(make_dense(hidden, 1, Act::none, rng));
        critics.push_back(std::move(c));
    }
    return critics;
}

std::vector<std::pair<std::string, Tensor>> mine_blocks(const std::vector<MineCritic>& critics) {
    std::vector<std::pair<std::string, Tensor>> out;
    for (std::size_t t = 0; t < critics.size(); ++t) {
        for (std::size_t li = 0; li < critics[t].layers.size(); ++li) {
            const std::string prefix = "mine/t" + std::to_string(t) + "/layer" +
                                       std::to_string(li);
            out.emplace_back(prefix + "/weight", critics[t].layers[li].w);
            out.emplace_back(prefix + "/bias", critics[t].layers[li].b);
        }
    }
    return out;
}

void clear_mine_grads(const std::vector<MineCritic>& critics) {
    for (auto& [name, t] : mine_blocks(critics)) {
        (void)name;
        Tensor tt = t;
        tt.clear_grad();
    }
}

GaussSample sample_gaussian(const GaussianNet& net, const Tensor& input, Rng& rng) {
    require(net.conv.empty(), "sample_gaussian: conv nets take gauss_forward directly");
    GaussOut g = gauss_forward(net, Tensor(), input);
    const std::size_t rows = g.mean.rank() == 2 ? g.mean.shape()[0] : 1;
    const std::size_t d = g.mean.size() / rows;
    std::vector<double> noise(rows * d);
    for (double& v : noise) v = rng.normal();
    GaussSample s;
    s.eps = Tensor::from_values(g.mean.shape(), std::move(noise));
    s.sample = add(g.mean, mul(exp(g.log_std), s.eps));
    s.log_prob = gaussian_log_prob(s.sample, g.mean, g.log_std);
    return s;
}

Tensor batch_matrix(const std::vector<double>& flat, std::size_t n, std::size_t dim) {
    require(flat.size() == n * dim, "batch_matrix: size mismatch");
    return Tensor::from_values({n, dim}, flat);
}

Tensor batch_obs_tensor(const TrajectoryBatch& batch, const PolicyParams& params, std::size_t t) {
    require(t < batch.obs.size(), "batch_obs_tensor: timestep out of range");
    if (params.image_size > 0) {
        const std::size_t s = params.image_size;
        return Tensor::from_values({batch.n, 3, s, s}, batch.obs[t]);
    }
    return batch_matrix(batch.obs[t], batch.n, batch.obs_dim);
}

std::vector<Tensor> unroll_trvs(const PolicyParams& params, const TrajectoryBatch& batch) {
    require(batch.horizon == params.horizon, "unroll_trvs: horizon mismatch");
    const std::size_t steps = batch.trvs.size();  // horizon, or horizon+1 with a terminal TRV
    require(steps == params.horizon || steps == params.horizon + 1,
            "unroll_trvs: unexpected TRV count");
    for (std::size_t t = 0; t < steps; ++t)
        require(batch.eps[t].size() == batch.n * batch.trv_dim,
                "unroll_trvs: missing stored noise at t=" + std::to_string(t));
    std::vector<Tensor> trvs;
    trvs.reserve(steps);
    Tensor prev = Tensor::zeros({batch.n, batch.trv_dim});
    for (std::size_t t = 0; t < steps; ++t) {
        const GaussianNet& q = params.q_at(std::min(t, params.horizon - 1));
        GaussOut g;
        if (params.image_size > 0) {
            g = gauss_forward(q, batch_obs_tensor(batch, params, t), prev);
        } else {
            g = gauss_forward(q, Tensor(), concat_cols(prev, batch_obs_tensor(batch, params, t)));
        }
        const Tensor eps = batch_matrix(batch.eps[t], batch.n, batch.trv_dim);
        prev = add(g.mean, mul(exp(g.log_std), eps));
        trvs.push_back(prev);
    }
    return trvs;
}


}  // namespace tdpg
