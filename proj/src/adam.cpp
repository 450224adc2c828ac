#include "tdpg/adam.hpp"

#include <cmath>

namespace tdpg {

void Adam::register_block(const std::string& name, const Tensor& param) {
    require(param.defined() && param.requires_grad(),
            "Adam: block '" + name + "' must be a defined tensor requiring gradients");
    Slot s;
    s.name = name;
    s.param = param;
    s.m.assign(param.size(), 0.0);
    s.v.assign(param.size(), 0.0);
    slots_.push_back(std::move(s));
}

void Adam::register_blocks(const std::vector<std::pair<std::string, Tensor>>& blocks) {
    for (const auto& [name, t] : blocks) register_block(name, t);
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Slot& s : slots_) {
        const std::vector<double>& g = s.param.grad();
        std::vector<double>& p = s.param.values();
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw NumericError("Adam: non-finite gradient in block '" + s.name + "' at index " +
                                   std::to_string(i));
            s.m[i] = cfg_.beta1 * s.m[i] + (1.0 - cfg_.beta1) * g[i];
            s.v[i] = cfg_.beta2 * s.v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
            const double mhat = s.m[i] / bc1;
            const double vhat = s.v[i] / bc2;
            p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

void Adam::reset() {
    t_ = 0;
    for (Slot& s : slots_) {
        std::fill(s.m.begin(), s.m.end(), 0.0);
        std::fill(s.v.begin(), s.v.end(), 0.0);
    }
}

double clip_grad_norm(Tensor param, double max_norm) {
    std::vector<double>& g = param.grad();
    double sq = 0.0;
    for (double v : g) sq += v * v;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double s = max_norm / norm;
        for (double& v : g) v *= s;
    }
    return norm;
}

}  // namespace tdpg
