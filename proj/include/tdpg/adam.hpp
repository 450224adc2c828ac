#pragma once

#include <string>
#include <vector>

#include "tdpg/tensor.hpp"

namespace tdpg {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Adaptive-moment optimizer over a fixed set of named parameter blocks.
// step() consumes the gradient slot of every registered block; callers are
// responsible for clearing gradients between steps.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    void register_block(const std::string& name, const Tensor& param);
    void register_blocks(const std::vector<std::pair<std::string, Tensor>>& blocks);

    // One bias-corrected update across all blocks. Throws NumericError naming
    // the parameter block if a gradient entry is non-finite.
    void step();

    // Drops accumulated moments and the step counter (fresh optimizer).
    void reset();

    std::size_t step_count() const { return t_; }
    const AdamConfig& config() const { return cfg_; }

private:
    struct Slot {
        std::string name;
        Tensor param;
        std::vector<double> m, v;
    };
    AdamConfig cfg_;
    std::vector<Slot> slots_;
    std::size_t t_ = 0;
};

// Scales the block's gradient so its L2 norm does not exceed max_norm.
// max_norm <= 0 disables clipping. Returns the pre-clip norm.
double clip_grad_norm(Tensor param, double max_norm);

}  // namespace tdpg
