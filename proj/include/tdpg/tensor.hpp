#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "tdpg/error.hpp"

namespace tdpg {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

// One vertex of the define-by-run computation graph. Nodes produced by an
// operation hold the parent references and a closure that scatters the
// output gradient back into the parents. Leaves have no parents.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // same extent as value; allocated iff requires_grad
    bool requires_grad = false;
    bool backward_done = false;
    const char* op = "leaf";
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node*)> backfn;
};

}  // namespace detail

// Dense row-major double tensor participating in a reverse-mode graph.
// Value semantics: copying a Tensor aliases the underlying node, which is
// how parameters stay shared between graphs built on successive steps.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value, bool requires_grad = false);
    static Tensor from_values(const Shape& shape, std::vector<double> values,
                              bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor wrap(std::shared_ptr<detail::Node> node);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    std::size_t rank() const { return shape().size(); }
    bool is_scalar() const { return size() == 1; }
    bool requires_grad() const;

    std::vector<double>& values();
    const std::vector<double>& values() const;
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void clear_grad();

    double item() const;

    detail::Node* node() const { return node_.get(); }
    std::shared_ptr<detail::Node> handle() const { return node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

// --- Linear algebra ---
Tensor matmul(const Tensor& a, const Tensor& b);
// y = x * w + b with the bias row-broadcast: x is [m x k], w [k x n], b [n].
Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b);

// --- Elementwise. Binary ops take equal shapes or one single-element operand ---
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor elu(const Tensor& x);
Tensor square(const Tensor& x);
Tensor scale(const Tensor& x, double c);
Tensor shift(const Tensor& x, double c);
Tensor clamp(const Tensor& x, double lo, double hi);

// --- Reductions ---
enum class Reduce { sum, mean, logsumexp, max };
// Reduces over the given (non-empty, strictly ascending) axis set; reduced
// axes are dropped from the output shape. log-sum-exp subtracts the running
// max so magnitudes up to ~700 stay finite.
Tensor reduce(Reduce op, const Tensor& x, const std::vector<std::size_t>& axes);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor logsumexp(const Tensor& x);
Tensor reduce_max(const Tensor& x);
Tensor sum(const Tensor& x, std::size_t axis);
Tensor mean(const Tensor& x, std::size_t axis);
Tensor logsumexp(const Tensor& x, std::size_t axis);

// --- Convolution ---
// Valid (unpadded) cross-correlation. input is [ci x h x w] or
// [n x ci x h x w], kernels [co x ci x k x k], no bias.
Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride);

// --- Structure ---
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, std::size_t lo, std::size_t hi);
Tensor gather_rows(const Tensor& x, std::vector<std::size_t> rows);
Tensor reshape(const Tensor& x, const Shape& shape);

// --- Distributions ---
// Diagonal-Gaussian log density. All three arguments share one shape; a
// rank-1 input yields a scalar, a rank-2 [n x d] input yields per-row
// densities [n].
Tensor gaussian_log_prob(const Tensor& x, const Tensor& mean, const Tensor& log_std);

// Reverse-topological gradient accumulation from a scalar loss. Leaf
// gradients are accumulated (not overwritten), so two backward calls from
// different roots sum their contributions. Calling backward twice on the
// same root without rebuilding the graph is an error.
void backward(const Tensor& loss);

}  // namespace tdpg
