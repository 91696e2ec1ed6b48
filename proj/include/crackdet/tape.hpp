#pragma once

#include <functional>
#include <vector>

#include "crackdet/tensor.hpp"

namespace crackdet::ad {

class Tape;

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Per-output-cell flat index (into the pooled tensor's input buffer) of the
// winning element of each 2x2 window.
struct PoolIndices {
    Shape in_shape;
    Shape out_shape;
    std::vector<std::int64_t> idx;
};

// Reverse-mode tape. A forward pass appends nodes; backward() seeds the root
// with 1 and replays the recorded pull functions in reverse order. Leaves
// bound to Parameters accumulate into Parameter::grad. Single-threaded per
// tape; independent tapes may live on different threads.
class Tape {
public:
    using PullFn = std::function<void(Tape&, Var)>;

    Var constant(Tensor t) { return push(std::move(t), false, nullptr, {}); }

    // Differentiable leaf that is not a Parameter (e.g. an op input under test).
    Var input(Tensor t) { return push(std::move(t), true, nullptr, {}); }

    // Copies the parameter value in; backward adds the node gradient back out.
    Var leaf(Parameter& p) {
        return push(Tensor(p.shape, p.value), true, &p, {});
    }

    Var make(Shape shape, Eigen::ArrayXd value, std::vector<Var> parents, PullFn pull);

    const Eigen::ArrayXd& value(Var v) const { return nodes_[v.id].value; }
    Shape shape(Var v) const { return nodes_[v.id].shape; }
    bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

    // Gradient buffer of a node; nullptr when the node does not need one.
    Eigen::ArrayXd* grad_if_needed(Var v) {
        Node& n = nodes_[v.id];
        return n.needs_grad ? &n.grad : nullptr;
    }
    const Eigen::ArrayXd& grad(Var v) const { return nodes_[v.id].grad; }

    // root must be scalar; runs the whole reverse sweep and flushes leaf
    // gradients into their bound Parameters.
    void backward(Var root);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Shape shape;
        Eigen::ArrayXd value;
        Eigen::ArrayXd grad;
        bool needs_grad = false;
        Parameter* bound = nullptr;
        PullFn pull;
    };

    Var push(Tensor t, bool needs_grad, Parameter* bound, PullFn pull) {
        Node n;
        n.shape = t.shape;
        n.value = std::move(t.data);
        n.needs_grad = needs_grad;
        n.bound = bound;
        n.pull = std::move(pull);
        nodes_.push_back(std::move(n));
        return {static_cast<int>(nodes_.size()) - 1};
    }

    std::vector<Node> nodes_;
};

// --- ops -------------------------------------------------------------------

// Cross-correlation plus bias. Kernel must be 1x1 or 3x3; at stride 1 the
// default padding (k-1)/2 preserves the spatial size.
Var conv2d(Tape& t, Var x, Var w, Var b, int stride = 1, int pad = -1);

struct PoolResult {
    Var out;
    PoolIndices indices;
};

// 2x2 window, stride 2; H and W must be even. Ties go to the first element
// in row-major window order.
PoolResult maxpool2d(Tape& t, Var x);

Var max_unpool2d(Tape& t, Var y, const PoolIndices& indices);

Var relu(Tape& t, Var x);
Var sigmoid(Tape& t, Var x);

// Per-channel batch normalization. Training mode normalizes with batch
// statistics and updates `stats`; eval mode uses the running statistics.
Var batchnorm(Tape& t, Var x, Var gamma, Var beta, BnStats& stats, bool training);

Var upsample_bilinear(Tape& t, Var x, int out_h, int out_w);

Var concat_channels(Tape& t, const std::vector<Var>& parts);

Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double s);

// Scalar projection sum(v .* weights); used to reduce tensor outputs for
// gradient checking and to assemble losses.
Var weighted_sum(Tape& t, Var v, Eigen::ArrayXd weights);

// Mean over all elements of the numerically fused binary cross-entropy
//   max(f,0) - f y + log(1 + exp(-|f|)),
// targets must be 0/1. d/df = (sigmoid(f) - y)/N.
Var bce_with_logits_mean(Tape& t, Var logits, const Eigen::ArrayXd& targets);

// Elementwise stable sigmoid of a plain array (shared by ops and inference).
Eigen::ArrayXd sigmoid_array(const Eigen::ArrayXd& x);

}  // namespace crackdet::ad
