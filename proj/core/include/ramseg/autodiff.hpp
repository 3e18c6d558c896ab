#ifndef RAMSEG_AUTODIFF_HPP
#define RAMSEG_AUTODIFF_HPP

#include <deque>
#include <functional>
#include <vector>

#include "ramseg/tensor.hpp"

namespace ramseg {

using NodeId = int;

enum class BnMode { train, eval };

/// Per-channel batch normalization parameters and statistics. Under DSBN a
/// layer keeps one of these per domain while the surrounding conv weights
/// are shared.
struct BatchNormState {
    Tensor gamma;          // {C}, trainable scale
    Tensor beta;           // {C}, trainable shift
    Tensor running_mean;   // {C}
    Tensor running_var;    // {C}
    double momentum = 0.1;
    double eps = 1e-5;

    static BatchNormState init(int channels);
};

/// Eager single-writer tape: every op computes its value at record time and
/// registers an adjoint. backward() walks nodes in exact reverse recording
/// order, accumulating gradients additively across fan-out.
class Tape {
public:
    Tape();

    /// Unique across all tapes in the process; lets callers detect that a
    /// tape is not the one they bound state to, even if addresses recur.
    uint64_t uid() const { return uid_; }

    NodeId leaf(Tensor value);

    // Node storage is a deque, so these references stay valid while the
    // tape lives, regardless of later ops.
    const Tensor& value(NodeId id) const { return nodes_[static_cast<size_t>(id)].value; }
    /// Gradient of the last backward() target w.r.t. node id; empty tensor if
    /// the node did not influence the target.
    const Tensor& grad(NodeId id) const { return nodes_[static_cast<size_t>(id)].grad; }
    Tensor grad_or_zero(NodeId id) const;

    size_t size() const { return nodes_.size(); }

    // Convolution: cross-correlation with odd square kernels.
    // x {N,Cin,H,W}, w {Cout,Cin,k,k}, b {Cout}.
    NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride, int padding);

    // Batch normalization over {N,C,H,W}. In train mode, normalizes by batch
    // statistics and (when update_running) folds them into state's running
    // stats; in eval mode uses the running stats. gamma/beta must be leaves
    // holding copies of state.gamma/state.beta so their gradients can flow.
    NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, BatchNormState& state, BnMode mode,
                     bool update_running = true);

    NodeId relu(NodeId x);
    NodeId sigmoid(NodeId x);
    NodeId tanh(NodeId x);
    NodeId log(NodeId x);
    NodeId clamp(NodeId x, double lo, double hi);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId scalar_affine(NodeId x, double mul, double add);   // mul*x + add

    NodeId upsample2x_nearest(NodeId x);                      // {N,C,H,W} -> {N,C,2H,2W}
    NodeId concat_channels(NodeId a, NodeId b);               // along C
    NodeId slice_batch(NodeId x, int n0, int n1);             // rows [n0, n1)

    NodeId sum_all(NodeId x);                                 // -> {1}
    NodeId mean_all(NodeId x);                                // -> {1}
    NodeId sum_per_channel(NodeId x);                         // {N,C,H,W} -> {C}

    /// Reverse sweep from a scalar node. May be called once per tape.
    void backward(NodeId loss);

private:
    struct Node {
        Tensor value;
        Tensor grad;
        std::function<void(Tape&, NodeId)> backprop;   // empty for leaves
    };

    NodeId push(Tensor value, std::function<void(Tape&, NodeId)> backprop);
    Tensor& grad_buffer(NodeId id);

    uint64_t uid_ = 0;
    std::deque<Node> nodes_;
    bool backward_done_ = false;
};

struct FiniteDiffReport {
    double max_rel_error = 0.0;
    bool pass = false;
    int worst_param = -1;
    long worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

/// Builds a scalar loss from leaf nodes bound to theta.
using TapeFunction = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

/// Compares tape gradients of f at theta against central finite differences
/// with step h; passes iff the max relative error stays below tol. f must be
/// deterministic in theta (copy any mutable state per call).
FiniteDiffReport finite_diff_check(const TapeFunction& f, const std::vector<Tensor>& theta,
                                   double h = 1e-4, double tol = 1e-3);

}  // namespace ramseg

#endif
