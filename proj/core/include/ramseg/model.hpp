#ifndef RAMSEG_MODEL_HPP
#define RAMSEG_MODEL_HPP

#include <string>
#include <vector>

#include "ramseg/autodiff.hpp"

namespace ramseg {

struct ModelConfig {
    int in_channels = 1;
    int classes = 1;
    int base_channels = 8;
    int depth = 3;
    int num_domains = 4;   // DSBN statistic sets in the restoration decoder

    void validate() const;
};

/// Named view into a parameter or buffer tensor owned by the model.
struct TensorRef {
    std::string name;
    Tensor* tensor;
};

/// UNet-style segmentation network with an auxiliary restoration decoder.
///
/// Encoder: stem conv at full resolution, then depth stride-2 conv stages;
/// each stage is conv3x3 + BN + ReLU and its pre-downsampling output is kept
/// as a skip. The segmentation decoder mirrors the encoder with nearest
/// upsampling, skip concatenation and a per-class sigmoid head. The
/// restoration decoder shares one conv weight set across domains but keeps
/// num_domains batch-norm statistic sets (DSBN); it consumes only the
/// bottleneck and ends in a tanh head mapping to [-1, 1].
class SegNet {
public:
    SegNet(ModelConfig cfg, uint64_t seed);

    const ModelConfig& config() const { return cfg_; }

    struct EncodeOut {
        NodeId bottleneck = -1;
        std::vector<NodeId> skips;   // one per stage, shallow to deep
    };

    EncodeOut encode(Tape& t, NodeId x, BnMode mode);
    NodeId decode_seg(Tape& t, const EncodeOut& enc, BnMode mode);
    NodeId predict_seg(Tape& t, NodeId x, BnMode mode);

    /// Restoration forward from a bottleneck node using BN statistic set
    /// domain_k. Train mode touches only that set's running statistics.
    NodeId restore_from(Tape& t, NodeId bottleneck, int domain_k, BnMode mode);
    /// Full restoration forward: encode then restore_from.
    NodeId restore(Tape& t, NodeId x, int domain_k, BnMode mode);

    /// Trainable tensors in a stable order (conv weights/biases, BN scales
    /// and shifts for every domain set).
    std::vector<TensorRef> parameters();
    /// Non-trainable tensors that still belong in checkpoints (BN running
    /// statistics).
    std::vector<TensorRef> buffers();

    /// Gradients aligned with parameters(); zero tensors for parameters the
    /// last backward did not reach.
    std::vector<Tensor> collect_grads(const Tape& t) const;

    /// Restoration-decoder weight set as seen through a domain index; the
    /// pointers are identical for every domain (single storage).
    std::vector<const Tensor*> restoration_weights_for_domain(int domain_k) const;

    const BatchNormState& restoration_bn(int stage, int domain_k) const;

private:
    struct Conv {
        Tensor w, b;
    };
    struct Block {
        Conv conv;
        BatchNormState bn;
    };

    NodeId conv_bn_relu(Tape& t, NodeId x, int conv_pidx, BatchNormState& bn, int bn_gamma_pidx,
                        int stride, BnMode mode);
    NodeId pnode(Tape& t, int pidx);
    void check_input(const Tensor& x) const;

    ModelConfig cfg_;
    Conv stem_;
    BatchNormState stem_bn_;
    std::vector<Block> down_;               // depth stages, stride 2
    std::vector<Block> up_;                 // depth stages (seg decoder)
    Conv seg_head_;
    std::vector<Conv> rec_convs_;           // depth stages (shared weights)
    std::vector<std::vector<BatchNormState>> rec_bn_;   // [stage][domain]
    Conv rec_head_;

    // parameters() order bookkeeping for tape binding / gradient collection.
    mutable std::vector<TensorRef> param_cache_;
    uint64_t bound_tape_uid_ = 0;
    std::vector<NodeId> param_nodes_;

    void rebuild_param_cache() const;
};

}  // namespace ramseg

#endif
