#ifndef RAMSEG_LOSSES_HPP
#define RAMSEG_LOSSES_HPP

#include <array>
#include <optional>
#include <vector>

#include "ramseg/autodiff.hpp"

namespace ramseg {

/// Weights of the four-term training objective plus the Dice smooth factor.
struct LossWeights {
    double lambda1 = 1.0;    // segmentation loss on source images
    double lambda2 = 1.0;    // segmentation loss on amplitude-mixed images
    double lambda3 = 0.1;    // image recovering loss
    double lambda4 = 0.5;    // prediction consistency loss
    double epsilon = 1e-5;   // Dice smooth factor

    void validate() const;
};

// Probabilities are clamped to [kProbClamp, 1-kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-7;

/// Mean binary cross-entropy over all elements; target is constant.
NodeId ce_loss(Tape& t, NodeId pred, const Tensor& target);

/// Soft Dice loss: per class channel 1 - 2*sum(p*y)/(sum(p)+sum(y)+eps),
/// sums taken over batch and space, averaged over classes. pred {N,C,H,W}.
NodeId dice_loss(Tape& t, NodeId pred, const Tensor& target, double eps);

/// dice_loss + ce_loss.
NodeId seg_loss(Tape& t, NodeId pred, const Tensor& target, double eps);

/// Mean over elements of the symmetric KL divergence between the per-pixel
/// binary distributions (p,1-p) and (q,1-q).
NodeId kl_consistency_loss(Tape& t, NodeId pred_a, NodeId pred_b);

/// Mean squared error between the reconstruction and the original image.
NodeId restoration_loss(Tape& t, NodeId recon, NodeId original);

/// One source domain's contribution to the objective; absent terms count 0.
struct DomainLossParts {
    std::optional<NodeId> seg_orig;
    std::optional<NodeId> seg_aug;
    std::optional<NodeId> rec;
    std::optional<NodeId> consist;
};

/// (1/K) * sum_k (l1*seg_k + l2*seg_aug_k + l3*rec_k + l4*consist_k).
NodeId total_loss(Tape& t, const std::vector<DomainLossParts>& parts, const LossWeights& w);

/// Plain-arithmetic flavor used for log aggregation and fixtures:
/// parts[k] = {seg_orig, seg_aug, rec, consist}.
double total_loss(const std::vector<std::array<double, 4>>& parts, const LossWeights& w);

}  // namespace ramseg

#endif
