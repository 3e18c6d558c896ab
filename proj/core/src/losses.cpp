#include "ramseg/losses.hpp"

#include <array>

namespace ramseg {

void LossWeights::validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0 || lambda4 < 0)
        fail_invalid("loss weights must be non-negative");
    if (!(epsilon > 0)) fail_invalid("dice smooth factor must be positive");
}

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* who) {
    if (!a.same_shape(b))
        fail_invalid(std::string(who) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

}  // namespace

NodeId ce_loss(Tape& t, NodeId pred, const Tensor& target) {
    check_same_shape(t.value(pred), target, "ce_loss");
    const NodeId y = t.leaf(target);
    const NodeId p = t.clamp(pred, kProbClamp, 1.0 - kProbClamp);
    const NodeId one_minus_p = t.clamp(t.scalar_affine(pred, -1.0, 1.0), kProbClamp, 1.0 - kProbClamp);
    const NodeId pos = t.mul(y, t.log(p));
    const NodeId neg = t.mul(t.scalar_affine(y, -1.0, 1.0), t.log(one_minus_p));
    return t.scalar_affine(t.mean_all(t.add(pos, neg)), -1.0, 0.0);
}

NodeId dice_loss(Tape& t, NodeId pred, const Tensor& target, double eps) {
    if (!(eps > 0)) fail_invalid("dice_loss: eps must be positive");
    const Tensor& pv = t.value(pred);
    check_same_shape(pv, target, "dice_loss");
    if (pv.rank() != 4) fail_invalid("dice_loss expects {N,C,H,W} predictions");
    const NodeId y = t.leaf(target);
    const NodeId inter = t.sum_per_channel(t.mul(pred, y));            // {C}
    const NodeId denom = t.add(t.sum_per_channel(pred), t.sum_per_channel(y));
    const NodeId ratio = t.div(t.scalar_affine(inter, 2.0, 0.0), t.scalar_affine(denom, 1.0, eps));
    return t.scalar_affine(t.mean_all(ratio), -1.0, 1.0);
}

NodeId seg_loss(Tape& t, NodeId pred, const Tensor& target, double eps) {
    return t.add(dice_loss(t, pred, target, eps), ce_loss(t, pred, target));
}

NodeId kl_consistency_loss(Tape& t, NodeId pred_a, NodeId pred_b) {
    check_same_shape(t.value(pred_a), t.value(pred_b), "kl_consistency_loss");
    const NodeId p = t.clamp(pred_a, kProbClamp, 1.0 - kProbClamp);
    const NodeId q = t.clamp(pred_b, kProbClamp, 1.0 - kProbClamp);
    const NodeId np = t.scalar_affine(p, -1.0, 1.0);   // 1 - p
    const NodeId nq = t.scalar_affine(q, -1.0, 1.0);

    auto directed = [&t](NodeId a, NodeId na, NodeId b, NodeId nb) {
        const NodeId fg = t.mul(a, t.log(t.div(a, b)));
        const NodeId bg = t.mul(na, t.log(t.div(na, nb)));
        return t.add(fg, bg);
    };
    return t.mean_all(t.add(directed(p, np, q, nq), directed(q, nq, p, np)));
}

NodeId restoration_loss(Tape& t, NodeId recon, NodeId original) {
    check_same_shape(t.value(recon), t.value(original), "restoration_loss");
    const NodeId diff = t.sub(recon, original);
    return t.mean_all(t.mul(diff, diff));
}

NodeId total_loss(Tape& t, const std::vector<DomainLossParts>& parts, const LossWeights& w) {
    w.validate();
    if (parts.empty()) fail_invalid("total_loss: at least one source domain must contribute");

    NodeId acc = -1;
    auto accumulate = [&t, &acc](std::optional<NodeId> term, double weight) {
        if (!term || weight == 0.0) return;
        const NodeId scaled = t.scalar_affine(*term, weight, 0.0);
        acc = (acc < 0) ? scaled : t.add(acc, scaled);
    };
    for (const DomainLossParts& p : parts) {
        accumulate(p.seg_orig, w.lambda1);
        accumulate(p.seg_aug, w.lambda2);
        accumulate(p.rec, w.lambda3);
        accumulate(p.consist, w.lambda4);
    }
    if (acc < 0) acc = t.leaf(Tensor::scalar(0.0));
    return t.scalar_affine(acc, 1.0 / static_cast<double>(parts.size()), 0.0);
}

double total_loss(const std::vector<std::array<double, 4>>& parts, const LossWeights& w) {
    w.validate();
    if (parts.empty()) fail_invalid("total_loss: at least one source domain must contribute");
    double acc = 0.0;
    for (const auto& p : parts)
        acc += w.lambda1 * p[0] + w.lambda2 * p[1] + w.lambda3 * p[2] + w.lambda4 * p[3];
    return acc / static_cast<double>(parts.size());
}

}  // namespace ramseg
