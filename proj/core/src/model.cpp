#include "ramseg/model.hpp"

#include <cmath>

#include "ramseg/rng.hpp"

namespace ramseg {

void ModelConfig::validate() const {
    if (in_channels < 1 || classes < 1 || base_channels < 1) fail_invalid("model: bad channel counts");
    if (depth < 1) fail_invalid("model: depth must be >= 1");
    if (num_domains < 1) fail_invalid("model: num_domains must be >= 1");
}

namespace {

Tensor he_normal(Rng& rng, std::vector<int> shape, int fan_in) {
    Tensor t(std::move(shape));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (long i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
    return t;
}

}  // namespace

SegNet::SegNet(ModelConfig cfg, uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(Rng::mix(seed, 0x6d0de1u));
    const int base = cfg_.base_channels;

    auto make_conv = [&rng](int cin, int cout, int k) {
        Conv c;
        c.w = he_normal(rng, {cout, cin, k, k}, cin * k * k);
        c.b = Tensor({cout});
        return c;
    };

    stem_ = make_conv(cfg_.in_channels, base, 3);
    stem_bn_ = BatchNormState::init(base);
    for (int i = 0; i < cfg_.depth; ++i) {
        const int cin = base << i, cout = base << (i + 1);
        down_.push_back(Block{make_conv(cin, cout, 3), BatchNormState::init(cout)});
    }
    for (int j = 0; j < cfg_.depth; ++j) {
        const int up_ch = base << (cfg_.depth - j);
        const int skip_ch = base << (cfg_.depth - 1 - j);
        up_.push_back(Block{make_conv(up_ch + skip_ch, skip_ch, 3), BatchNormState::init(skip_ch)});
    }
    seg_head_ = make_conv(base, cfg_.classes, 1);
    for (int j = 0; j < cfg_.depth; ++j) {
        const int cin = base << (cfg_.depth - j), cout = base << (cfg_.depth - 1 - j);
        rec_convs_.push_back(make_conv(cin, cout, 3));
        std::vector<BatchNormState> sets;
        for (int k = 0; k < cfg_.num_domains; ++k) sets.push_back(BatchNormState::init(cout));
        rec_bn_.push_back(std::move(sets));
    }
    rec_head_ = make_conv(base, cfg_.in_channels, 1);

    rebuild_param_cache();
}

void SegNet::rebuild_param_cache() const {
    param_cache_.clear();
    auto add = [this](const std::string& name, const Tensor& t) {
        param_cache_.push_back(TensorRef{name, const_cast<Tensor*>(&t)});
    };
    auto add_conv = [&add](const std::string& prefix, const Conv& c) {
        add(prefix + ".w", c.w);
        add(prefix + ".b", c.b);
    };
    auto add_bn = [&add](const std::string& prefix, const BatchNormState& s) {
        add(prefix + ".gamma", s.gamma);
        add(prefix + ".beta", s.beta);
    };

    add_conv("enc.stem", stem_);
    add_bn("enc.stem.bn", stem_bn_);
    for (size_t i = 0; i < down_.size(); ++i) {
        const std::string p = "enc.down" + std::to_string(i);
        add_conv(p, down_[i].conv);
        add_bn(p + ".bn", down_[i].bn);
    }
    for (size_t j = 0; j < up_.size(); ++j) {
        const std::string p = "segdec.up" + std::to_string(j);
        add_conv(p, up_[j].conv);
        add_bn(p + ".bn", up_[j].bn);
    }
    add_conv("segdec.head", seg_head_);
    for (size_t j = 0; j < rec_convs_.size(); ++j)
        add_conv("recdec.up" + std::to_string(j), rec_convs_[j]);
    for (size_t j = 0; j < rec_bn_.size(); ++j)
        for (size_t k = 0; k < rec_bn_[j].size(); ++k)
            add_bn("recdec.up" + std::to_string(j) + ".bn.d" + std::to_string(k), rec_bn_[j][k]);
    add_conv("recdec.head", rec_head_);
}

std::vector<TensorRef> SegNet::parameters() {
    if (param_cache_.empty() || param_cache_.front().tensor != &stem_.w) rebuild_param_cache();
    return param_cache_;
}

std::vector<TensorRef> SegNet::buffers() {
    std::vector<TensorRef> out;
    auto add_bn = [&out](const std::string& prefix, BatchNormState& s) {
        out.push_back(TensorRef{prefix + ".running_mean", &s.running_mean});
        out.push_back(TensorRef{prefix + ".running_var", &s.running_var});
    };
    add_bn("enc.stem.bn", stem_bn_);
    for (size_t i = 0; i < down_.size(); ++i) add_bn("enc.down" + std::to_string(i) + ".bn", down_[i].bn);
    for (size_t j = 0; j < up_.size(); ++j) add_bn("segdec.up" + std::to_string(j) + ".bn", up_[j].bn);
    for (size_t j = 0; j < rec_bn_.size(); ++j)
        for (size_t k = 0; k < rec_bn_[j].size(); ++k)
            add_bn("recdec.up" + std::to_string(j) + ".bn.d" + std::to_string(k), rec_bn_[j][k]);
    return out;
}

NodeId SegNet::pnode(Tape& t, int pidx) {
    if (bound_tape_uid_ != t.uid()) {
        bound_tape_uid_ = t.uid();
        param_nodes_.assign(parameters().size(), -1);
    }
    if (param_nodes_[static_cast<size_t>(pidx)] < 0) {
        if (param_cache_.empty() || param_cache_.front().tensor != &stem_.w) rebuild_param_cache();
        param_nodes_[static_cast<size_t>(pidx)] = t.leaf(*param_cache_[static_cast<size_t>(pidx)].tensor);
    }
    return param_nodes_[static_cast<size_t>(pidx)];
}

std::vector<Tensor> SegNet::collect_grads(const Tape& t) const {
    if (bound_tape_uid_ != t.uid()) fail_invalid("collect_grads: model was not bound to this tape");
    std::vector<Tensor> grads;
    grads.reserve(param_cache_.size());
    for (size_t i = 0; i < param_cache_.size(); ++i) {
        const NodeId id = param_nodes_[i];
        grads.push_back(id >= 0 ? t.grad_or_zero(id) : Tensor(param_cache_[i].tensor->shape()));
    }
    return grads;
}

NodeId SegNet::conv_bn_relu(Tape& t, NodeId x, int conv_pidx, BatchNormState& bn, int bn_gamma_pidx,
                            int stride, BnMode mode) {
    const NodeId y = t.conv2d(x, pnode(t, conv_pidx), pnode(t, conv_pidx + 1), stride, 1);
    const NodeId z = t.batchnorm(y, pnode(t, bn_gamma_pidx), pnode(t, bn_gamma_pidx + 1), bn, mode);
    return t.relu(z);
}

void SegNet::check_input(const Tensor& x) const {
    if (x.rank() != 4) fail_invalid("model input must be {N,C,H,W}");
    if (x.dim(1) != cfg_.in_channels) fail_invalid("model input channel count mismatch");
    const int div = 1 << cfg_.depth;
    if (x.dim(2) % div != 0 || x.dim(3) % div != 0 || x.dim(2) / div < 1 || x.dim(3) / div < 1)
        fail_invalid("model input spatial dims must be divisible by 2^depth");
}

SegNet::EncodeOut SegNet::encode(Tape& t, NodeId x, BnMode mode) {
    check_input(t.value(x));
    EncodeOut out;
    // Parameter layout: stem (w,b,gamma,beta), then 4 per encoder stage.
    NodeId f = conv_bn_relu(t, x, 0, stem_bn_, 2, 1, mode);
    out.skips.push_back(f);
    for (int i = 0; i < cfg_.depth; ++i) {
        const int base_idx = 4 + i * 4;
        f = conv_bn_relu(t, f, base_idx, down_[static_cast<size_t>(i)].bn, base_idx + 2, 2, mode);
        if (i < cfg_.depth - 1) out.skips.push_back(f);
    }
    out.bottleneck = f;
    return out;
}

NodeId SegNet::decode_seg(Tape& t, const EncodeOut& enc, BnMode mode) {
    const int enc_params = 4 + cfg_.depth * 4;
    NodeId cur = enc.bottleneck;
    for (int j = 0; j < cfg_.depth; ++j) {
        cur = t.upsample2x_nearest(cur);
        cur = t.concat_channels(cur, enc.skips[static_cast<size_t>(cfg_.depth - 1 - j)]);
        const int base_idx = enc_params + j * 4;
        cur = conv_bn_relu(t, cur, base_idx, up_[static_cast<size_t>(j)].bn, base_idx + 2, 1, mode);
    }
    const int head_idx = enc_params + cfg_.depth * 4;
    cur = t.conv2d(cur, pnode(t, head_idx), pnode(t, head_idx + 1), 1, 0);
    return t.sigmoid(cur);
}

NodeId SegNet::predict_seg(Tape& t, NodeId x, BnMode mode) {
    return decode_seg(t, encode(t, x, mode), mode);
}

NodeId SegNet::restore_from(Tape& t, NodeId bottleneck, int domain_k, BnMode mode) {
    if (domain_k < 0 || domain_k >= cfg_.num_domains)
        fail_invalid("restore: domain id out of range");
    const int rec_conv_base = 4 + cfg_.depth * 4 + cfg_.depth * 4 + 2;
    const int rec_bn_base = rec_conv_base + cfg_.depth * 2;

    NodeId cur = bottleneck;
    for (int j = 0; j < cfg_.depth; ++j) {
        cur = t.upsample2x_nearest(cur);
        const int conv_idx = rec_conv_base + j * 2;
        const int bn_idx = rec_bn_base + (j * cfg_.num_domains + domain_k) * 2;
        cur = t.conv2d(cur, pnode(t, conv_idx), pnode(t, conv_idx + 1), 1, 1);
        cur = t.batchnorm(cur, pnode(t, bn_idx), pnode(t, bn_idx + 1),
                          rec_bn_[static_cast<size_t>(j)][static_cast<size_t>(domain_k)], mode);
        cur = t.relu(cur);
    }
    const int head_idx = rec_bn_base + cfg_.depth * cfg_.num_domains * 2;
    cur = t.conv2d(cur, pnode(t, head_idx), pnode(t, head_idx + 1), 1, 0);
    return t.tanh(cur);
}

NodeId SegNet::restore(Tape& t, NodeId x, int domain_k, BnMode mode) {
    return restore_from(t, encode(t, x, mode).bottleneck, domain_k, mode);
}

std::vector<const Tensor*> SegNet::restoration_weights_for_domain(int domain_k) const {
    if (domain_k < 0 || domain_k >= cfg_.num_domains)
        fail_invalid("restoration_weights_for_domain: domain id out of range");
    std::vector<const Tensor*> out;
    for (const Conv& c : rec_convs_) {
        out.push_back(&c.w);
        out.push_back(&c.b);
    }
    out.push_back(&rec_head_.w);
    out.push_back(&rec_head_.b);
    return out;
}

const BatchNormState& SegNet::restoration_bn(int stage, int domain_k) const {
    return rec_bn_.at(static_cast<size_t>(stage)).at(static_cast<size_t>(domain_k));
}

}  // namespace ramseg
