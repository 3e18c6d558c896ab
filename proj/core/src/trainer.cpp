#include "ramseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ramseg/checkpoint.hpp"
#include "ramseg/losses.hpp"
#include "ramseg/spectral.hpp"

namespace ramseg {

double poly_lr(int epoch, const TrainConfig& cfg) {
    if (epoch < 0 || epoch >= cfg.epochs) fail_invalid("poly_lr: epoch out of range");
    return cfg.lr * std::pow(1.0 - static_cast<double>(epoch) / cfg.epochs, cfg.poly_power);
}

AdamState AdamState::init(const std::vector<TensorRef>& params) {
    AdamState s;
    for (const TensorRef& p : params) {
        s.m.emplace_back(p.tensor->shape());
        s.v.emplace_back(p.tensor->shape());
    }
    return s;
}

void adam_step(const std::vector<TensorRef>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        fail_invalid("adam_step: parameter/gradient/state sizes differ");
    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i].tensor;
        const Tensor& g = grads[i];
        if (!p.same_shape(g)) fail_invalid("adam_step: gradient shape mismatch for " + params[i].name);
        Tensor& m = state.m[i];
        Tensor& v = state.v[i];
        for (long j = 0; j < p.numel(); ++j) {
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            p[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

namespace {

struct DomainGroup {
    int domain = 0;
    int begin = 0;   // contiguous range in the sorted batch
    int end = 0;
};

Tensor stack_images(std::span<const DomainSample* const> pool, std::span<const int> batch) {
    const Tensor& first = pool[static_cast<size_t>(batch[0])]->image;
    Tensor out({static_cast<int>(batch.size()), first.dim(0), first.dim(1), first.dim(2)});
    const long row = first.numel();
    for (size_t i = 0; i < batch.size(); ++i) {
        const Tensor& img = pool[static_cast<size_t>(batch[i])]->image;
        std::copy(img.data(), img.data() + row, out.data() + static_cast<long>(i) * row);
    }
    return out;
}

Tensor stack_labels(std::span<const DomainSample* const> pool, std::span<const int> batch, int b0,
                    int b1) {
    const Tensor& first = pool[static_cast<size_t>(batch[static_cast<size_t>(b0)])]->label;
    Tensor out({b1 - b0, first.dim(0), first.dim(1), first.dim(2)});
    const long row = first.numel();
    for (int i = b0; i < b1; ++i) {
        const Tensor& lbl = pool[static_cast<size_t>(batch[static_cast<size_t>(i)])]->label;
        std::copy(lbl.data(), lbl.data() + row, out.data() + static_cast<long>(i - b0) * row);
    }
    return out;
}

}  // namespace

StepLosses train_step(std::span<const DomainSample* const> pool, std::span<const int> batch,
                      SegNet& model, AdamState& adam, const TrainConfig& cfg, Rng& rng, double lr) {
    if (batch.size() < 2) fail_invalid("train_step: batch must hold at least 2 samples");

    // Sort the batch by domain id so per-domain tensors are contiguous rows.
    std::vector<int> order(batch.begin(), batch.end());
    std::stable_sort(order.begin(), order.end(), [&pool](int a, int b) {
        return pool[static_cast<size_t>(a)]->domain < pool[static_cast<size_t>(b)]->domain;
    });
    std::vector<DomainGroup> groups;
    for (int i = 0; i < static_cast<int>(order.size());) {
        const int d = pool[static_cast<size_t>(order[static_cast<size_t>(i)])]->domain;
        int j = i;
        while (j < static_cast<int>(order.size()) &&
               pool[static_cast<size_t>(order[static_cast<size_t>(j)])]->domain == d)
            ++j;
        groups.push_back(DomainGroup{d, i, j});
        i = j;
    }
    if (groups.size() < 2)
        fail_invalid("train_step: batch must contain samples from at least 2 distinct domains");

    const bool need_aug = cfg.use_ram_aug || cfg.use_dsir || cfg.use_consistency;
    const bool need_aug_pred = cfg.use_ram_aug || cfg.use_consistency;

    // Amplitude-mix each sample with a partner from a different domain,
    // drawn uniformly from the whole pool; fresh lambda per image.
    Tensor x = stack_images(pool, order);
    Tensor xa;
    if (need_aug) {
        xa = Tensor(x.shape());
        const long row = pool[static_cast<size_t>(order[0])]->image.numel();
        for (size_t i = 0; i < order.size(); ++i) {
            const DomainSample& s = *pool[static_cast<size_t>(order[i])];
            std::vector<int> partners;
            for (size_t p = 0; p < pool.size(); ++p)
                if (pool[p]->domain != s.domain) partners.push_back(static_cast<int>(p));
            if (partners.empty()) fail_invalid("train_step: no cross-domain partner available");
            const DomainSample& partner =
                *pool[static_cast<size_t>(partners[static_cast<size_t>(rng.uniform_int(
                    static_cast<int>(partners.size())))])];
            const MixRatio lambda(rng.uniform());
            const Tensor mixed = ram_augment(s.image, partner.image, cfg.ram_beta, lambda);
            std::copy(mixed.data(), mixed.data() + row, xa.data() + static_cast<long>(i) * row);
        }
    }

    Tape t;
    const NodeId xn = t.leaf(std::move(x));
    const NodeId y_orig = model.predict_seg(t, xn, BnMode::train);

    NodeId xan = -1, y_aug = -1;
    SegNet::EncodeOut enc_aug;
    if (need_aug) {
        xan = t.leaf(std::move(xa));
        enc_aug = model.encode(t, xan, BnMode::train);
        if (need_aug_pred) y_aug = model.decode_seg(t, enc_aug, BnMode::train);
    }

    std::vector<DomainLossParts> parts;
    StepLosses losses;
    const double inv_k = 1.0 / static_cast<double>(groups.size());
    for (const DomainGroup& g : groups) {
        DomainLossParts p;
        const Tensor labels = stack_labels(pool, order, g.begin, g.end);
        const NodeId pred_k = t.slice_batch(y_orig, g.begin, g.end);
        p.seg_orig = seg_loss(t, pred_k, labels, cfg.loss.epsilon);
        losses.seg_orig += t.value(*p.seg_orig)[0] * inv_k;

        if (need_aug_pred) {
            const NodeId pred_aug_k = t.slice_batch(y_aug, g.begin, g.end);
            if (cfg.use_ram_aug) {
                p.seg_aug = seg_loss(t, pred_aug_k, labels, cfg.loss.epsilon);
                losses.seg_aug += t.value(*p.seg_aug)[0] * inv_k;
            }
            if (cfg.use_consistency) {
                p.consist = kl_consistency_loss(t, pred_k, pred_aug_k);
                losses.consist += t.value(*p.consist)[0] * inv_k;
            }
        }
        if (cfg.use_dsir) {
            const NodeId bneck_k = t.slice_batch(enc_aug.bottleneck, g.begin, g.end);
            const NodeId recon = model.restore_from(t, bneck_k, g.domain, BnMode::train);
            p.rec = restoration_loss(t, recon, t.slice_batch(xn, g.begin, g.end));
            losses.rec += t.value(*p.rec)[0] * inv_k;
        }
        parts.push_back(p);
    }

    const NodeId total = total_loss(t, parts, cfg.loss);
    losses.total = t.value(total)[0];
    t.backward(total);

    const std::vector<TensorRef> params = model.parameters();
    adam_step(params, model.collect_grads(t), adam, lr);
    return losses;
}

std::string log_csv_header() {
    return "epoch,lr,seg_orig,seg_aug,rec,consist,total";
}

std::string log_csv_row(const EpochLog& e) {
    return std::to_string(e.epoch) + "," + format_double(e.lr) + "," +
           format_double(e.losses.seg_orig) + "," + format_double(e.losses.seg_aug) + "," +
           format_double(e.losses.rec) + "," + format_double(e.losses.consist) + "," +
           format_double(e.losses.total);
}

namespace {

// Deterministic batching: chunk a shuffled pool, then repair any chunk that
// ended up single-domain by swapping in a sample from another chunk.
std::vector<std::vector<int>> make_batches(const std::vector<const DomainSample*>& pool,
                                           int batch_size, Rng& rng) {
    std::vector<int> order(pool.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);

    std::vector<std::vector<int>> batches;
    for (size_t i = 0; i < order.size(); i += static_cast<size_t>(batch_size)) {
        const size_t j = std::min(order.size(), i + static_cast<size_t>(batch_size));
        batches.emplace_back(order.begin() + static_cast<long>(i), order.begin() + static_cast<long>(j));
    }
    if (batches.size() > 1 && batches.back().size() < 2) {
        for (int v : batches.back()) batches[batches.size() - 2].push_back(v);
        batches.pop_back();
    }

    auto domain_of = [&pool](int idx) { return pool[static_cast<size_t>(idx)]->domain; };
    auto single_domain = [&](const std::vector<int>& b) {
        for (int v : b)
            if (domain_of(v) != domain_of(b[0])) return false;
        return true;
    };
    for (size_t bi = 0; bi < batches.size(); ++bi) {
        if (!single_domain(batches[bi])) continue;
        const int d = domain_of(batches[bi][0]);
        bool fixed = false;
        for (size_t bj = 0; bj < batches.size() && !fixed; ++bj) {
            if (bj == bi) continue;
            for (size_t e = 0; e < batches[bj].size() && !fixed; ++e) {
                if (domain_of(batches[bj][e]) == d) continue;
                // Donor keeps >= 2 domains after receiving a d-sample.
                std::vector<int> donor = batches[bj];
                donor[e] = batches[bi][0];
                if (single_domain(donor)) continue;
                std::swap(batches[bi][0], batches[bj][e]);
                fixed = true;
            }
        }
        if (!fixed) fail_invalid("make_batches: cannot form a cross-domain batch");
    }
    return batches;
}

}  // namespace

FitResult fit(const Benchmark& bench, int held_out_domain, const RunConfig& cfg,
              const std::optional<std::filesystem::path>& out_dir) {
    cfg.train.validate();
    if (held_out_domain < 0 || held_out_domain >= bench.num_domains())
        fail_invalid("fit: held-out domain out of range");
    if (bench.num_domains() - 1 < 2)
        fail_invalid("fit: need at least 2 source domains for amplitude mixing");

    std::vector<const DomainSample*> pool;
    for (int k = 0; k < bench.num_domains(); ++k) {
        if (k == held_out_domain) continue;
        for (const DomainSample& s : bench.domains[static_cast<size_t>(k)].train) pool.push_back(&s);
    }
    if (pool.empty()) fail_invalid("fit: empty training pool");

    ModelConfig mcfg = cfg.model;
    mcfg.num_domains = bench.num_domains();
    mcfg.in_channels = bench.channels;
    mcfg.classes = bench.classes;

    FitResult result{SegNet(mcfg, cfg.train.seed), {}, 0};
    RunConfig echo = cfg;
    echo.model = mcfg;
    const std::string config_text = canonical_config_text(echo);
    result.config_fingerprint = fingerprint_bytes(config_text);

    std::ofstream log_file;
    if (out_dir) {
        std::filesystem::create_directories(*out_dir);
        std::ofstream cfg_out(*out_dir / "config.ini", std::ios::trunc);
        cfg_out << config_text;
        log_file.open(*out_dir / "log.csv", std::ios::trunc);
        log_file << log_csv_header() << "\n";
    }

    AdamState adam = AdamState::init(result.model.parameters());
    Rng rng(Rng::mix(cfg.train.seed, 0x77a11ULL));

    for (int epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        const double lr = poly_lr(epoch, cfg.train);
        const std::vector<std::vector<int>> batches = make_batches(pool, cfg.train.batch_size, rng);
        StepLosses mean;
        for (const std::vector<int>& batch : batches) {
            const StepLosses sl = train_step(std::span<const DomainSample* const>(pool),
                                             std::span<const int>(batch), result.model, adam,
                                             cfg.train, rng, lr);
            mean.seg_orig += sl.seg_orig / batches.size();
            mean.seg_aug += sl.seg_aug / batches.size();
            mean.rec += sl.rec / batches.size();
            mean.consist += sl.consist / batches.size();
            mean.total += sl.total / batches.size();
        }
        result.log.push_back(EpochLog{epoch, lr, mean});
        if (out_dir) {
            log_file << log_csv_row(result.log.back()) << "\n";
            const bool last = epoch == cfg.train.epochs - 1;
            if ((epoch + 1) % cfg.train.checkpoint_every == 0 && !last) {
                char name[48];
                std::snprintf(name, sizeof(name), "checkpoint_epoch_%03d.bin", epoch + 1);
                std::vector<TensorRef> entries = result.model.parameters();
                const std::vector<TensorRef> bufs = result.model.buffers();
                entries.insert(entries.end(), bufs.begin(), bufs.end());
                save_checkpoint(*out_dir / name, entries);
            }
        }
    }

    if (out_dir) {
        std::vector<TensorRef> entries = result.model.parameters();
        const std::vector<TensorRef> bufs = result.model.buffers();
        entries.insert(entries.end(), bufs.begin(), bufs.end());
        save_checkpoint(*out_dir / "checkpoint_final.bin", entries);
    }
    return result;
}

}  // namespace ramseg
