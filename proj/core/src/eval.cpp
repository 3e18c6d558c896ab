#include "ramseg/eval.hpp"

#include <cstdio>
#include <sstream>

#include "ramseg/config.hpp"
#include "ramseg/metrics.hpp"

namespace ramseg {

Tensor predict_probs(SegNet& model, const Tensor& image) {
    Tape t;
    const NodeId x = t.leaf(image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)}));
    const NodeId y = model.predict_seg(t, x, BnMode::eval);
    const Tensor& v = t.value(y);
    return v.reshaped({v.dim(1), v.dim(2), v.dim(3)});
}

Tensor threshold_mask(const Tensor& probs, int cls, double threshold) {
    const int h = probs.dim(1), w = probs.dim(2);
    Tensor m({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.at2(y, x) = probs.at3(cls, y, x) > threshold ? 1.0 : 0.0;
    return m;
}

namespace {

Tensor label_plane(const Tensor& label, int cls) {
    const int h = label.dim(1), w = label.dim(2);
    Tensor m({h, w});
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.at2(y, x) = label.at3(cls, y, x);
    return m;
}

}  // namespace

EvalReport evaluate(SegNet& model, const std::vector<DomainSample>& samples, int domain,
                    const std::string& split, uint64_t config_fingerprint,
                    std::vector<uint64_t> seeds) {
    if (samples.empty()) fail_invalid("evaluate: no samples");
    const int classes = samples.front().label.dim(0);

    EvalReport rep;
    rep.domain = domain;
    rep.split = split;
    rep.num_samples = static_cast<int>(samples.size());
    rep.config_fingerprint = config_fingerprint;
    rep.seeds = std::move(seeds);
    rep.per_class.assign(static_cast<size_t>(classes), ClassStats{});

    std::vector<double> asd_sum(static_cast<size_t>(classes), 0.0);
    std::vector<int> asd_n(static_cast<size_t>(classes), 0);
    for (const DomainSample& s : samples) {
        const Tensor probs = predict_probs(model, s.image);
        for (int c = 0; c < classes; ++c) {
            const Tensor pred = threshold_mask(probs, c);
            const Tensor gt = label_plane(s.label, c);
            rep.per_class[static_cast<size_t>(c)].dice_pct +=
                100.0 * dice_metric(pred, gt) / static_cast<double>(samples.size());
            try {
                asd_sum[static_cast<size_t>(c)] += asd_metric(pred, gt);
                asd_n[static_cast<size_t>(c)] += 1;
            } catch (const MetricUndefinedError&) {
                rep.per_class[static_cast<size_t>(c)].asd_excluded += 1;
            }
        }
    }
    for (int c = 0; c < classes; ++c) {
        ClassStats& cs = rep.per_class[static_cast<size_t>(c)];
        cs.asd = asd_n[static_cast<size_t>(c)] > 0
                     ? asd_sum[static_cast<size_t>(c)] / asd_n[static_cast<size_t>(c)]
                     : 0.0;
        rep.mean_dice_pct += cs.dice_pct / classes;
        rep.mean_asd += cs.asd / classes;
    }
    return rep;
}

std::string EvalReport::fingerprint_hex() const {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_fingerprint));
    return buf;
}

std::string EvalReport::to_csv() const {
    std::ostringstream os;
    os << "domain,split,class,n,dice_pct,asd,asd_excluded,fingerprint,seeds\n";
    std::string seed_str;
    for (size_t i = 0; i < seeds.size(); ++i)
        seed_str += (i ? ";" : "") + std::to_string(seeds[i]);
    for (size_t c = 0; c < per_class.size(); ++c) {
        os << domain << "," << split << "," << c << "," << num_samples << ","
           << format_double(per_class[c].dice_pct) << "," << format_double(per_class[c].asd) << ","
           << per_class[c].asd_excluded << "," << fingerprint_hex() << "," << seed_str << "\n";
    }
    os << domain << "," << split << ",mean," << num_samples << "," << format_double(mean_dice_pct)
       << "," << format_double(mean_asd) << ",0," << fingerprint_hex() << "," << seed_str << "\n";
    return os.str();
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    char buf[160];
    os << "Domain " << domain << " (" << split << ", " << num_samples << " samples)\n";
    os << "  class    dice %     ASD px   excluded\n";
    for (size_t c = 0; c < per_class.size(); ++c) {
        std::snprintf(buf, sizeof(buf), "  %5zu   %7.2f   %8.3f   %8d\n", c, per_class[c].dice_pct,
                      per_class[c].asd, per_class[c].asd_excluded);
        os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  mean    %7.2f   %8.3f\n", mean_dice_pct, mean_asd);
    os << buf;
    return os.str();
}

}  // namespace ramseg
