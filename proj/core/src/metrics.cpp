#include "ramseg/metrics.hpp"

#include <cmath>
#include <limits>

#include "ramseg/synthdata.hpp"

namespace ramseg {

namespace {

void check_mask(const Tensor& m, const char* who) {
    if (m.rank() != 2) fail_invalid(std::string(who) + ": masks must be {H,W}");
    for (long i = 0; i < m.numel(); ++i)
        if (m[i] != 0.0 && m[i] != 1.0) fail_invalid(std::string(who) + ": masks must be binary");
}

}  // namespace

double dice_metric(const Tensor& pred, const Tensor& gt) {
    check_mask(pred, "dice_metric");
    check_mask(gt, "dice_metric");
    if (!pred.same_shape(gt)) fail_invalid("dice_metric: shape mismatch");
    long p = 0, g = 0, inter = 0;
    for (long i = 0; i < pred.numel(); ++i) {
        p += pred[i] != 0.0;
        g += gt[i] != 0.0;
        inter += (pred[i] != 0.0 && gt[i] != 0.0);
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

std::vector<std::pair<int, int>> boundary_pixels(const Tensor& mask) {
    const int h = mask.dim(0), w = mask.dim(1);
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) {
            if (mask.at2(r, c) == 0.0) continue;
            const bool edge = r == 0 || r == h - 1 || c == 0 || c == w - 1;
            const bool bg_neighbor = (r > 0 && mask.at2(r - 1, c) == 0.0) ||
                                     (r < h - 1 && mask.at2(r + 1, c) == 0.0) ||
                                     (c > 0 && mask.at2(r, c - 1) == 0.0) ||
                                     (c < w - 1 && mask.at2(r, c + 1) == 0.0);
            if (edge || bg_neighbor) out.emplace_back(r, c);
        }
    return out;
}

namespace {

double directed_mean_distance(const std::vector<std::pair<int, int>>& from,
                              const std::vector<std::pair<int, int>>& to) {
    double total = 0.0;
    for (const auto& [r, c] : from) {
        double best = std::numeric_limits<double>::max();
        for (const auto& [tr, tc] : to) {
            const double dr = r - tr, dc = c - tc;
            const double d2 = dr * dr + dc * dc;
            if (d2 < best) best = d2;
        }
        total += std::sqrt(best);
    }
    return total / static_cast<double>(from.size());
}

}  // namespace

double asd_metric(const Tensor& pred, const Tensor& gt) {
    check_mask(pred, "asd_metric");
    check_mask(gt, "asd_metric");
    if (!pred.same_shape(gt)) fail_invalid("asd_metric: shape mismatch");
    const auto bp = boundary_pixels(pred);
    const auto bg = boundary_pixels(gt);
    if (bp.empty() || bg.empty())
        throw MetricUndefinedError("asd_metric: undefined for an empty mask");
    return 0.5 * (directed_mean_distance(bp, bg) + directed_mean_distance(bg, bp));
}

double domain_spread(const std::vector<std::vector<Tensor>>& images_by_domain) {
    if (images_by_domain.size() < 2) fail_invalid("domain_spread: need at least 2 domains");
    std::vector<std::vector<double>> centroids;
    for (const auto& group : images_by_domain) {
        if (group.size() < 2) fail_invalid("domain_spread: need at least 2 images per domain");
        std::vector<double> c;
        for (const Tensor& img : group) {
            const std::vector<double> d = style_descriptor(img);
            if (c.empty()) c.assign(d.size(), 0.0);
            if (c.size() != d.size()) fail_invalid("domain_spread: image channel counts differ");
            for (size_t j = 0; j < d.size(); ++j) c[j] += d[j] / static_cast<double>(group.size());
        }
        centroids.push_back(std::move(c));
    }
    const size_t k = centroids.size();
    double total = 0.0;
    for (size_t a = 0; a < k; ++a)
        for (size_t b = 0; b < k; ++b) {
            double d2 = 0.0;
            for (size_t j = 0; j < centroids[a].size(); ++j) {
                const double diff = centroids[a][j] - centroids[b][j];
                d2 += diff * diff;
            }
            total += std::sqrt(d2);
        }
    return total / static_cast<double>(k * k);
}

}  // namespace ramseg
