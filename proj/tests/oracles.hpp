// Independent brute-force oracles used to pin expected values. These stay
// deliberately naive and separate from the library implementations they
// check.
#ifndef RAMSEG_TESTS_ORACLES_HPP
#define RAMSEG_TESTS_ORACLES_HPP

#include <cmath>
#include <complex>
#include <limits>
#include <utility>
#include <vector>

#include "ramseg/tensor.hpp"

namespace oracles {

constexpr double kPi = 3.14159265358979323846;

/// O((HW)^2) double-loop DFT of one channel plane, straight from the sum
///   F(u,v) = sum_h sum_w x(h,w) e^{-j 2 pi (h u / H + w v / W)}.
inline std::vector<std::complex<double>> dft2_plane(const ramseg::Tensor& img, int channel) {
    const int h = img.dim(1), w = img.dim(2);
    std::vector<std::complex<double>> out(static_cast<size_t>(h) * w);
    for (int u = 0; u < h; ++u)
        for (int v = 0; v < w; ++v) {
            std::complex<double> acc(0.0, 0.0);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double ang = -2.0 * kPi * (static_cast<double>(y) * u / h +
                                                     static_cast<double>(x) * v / w);
                    acc += img.at3(channel, y, x) * std::complex<double>(std::cos(ang), std::sin(ang));
                }
            out[static_cast<size_t>(u) * w + v] = acc;
        }
    return out;
}

/// Inverse of dft2_plane with 1/(HW) scaling; returns complex values.
inline std::vector<std::complex<double>> idft2_plane(const std::vector<std::complex<double>>& f,
                                                     int h, int w) {
    std::vector<std::complex<double>> out(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::complex<double> acc(0.0, 0.0);
            for (int u = 0; u < h; ++u)
                for (int v = 0; v < w; ++v) {
                    const double ang = 2.0 * kPi * (static_cast<double>(y) * u / h +
                                                    static_cast<double>(x) * v / w);
                    acc += f[static_cast<size_t>(u) * w + v] *
                           std::complex<double>(std::cos(ang), std::sin(ang));
                }
            out[static_cast<size_t>(y) * w + x] = acc / (static_cast<double>(h) * w);
        }
    return out;
}

/// Six-nested-loop convolution (cross-correlation) oracle.
inline ramseg::Tensor conv2d_naive(const ramseg::Tensor& x, const ramseg::Tensor& w,
                                   const ramseg::Tensor& b, int stride, int pad) {
    const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int cout = w.dim(0), k = w.dim(2);
    const int hout = (h + 2 * pad - k) / stride + 1;
    const int wout = (ww + 2 * pad - k) / stride + 1;
    ramseg::Tensor out({n, cout, hout, wout});
    for (int i = 0; i < n; ++i)
        for (int co = 0; co < cout; ++co)
            for (int oh = 0; oh < hout; ++oh)
                for (int ow = 0; ow < wout; ++ow) {
                    double acc = b[co];
                    for (int ci = 0; ci < cin; ++ci)
                        for (int kr = 0; kr < k; ++kr)
                            for (int kc = 0; kc < k; ++kc) {
                                const int ih = oh * stride - pad + kr;
                                const int iw = ow * stride - pad + kc;
                                if (ih < 0 || ih >= h || iw < 0 || iw >= ww) continue;
                                acc += x.at4(i, ci, ih, iw) * w.at4(co, ci, kr, kc);
                            }
                    out.at4(i, co, oh, ow) = acc;
                }
    return out;
}

/// All-pairs symmetric average surface distance, reimplemented from the
/// definition (4-neighbor boundary, mean of the two directed means).
inline double asd_naive(const ramseg::Tensor& pred, const ramseg::Tensor& gt) {
    auto boundary = [](const ramseg::Tensor& m) {
        const int h = m.dim(0), w = m.dim(1);
        std::vector<std::pair<int, int>> px;
        for (int r = 0; r < h; ++r)
            for (int c = 0; c < w; ++c) {
                if (m.at2(r, c) == 0.0) continue;
                bool is_b = r == 0 || r == h - 1 || c == 0 || c == w - 1;
                if (!is_b && m.at2(r - 1, c) == 0.0) is_b = true;
                if (!is_b && m.at2(r + 1, c) == 0.0) is_b = true;
                if (!is_b && m.at2(r, c - 1) == 0.0) is_b = true;
                if (!is_b && m.at2(r, c + 1) == 0.0) is_b = true;
                if (is_b) px.emplace_back(r, c);
            }
        return px;
    };
    auto directed = [](const std::vector<std::pair<int, int>>& a,
                       const std::vector<std::pair<int, int>>& bpx) {
        double total = 0.0;
        for (const auto& p : a) {
            double best = std::numeric_limits<double>::max();
            for (const auto& q : bpx) {
                const double dr = p.first - q.first, dc = p.second - q.second;
                best = std::min(best, dr * dr + dc * dc);
            }
            total += std::sqrt(best);
        }
        return total / static_cast<double>(a.size());
    };
    const auto bp = boundary(pred), bg = boundary(gt);
    return 0.5 * (directed(bp, bg) + directed(bg, bp));
}

}  // namespace oracles

#endif
