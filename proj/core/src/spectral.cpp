#include "ramseg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

namespace ramseg {

namespace {

using cd = std::complex<double>;
constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey, in place. sign = -1 forward, +1 inverse
// (no scaling here).
void fft_radix2(cd* a, int n, double sign) {
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = sign * kTwoPi / len;
        const cd wlen(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                cd u = a[i + k];
                cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

// Direct O(n^2) transform for non power-of-two extents.
void dft_direct(cd* a, int n, double sign) {
    std::vector<cd> out(static_cast<size_t>(n));
    std::vector<cd> roots(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double ang = sign * kTwoPi * k / n;
        roots[static_cast<size_t>(k)] = cd(std::cos(ang), std::sin(ang));
    }
    for (int u = 0; u < n; ++u) {
        cd acc(0.0, 0.0);
        for (int h = 0; h < n; ++h) acc += a[h] * roots[static_cast<size_t>((static_cast<long>(u) * h) % n)];
        out[static_cast<size_t>(u)] = acc;
    }
    std::copy(out.begin(), out.end(), a);
}

void transform_1d(cd* a, int n, double sign) {
    if (n == 1) return;
    if (is_pow2(n))
        fft_radix2(a, n, sign);
    else
        dft_direct(a, n, sign);
}

// 2-D transform over an H x W grid (row-major), rows then columns.
void transform_2d(std::vector<cd>& g, int h, int w, double sign) {
    for (int r = 0; r < h; ++r) transform_1d(g.data() + static_cast<size_t>(r) * w, w, sign);
    std::vector<cd> col(static_cast<size_t>(h));
    for (int c = 0; c < w; ++c) {
        for (int r = 0; r < h; ++r) col[static_cast<size_t>(r)] = g[static_cast<size_t>(r) * w + c];
        transform_1d(col.data(), h, sign);
        for (int r = 0; r < h; ++r) g[static_cast<size_t>(r) * w + c] = col[static_cast<size_t>(r)];
    }
}

}  // namespace

FrequencyDecomposition dft2(const Tensor& image) {
    if (image.rank() != 3) fail_invalid("dft2 expects a C,H,W image, got " + shape_str(image.shape()));
    if (!image.all_finite()) fail_invalid("dft2: image contains non-finite values");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);

    FrequencyDecomposition d{Tensor({c, h, w}), Tensor({c, h, w})};
    std::vector<cd> grid(static_cast<size_t>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < h * w; ++i)
            grid[static_cast<size_t>(i)] = cd(image[static_cast<long>(ch) * h * w + i], 0.0);
        transform_2d(grid, h, w, -1.0);
        for (int i = 0; i < h * w; ++i) {
            const cd z = grid[static_cast<size_t>(i)];
            double p = std::atan2(z.imag(), z.real());
            if (p <= -3.14159265358979323846) p = 3.14159265358979323846;  // keep phase in (-pi, pi]
            d.amplitude[static_cast<long>(ch) * h * w + i] = std::abs(z);
            d.phase[static_cast<long>(ch) * h * w + i] = p;
        }
    }
    return d;
}

Tensor idft2(const FrequencyDecomposition& decomp, double* max_imag_residue) {
    if (!decomp.amplitude.same_shape(decomp.phase))
        fail_invalid("idft2: amplitude shape " + shape_str(decomp.amplitude.shape()) +
                     " does not match phase shape " + shape_str(decomp.phase.shape()));
    if (decomp.amplitude.rank() != 3) fail_invalid("idft2 expects C,H,W spectra");
    if (decomp.amplitude.min_value() < 0.0) fail_invalid("idft2: amplitude must be non-negative");

    const int c = decomp.channels(), h = decomp.height(), w = decomp.width();
    Tensor out({c, h, w});
    double residue = 0.0;
    std::vector<cd> grid(static_cast<size_t>(h) * w);
    const double scale = 1.0 / (static_cast<double>(h) * w);
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < h * w; ++i) {
            const double a = decomp.amplitude[static_cast<long>(ch) * h * w + i];
            const double p = decomp.phase[static_cast<long>(ch) * h * w + i];
            grid[static_cast<size_t>(i)] = cd(a * std::cos(p), a * std::sin(p));
        }
        transform_2d(grid, h, w, +1.0);
        for (int i = 0; i < h * w; ++i) {
            const cd z = grid[static_cast<size_t>(i)] * scale;
            out[static_cast<long>(ch) * h * w + i] = z.real();
            residue = std::max(residue, std::fabs(z.imag()));
        }
    }
    if (max_imag_residue) *max_imag_residue = residue;
    return out;
}

FrequencyMask low_freq_mask(int h, int w, double beta) {
    if (h < 1 || w < 1) fail_invalid("low_freq_mask: extents must be >= 1");
    if (!(beta >= 0.0 && beta <= 1.0)) fail_invalid("low_freq_mask: beta must lie in [0,1]");

    FrequencyMask m{Tensor({h, w}), beta};
    const int sr = static_cast<int>(std::floor(beta * h));
    const int sc = static_cast<int>(std::floor(beta * w));
    // Floor-centered block of frequency offsets around DC; offset f maps to
    // unshifted index (f mod n).
    for (int fr = -(sr / 2); fr < sr - sr / 2; ++fr) {
        const int r = ((fr % h) + h) % h;
        for (int fc = -(sc / 2); fc < sc - sc / 2; ++fc) {
            const int cc = ((fc % w) + w) % w;
            m.mask.at2(r, cc) = 1.0;
        }
    }
    return m;
}

Tensor mix_amplitudes(const Tensor& a_k, const Tensor& a_n, const FrequencyMask& m, MixRatio lambda) {
    if (!a_k.same_shape(a_n))
        fail_invalid("mix_amplitudes: amplitude shapes differ: " + shape_str(a_k.shape()) + " vs " +
                     shape_str(a_n.shape()));
    if (a_k.rank() != 3) fail_invalid("mix_amplitudes expects C,H,W amplitudes");
    const int c = a_k.dim(0), h = a_k.dim(1), w = a_k.dim(2);
    if (m.mask.rank() != 2 || m.mask.dim(0) != h || m.mask.dim(1) != w)
        fail_invalid("mix_amplitudes: mask shape " + shape_str(m.mask.shape()) +
                     " does not match spatial dims " + shape_str({h, w}));

    const double l = lambda.value;
    Tensor out({c, h, w});
    for (int ch = 0; ch < c; ++ch) {
        for (int i = 0; i < h * w; ++i) {
            const long o = static_cast<long>(ch) * h * w + i;
            const double msk = m.mask[i];
            out[o] = a_k[o] * (1.0 - msk) + ((1.0 - l) * a_k[o] + l * a_n[o]) * msk;
        }
    }
    return out;
}

RamAugmentResult ram_augment_detailed(const Tensor& x_k, const Tensor& x_n, double beta, MixRatio lambda) {
    if (!x_k.same_shape(x_n))
        fail_invalid("ram_augment: image shapes differ: " + shape_str(x_k.shape()) + " vs " +
                     shape_str(x_n.shape()));
    const FrequencyDecomposition dk = dft2(x_k);
    const FrequencyDecomposition dn = dft2(x_n);
    const FrequencyMask m = low_freq_mask(dk.height(), dk.width(), beta);
    FrequencyDecomposition mixed{mix_amplitudes(dk.amplitude, dn.amplitude, m, lambda), dk.phase};

    RamAugmentResult r;
    r.unclamped = idft2(mixed, &r.max_imag_residue);
    r.image = r.unclamped;
    for (long i = 0; i < r.image.numel(); ++i) r.image[i] = std::clamp(r.image[i], -1.0, 1.0);
    return r;
}

Tensor ram_augment(const Tensor& x_k, const Tensor& x_n, double beta, MixRatio lambda) {
    return ram_augment_detailed(x_k, x_n, beta, lambda).image;
}

}  // namespace ramseg
