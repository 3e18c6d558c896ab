#ifndef RAMSEG_SPECTRAL_HPP
#define RAMSEG_SPECTRAL_HPP

#include "ramseg/tensor.hpp"

namespace ramseg {

/// Polar form of a per-channel 2-D DFT: amplitude |F| and phase arg(F).
/// Both tensors are C,H,W; frequency index (u,v) runs over rows,cols with
/// DC at (0,0) (unshifted storage).
struct FrequencyDecomposition {
    Tensor amplitude;
    Tensor phase;

    int channels() const { return amplitude.dim(0); }
    int height() const { return amplitude.dim(1); }
    int width() const { return amplitude.dim(2); }
};

/// Binary low-frequency selection mask, stored unshifted (DC at (0,0)).
/// beta records the low-frequency extent the mask was built from.
struct FrequencyMask {
    Tensor mask;   // H,W with values in {0,1}
    double beta = 0.0;
};

/// Amplitude interpolation ratio in [0,1]; validated at construction.
struct MixRatio {
    explicit MixRatio(double v) : value(v) {
        if (!(v >= 0.0 && v <= 1.0)) fail_invalid("mix ratio must lie in [0,1]");
    }
    double value;
};

/// Forward 2-D DFT per channel, unnormalized:
///   F(u,v) = sum_{h,w} x(h,w) e^{-j 2 pi (h u / H + w v / W)}.
/// Radix-2 FFT on power-of-two extents, direct transform otherwise.
FrequencyDecomposition dft2(const Tensor& image);

/// Inverse transform of amplitude*e^{j*phase} with 1/(HW) normalization,
/// returning the real part. If max_imag_residue is non-null it receives the
/// largest |imaginary| component discarded (zero for Hermitian spectra).
Tensor idft2(const FrequencyDecomposition& decomp, double* max_imag_residue = nullptr);

/// Mask selecting the centered low-frequency block: in the DC-centered view
/// a floor-centered rectangle of floor(beta*h) x floor(beta*w) ones, stored
/// unshifted. beta=0 gives all zeros, beta=1 all ones.
FrequencyMask low_freq_mask(int h, int w, double beta);

/// Amplitude interpolation under a binary mask:
///   out = a_k*(1-M) + ((1-lambda)*a_k + lambda*a_n)*M.
/// Mask is broadcast over channels.
Tensor mix_amplitudes(const Tensor& a_k, const Tensor& a_n, const FrequencyMask& m, MixRatio lambda);

struct RamAugmentResult {
    Tensor image;       // clamped to [-1, 1]
    Tensor unclamped;   // real part before clamping (phase-preservation checks)
    double max_imag_residue = 0.0;
};

/// Random Amplitude Mixup: mixes the low-frequency amplitudes of x_k and
/// x_n while keeping the phase of x_k, so the output restyles x_k without
/// moving object boundaries.
RamAugmentResult ram_augment_detailed(const Tensor& x_k, const Tensor& x_n, double beta, MixRatio lambda);
Tensor ram_augment(const Tensor& x_k, const Tensor& x_n, double beta, MixRatio lambda);

}  // namespace ramseg

#endif
