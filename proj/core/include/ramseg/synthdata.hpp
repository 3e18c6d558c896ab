#ifndef RAMSEG_SYNTHDATA_HPP
#define RAMSEG_SYNTHDATA_HPP

#include <cstdint>
#include <vector>

#include "ramseg/rng.hpp"
#include "ramseg/tensor.hpp"

namespace ramseg {

/// Per-domain style recipe. Geometry is shared across domains; everything
/// here only restyles intensities, never moves labels.
struct DomainSpec {
    int domain_id = 0;
    uint64_t style_seed = 0;
    double bias_amplitude = 0.0;     // multiplicative low-frequency field strength
    double bias_freq = 1.0;          // cycles across the image
    double bias_orientation = 0.0;   // radians
    double gamma = 1.0;              // tone-curve exponent (survives per-image min-max)
    double contrast = 1.0;           // linear scale around mid-gray
    double brightness = 0.0;         // additive offset
    double noise_sigma = 0.0;        // additive Gaussian noise
    std::vector<double> channel_gains;   // one per channel, 1.0 = neutral

    /// Canonical style for domain k of a K-domain benchmark.
    static DomainSpec canonical(int k, int num_domains, uint64_t seed, int channels);
};

struct DomainSample {
    Tensor image;   // {C,H,W}, intensities in [-1, 1]
    Tensor label;   // {classes,H,W}, values in {0, 1}
    int domain = 0;
};

struct ShapeSample {
    Tensor clean;   // {C,H,W} in [0, 1]
    Tensor label;   // {classes,H,W}
};

/// Renders 1-2 nested elliptical blobs with wobbled boundaries; the label is
/// the exact rendered indicator. classes=1 draws the outer blob only,
/// classes=2 adds a nested inner blob whose mask is contained in the outer.
ShapeSample generate_shape(Rng& rng, int size, int channels, int classes);

/// Multiplies by the spec's smooth bias field, applies contrast/brightness
/// and additive noise. Labels are untouched by construction. The field
/// phase is drawn from rng unless fixed_phase pins it (the benchmark
/// builder stratifies phases across each domain's samples).
Tensor apply_domain_style(const Tensor& clean, const DomainSpec& spec, Rng& rng,
                          const double* fixed_phase = nullptr);

/// Affine per-image rescale so min -> -1 and max -> +1. Constant images are
/// rejected (zero range).
Tensor normalize_intensity(const Tensor& image);

struct DomainDataset {
    DomainSpec spec;
    std::vector<DomainSample> train;
    std::vector<DomainSample> test;
};

struct Benchmark {
    std::vector<DomainDataset> domains;
    int image_size = 64;
    int channels = 1;
    int classes = 1;
    int per_domain = 0;
    uint64_t seed = 0;

    int num_domains() const { return static_cast<int>(domains.size()); }
};

/// K reproducible domains with an 80/20 train/test split each. All domains
/// share the same geometry sequence; only styles differ. Asserts at build
/// time that per-domain style centroids are separated by more than 0.1.
Benchmark build_benchmark(int num_domains, int n_per_domain, uint64_t seed, int image_size = 64,
                          bool fundus_mode = false);

/// Per-image style descriptor: per-channel means then per-channel stds.
std::vector<double> style_descriptor(const Tensor& image);

}  // namespace ramseg

#endif
