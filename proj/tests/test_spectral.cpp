#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ramseg/rng.hpp"
#include "ramseg/spectral.hpp"

using namespace ramseg;

namespace {

Tensor random_image(Rng& rng, int c, int h, int w) {
    Tensor t({c, h, w});
    for (long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (long i = 0; i < a.numel(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

}  // namespace

TEST_CASE("dft2 of a constant image is DC-only") {
    const double c = -0.37;
    const Tensor img = Tensor::full({1, 4, 4}, c);
    const FrequencyDecomposition d = dft2(img);
    CHECK(d.amplitude.at3(0, 0, 0) == doctest::Approx(16.0 * std::fabs(c)).epsilon(1e-12));
    CHECK(d.phase.at3(0, 0, 0) == doctest::Approx(c >= 0 ? 0.0 : 3.14159265358979).epsilon(1e-9));
    for (int u = 0; u < 4; ++u)
        for (int v = 0; v < 4; ++v)
            if (u || v) CHECK(d.amplitude.at3(0, u, v) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("dft2 of an origin impulse is flat") {
    Tensor img({1, 4, 4});
    img.at3(0, 0, 0) = 1.0;
    const FrequencyDecomposition d = dft2(img);
    for (int u = 0; u < 4; ++u)
        for (int v = 0; v < 4; ++v) {
            CHECK(d.amplitude.at3(0, u, v) == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(d.phase.at3(0, u, v) == doctest::Approx(0.0).epsilon(1e-12));
        }
}

TEST_CASE("dft2 matches the double-loop oracle on a 5x7x2 image") {
    Rng rng(42);
    const Tensor img = random_image(rng, 2, 5, 7);
    const FrequencyDecomposition d = dft2(img);
    for (int ch = 0; ch < 2; ++ch) {
        const auto oracle = oracles::dft2_plane(img, ch);
        for (int u = 0; u < 5; ++u)
            for (int v = 0; v < 7; ++v) {
                const auto z = oracle[static_cast<size_t>(u) * 7 + v];
                CHECK(d.amplitude.at3(ch, u, v) == doctest::Approx(std::abs(z)).epsilon(0).scale(1).epsilon(1e-9));
                CHECK(std::fabs(d.amplitude.at3(ch, u, v) - std::abs(z)) < 1e-9);
            }
    }
}

TEST_CASE("dft2 rejects non-finite input") {
    Tensor img({1, 2, 2});
    img[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(dft2(img), std::invalid_argument);
}

TEST_CASE("idft2(dft2(x)) = x within 1e-6") {
    Rng rng(7);
    const Tensor img = random_image(rng, 1, 16, 16);
    const Tensor back = idft2(dft2(img));
    CHECK(max_abs_diff(img, back) < 1e-6);
}

TEST_CASE("idft2 of a zero spectrum is a zero image") {
    FrequencyDecomposition d{Tensor({1, 3, 5}), Tensor({1, 3, 5})};
    for (long i = 0; i < d.phase.numel(); ++i) d.phase[i] = 0.5 * i;
    const Tensor img = idft2(d);
    CHECK(img.max_value() == 0.0);
    CHECK(img.min_value() == 0.0);
}

TEST_CASE("idft2 of a hand-built 2x2 DC spectrum gives a constant 1 image") {
    FrequencyDecomposition d{Tensor({1, 2, 2}), Tensor({1, 2, 2})};
    d.amplitude.at3(0, 0, 0) = 4.0;
    const Tensor img = idft2(d);
    for (long i = 0; i < img.numel(); ++i) CHECK(img[i] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("idft2 rejects mismatched amplitude/phase shapes") {
    FrequencyDecomposition d{Tensor({1, 4, 4}), Tensor({1, 4, 2})};
    CHECK_THROWS_AS(idft2(d), std::invalid_argument);
}

TEST_CASE("amplitude of a real image is centro-symmetric") {
    Rng rng(11);
    const Tensor img = random_image(rng, 1, 6, 9);
    const FrequencyDecomposition d = dft2(img);
    for (int u = 0; u < 6; ++u)
        for (int v = 0; v < 9; ++v) {
            const double a = d.amplitude.at3(0, u, v);
            const double b = d.amplitude.at3(0, (6 - u) % 6, (9 - v) % 9);
            CHECK(std::fabs(a - b) <= 1e-9 * std::max(1.0, std::fabs(a)));
        }
}

TEST_CASE("Parseval: sum x^2 = (1/HW) sum amplitude^2") {
    Rng rng(13);
    for (const auto& [h, w] : std::vector<std::pair<int, int>>{{8, 8}, {5, 6}, {16, 12}}) {
        const Tensor img = random_image(rng, 2, h, w);
        const FrequencyDecomposition d = dft2(img);
        double spatial = 0.0, freq = 0.0;
        for (long i = 0; i < img.numel(); ++i) spatial += img[i] * img[i];
        for (long i = 0; i < d.amplitude.numel(); ++i) freq += d.amplitude[i] * d.amplitude[i];
        freq /= static_cast<double>(h) * w;
        CHECK(std::fabs(spatial - freq) / spatial < 1e-6);
    }
}

TEST_CASE("low_freq_mask extremes") {
    CHECK(low_freq_mask(6, 6, 0.0).mask.max_value() == 0.0);
    const FrequencyMask full = low_freq_mask(5, 8, 1.0);
    CHECK(full.mask.min_value() == 1.0);
}

TEST_CASE("low_freq_mask 8x8 beta=0.25 selects the 2x2 block around DC") {
    const FrequencyMask m = low_freq_mask(8, 8, 0.25);
    CHECK(m.mask.sum() == 4.0);
    // Centered view offsets {-1, 0}: unshifted rows/cols {7, 0}.
    for (int r : {7, 0})
        for (int c : {7, 0}) CHECK(m.mask.at2(r, c) == 1.0);
}

TEST_CASE("low_freq_mask odd extents are exactly centro-symmetric") {
    for (double beta : {0.2, 0.4, 0.66}) {
        const int h = 15, w = 15;
        const FrequencyMask m = low_freq_mask(h, w, beta);
        const int side = static_cast<int>(beta * h);
        if (side % 2 == 1) {
            for (int u = 0; u < h; ++u)
                for (int v = 0; v < w; ++v)
                    CHECK(m.mask.at2(u, v) == m.mask.at2((h - u) % h, (w - v) % w));
        }
    }
}

TEST_CASE("low_freq_mask rejects beta outside [0,1]") {
    CHECK_THROWS_AS(low_freq_mask(8, 8, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(low_freq_mask(8, 8, 1.2), std::invalid_argument);
}

TEST_CASE("mix_amplitudes identities and hand fixture") {
    Rng rng(3);
    const Tensor a = random_image(rng, 1, 4, 4);
    const Tensor b = random_image(rng, 1, 4, 4);
    Tensor abs_a = a;
    for (long i = 0; i < abs_a.numel(); ++i) abs_a[i] = std::fabs(abs_a[i]);
    Tensor abs_b = b;
    for (long i = 0; i < abs_b.numel(); ++i) abs_b[i] = std::fabs(abs_b[i]);

    SUBCASE("lambda = 0 leaves a_k unchanged") {
        const Tensor out = mix_amplitudes(abs_a, abs_b, low_freq_mask(4, 4, 0.5), MixRatio(0.0));
        CHECK(max_abs_diff(out, abs_a) == 0.0);
    }
    SUBCASE("lambda = 1 with an all-one mask returns a_n") {
        const Tensor out = mix_amplitudes(abs_a, abs_b, low_freq_mask(4, 4, 1.0), MixRatio(1.0));
        CHECK(max_abs_diff(out, abs_b) == 0.0);
    }
    SUBCASE("hand-evaluated 2x2 fixture") {
        const Tensor ak({1, 2, 2}, {2, 4, 6, 8});
        const Tensor an({1, 2, 2}, {10, 12, 14, 16});
        FrequencyMask m{Tensor({2, 2}, {1, 0, 0, 1}), 0.5};
        const Tensor out = mix_amplitudes(ak, an, m, MixRatio(0.5));
        CHECK(out[0] == doctest::Approx(6.0));
        CHECK(out[1] == doctest::Approx(4.0));
        CHECK(out[2] == doctest::Approx(6.0));
        CHECK(out[3] == doctest::Approx(12.0));
    }
    SUBCASE("shape mismatch is rejected") {
        const Tensor small({1, 2, 2}, {1, 2, 3, 4});
        CHECK_THROWS_AS(mix_amplitudes(abs_a, small, low_freq_mask(4, 4, 0.5), MixRatio(0.5)),
                        std::invalid_argument);
    }
}

TEST_CASE("monotone interpolation: all-one mask gives the exact convex combination") {
    Rng rng(29);
    const Tensor x = random_image(rng, 1, 8, 8);
    const Tensor y = random_image(rng, 1, 8, 8);
    const FrequencyDecomposition dx = dft2(x), dy = dft2(y);
    const FrequencyMask full = low_freq_mask(8, 8, 1.0);
    for (double l : {0.0, 0.25, 0.5, 0.9, 1.0}) {
        const Tensor mixed = mix_amplitudes(dx.amplitude, dy.amplitude, full, MixRatio(l));
        for (long i = 0; i < mixed.numel(); ++i)
            CHECK(mixed[i] ==
                  doctest::Approx((1.0 - l) * dx.amplitude[i] + l * dy.amplitude[i]).epsilon(1e-12));
    }
}

TEST_CASE("ram_augment identities") {
    Rng rng(5);
    const Tensor x = random_image(rng, 1, 8, 8);
    const Tensor y = random_image(rng, 1, 8, 8);

    SUBCASE("self-mixing is the identity") {
        const Tensor out = ram_augment(x, x, 0.4, MixRatio(0.8));
        CHECK(max_abs_diff(out, x) < 1e-6);
    }
    SUBCASE("lambda = 0 returns x_k") {
        const Tensor out = ram_augment(x, y, 0.4, MixRatio(0.0));
        CHECK(max_abs_diff(out, x) < 1e-6);
    }
    SUBCASE("beta = 0 returns x_k") {
        const Tensor out = ram_augment(x, y, 0.0, MixRatio(0.9));
        CHECK(max_abs_diff(out, x) < 1e-6);
    }
    SUBCASE("shape mismatch is rejected") {
        Rng r2(6);
        const Tensor z = random_image(r2, 1, 4, 4);
        CHECK_THROWS_AS(ram_augment(x, z, 0.2, MixRatio(0.5)), std::invalid_argument);
    }
}

TEST_CASE("ram_augment composition matches the oracle pipeline") {
    Rng rng(17);
    const Tensor x = random_image(rng, 1, 8, 8);
    const Tensor y = random_image(rng, 1, 8, 8);
    const double beta = 0.5, lambda = 0.7;

    // Oracle: brute-force DFTs, the same mask, Eq-by-Eq composition.
    const auto fx = oracles::dft2_plane(x, 0);
    const auto fy = oracles::dft2_plane(y, 0);
    const FrequencyMask m = low_freq_mask(8, 8, beta);
    std::vector<std::complex<double>> mixed(fx.size());
    for (size_t i = 0; i < fx.size(); ++i) {
        const double ak = std::abs(fx[i]), an = std::abs(fy[i]);
        const double amp = ak * (1.0 - m.mask[static_cast<long>(i)]) +
                           ((1.0 - lambda) * ak + lambda * an) * m.mask[static_cast<long>(i)];
        const double ph = std::arg(fx[i]);
        mixed[i] = std::polar(amp, ph);
    }
    const auto back = oracles::idft2_plane(mixed, 8, 8);

    const RamAugmentResult got = ram_augment_detailed(x, y, beta, MixRatio(lambda));
    for (int i = 0; i < 64; ++i)
        CHECK(std::fabs(got.unclamped[i] - back[static_cast<size_t>(i)].real()) < 1e-8);
}

TEST_CASE("reality: centro-symmetric masks keep the imaginary residue tiny") {
    Rng rng(23);
    // beta chosen so floor(beta*16) is odd -> exactly symmetric mask.
    const double beta = 5.0 / 16.0;
    for (int trial = 0; trial < 5; ++trial) {
        const Tensor x = random_image(rng, 1, 16, 16);
        const Tensor y = random_image(rng, 1, 16, 16);
        const RamAugmentResult r = ram_augment_detailed(x, y, beta, MixRatio(rng.uniform()));
        CHECK(r.max_imag_residue < 1e-6);
    }
}

TEST_CASE("phase preservation where the mixed amplitude is nonzero") {
    Rng rng(31);
    const Tensor x = random_image(rng, 1, 16, 16);
    const Tensor y = random_image(rng, 1, 16, 16);
    const FrequencyDecomposition dx = dft2(x);
    const RamAugmentResult r = ram_augment_detailed(x, y, 5.0 / 16.0, MixRatio(0.6));
    const FrequencyDecomposition re = dft2(r.unclamped);
    for (long i = 0; i < re.amplitude.numel(); ++i) {
        if (re.amplitude[i] <= 1e-8) continue;
        double dp = re.phase[i] - dx.phase[i];
        while (dp > oracles::kPi) dp -= 2 * oracles::kPi;
        while (dp < -oracles::kPi) dp += 2 * oracles::kPi;
        CHECK(std::fabs(dp) < 1e-5);
    }
}

TEST_CASE("round-trip property over random shapes") {
    Rng rng(41);
    for (int trial = 0; trial < 10; ++trial) {
        const int h = 2 + rng.uniform_int(15);
        const int w = 2 + rng.uniform_int(15);
        const int c = 1 + rng.uniform_int(3);
        const Tensor img = random_image(rng, c, h, w);
        CHECK(max_abs_diff(idft2(dft2(img)), img) < 1e-6);
    }
}
