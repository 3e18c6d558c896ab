#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "ramseg/dataset_io.hpp"
#include "ramseg/synthdata.hpp"

using namespace ramseg;
namespace fs = std::filesystem;

namespace {

double foreground_fraction(const Tensor& label, int cls) {
    double fg = 0.0;
    const int h = label.dim(1), w = label.dim(2);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) fg += label.at3(cls, y, x);
    return fg / (static_cast<double>(h) * w);
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    double d = 0.0;
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j])
            ++i;
        else
            ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / a.size() -
                                  static_cast<double>(j) / b.size()));
    }
    return d;
}

}  // namespace

TEST_CASE("generate_shape: foreground fraction stays within [0.05, 0.5]") {
    Rng rng(1);
    for (int i = 0; i < 40; ++i) {
        const ShapeSample s = generate_shape(rng, 64, 1, 1);
        const double f = foreground_fraction(s.label, 0);
        CHECK(f >= 0.05);
        CHECK(f <= 0.5);
    }
}

TEST_CASE("generate_shape: inner class mask is nested inside the outer") {
    Rng rng(2);
    for (int i = 0; i < 10; ++i) {
        const ShapeSample s = generate_shape(rng, 64, 3, 2);
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x)
                if (s.label.at3(1, y, x) == 1.0) CHECK(s.label.at3(0, y, x) == 1.0);
    }
}

TEST_CASE("generate_shape is deterministic in the rng seed") {
    Rng a(77), b(77);
    const ShapeSample s1 = generate_shape(a, 32, 1, 1);
    const ShapeSample s2 = generate_shape(b, 32, 1, 1);
    CHECK(s1.clean == s2.clean);
    CHECK(s1.label == s2.label);
}

TEST_CASE("apply_domain_style with a neutral spec is the identity") {
    Rng rng(3);
    const ShapeSample s = generate_shape(rng, 32, 1, 1);
    DomainSpec neutral;
    Rng sty(4);
    const Tensor out = apply_domain_style(s.clean, neutral, sty);
    CHECK(out == s.clean);
}

TEST_CASE("different domain specs restyle the same clean image differently") {
    Rng rng(5);
    const ShapeSample s = generate_shape(rng, 32, 1, 1);
    const DomainSpec d0 = DomainSpec::canonical(0, 4, 9, 1);
    const DomainSpec d1 = DomainSpec::canonical(1, 4, 9, 1);
    Rng r0(d0.style_seed), r1(d1.style_seed);
    const Tensor a = apply_domain_style(s.clean, d0, r0);
    const Tensor b = apply_domain_style(s.clean, d1, r1);
    double diff = 0.0;
    for (long i = 0; i < a.numel(); ++i) diff = std::max(diff, std::fabs(a[i] - b[i]));
    CHECK(diff > 0.05);
}

TEST_CASE("styled image mean shifts by the brightness offset") {
    Rng rng(6);
    const ShapeSample s = generate_shape(rng, 64, 1, 1);
    DomainSpec spec = DomainSpec::canonical(1, 4, 9, 1);
    spec.brightness = 0.0;
    Rng r1(123);
    const Tensor base = apply_domain_style(s.clean, spec, r1);
    spec.brightness = 0.17;
    Rng r2(123);   // identical field phase and noise draws
    const Tensor shifted = apply_domain_style(s.clean, spec, r2);
    const double tol = 3.0 * spec.noise_sigma / 64.0;
    CHECK(std::fabs((shifted.mean() - base.mean()) - 0.17) <= tol);
}

TEST_CASE("normalize_intensity contracts") {
    SUBCASE("a [-1,1]-spanning image is unchanged") {
        Tensor img({1, 2, 2}, {-1.0, 0.25, 1.0, -0.5});
        const Tensor out = normalize_intensity(img);
        for (long i = 0; i < img.numel(); ++i) CHECK(std::fabs(out[i] - img[i]) < 1e-9);
    }
    SUBCASE("two-point image maps to exactly {-1, 1}") {
        Tensor img({1, 1, 2}, {0.0, 10.0});
        const Tensor out = normalize_intensity(img);
        CHECK(out[0] == -1.0);
        CHECK(out[1] == 1.0);
    }
    SUBCASE("range is exactly [-1, 1] for random images") {
        Rng rng(7);
        Tensor img({1, 5, 5});
        for (long i = 0; i < img.numel(); ++i) img[i] = rng.uniform(3.0, 9.0);
        const Tensor out = normalize_intensity(img);
        CHECK(out.min_value() == -1.0);
        CHECK(out.max_value() == 1.0);
    }
    SUBCASE("constant image is rejected") {
        CHECK_THROWS_AS(normalize_intensity(Tensor::full({1, 3, 3}, 0.4)), std::invalid_argument);
    }
}

TEST_CASE("build_benchmark is bitwise deterministic") {
    const Benchmark a = build_benchmark(3, 6, 21, 32);
    const Benchmark b = build_benchmark(3, 6, 21, 32);
    REQUIRE(a.num_domains() == b.num_domains());
    for (int k = 0; k < a.num_domains(); ++k) {
        REQUIRE(a.domains[k].train.size() == b.domains[k].train.size());
        for (size_t i = 0; i < a.domains[k].train.size(); ++i) {
            CHECK(a.domains[k].train[i].image == b.domains[k].train[i].image);
            CHECK(a.domains[k].train[i].label == b.domains[k].train[i].label);
        }
    }
}

TEST_CASE("build_benchmark splits 4x50 into 40 train / 10 test per domain") {
    const Benchmark bench = build_benchmark(4, 50, 7, 32);
    REQUIRE(bench.num_domains() == 4);
    for (const DomainDataset& d : bench.domains) {
        CHECK(d.train.size() == 40);
        CHECK(d.test.size() == 10);
    }
}

TEST_CASE("build_benchmark validates its inputs") {
    CHECK_THROWS_AS(build_benchmark(1, 50, 7), std::invalid_argument);
    CHECK_THROWS_AS(build_benchmark(4, 4, 7), std::invalid_argument);
}

TEST_CASE("per-domain style centroids are pairwise separated by > 0.1") {
    const Benchmark bench = build_benchmark(4, 20, 7, 64);
    std::vector<std::vector<double>> centroids;
    for (const DomainDataset& d : bench.domains) {
        std::vector<double> c;
        int n = 0;
        for (const auto* split : {&d.train, &d.test})
            for (const DomainSample& s : *split) {
                const auto desc = style_descriptor(s.image);
                if (c.empty()) c.assign(desc.size(), 0.0);
                for (size_t j = 0; j < desc.size(); ++j) c[j] += desc[j];
                ++n;
            }
        for (double& v : c) v /= n;
        centroids.push_back(std::move(c));
    }
    for (size_t a = 0; a < centroids.size(); ++a)
        for (size_t b = a + 1; b < centroids.size(); ++b) {
            double d2 = 0.0;
            for (size_t j = 0; j < centroids[a].size(); ++j)
                d2 += (centroids[a][j] - centroids[b][j]) * (centroids[a][j] - centroids[b][j]);
            CHECK(std::sqrt(d2) > 0.1);
        }
}

TEST_CASE("labels are identical across domains (style never touches them)") {
    const Benchmark bench = build_benchmark(3, 8, 33, 32);
    for (size_t i = 0; i < bench.domains[0].train.size(); ++i) {
        CHECK(bench.domains[0].train[i].label == bench.domains[1].train[i].label);
        CHECK(bench.domains[0].train[i].label == bench.domains[2].train[i].label);
    }
}

TEST_CASE("foreground-fraction distributions match across domains (KS <= 0.2)") {
    const Benchmark bench = build_benchmark(4, 25, 11, 64);
    std::vector<std::vector<double>> fracs(4);
    for (int k = 0; k < 4; ++k)
        for (const DomainSample& s : bench.domains[k].train)
            fracs[k].push_back(foreground_fraction(s.label, 0));
    for (int k = 1; k < 4; ++k) CHECK(ks_statistic(fracs[0], fracs[k]) <= 0.2);
}

TEST_CASE("benchmark survives a save/load round trip") {
    const fs::path root = fs::temp_directory_path() / "ramseg_test_ds";
    fs::remove_all(root);
    const Benchmark bench = build_benchmark(3, 6, 5, 32);
    save_benchmark(bench, root);
    CHECK(fs::exists(root / "manifest.txt"));
    CHECK(fs::exists(root / "meta.txt"));

    const Benchmark loaded = load_benchmark(root);
    REQUIRE(loaded.num_domains() == 3);
    CHECK(loaded.image_size == 32);
    for (int k = 0; k < 3; ++k) {
        REQUIRE(loaded.domains[k].train.size() == bench.domains[k].train.size());
        REQUIRE(loaded.domains[k].test.size() == bench.domains[k].test.size());
        for (size_t i = 0; i < loaded.domains[k].train.size(); ++i) {
            CHECK(loaded.domains[k].train[i].label == bench.domains[k].train[i].label);
            double maxdiff = 0.0;
            for (long j = 0; j < loaded.domains[k].train[i].image.numel(); ++j)
                maxdiff = std::max(maxdiff, std::fabs(loaded.domains[k].train[i].image[j] -
                                                      bench.domains[k].train[i].image[j]));
            CHECK(maxdiff <= 1.01 / 255.0);   // 8-bit PGM quantization
        }
    }
    fs::remove_all(root);
}

TEST_CASE("load_benchmark only touches the requested domains and records reads") {
    const fs::path root = fs::temp_directory_path() / "ramseg_test_audit";
    fs::remove_all(root);
    save_benchmark(build_benchmark(3, 5, 5, 32), root);

    std::vector<std::string> audit;
    const Benchmark loaded = load_benchmark(root, std::vector<int>{0, 2}, &audit);
    CHECK(loaded.domains[0].train.size() == 4);
    CHECK(loaded.domains[1].train.empty());
    CHECK(loaded.domains[2].train.size() == 4);
    CHECK(!audit.empty());
    for (const std::string& path : audit) CHECK(path.find("domain1") == std::string::npos);
    fs::remove_all(root);
}

TEST_CASE("PGM round trip is exact at 8-bit resolution") {
    const fs::path p = fs::temp_directory_path() / "ramseg_test.pgm";
    Tensor plane({4, 5});
    for (long i = 0; i < plane.numel(); ++i) plane[i] = -1.0 + 2.0 * (i / 19.0);
    write_pgm(p, plane, -1.0, 1.0);
    const Tensor back = read_pgm(p, -1.0, 1.0);
    const Tensor again = [&] {
        write_pgm(p, back, -1.0, 1.0);
        return read_pgm(p, -1.0, 1.0);
    }();
    CHECK(back == again);
    fs::remove(p);
}
