#include <benchmark/benchmark.h>

#include "ramseg/losses.hpp"
#include "ramseg/metrics.hpp"
#include "ramseg/model.hpp"
#include "ramseg/rng.hpp"
#include "ramseg/spectral.hpp"
#include "ramseg/synthdata.hpp"
#include "ramseg/trainer.hpp"

using namespace ramseg;

namespace {

Tensor random_image(Rng& rng, int c, int h, int w) {
    Tensor t({c, h, w});
    for (long i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-1.0, 1.0);
    return t;
}

void BM_dft2_64(benchmark::State& state) {
    Rng rng(1);
    const Tensor img = random_image(rng, 1, 64, 64);
    for (auto _ : state) benchmark::DoNotOptimize(dft2(img));
}
BENCHMARK(BM_dft2_64);

void BM_ram_augment_64(benchmark::State& state) {
    Rng rng(2);
    const Tensor a = random_image(rng, 1, 64, 64);
    const Tensor b = random_image(rng, 1, 64, 64);
    for (auto _ : state) benchmark::DoNotOptimize(ram_augment(a, b, 0.2, MixRatio(0.5)));
}
BENCHMARK(BM_ram_augment_64);

void BM_conv2d_forward(benchmark::State& state) {
    Rng rng(3);
    Tensor x({8, 24, 64, 64});
    for (long i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    Tensor w({8, 24, 3, 3});
    for (long i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-0.2, 0.2);
    const Tensor b({8});
    for (auto _ : state) {
        Tape t;
        benchmark::DoNotOptimize(t.conv2d(t.leaf(x), t.leaf(w), t.leaf(b), 1, 1));
    }
}
BENCHMARK(BM_conv2d_forward);

void BM_conv2d_backward(benchmark::State& state) {
    Rng rng(4);
    Tensor x({8, 24, 64, 64});
    for (long i = 0; i < x.numel(); ++i) x[i] = rng.uniform(-1.0, 1.0);
    Tensor w({8, 24, 3, 3});
    for (long i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-0.2, 0.2);
    const Tensor b({8});
    for (auto _ : state) {
        Tape t;
        const NodeId y = t.conv2d(t.leaf(x), t.leaf(w), t.leaf(b), 1, 1);
        t.backward(t.mean_all(y));
    }
}
BENCHMARK(BM_conv2d_backward);

void BM_train_step(benchmark::State& state) {
    const bool full = state.range(0) != 0;
    const Benchmark bench = build_benchmark(3, 10, 3, 64);
    std::vector<const DomainSample*> pool;
    for (int k = 0; k < 3; ++k)
        for (const DomainSample& s : bench.domains[static_cast<size_t>(k)].train)
            pool.push_back(&s);
    std::vector<int> batch;
    for (int i = 0; i < 8; ++i) batch.push_back(i);

    ModelConfig mcfg;
    mcfg.num_domains = 3;
    SegNet model(mcfg, 1);
    AdamState adam = AdamState::init(model.parameters());
    TrainConfig cfg;
    cfg.use_ram_aug = cfg.use_dsir = cfg.use_consistency = full;
    Rng rng(5);
    for (auto _ : state)
        benchmark::DoNotOptimize(train_step(pool, batch, model, adam, cfg, rng, 1e-3));
}
BENCHMARK(BM_train_step)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_asd_64(benchmark::State& state) {
    Rng rng(6);
    Tensor p({64, 64}), g({64, 64});
    for (long i = 0; i < p.numel(); ++i) p[i] = rng.uniform() < 0.2 ? 1.0 : 0.0;
    for (long i = 0; i < g.numel(); ++i) g[i] = rng.uniform() < 0.2 ? 1.0 : 0.0;
    for (auto _ : state) benchmark::DoNotOptimize(asd_metric(p, g));
}
BENCHMARK(BM_asd_64);

}  // namespace

BENCHMARK_MAIN();
