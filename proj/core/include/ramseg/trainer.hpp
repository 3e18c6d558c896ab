#ifndef RAMSEG_TRAINER_HPP
#define RAMSEG_TRAINER_HPP

#include <filesystem>
#include <optional>
#include <span>

#include "ramseg/config.hpp"
#include "ramseg/model.hpp"
#include "ramseg/synthdata.hpp"

namespace ramseg {

/// Polynomial decay: lr0 * (1 - epoch/epochs)^power, applied per epoch.
double poly_lr(int epoch, const TrainConfig& cfg);

struct AdamState {
    std::vector<Tensor> m, v;
    long step = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    static AdamState init(const std::vector<TensorRef>& params);
};

/// Bias-corrected Adam update in place.
void adam_step(const std::vector<TensorRef>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr);

struct StepLosses {
    double seg_orig = 0.0;
    double seg_aug = 0.0;
    double rec = 0.0;
    double consist = 0.0;
    double total = 0.0;
};

/// One optimization step over a batch of pool indices. The batch must span
/// at least two domains; mixing partners are drawn from the whole pool.
/// Performs forward passes on originals and amplitude-mixed copies, restores
/// the mixed images through the domain's DSBN set, applies one Adam update
/// and reports the per-term losses (unweighted per-domain means; total is
/// the weighted objective).
StepLosses train_step(std::span<const DomainSample* const> pool, std::span<const int> batch,
                      SegNet& model, AdamState& adam, const TrainConfig& cfg, Rng& rng, double lr);

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    StepLosses losses;
};

struct FitResult {
    SegNet model;
    std::vector<EpochLog> log;
    uint64_t config_fingerprint = 0;
};

std::string log_csv_header();
std::string log_csv_row(const EpochLog& e);

/// Leave-one-domain-out training on the benchmark's train splits. Held-out
/// samples are never touched. When out_dir is set, writes config.ini,
/// log.csv and periodic + final checkpoints there.
FitResult fit(const Benchmark& bench, int held_out_domain, const RunConfig& cfg,
              const std::optional<std::filesystem::path>& out_dir = std::nullopt);

}  // namespace ramseg

#endif
