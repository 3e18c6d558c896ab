#ifndef RAMSEG_EVAL_HPP
#define RAMSEG_EVAL_HPP

#include <string>
#include <vector>

#include "ramseg/model.hpp"
#include "ramseg/synthdata.hpp"

namespace ramseg {

struct ClassStats {
    double dice_pct = 0.0;   // mean Dice over samples, percent
    double asd = 0.0;        // mean ASD over samples where defined, pixels
    int asd_excluded = 0;    // samples skipped because a mask was empty
};

struct EvalReport {
    int domain = -1;
    std::string split = "test";
    int num_samples = 0;
    std::vector<ClassStats> per_class;
    double mean_dice_pct = 0.0;
    double mean_asd = 0.0;
    uint64_t config_fingerprint = 0;
    std::vector<uint64_t> seeds;

    std::string to_csv() const;
    std::string to_table() const;
    std::string fingerprint_hex() const;
};

/// Thresholded (0.5) per-class evaluation of eval-mode predictions.
EvalReport evaluate(SegNet& model, const std::vector<DomainSample>& samples, int domain,
                    const std::string& split, uint64_t config_fingerprint,
                    std::vector<uint64_t> seeds);

/// Binary {H,W} mask for one class plane of a probability map {C,H,W}.
Tensor threshold_mask(const Tensor& probs, int cls, double threshold = 0.5);

/// Eval-mode probability map {classes,H,W} for a single image.
Tensor predict_probs(SegNet& model, const Tensor& image);

}  // namespace ramseg

#endif
