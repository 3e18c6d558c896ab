#ifndef RAMSEG_METRICS_HPP
#define RAMSEG_METRICS_HPP

#include <stdexcept>
#include <vector>

#include "ramseg/tensor.hpp"

namespace ramseg {

/// Raised when a metric has no defined value for the given masks (for ASD:
/// an empty mask). Callers report and exclude such cases from averages.
class MetricUndefinedError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Dice overlap 2|P^G| / (|P|+|G|) on {H,W} binary masks; two empty masks
/// score 1.0.
double dice_metric(const Tensor& pred, const Tensor& gt);

/// Symmetric average surface distance in pixels. Boundaries are foreground
/// pixels with a 4-neighbor background pixel or an image edge; the result is
/// the mean of the two directed mean nearest-boundary distances. Throws
/// MetricUndefinedError when either mask is empty.
double asd_metric(const Tensor& pred, const Tensor& gt);

/// Boundary pixel coordinates (row, col) in row-major scan order.
std::vector<std::pair<int, int>> boundary_pixels(const Tensor& mask);

/// Mean entry of the pairwise Euclidean distance matrix between per-domain
/// style-descriptor centroids (the zero diagonal is included in the mean).
/// Shrinks when amplitude mixing pulls domains together.
double domain_spread(const std::vector<std::vector<Tensor>>& images_by_domain);

}  // namespace ramseg

#endif
