#ifndef RAMSEG_TENSOR_HPP
#define RAMSEG_TENSOR_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ramseg {

/// Dense row-major tensor of doubles. Layout for batched feature maps is
/// fixed globally as N,C,H,W; single images are stored channels-first C,H,W.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<int> shape);
    Tensor(std::vector<int> shape, std::vector<double> data);

    static Tensor full(std::vector<int> shape, double value);
    static Tensor scalar(double value);   // shape {1}

    const std::vector<int>& shape() const { return shape_; }
    int dim(int i) const { return shape_.at(static_cast<size_t>(i)); }
    int rank() const { return static_cast<int>(shape_.size()); }
    long numel() const { return static_cast<long>(data_.size()); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& vec() { return data_; }
    const std::vector<double>& vec() const { return data_; }

    double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
    double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

    // Indexed access for the common ranks.
    double& at2(int r, int c) { return data_[idx2(r, c)]; }
    double at2(int r, int c) const { return data_[idx2(r, c)]; }
    double& at3(int c, int h, int w) { return data_[idx3(c, h, w)]; }
    double at3(int c, int h, int w) const { return data_[idx3(c, h, w)]; }
    double& at4(int n, int c, int h, int w) { return data_[idx4(n, c, h, w)]; }
    double at4(int n, int c, int h, int w) const { return data_[idx4(n, c, h, w)]; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    double min_value() const;
    double max_value() const;
    double sum() const;
    double mean() const { return numel() > 0 ? sum() / static_cast<double>(numel()) : 0.0; }

    Tensor reshaped(std::vector<int> shape) const;

    bool operator==(const Tensor& other) const {
        return shape_ == other.shape_ && data_ == other.data_;
    }

private:
    size_t idx2(int r, int c) const {
        return static_cast<size_t>(r) * shape_[1] + c;
    }
    size_t idx3(int c, int h, int w) const {
        return (static_cast<size_t>(c) * shape_[1] + h) * shape_[2] + w;
    }
    size_t idx4(int n, int c, int h, int w) const {
        return ((static_cast<size_t>(n) * shape_[1] + c) * static_cast<size_t>(shape_[2]) + h) *
                   static_cast<size_t>(shape_[3]) +
               w;
    }

    std::vector<int> shape_;
    std::vector<double> data_;
};

long shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

/// All precondition violations surface as std::invalid_argument.
[[noreturn]] void fail_invalid(const std::string& message);

/// Debug-build guard for the "finite after every op" tensor invariant.
void debug_check_finite(const Tensor& t, const char* where);

}  // namespace ramseg

#endif
