#include "ramseg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ramseg {

long shape_numel(const std::vector<int>& shape) {
    long n = 1;
    for (int d : shape) {
        if (d <= 0) fail_invalid("tensor dimensions must be positive, got " + shape_str(shape));
        n *= d;
    }
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << '[';
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

void fail_invalid(const std::string& message) {
    throw std::invalid_argument(message);
}

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<long>(data_.size()))
        fail_invalid("tensor data length does not match shape " + shape_str(shape_));
}

Tensor Tensor::full(std::vector<int> shape, double value) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

Tensor Tensor::scalar(double value) {
    return Tensor({1}, {value});
}

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

double Tensor::min_value() const {
    return *std::min_element(data_.begin(), data_.end());
}

double Tensor::max_value() const {
    return *std::max_element(data_.begin(), data_.end());
}

double Tensor::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

Tensor Tensor::reshaped(std::vector<int> shape) const {
    if (shape_numel(shape) != numel())
        fail_invalid("reshape " + shape_str(shape_) + " -> " + shape_str(shape) + " changes element count");
    return Tensor(std::move(shape), data_);
}

void debug_check_finite([[maybe_unused]] const Tensor& t, [[maybe_unused]] const char* where) {
#ifndef NDEBUG
    if (!t.all_finite()) throw std::runtime_error(std::string("non-finite values after ") + where);
#endif
}

}  // namespace ramseg
