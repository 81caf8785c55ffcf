#include "legendre/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace legendre {

namespace {

std::size_t checked_count(const std::vector<int>& shape) {
    if (shape.empty()) throw ShapeMismatch("tensor order must be at least 1");
    std::size_t n = 1;
    for (int extent : shape) {
        if (extent < 1) throw ShapeMismatch("tensor extents must be positive");
        n *= static_cast<std::size_t>(extent);
    }
    return n;
}

}  // namespace

DenseTensor::DenseTensor(std::vector<int> shape)
    : shape_(std::move(shape)), data_(checked_count(shape_), 0.0) {}

DenseTensor::DenseTensor(std::vector<int> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_count(shape_) != data_.size())
        throw ShapeMismatch("data length does not match shape product");
}

DenseTensor DenseTensor::filled(std::vector<int> shape, double value) {
    DenseTensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
}

std::size_t DenseTensor::flat_index(const std::vector<int>& coords) const {
    if (coords.size() != shape_.size())
        throw DimensionMismatch("multi-index order does not match tensor order");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < coords.size(); ++k) {
        if (coords[k] < 1 || coords[k] > shape_[k])
            throw DimensionMismatch("multi-index out of bounds at axis " + std::to_string(k));
        flat = flat * static_cast<std::size_t>(shape_[k]) +
               static_cast<std::size_t>(coords[k] - 1);
    }
    return flat;
}

double DenseTensor::sum() const {
    double s = 0.0;
    for (double v : data_) s += v;
    return s;
}

double DenseTensor::max_value() const {
    double m = -std::numeric_limits<double>::infinity();
    for (double v : data_) m = std::max(m, v);
    return m;
}

double DenseTensor::min_positive() const {
    double m = std::numeric_limits<double>::infinity();
    for (double v : data_)
        if (v > 0.0) m = std::min(m, v);
    return std::isfinite(m) ? m : 0.0;
}

NormalizedTensor normalize(const DenseTensor& x) {
    double total = 0.0;
    for (double v : x.values()) {
        if (v < 0.0) throw NegativeEntry("normalize: negative entry");
        total += v;
    }
    if (total <= 0.0) throw AllZeroTensor("normalize: tensor sums to zero");
    DenseTensor probs(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) probs[i] = x[i] / total;
    return NormalizedTensor{std::move(probs), total};
}

double rmse(const DenseTensor& x, const DenseTensor& y) {
    if (!x.same_shape(y)) throw ShapeMismatch("rmse: shapes differ");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = x[i] - y[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(x.size()));
}

double kl_divergence(const DenseTensor& p, const DenseTensor& q) {
    if (!p.same_shape(q)) throw ShapeMismatch("kl_divergence: shapes differ");
    constexpr double kSumTol = 1e-9;
    if (std::abs(p.sum() - 1.0) > kSumTol || std::abs(q.sum() - 1.0) > kSumTol)
        throw ShapeMismatch("kl_divergence: inputs must be normalized to sum 1");
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] <= 0.0) continue;
        if (q[i] <= 0.0) throw SupportViolation("kl_divergence: p > 0 where q = 0");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    return kl;
}

}  // namespace legendre
