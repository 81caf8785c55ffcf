#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "legendre/errors.hpp"

namespace legendre {

/// Dense N-way array stored flat in row-major order.
///
/// Holds the input tensor, probability tensors, and the per-cell theta/eta
/// parameter fields, all of which share the index grid. Values carried by
/// parameter fields may be negative; non-negativity of data tensors is
/// enforced where it matters (normalize, kl_divergence).
class DenseTensor {
public:
    DenseTensor() = default;

    // Zero-filled tensor of the given extents.
    explicit DenseTensor(std::vector<int> shape);

    DenseTensor(std::vector<int> shape, std::vector<double> data);

    static DenseTensor filled(std::vector<int> shape, double value);

    int order() const { return static_cast<int>(shape_.size()); }
    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }

    double operator[](std::size_t flat) const { return data_[flat]; }
    double& operator[](std::size_t flat) { return data_[flat]; }

    std::span<const double> values() const { return data_; }
    std::vector<double>& raw() { return data_; }
    const std::vector<double>& raw() const { return data_; }

    // Flat offset of a 1-based multi-index (coords[k] in [1, I_k]).
    std::size_t flat_index(const std::vector<int>& coords) const;

    double at(const std::vector<int>& coords) const { return data_[flat_index(coords)]; }
    double& at(const std::vector<int>& coords) { return data_[flat_index(coords)]; }

    double sum() const;
    double max_value() const;
    // Smallest strictly positive entry; 0 if none.
    double min_positive() const;

    bool same_shape(const DenseTensor& other) const { return shape_ == other.shape_; }

private:
    std::vector<int> shape_;
    std::vector<double> data_;
};

/// A probability mass function plus the total mass it was scaled down by.
struct NormalizedTensor {
    DenseTensor probs;
    double scale = 1.0;
};

/// Divide by total mass. Throws NegativeEntry / AllZeroTensor.
NormalizedTensor normalize(const DenseTensor& x);

/// sqrt( mean (x_v - y_v)^2 ). Throws ShapeMismatch.
double rmse(const DenseTensor& x, const DenseTensor& y);

/// sum_{v: p_v>0} p_v log(p_v / q_v). Terms with p_v = 0 contribute 0;
/// p_v > 0 with q_v = 0 is a SupportViolation. Both inputs must sum to 1
/// within 1e-9.
double kl_divergence(const DenseTensor& p, const DenseTensor& q);

}  // namespace legendre
