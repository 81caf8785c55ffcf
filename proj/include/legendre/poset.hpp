#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "legendre/tensor.hpp"

namespace legendre {

/// 1-based position on the index grid, coords[k] in [1, I_k].
struct MultiIndex {
    std::vector<int> coords;

    bool operator==(const MultiIndex& other) const { return coords == other.coords; }
};

/// The sample space [I_1] x ... x [I_N] under the elementwise partial order.
class IndexPoset {
public:
    explicit IndexPoset(std::vector<int> shape);

    const std::vector<int>& shape() const { return shape_; }
    int order() const { return static_cast<int>(shape_.size()); }
    std::size_t size() const { return count_; }

    MultiIndex bottom() const { return MultiIndex{std::vector<int>(shape_.size(), 1)}; }

    std::size_t flat_index(const MultiIndex& v) const;
    MultiIndex index_at(std::size_t flat) const;

private:
    std::vector<int> shape_;
    std::size_t count_ = 0;
};

/// Incidence function of the elementwise order: 1 iff u_k <= v_k for all k.
int zeta(const MultiIndex& u, const MultiIndex& v);

/// Least upper bound, the elementwise maximum.
MultiIndex join(const MultiIndex& u, const MultiIndex& v);

/// out_v = sum_{u >= v} t_u, via one reverse suffix-sum sweep per axis.
DenseTensor upset_accumulate(const DenseTensor& t);

/// out_v = sum_{u <= v} t_u, via one forward prefix-sum sweep per axis.
DenseTensor downset_accumulate(const DenseTensor& t);

enum class BasisMode {
    Random = 1,            // per slice, seeded draw among nonzero positions
    PartialOrderSort = 2,  // per slice, the core_size smallest nonzero values
    Stride = 3,            // per slice, nonzero positions at regular jumps
};

std::string to_string(BasisMode mode);
BasisMode basis_mode_from_int(int flag);

/// The parameter set B, a subset of the grid excluding the bottom index.
/// Members are grouped by last-axis slice in selection order.
struct Basis {
    std::vector<MultiIndex> members;
    BasisMode mode = BasisMode::Random;
    int core_size = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return members.size(); }

    // Flat offsets of the members on a grid of the given shape.
    std::vector<std::size_t> flat_indices(const std::vector<int>& shape) const;
};

/// Select core_size positions per slice along the last axis, drawn from the
/// nonzero-probability cells of P and never including (1,...,1). Slices with
/// fewer than core_size candidates are clamped. Deterministic given
/// (P, core_size, mode, seed).
Basis select_basis(const NormalizedTensor& p, int core_size, BasisMode mode,
                   std::uint64_t seed = 0);

/// Every index of the grid except the bottom: the saturated parameter set.
Basis full_basis(const std::vector<int>& shape);

}  // namespace legendre
