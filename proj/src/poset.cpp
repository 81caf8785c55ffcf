#include "legendre/poset.hpp"

#include <algorithm>
#include <numeric>

#include "legendre/rng.hpp"

namespace legendre {

IndexPoset::IndexPoset(std::vector<int> shape) : shape_(std::move(shape)) {
    if (shape_.empty()) throw ShapeMismatch("poset order must be at least 1");
    count_ = 1;
    for (int extent : shape_) {
        if (extent < 1) throw ShapeMismatch("poset extents must be positive");
        count_ *= static_cast<std::size_t>(extent);
    }
}

std::size_t IndexPoset::flat_index(const MultiIndex& v) const {
    if (v.coords.size() != shape_.size())
        throw DimensionMismatch("multi-index order does not match poset order");
    std::size_t flat = 0;
    for (std::size_t k = 0; k < shape_.size(); ++k) {
        if (v.coords[k] < 1 || v.coords[k] > shape_[k])
            throw DimensionMismatch("multi-index out of bounds");
        flat = flat * static_cast<std::size_t>(shape_[k]) +
               static_cast<std::size_t>(v.coords[k] - 1);
    }
    return flat;
}

MultiIndex IndexPoset::index_at(std::size_t flat) const {
    MultiIndex v{std::vector<int>(shape_.size())};
    for (std::size_t k = shape_.size(); k-- > 0;) {
        auto extent = static_cast<std::size_t>(shape_[k]);
        v.coords[k] = static_cast<int>(flat % extent) + 1;
        flat /= extent;
    }
    return v;
}

int zeta(const MultiIndex& u, const MultiIndex& v) {
    if (u.coords.size() != v.coords.size())
        throw DimensionMismatch("zeta: index orders differ");
    for (std::size_t k = 0; k < u.coords.size(); ++k)
        if (u.coords[k] > v.coords[k]) return 0;
    return 1;
}

MultiIndex join(const MultiIndex& u, const MultiIndex& v) {
    if (u.coords.size() != v.coords.size())
        throw DimensionMismatch("join: index orders differ");
    MultiIndex w{std::vector<int>(u.coords.size())};
    for (std::size_t k = 0; k < u.coords.size(); ++k)
        w.coords[k] = std::max(u.coords[k], v.coords[k]);
    return w;
}

namespace {

// Shared sweep for both accumulations. `forward` adds the predecessor along
// each axis (down-set); otherwise the successor (up-set).
DenseTensor axis_sweeps(const DenseTensor& t, bool forward) {
    DenseTensor out = t;
    auto& data = out.raw();
    const auto& shape = out.shape();

    std::size_t inner = 1;  // stride of the current axis
    for (std::size_t k = shape.size(); k-- > 0;) {
        const auto extent = static_cast<std::size_t>(shape[k]);
        const std::size_t block = extent * inner;
        const std::size_t outer = data.size() / block;
        for (std::size_t o = 0; o < outer; ++o) {
            const std::size_t base = o * block;
            if (forward) {
                for (std::size_t i = 1; i < extent; ++i)
                    for (std::size_t j = 0; j < inner; ++j)
                        data[base + i * inner + j] += data[base + (i - 1) * inner + j];
            } else {
                for (std::size_t i = extent - 1; i-- > 0;)
                    for (std::size_t j = 0; j < inner; ++j)
                        data[base + i * inner + j] += data[base + (i + 1) * inner + j];
            }
        }
        inner *= extent;
    }
    return out;
}

}  // namespace

DenseTensor upset_accumulate(const DenseTensor& t) { return axis_sweeps(t, false); }

DenseTensor downset_accumulate(const DenseTensor& t) { return axis_sweeps(t, true); }

std::string to_string(BasisMode mode) {
    switch (mode) {
        case BasisMode::Random: return "random";
        case BasisMode::PartialOrderSort: return "partial-order";
        case BasisMode::Stride: return "stride";
    }
    return "unknown";
}

BasisMode basis_mode_from_int(int flag) {
    switch (flag) {
        case 1: return BasisMode::Random;
        case 2: return BasisMode::PartialOrderSort;
        case 3: return BasisMode::Stride;
    }
    throw InvalidCoreSize("basis mode flag must be 1, 2 or 3");
}

std::vector<std::size_t> Basis::flat_indices(const std::vector<int>& shape) const {
    IndexPoset poset(shape);
    std::vector<std::size_t> flats;
    flats.reserve(members.size());
    for (const auto& m : members) flats.push_back(poset.flat_index(m));
    return flats;
}

Basis select_basis(const NormalizedTensor& p, int core_size, BasisMode mode,
                   std::uint64_t seed) {
    if (core_size < 1) throw InvalidCoreSize("core_size must be at least 1");
    const auto& probs = p.probs;
    const auto& shape = probs.shape();
    IndexPoset poset(shape);

    const auto last_extent = static_cast<std::size_t>(shape.back());
    const std::size_t slice_cells = probs.size() / last_extent;
    const std::size_t bottom_flat = 0;  // (1,...,1) in row-major

    Basis basis;
    basis.mode = mode;
    basis.core_size = core_size;
    basis.seed = seed;

    const auto want = static_cast<std::size_t>(core_size);
    // Flat index of cell r of slice s: last coordinate varies fastest, so
    // slice s (last coord = s+1) holds flats { r * last_extent + s }.
    for (std::size_t s = 0; s < last_extent; ++s) {
        std::vector<std::size_t> candidates;
        candidates.reserve(slice_cells);
        for (std::size_t r = 0; r < slice_cells; ++r) {
            const std::size_t flat = r * last_extent + s;
            if (flat == bottom_flat) continue;
            if (probs[flat] > 0.0) candidates.push_back(flat);
        }
        if (candidates.empty()) continue;

        std::vector<std::size_t> chosen;
        switch (mode) {
            case BasisMode::PartialOrderSort: {
                // Smallest nonzero probabilities; ties in row-major order.
                std::sort(candidates.begin(), candidates.end(),
                          [&probs](std::size_t a, std::size_t b) {
                              if (probs[a] != probs[b]) return probs[a] < probs[b];
                              return a < b;
                          });
                chosen.assign(candidates.begin(),
                              candidates.begin() +
                                  static_cast<std::ptrdiff_t>(std::min(want, candidates.size())));
                break;
            }
            case BasisMode::Random: {
                Rng rng(Rng::mix(seed, s));
                // Partial Fisher-Yates: the first min(c, n) entries.
                const std::size_t take = std::min(want, candidates.size());
                for (std::size_t i = 0; i < take; ++i) {
                    std::size_t j = i + rng.below(candidates.size() - i);
                    std::swap(candidates[i], candidates[j]);
                }
                chosen.assign(candidates.begin(),
                              candidates.begin() + static_cast<std::ptrdiff_t>(take));
                break;
            }
            case BasisMode::Stride: {
                // Jump through the nonzero cells at a regular interval so
                // that up to core_size of them are kept per slice.
                const std::size_t step = std::max<std::size_t>(1, candidates.size() / want);
                for (std::size_t r = 0; r < candidates.size() && chosen.size() < want; r += step)
                    chosen.push_back(candidates[r]);
                break;
            }
        }
        for (std::size_t flat : chosen) basis.members.push_back(poset.index_at(flat));
    }

    if (basis.members.empty())
        throw EmptySupport("select_basis: no nonzero candidate positions");
    return basis;
}

Basis full_basis(const std::vector<int>& shape) {
    IndexPoset poset(shape);
    Basis basis;
    basis.mode = BasisMode::PartialOrderSort;
    basis.core_size = static_cast<int>(poset.size());
    basis.members.reserve(poset.size() - 1);
    for (std::size_t flat = 1; flat < poset.size(); ++flat)
        basis.members.push_back(poset.index_at(flat));
    return basis;
}

}  // namespace legendre
