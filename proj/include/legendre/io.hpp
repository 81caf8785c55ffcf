#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "legendre/engine.hpp"
#include "legendre/poset.hpp"
#include "legendre/tensor.hpp"

namespace legendre {

/// Tensor CSV: first non-comment line holds the space-separated extents,
/// the remaining lines the flat row-major values separated by whitespace or
/// commas, wrapped arbitrarily. Lines starting with '#' are comments.
DenseTensor read_tensor_csv(std::istream& in, const std::string& source = "<stream>");
DenseTensor read_tensor_csv(const std::filesystem::path& path);

/// Writer emits one row of I_N comma-separated values per line, with enough
/// digits to round-trip doubles exactly.
void write_tensor_csv(const DenseTensor& t, std::ostream& out);
void write_tensor_csv(const DenseTensor& t, const std::filesystem::path& path);

/// Basis CSV: `# basis mode=<mode> core_size=<c> seed=<seed>` header, then
/// one comma-separated 1-based coordinate line per member.
void write_basis_csv(const Basis& basis, std::ostream& out);
void write_basis_csv(const Basis& basis, const std::filesystem::path& path);
Basis read_basis_csv(std::istream& in, const std::string& source = "<stream>");
Basis read_basis_csv(const std::filesystem::path& path);

/// JSON run report with shape, core_size, basis_mode, method, init, N_par,
/// N_iter, residual, kl, rmse and elapsed_seconds.
std::string result_report_json(const DecompositionResult& result, Method method,
                               InitScheme init);
void write_result_report(const DecompositionResult& result, Method method,
                         InitScheme init, const std::filesystem::path& path);

/// Raw images from an IDX3-ubyte file (MNIST layout, big-endian header).
struct IdxImages {
    int count = 0;
    int rows = 0;
    int cols = 0;
    std::vector<unsigned char> pixels;  // count * rows * cols
};

IdxImages read_idx_images(const std::filesystem::path& path);
std::vector<unsigned char> read_idx_labels(const std::filesystem::path& path);

/// Convert an MNIST pair into per-digit stacked tensors test<d>.csv of shape
/// rows x cols x per_digit, taking the first per_digit images of each digit
/// in dataset order.
void mnist_to_tensors(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path,
                      const std::filesystem::path& out_dir, int per_digit);

}  // namespace legendre
