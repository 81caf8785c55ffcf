#include "legendre/io.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

namespace legendre {

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

// Shortest representation that parses back to the same double.
std::string format_double(double v) {
    std::array<char, 32> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

std::vector<std::string> value_tokens(const std::string& line) {
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : line) {
        if (ch == ',' || ch == ' ' || ch == '\t' || ch == '\r') {
            if (!cur.empty()) tokens.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

bool is_comment_or_blank(const std::string& line) {
    for (char ch : line) {
        if (ch == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(ch))) return false;
    }
    return true;
}

}  // namespace

DenseTensor read_tensor_csv(std::istream& in, const std::string& source) {
    std::string line;
    std::vector<int> shape;
    while (std::getline(in, line)) {
        if (is_comment_or_blank(line)) continue;
        for (const auto& tok : value_tokens(line)) {
            int extent = 0;
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), extent);
            if (ec != std::errc() || ptr != tok.data() + tok.size() || extent < 1)
                throw ParseError(source + ": bad extent '" + tok + "' in shape line");
            shape.push_back(extent);
        }
        break;
    }
    if (shape.empty()) throw ParseError(source + ": missing shape line");

    std::size_t expected = 1;
    for (int e : shape) expected *= static_cast<std::size_t>(e);

    std::vector<double> data;
    data.reserve(expected);
    while (std::getline(in, line)) {
        if (is_comment_or_blank(line)) continue;
        for (const auto& tok : value_tokens(line)) {
            double v = 0.0;
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc() || ptr != tok.data() + tok.size())
                throw ParseError(source + ": bad value '" + tok + "'");
            data.push_back(v);
        }
    }
    if (data.size() != expected)
        throw ParseError(source + ": expected " + std::to_string(expected) + " values, got " +
                         std::to_string(data.size()));
    return DenseTensor(std::move(shape), std::move(data));
}

DenseTensor read_tensor_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_tensor_csv(in, path.string());
}

void write_tensor_csv(const DenseTensor& t, std::ostream& out) {
    const auto& shape = t.shape();
    for (std::size_t k = 0; k < shape.size(); ++k)
        out << (k ? " " : "") << shape[k];
    out << '\n';
    const auto row = static_cast<std::size_t>(shape.back());
    for (std::size_t i = 0; i < t.size(); ++i) {
        out << format_double(t[i]);
        out << ((i + 1) % row == 0 ? '\n' : ',');
    }
}

void write_tensor_csv(const DenseTensor& t, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_tensor_csv(t, out);
}

void write_basis_csv(const Basis& basis, std::ostream& out) {
    out << "# basis mode=" << to_string(basis.mode) << " core_size=" << basis.core_size
        << " seed=" << basis.seed << '\n';
    for (const auto& m : basis.members) {
        for (std::size_t k = 0; k < m.coords.size(); ++k)
            out << (k ? "," : "") << m.coords[k];
        out << '\n';
    }
}

void write_basis_csv(const Basis& basis, const std::filesystem::path& path) {
    auto out = open_output(path);
    write_basis_csv(basis, out);
}

Basis read_basis_csv(std::istream& in, const std::string& source) {
    Basis basis;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] == '#') {
            std::istringstream hs(line.substr(1));
            std::string word;
            while (hs >> word) {
                if (word.rfind("mode=", 0) == 0) {
                    const std::string mode = word.substr(5);
                    if (mode == "random") basis.mode = BasisMode::Random;
                    else if (mode == "partial-order") basis.mode = BasisMode::PartialOrderSort;
                    else if (mode == "stride") basis.mode = BasisMode::Stride;
                    else throw ParseError(source + ": unknown basis mode " + mode);
                } else if (word.rfind("core_size=", 0) == 0) {
                    basis.core_size = std::stoi(word.substr(10));
                } else if (word.rfind("seed=", 0) == 0) {
                    basis.seed = std::stoull(word.substr(5));
                }
            }
            header_seen = true;
            continue;
        }
        if (is_comment_or_blank(line)) continue;
        MultiIndex m;
        for (const auto& tok : value_tokens(line)) {
            int c = 0;
            auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), c);
            if (ec != std::errc() || ptr != tok.data() + tok.size() || c < 1)
                throw ParseError(source + ": bad coordinate '" + tok + "'");
            m.coords.push_back(c);
        }
        if (!m.coords.empty()) basis.members.push_back(std::move(m));
    }
    if (!header_seen) throw ParseError(source + ": missing basis header");
    return basis;
}

Basis read_basis_csv(const std::filesystem::path& path) {
    auto in = open_input(path);
    return read_basis_csv(in, path.string());
}

std::string result_report_json(const DecompositionResult& result, Method method,
                               InitScheme init) {
    nlohmann::ordered_json j;
    j["shape"] = result.reconstructed.shape();
    j["core_size"] = result.basis.core_size;
    j["basis_mode"] = to_string(result.basis.mode);
    j["method"] = to_string(method);
    j["init"] = to_string(init);
    j["N_par"] = result.basis.size();
    j["N_iter"] = result.iterations;
    j["residual"] = result.residual;
    j["kl"] = result.kl;
    j["rmse"] = result.rmse_value;
    j["converged"] = result.converged;
    j["elapsed_seconds"] = result.elapsed_seconds;
    return j.dump(2);
}

void write_result_report(const DecompositionResult& result, Method method,
                         InitScheme init, const std::filesystem::path& path) {
    auto out = open_output(path);
    out << result_report_json(result, method, init) << '\n';
}

namespace {

std::uint32_t read_be32(std::istream& in, const std::string& source) {
    std::array<unsigned char, 4> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), 4))
        throw ParseError(source + ": truncated IDX header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

IdxImages read_idx_images(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::string src = path.string();
    if (read_be32(in, src) != 2051u) throw ParseError(src + ": not an IDX3 image file");
    IdxImages images;
    images.count = static_cast<int>(read_be32(in, src));
    images.rows = static_cast<int>(read_be32(in, src));
    images.cols = static_cast<int>(read_be32(in, src));
    const std::size_t total = static_cast<std::size_t>(images.count) *
                              static_cast<std::size_t>(images.rows) *
                              static_cast<std::size_t>(images.cols);
    images.pixels.resize(total);
    if (!in.read(reinterpret_cast<char*>(images.pixels.data()),
                 static_cast<std::streamsize>(total)))
        throw ParseError(src + ": truncated IDX image data");
    return images;
}

std::vector<unsigned char> read_idx_labels(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const std::string src = path.string();
    if (read_be32(in, src) != 2049u) throw ParseError(src + ": not an IDX1 label file");
    const auto count = read_be32(in, src);
    std::vector<unsigned char> labels(count);
    if (!in.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(count)))
        throw ParseError(src + ": truncated IDX label data");
    return labels;
}

void mnist_to_tensors(const std::filesystem::path& images_path,
                      const std::filesystem::path& labels_path,
                      const std::filesystem::path& out_dir, int per_digit) {
    const IdxImages images = read_idx_images(images_path);
    const auto labels = read_idx_labels(labels_path);
    if (labels.size() != static_cast<std::size_t>(images.count))
        throw ParseError("image/label counts differ");
    if (per_digit < 1) throw IoError("per_digit must be at least 1");
    std::filesystem::create_directories(out_dir);

    const std::size_t image_cells =
        static_cast<std::size_t>(images.rows) * static_cast<std::size_t>(images.cols);
    for (int digit = 0; digit <= 9; ++digit) {
        std::vector<int> picks;
        for (int i = 0; i < images.count && static_cast<int>(picks.size()) < per_digit; ++i)
            if (labels[static_cast<std::size_t>(i)] == digit) picks.push_back(i);
        if (picks.empty()) continue;

        const auto depth = static_cast<int>(picks.size());
        DenseTensor t({images.rows, images.cols, depth});
        for (int k = 0; k < depth; ++k) {
            const unsigned char* img =
                images.pixels.data() + static_cast<std::size_t>(picks[static_cast<std::size_t>(k)]) * image_cells;
            for (int r = 0; r < images.rows; ++r)
                for (int c = 0; c < images.cols; ++c)
                    t[(static_cast<std::size_t>(r) * static_cast<std::size_t>(images.cols) +
                       static_cast<std::size_t>(c)) *
                          static_cast<std::size_t>(depth) +
                      static_cast<std::size_t>(k)] =
                        static_cast<double>(img[static_cast<std::size_t>(r) *
                                                    static_cast<std::size_t>(images.cols) +
                                                static_cast<std::size_t>(c)]);
        }
        write_tensor_csv(t, out_dir / ("test" + std::to_string(digit) + ".csv"));
    }
}

}  // namespace legendre
