#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "legendre/engine.hpp"
#include "legendre/io.hpp"
#include "legendre/metrics.hpp"
#include "legendre/rng.hpp"
#include "legendre/synth.hpp"
#include "legendre/validate.hpp"

namespace fs = std::filesystem;
using namespace legendre;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DecomposeArgs {
    std::string input;
    int core_size = 0;
    bool natural_gradient = false;
    int basis_mode = 1;
    int depth = -1;
    std::string init = "zero";
    std::uint64_t seed = 0;
    double epsilon = 1e-5;
    int repeat_max = 100;
    double lr = 0.5;
    double ridge = 1e-9;
    std::string out_dir;
};

SolverOptions solver_from(const DecomposeArgs& args) {
    SolverOptions options;
    options.method = args.natural_gradient ? Method::NaturalGradient : Method::GradientDescent;
    options.learning_rate = args.lr;
    options.epsilon = args.epsilon;
    options.repeat_max = args.repeat_max;
    options.ridge = args.ridge;
    options.init = init_scheme_from_string(args.init);
    options.init_seed = Rng::mix(args.seed, 1);
    return options;
}

int run_decompose(const DecomposeArgs& args) {
    const DenseTensor x = read_tensor_csv(fs::path(args.input));
    if (args.depth >= 0 && args.depth != x.shape().back())
        throw UsageError("-d " + std::to_string(args.depth) + " does not match last extent " +
                         std::to_string(x.shape().back()));

    const SolverOptions options = solver_from(args);
    const auto result = decompose(x, args.core_size, basis_mode_from_int(args.basis_mode),
                                  options, args.seed);

    // Table row: N_par N_iter running-time RMSE.
    std::printf("%zu %d %.6g %.6g\n", result.basis.size(), result.iterations,
                result.elapsed_seconds, result.rmse_value);

    if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        write_result_report(result, options.method, options.init,
                            fs::path(args.out_dir) / "report.json");
        write_tensor_csv(result.reconstructed, fs::path(args.out_dir) / "reconstructed.csv");
        write_basis_csv(result.basis, fs::path(args.out_dir) / "basis.csv");
    }
    return 0;
}

struct ClusterArgs {
    std::string dir;
    std::string kind = "unfolded-p";
    int core_size = 50;
    int k = 10;
    bool natural_gradient = false;
    int basis_mode = 1;
    std::string init = "zero";
    std::uint64_t seed = 0;
    double epsilon = 1e-5;
    int repeat_max = 100;
    double lr = 0.5;
    double ridge = 1e-9;
    std::string out_dir = ".";
};

int worker_count(std::size_t jobs) {
    unsigned n = std::thread::hardware_concurrency();
    if (const char* cap = std::getenv("LEGENDRE_THREADS")) {
        const long v = std::strtol(cap, nullptr, 10);
        if (v >= 1) n = static_cast<unsigned>(v);
    }
    if (n < 1) n = 1;
    return static_cast<int>(std::min<std::size_t>(n, jobs));
}

int run_cluster(const ClusterArgs& args) {
    std::vector<std::pair<int, fs::path>> inputs;
    for (const auto& entry : fs::directory_iterator(args.dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("test", 0) != 0 || name.size() < 5 || !std::isdigit(name[4])) continue;
        if (entry.path().extension() != ".csv") continue;
        inputs.emplace_back(name[4] - '0', entry.path());
    }
    if (inputs.empty()) throw IoError("no test<digit>*.csv files in " + args.dir);
    std::sort(inputs.begin(), inputs.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first : a.second < b.second;
    });

    const FeatureKind kind = feature_kind_from_string(args.kind);
    DecomposeArgs base;
    base.natural_gradient = args.natural_gradient;
    base.init = args.init;
    base.epsilon = args.epsilon;
    base.repeat_max = args.repeat_max;
    base.lr = args.lr;
    base.ridge = args.ridge;
    const BasisMode mode = basis_mode_from_int(args.basis_mode);

    std::vector<std::vector<double>> features(inputs.size());
    LabelVector truth(inputs.size());
    std::atomic<std::size_t> cursor{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    const auto work = [&] {
        for (;;) {
            const std::size_t i = cursor.fetch_add(1);
            if (i >= inputs.size()) return;
            try {
                const DenseTensor x = read_tensor_csv(inputs[i].second);
                SolverOptions options = solver_from(base);
                options.init_seed = Rng::mix(args.seed, 2 * i + 1);
                DecompositionState state;
                const auto result = decompose(x, args.core_size, mode, options,
                                              Rng::mix(args.seed, 2 * i), &state);
                features[i] = extract_features(state, result, kind).values;
                truth[i] = inputs[i].first;
            } catch (...) {
                std::scoped_lock lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const int workers = worker_count(inputs.size());
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    // Basis-restricted kinds can differ in length after per-slice clamping;
    // pad with zeros so k-means sees a rectangular matrix.
    std::size_t width = 0;
    for (const auto& f : features) width = std::max(width, f.size());
    for (auto& f : features) f.resize(width, 0.0);

    const KMeansResult clusters = kmeans(features, args.k, Rng::mix(args.seed, 1u << 20), 10);
    const double ami = adjusted_mutual_info(truth, clusters.labels);
    const double ari = adjusted_rand_index(truth, clusters.labels);

    fs::create_directories(args.out_dir);
    {
        std::ofstream out(fs::path(args.out_dir) / "contingency.csv");
        out << "class";
        for (int d = 0; d <= 9; ++d) out << ",D" << d;
        out << '\n';
        std::vector<std::vector<int>> counts(static_cast<std::size_t>(args.k),
                                             std::vector<int>(10, 0));
        for (std::size_t i = 0; i < truth.size(); ++i)
            ++counts[static_cast<std::size_t>(clusters.labels[i])]
                    [static_cast<std::size_t>(truth[i])];
        for (int c = 0; c < args.k; ++c) {
            out << 'C' << c;
            for (int d = 0; d <= 9; ++d) out << ',' << counts[static_cast<std::size_t>(c)]
                                                            [static_cast<std::size_t>(d)];
            out << '\n';
        }
    }
    {
        std::ofstream out(fs::path(args.out_dir) / "metrics.csv");
        out << "kind,AMI,ARI\n";
        char row[160];
        std::snprintf(row, sizeof row, "%s,%.5f,%.5f\n", args.kind.c_str(), ami, ari);
        out << row;
    }
    std::printf("%s %.5f %.5f\n", args.kind.c_str(), ami, ari);
    return 0;
}

int run_validate(std::uint64_t seed, bool negate_fisher) {
    ValidateOptions options;
    options.seed = seed;
    options.negate_fisher = negate_fisher;
    const auto outcomes = run_validation(options);
    bool all_ok = true;
    for (const auto& o : outcomes) {
        std::printf("%s %s (%s)\n", o.passed ? "PASS" : "FAIL", o.name.c_str(),
                    o.detail.c_str());
        all_ok = all_ok && o.passed;
    }
    return all_ok ? 0 : 1;
}

struct SynthArgs {
    std::string out_dir;
    int stacked = 0;
    int singles = 0;
    int batches = 0;
    int stack = 10;
    std::uint64_t seed = 0;
    std::string digits = "0123456789";
};

int run_synth(const SynthArgs& args) {
    if (args.stacked <= 0 && args.singles <= 0 && args.batches <= 0)
        throw UsageError("one of --stacked, --singles or --batches is required");
    fs::create_directories(args.out_dir);
    for (char dc : args.digits) {
        if (!std::isdigit(static_cast<unsigned char>(dc))) throw UsageError("--digits wants digits");
        const int d = dc - '0';
        const auto digit_seed = Rng::mix(args.seed, static_cast<std::uint64_t>(d));
        if (args.stacked > 0) {
            write_tensor_csv(stacked_digit_tensor(d, args.stacked, digit_seed),
                             fs::path(args.out_dir) / ("test" + std::to_string(d) + ".csv"));
        }
        for (int i = 0; i < args.singles; ++i) {
            write_tensor_csv(render_digit(d, Rng::mix(digit_seed, static_cast<std::uint64_t>(i))),
                             fs::path(args.out_dir) /
                                 ("test" + std::to_string(d) + "_" + std::to_string(i) + ".csv"));
        }
        for (int i = 0; i < args.batches; ++i) {
            write_tensor_csv(
                stacked_digit_tensor(d, args.stack,
                                     Rng::mix(digit_seed, 1000 + static_cast<std::uint64_t>(i))),
                fs::path(args.out_dir) /
                    ("test" + std::to_string(d) + "_" + std::to_string(i) + ".csv"));
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Legendre decomposition of non-negative tensors"};
    app.require_subcommand(1);

    DecomposeArgs dec;
    auto* cmd_dec = app.add_subcommand("decompose", "Decompose one tensor CSV");
    cmd_dec->add_option("-i,--input", dec.input, "input tensor CSV")->required();
    cmd_dec->add_option("-c,--core-size", dec.core_size, "basis positions per slice")->required();
    cmd_dec->add_flag("-n,--natural-gradient", dec.natural_gradient,
                      "use natural gradient (default: gradient descent)");
    cmd_dec->add_option("-b,--basis-mode", dec.basis_mode,
                        "1 random, 2 partial order, 3 stride")
        ->check(CLI::Range(1, 3));
    cmd_dec->add_option("-d,--depth", dec.depth, "expected last extent (validation)");
    cmd_dec->add_option("--init", dec.init, "zero|random|uniform|gaussian");
    cmd_dec->add_option("--seed", dec.seed, "master seed for basis and init draws");
    cmd_dec->add_option("--epsilon", dec.epsilon, "residual tolerance");
    cmd_dec->add_option("--repeat-max", dec.repeat_max, "iteration cap");
    cmd_dec->add_option("--lr", dec.lr, "gradient-descent learning rate");
    cmd_dec->add_option("--ridge", dec.ridge, "Fisher regularization");
    cmd_dec->add_option("--out", dec.out_dir, "write report.json, reconstructed.csv, basis.csv");

    ClusterArgs clu;
    auto* cmd_clu = app.add_subcommand("cluster", "Decompose a labeled corpus and k-means the features");
    cmd_clu->add_option("--dir", clu.dir, "directory of test<digit>*.csv tensors")->required();
    cmd_clu->add_option("--kind", clu.kind,
                        "sum-theta-eta|sum-theta-eta-beta|sum-theta-nonzero|sum-p-nonzero|"
                        "last-dkl|unfolded-p|unfolded-theta-eta|beta-theta-eta");
    cmd_clu->add_option("-c,--core-size", clu.core_size, "basis positions per slice");
    cmd_clu->add_option("-k,--clusters", clu.k, "k-means cluster count");
    cmd_clu->add_flag("-n,--natural-gradient", clu.natural_gradient, "use natural gradient");
    cmd_clu->add_option("-b,--basis-mode", clu.basis_mode, "1 random, 2 partial order, 3 stride")
        ->check(CLI::Range(1, 3));
    cmd_clu->add_option("--init", clu.init, "zero|random|uniform|gaussian");
    cmd_clu->add_option("--seed", clu.seed, "master seed");
    cmd_clu->add_option("--epsilon", clu.epsilon, "residual tolerance");
    cmd_clu->add_option("--repeat-max", clu.repeat_max, "iteration cap");
    cmd_clu->add_option("--lr", clu.lr, "gradient-descent learning rate");
    cmd_clu->add_option("--ridge", clu.ridge, "Fisher regularization");
    cmd_clu->add_option("--out", clu.out_dir, "directory for contingency.csv and metrics.csv");

    std::uint64_t validate_seed = ValidateOptions{}.seed;
    bool negate_fisher = false;
    auto* cmd_val = app.add_subcommand("validate", "Run the release-gate property suite");
    cmd_val->add_option("--seed", validate_seed, "suite seed");
    cmd_val->add_flag("--negate-fisher", negate_fisher)->group("");  // test hook, hidden

    std::string mnist_images, mnist_labels, mnist_out;
    int per_digit = 100;
    auto* cmd_mnist = app.add_subcommand("mnist-to-tensors",
                                         "Convert IDX images/labels to per-digit tensor CSVs");
    cmd_mnist->add_option("--images", mnist_images, "IDX3-ubyte image file")->required();
    cmd_mnist->add_option("--labels", mnist_labels, "IDX1-ubyte label file")->required();
    cmd_mnist->add_option("--out", mnist_out, "output directory")->required();
    cmd_mnist->add_option("--per-digit", per_digit, "images stacked per digit");

    SynthArgs synth;
    auto* cmd_synth = app.add_subcommand("synth-digits", "Generate a procedural digit corpus");
    cmd_synth->add_option("--out", synth.out_dir, "output directory")->required();
    cmd_synth->add_option("--stacked", synth.stacked, "one test<d>.csv of 28x28xN per digit");
    cmd_synth->add_option("--singles", synth.singles, "N single 28x28 tensors per digit");
    cmd_synth->add_option("--batches", synth.batches, "N stacked tensors per digit");
    cmd_synth->add_option("--stack", synth.stack, "images per batch tensor");
    cmd_synth->add_option("--seed", synth.seed, "corpus seed");
    cmd_synth->add_option("--digits", synth.digits, "digits to emit, e.g. 8 or 0123456789");

    try {
        app.parse(argc, argv);
        if (cmd_dec->parsed()) return run_decompose(dec);
        if (cmd_clu->parsed()) return run_cluster(clu);
        if (cmd_val->parsed()) return run_validate(validate_seed, negate_fisher);
        if (cmd_mnist->parsed()) {
            mnist_to_tensors(mnist_images, mnist_labels, mnist_out, per_digit);
            return 0;
        }
        if (cmd_synth->parsed()) return run_synth(synth);
        return 1;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
