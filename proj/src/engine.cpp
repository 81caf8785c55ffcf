#include "legendre/engine.hpp"

#include <algorithm>
#include <chrono>
#include <optional>
#include <cmath>
#include <limits>

#include "legendre/rng.hpp"

namespace legendre {

std::string to_string(Method m) {
    return m == Method::NaturalGradient ? "natural-gradient" : "gradient-descent";
}

std::string to_string(InitScheme s) {
    switch (s) {
        case InitScheme::Zero: return "zero";
        case InitScheme::Random: return "random";
        case InitScheme::Uniform: return "uniform";
        case InitScheme::Gaussian: return "gaussian";
    }
    return "unknown";
}

InitScheme init_scheme_from_string(const std::string& name) {
    if (name == "zero") return InitScheme::Zero;
    if (name == "random") return InitScheme::Random;
    if (name == "uniform") return InitScheme::Uniform;
    if (name == "gaussian") return InitScheme::Gaussian;
    throw UnknownScheme("unknown init scheme: " + name);
}

DenseTensor compute_eta_hat(const NormalizedTensor& p) {
    return upset_accumulate(p.probs);
}

std::pair<NormalizedTensor, double> compute_q_and_psi(const DenseTensor& theta,
                                                      const Basis&) {
    DenseTensor contrib = theta;
    contrib[0] = 0.0;  // the bottom cell carries -psi, not a free parameter
    DenseTensor logm = downset_accumulate(contrib);

    double lmax = -std::numeric_limits<double>::infinity();
    for (double v : logm.values()) {
        if (!std::isfinite(v)) throw NonFiniteState("compute_q_and_psi: non-finite exponent");
        lmax = std::max(lmax, v);
    }
    if (lmax > 700.0) throw OverflowGuard("compute_q_and_psi: down-set sum exceeds 700");

    DenseTensor probs(theta.shape());
    double total = 0.0;
    for (std::size_t i = 0; i < logm.size(); ++i) {
        probs[i] = std::exp(logm[i] - lmax);
        total += probs[i];
    }
    for (std::size_t i = 0; i < probs.size(); ++i) probs[i] /= total;
    const double psi = lmax + std::log(total);
    return {NormalizedTensor{std::move(probs), 1.0}, psi};
}

Eigen::MatrixXd fisher_matrix(const DenseTensor& eta, const Basis& basis) {
    const auto& shape = eta.shape();
    const auto n = static_cast<Eigen::Index>(basis.size());
    const int order = static_cast<int>(shape.size());

    // Basis coordinates packed flat (0-based) for the pairwise join scan.
    std::vector<int> coords(basis.size() * static_cast<std::size_t>(order));
    for (std::size_t i = 0; i < basis.size(); ++i) {
        const auto& m = basis.members[i].coords;
        if (static_cast<int>(m.size()) != order)
            throw DimensionMismatch("fisher_matrix: basis index order mismatch");
        for (int k = 0; k < order; ++k)
            coords[i * static_cast<std::size_t>(order) + static_cast<std::size_t>(k)] =
                m[static_cast<std::size_t>(k)] - 1;
    }
    std::vector<double> eta_b(basis.size());
    const auto flats = basis.flat_indices(shape);
    for (std::size_t i = 0; i < basis.size(); ++i) eta_b[i] = eta[flats[i]];

    Eigen::MatrixXd g(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int* ci = &coords[static_cast<std::size_t>(i) * static_cast<std::size_t>(order)];
        for (Eigen::Index j = i; j < n; ++j) {
            const int* cj = &coords[static_cast<std::size_t>(j) * static_cast<std::size_t>(order)];
            std::size_t flat = 0;
            for (int k = 0; k < order; ++k)
                flat = flat * static_cast<std::size_t>(shape[static_cast<std::size_t>(k)]) +
                       static_cast<std::size_t>(std::max(ci[k], cj[k]));
            const double value =
                eta[flat] - eta_b[static_cast<std::size_t>(i)] * eta_b[static_cast<std::size_t>(j)];
            g(i, j) = value;
            g(j, i) = value;
        }
    }
    return g;
}

double theta_scale(const NormalizedTensor& p) {
    const double hi = p.probs.max_value();
    const double lo = p.probs.min_positive();
    return std::log(hi / lo);
}

DenseTensor init_theta(InitScheme scheme, const Basis& basis,
                       const std::vector<int>& shape, double theta_max,
                       std::uint64_t seed) {
    DenseTensor theta(shape);
    const auto flats = basis.flat_indices(shape);
    switch (scheme) {
        case InitScheme::Zero:
            break;
        case InitScheme::Random: {
            Rng rng(seed);
            for (std::size_t flat : flats) theta[flat] = rng.uniform(0.0, theta_max);
            break;
        }
        case InitScheme::Uniform: {
            const double value = theta_max / static_cast<double>(theta.size());
            for (std::size_t flat : flats) theta[flat] = value;
            break;
        }
        case InitScheme::Gaussian: {
            // Bell profile over the 1-based flat position, centred on the
            // middle of the grid.
            const double half = static_cast<double>(theta.size()) / 2.0;
            constexpr double inv_sqrt_2pi = 0.3989422804014326779;
            for (std::size_t flat : flats) {
                const double x = static_cast<double>(flat + 1) - half;
                theta[flat] = inv_sqrt_2pi * std::exp(-0.5 * x * x);
            }
            break;
        }
    }
    return theta;
}

namespace {

double residual_over(const DenseTensor& eta, const DenseTensor& eta_hat,
                     const std::vector<std::size_t>& flats) {
    double r = 0.0;
    for (std::size_t flat : flats) r = std::max(r, std::abs(eta[flat] - eta_hat[flat]));
    return r;
}

// KL divergence to the target up to an additive constant: psi - theta . eta_hat
// over the basis. Convex in theta, so any healthy optimizer decreases it.
double kl_objective(const DecompositionState& state, const std::vector<std::size_t>& flats) {
    double dot = 0.0;
    for (std::size_t flat : flats) dot += state.theta[flat] * state.eta_hat[flat];
    return state.psi - dot;
}

void refresh_state(DecompositionState& state, const Basis& basis,
                   const std::vector<std::size_t>& flats) {
    auto [q, psi] = compute_q_and_psi(state.theta, basis);
    state.q = std::move(q);
    state.psi = psi;
    state.theta[0] = -psi;  // keeps log q_v = sum_{u <= v} theta_u exact
    state.eta = upset_accumulate(state.q.probs);
    state.residual = residual_over(state.eta, state.eta_hat, flats);
    if (!std::isfinite(state.residual) || !std::isfinite(psi))
        throw NonFiniteState("optimizer state became non-finite");
}

}  // namespace

void natural_gradient_step(DecompositionState& state, const Basis& basis, double ridge) {
    const auto flats = basis.flat_indices(state.theta.shape());
    const auto n = static_cast<Eigen::Index>(flats.size());
    if (n == 0) {
        ++state.step;
        return;
    }

    Eigen::VectorXd grad(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::size_t flat = flats[static_cast<std::size_t>(i)];
        grad(i) = state.eta[flat] - state.eta_hat[flat];
    }

    const Eigen::MatrixXd g = fisher_matrix(state.eta, basis);

    // psi - theta . eta_hat is the KL objective up to a constant, and it is
    // convex in theta, so a damped-enough step always decreases it. The
    // Fisher matrix goes numerically singular when q concentrates (eta
    // saturating at 0 or 1) and the raw Newton step then overshoots into
    // overflow; escalate the damping until the trial step is finite and
    // descends. A finite non-descending trial is still returned as a last
    // resort so the caller's divergence guard can decide.
    const double current = kl_objective(state, flats);
    const double slack = 1e-12 * std::max(1.0, std::abs(current));

    double lambda = ridge;
    std::optional<DecompositionState> fallback;
    for (int attempt = 0; attempt < 10; ++attempt) {
        Eigen::MatrixXd reg = g;
        reg.diagonal().array() += lambda;

        Eigen::VectorXd delta;
        bool solved = false;
        Eigen::LLT<Eigen::MatrixXd> llt(reg);
        if (llt.info() == Eigen::Success) {
            delta = llt.solve(grad);
            solved = true;
        } else {
            Eigen::LDLT<Eigen::MatrixXd> ldlt(reg);
            if (ldlt.info() == Eigen::Success) {
                delta = ldlt.solve(grad);
                solved = true;
            }
        }

        // Cap the move per parameter: wild Newton steps on a degenerate
        // Fisher matrix would otherwise catapult theta into regions where q
        // underflows and the residual path turns non-monotone.
        constexpr double kMaxStep = 6.0;
        if (solved && delta.allFinite() && delta.cwiseAbs().maxCoeff() <= kMaxStep) {
            DecompositionState trial = state;
            for (Eigen::Index i = 0; i < n; ++i)
                trial.theta[flats[static_cast<std::size_t>(i)]] -= delta(i);
            bool finite = true;
            try {
                refresh_state(trial, basis, flats);
            } catch (const OverflowGuard&) {
                finite = false;
            } catch (const NonFiniteState&) {
                finite = false;
            }
            if (finite) {
                if (kl_objective(trial, flats) <= current + slack) {
                    trial.step = state.step + 1;
                    state = std::move(trial);
                    return;
                }
                if (!fallback || trial.residual < fallback->residual)
                    fallback = std::move(trial);
            }
        }
        lambda = lambda <= 0.0 ? 1e-12 : lambda * 100.0;
        if (lambda > 1e8) break;
    }
    if (fallback) {
        fallback->step = state.step + 1;
        state = std::move(*fallback);
        return;
    }
    throw SingularSystem("natural_gradient_step: no usable damped step");
}

void gradient_descent_step(DecompositionState& state, const Basis& basis,
                           double learning_rate) {
    const auto flats = basis.flat_indices(state.theta.shape());
    for (std::size_t flat : flats)
        state.theta[flat] -= learning_rate * (state.eta[flat] - state.eta_hat[flat]);
    refresh_state(state, basis, flats);
    ++state.step;
}

DecompositionResult decompose_with_basis(const DenseTensor& x, const Basis& basis,
                                         const SolverOptions& options,
                                         DecompositionState* final_state) {
    if (options.epsilon <= 0.0 || options.repeat_max < 1 || options.learning_rate <= 0.0)
        throw Error("decompose: invalid solver options");

    const NormalizedTensor p = normalize(x);
    const auto flats = basis.flat_indices(x.shape());

    DecompositionState state;
    state.p = p.probs;
    state.eta_hat = compute_eta_hat(p);
    state.theta = init_theta(options.init, basis, x.shape(), theta_scale(p), options.init_seed);
    refresh_state(state, basis, flats);

    bool converged = state.residual < options.epsilon;
    bool rolled_back = false;

    const auto start = std::chrono::steady_clock::now();
    while (!converged && state.step < options.repeat_max) {
        const double residual_before = state.residual;
        const double objective_before = kl_objective(state, flats);
        DecompositionState previous = state;

        if (options.method == Method::NaturalGradient)
            natural_gradient_step(state, basis, options.ridge);
        else
            gradient_descent_step(state, basis, options.learning_rate);

        // Divergence guard: a residual increase with no progress on the KL
        // objective means the previous iterate was the better point; keep
        // it. The max-deviation residual is allowed to move non-monotonically
        // while the convex objective still descends.
        const double objective_after = kl_objective(state, flats);
        if (residual_before >= options.epsilon && state.residual > residual_before &&
            objective_after >= objective_before) {
            const int steps_done = state.step;
            state = std::move(previous);
            state.step = steps_done;
            rolled_back = true;
            break;
        }
        converged = state.residual < options.epsilon;
    }
    const auto stop = std::chrono::steady_clock::now();

    DecompositionResult result;
    result.basis = basis;
    result.q = state.q;
    result.theta_final = state.theta;
    result.eta_final = state.eta;
    result.residual = state.residual;
    result.iterations = state.step;
    result.converged = converged;
    result.rolled_back = rolled_back;
    result.elapsed_seconds =
        std::chrono::duration<double>(stop - start).count();

    result.reconstructed = DenseTensor(x.shape());
    for (std::size_t i = 0; i < result.reconstructed.size(); ++i)
        result.reconstructed[i] = state.q.probs[i] * p.scale;
    result.kl = kl_divergence(p.probs, state.q.probs);
    result.rmse_value = rmse(x, result.reconstructed);
    if (final_state) *final_state = std::move(state);
    return result;
}

DecompositionResult decompose(const DenseTensor& x, int core_size, BasisMode mode,
                              const SolverOptions& options, std::uint64_t basis_seed,
                              DecompositionState* final_state) {
    const NormalizedTensor p = normalize(x);
    const Basis basis = select_basis(p, core_size, mode, basis_seed);
    return decompose_with_basis(x, basis, options, final_state);
}

DenseTensor reconstruct(const DenseTensor& theta, const Basis& basis, double scale) {
    auto [q, psi] = compute_q_and_psi(theta, basis);
    (void)psi;
    DenseTensor out(theta.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = q.probs[i] * scale;
    return out;
}

}  // namespace legendre
