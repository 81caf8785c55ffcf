#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>

#include "legendre/poset.hpp"
#include "legendre/tensor.hpp"

namespace legendre {

enum class Method { NaturalGradient, GradientDescent };
enum class InitScheme { Zero, Random, Uniform, Gaussian };

std::string to_string(Method m);
std::string to_string(InitScheme s);
InitScheme init_scheme_from_string(const std::string& name);

struct SolverOptions {
    Method method = Method::NaturalGradient;
    double learning_rate = 0.5;   // gradient descent only
    double epsilon = 1e-5;        // convergence tolerance on the residual
    int repeat_max = 100;
    double ridge = 1e-9;          // Fisher regularization
    InitScheme init = InitScheme::Zero;
    std::uint64_t init_seed = 0;
};

/// One manifold point during optimization. theta holds -psi at the bottom
/// index and is zero outside B union {bottom}; eta_hat is the target fixed
/// from the input distribution; p keeps the input probabilities themselves.
struct DecompositionState {
    DenseTensor theta;
    DenseTensor eta;
    DenseTensor eta_hat;
    DenseTensor p;
    NormalizedTensor q;
    double psi = 0.0;
    double residual = 0.0;
    int step = 0;
};

struct DecompositionResult {
    DenseTensor reconstructed;  // q.probs scaled back by the input mass
    NormalizedTensor q;
    DenseTensor theta_final;
    DenseTensor eta_final;
    double kl = 0.0;
    double rmse_value = 0.0;
    double residual = 0.0;
    int iterations = 0;
    bool converged = false;     // residual < epsilon reached
    bool rolled_back = false;   // divergence guard returned the previous state
    double elapsed_seconds = 0.0;
    Basis basis;
};

/// Target expectation parameters: eta_hat_v = sum_{u >= v} p_u.
DenseTensor compute_eta_hat(const NormalizedTensor& p);

/// Model distribution and log-partition for the current theta:
/// q_v = exp(sum_{u in B, u <= v} theta_u - psi). The bottom entry of theta
/// is ignored on input; callers store -psi there afterwards. Throws
/// OverflowGuard when the largest down-set sum exceeds 700.
std::pair<NormalizedTensor, double> compute_q_and_psi(const DenseTensor& theta,
                                                      const Basis& basis);

/// Fisher information over the basis: g_uv = eta_{join(u,v)} - eta_u eta_v.
Eigen::MatrixXd fisher_matrix(const DenseTensor& eta, const Basis& basis);

/// Largest magnitude a single basis parameter could need, used to scale the
/// Random and Uniform initializations: log(max p / min nonzero p).
double theta_scale(const NormalizedTensor& p);

DenseTensor init_theta(InitScheme scheme, const Basis& basis,
                       const std::vector<int>& shape, double theta_max,
                       std::uint64_t seed);

/// One e-projection step: solve (G + ridge I) d = eta_B - eta_hat_B and move
/// theta_B against d, then refresh q, psi, eta and the residual.
void natural_gradient_step(DecompositionState& state, const Basis& basis, double ridge);

void gradient_descent_step(DecompositionState& state, const Basis& basis,
                           double learning_rate);

/// Full pipeline: normalize, select the basis, fix eta_hat, initialize theta
/// and iterate the chosen step until the residual drops under epsilon, the
/// divergence guard fires, or repeat_max is hit. `final_state`, when given,
/// receives the returned manifold point (for feature extraction).
DecompositionResult decompose(const DenseTensor& x, int core_size, BasisMode mode,
                              const SolverOptions& options, std::uint64_t basis_seed = 0,
                              DecompositionState* final_state = nullptr);

/// Same optimization with a caller-supplied basis (may be empty, in which
/// case the model is uniform and no step runs).
DecompositionResult decompose_with_basis(const DenseTensor& x, const Basis& basis,
                                         const SolverOptions& options,
                                         DecompositionState* final_state = nullptr);

/// q scaled back to the input's total mass.
DenseTensor reconstruct(const DenseTensor& theta, const Basis& basis, double scale);

}  // namespace legendre
