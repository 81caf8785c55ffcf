#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace legendre {

struct ValidateOptions {
    std::uint64_t seed = 20240715;
    // Negative-control hook: flips the sign of the analytic Fisher matrix
    // inside the Hessian check so the check must fail.
    bool negate_fisher = false;
};

struct PropertyOutcome {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Release-gate property suite on synthetic instances: gradient and Hessian
/// agreement with finite differences, full-basis exactness, initialization
/// invariance, brute-force optimum agreement, conservation laws, and
/// determinism of seeded runs.
std::vector<PropertyOutcome> run_validation(const ValidateOptions& options = {});

}  // namespace legendre
