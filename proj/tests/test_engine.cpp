#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "legendre/engine.hpp"
#include "legendre/rng.hpp"
#include "support/oracles.hpp"

using namespace legendre;

namespace {

Basis basis_of(std::vector<std::vector<int>> coords) {
    Basis b;
    for (auto& c : coords) b.members.push_back(MultiIndex{std::move(c)});
    b.core_size = static_cast<int>(b.members.size());
    return b;
}

// A consistent manifold point for the given theta values on B.
DecompositionState make_state(const DenseTensor& x, const Basis& basis,
                              const DenseTensor& theta_init) {
    const auto p = normalize(x);
    DecompositionState s;
    s.p = p.probs;
    s.eta_hat = compute_eta_hat(p);
    s.theta = theta_init;
    auto [q, psi] = compute_q_and_psi(s.theta, basis);
    s.q = q;
    s.psi = psi;
    s.theta[0] = -psi;
    s.eta = upset_accumulate(q.probs);
    s.residual = 0.0;
    for (std::size_t flat : basis.flat_indices(x.shape()))
        s.residual = std::max(s.residual, std::abs(s.eta[flat] - s.eta_hat[flat]));
    return s;
}

Basis random_small_basis(const std::vector<int>& shape, Rng& rng) {
    const Basis all = full_basis(shape);
    Basis basis;
    for (const auto& m : all.members)
        if (rng.uniform01() < 0.6) basis.members.push_back(m);
    if (basis.members.empty()) basis.members.push_back(all.members[0]);
    basis.core_size = static_cast<int>(basis.members.size());
    return basis;
}

}  // namespace

TEST_CASE("compute_eta_hat") {
    SUBCASE("uniform 2x2") {
        const auto eta = compute_eta_hat(normalize(DenseTensor::filled({2, 2}, 1.0)));
        CHECK(eta.at({1, 1}) == doctest::Approx(1.0));
        CHECK(eta.at({1, 2}) == doctest::Approx(0.5));
        CHECK(eta.at({2, 1}) == doctest::Approx(0.5));
        CHECK(eta.at({2, 2}) == doctest::Approx(0.25));
    }
    SUBCASE("point mass at the bottom") {
        const auto eta = compute_eta_hat(normalize(DenseTensor({2, 2}, {1, 0, 0, 0})));
        CHECK(eta.at({1, 1}) == doctest::Approx(1.0));
        CHECK(eta.at({1, 2}) == 0.0);
        CHECK(eta.at({2, 1}) == 0.0);
        CHECK(eta.at({2, 2}) == 0.0);
    }
    SUBCASE("bottom always holds 1") {
        Rng rng(2);
        const auto eta = compute_eta_hat(normalize(oracles::random_positive({3, 2, 2}, rng)));
        CHECK(eta[0] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("compute_q_and_psi") {
    SUBCASE("zero theta gives the uniform model") {
        const Basis basis = basis_of({{2, 1}, {2, 2}});
        auto [q, psi] = compute_q_and_psi(DenseTensor({2, 2}), basis);
        CHECK(psi == doctest::Approx(std::log(4.0)));
        for (double v : q.probs.values()) CHECK(v == doctest::Approx(0.25));
    }
    SUBCASE("1-D two-cell example") {
        const Basis basis = basis_of({{2}});
        DenseTensor theta({2});
        theta.at({2}) = std::log(2.0);
        auto [q, psi] = compute_q_and_psi(theta, basis);
        CHECK(psi == doctest::Approx(std::log(3.0)));
        CHECK(q.probs[0] == doctest::Approx(1.0 / 3.0));
        CHECK(q.probs[1] == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("single corner parameter on 2x2") {
        const Basis basis = basis_of({{2, 2}});
        DenseTensor theta({2, 2});
        theta.at({2, 2}) = std::log(3.0);
        auto [q, psi] = compute_q_and_psi(theta, basis);
        (void)psi;
        CHECK(q.probs.at({1, 1}) == doctest::Approx(1.0 / 6.0));
        CHECK(q.probs.at({1, 2}) == doctest::Approx(1.0 / 6.0));
        CHECK(q.probs.at({2, 1}) == doctest::Approx(1.0 / 6.0));
        CHECK(q.probs.at({2, 2}) == doctest::Approx(0.5));
    }
    SUBCASE("bottom value on input is ignored") {
        const Basis basis = basis_of({{2}});
        DenseTensor theta({2});
        theta[0] = -123.0;  // stale -psi from an earlier iteration
        theta.at({2}) = std::log(2.0);
        auto [q, psi] = compute_q_and_psi(theta, basis);
        CHECK(psi == doctest::Approx(std::log(3.0)));
        CHECK(q.probs[1] == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("overflow guard") {
        const Basis basis = basis_of({{2}});
        DenseTensor theta({2});
        theta.at({2}) = 701.0;
        CHECK_THROWS_AS(compute_q_and_psi(theta, basis), OverflowGuard);
    }
    SUBCASE("matches the enumeration oracle") {
        Rng rng(13);
        for (const auto& shape : {std::vector<int>{3, 3}, std::vector<int>{2, 2, 2}}) {
            for (int rep = 0; rep < 6; ++rep) {
                const Basis basis = random_small_basis(shape, rng);
                DenseTensor theta(shape);
                for (std::size_t flat : basis.flat_indices(shape))
                    theta[flat] = rng.uniform(-1.5, 1.5);
                auto [q, psi] = compute_q_and_psi(theta, basis);
                CHECK(psi == doctest::Approx(oracles::psi_brute(theta, basis)).epsilon(1e-12));
                const auto q_ref = oracles::q_brute(theta, basis);
                for (std::size_t i = 0; i < q.probs.size(); ++i)
                    CHECK(q.probs[i] == doctest::Approx(q_ref[i]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("analytic eta matches finite differences of psi") {
    Rng rng(41);
    const double h = 1e-5;
    for (const auto& shape : {std::vector<int>{3, 3}, std::vector<int>{2, 3}}) {
        for (int rep = 0; rep < 8; ++rep) {
            const Basis basis = random_small_basis(shape, rng);
            const auto flats = basis.flat_indices(shape);
            DenseTensor theta(shape);
            for (std::size_t flat : flats) theta[flat] = rng.uniform(-1.0, 1.0);
            auto [q, psi] = compute_q_and_psi(theta, basis);
            (void)psi;
            const auto eta = upset_accumulate(q.probs);
            for (std::size_t flat : flats) {
                DenseTensor plus = theta, minus = theta;
                plus[flat] += h;
                minus[flat] -= h;
                const double fd =
                    (oracles::psi_brute(plus, basis) - oracles::psi_brute(minus, basis)) /
                    (2 * h);
                CHECK(std::abs(fd - eta[flat]) < 1e-6);
            }
        }
    }
}

TEST_CASE("fisher_matrix") {
    SUBCASE("single parameter at the uniform point") {
        const Basis basis = basis_of({{2}});
        DenseTensor eta({2}, {1.0, 0.5});
        const auto g = fisher_matrix(eta, basis);
        REQUIRE(g.rows() == 1);
        CHECK(g(0, 0) == doctest::Approx(0.25));
    }
    SUBCASE("incomparable pair at the uniform point has zero covariance") {
        const Basis basis = basis_of({{1, 2}, {2, 1}});
        DenseTensor eta({2, 2}, {1.0, 0.5, 0.5, 0.25});
        const auto g = fisher_matrix(eta, basis);
        CHECK(g(0, 1) == doctest::Approx(0.0));
        CHECK(g(0, 0) == doctest::Approx(0.25));
    }
    SUBCASE("matches the finite-difference Hessian of psi") {
        Rng rng(43);
        const double h = 1e-4;
        for (int rep = 0; rep < 6; ++rep) {
            const std::vector<int> shape{3, 3};
            const Basis basis = random_small_basis(shape, rng);
            const auto flats = basis.flat_indices(shape);
            DenseTensor theta(shape);
            for (std::size_t flat : flats) theta[flat] = rng.uniform(-1.0, 1.0);
            auto [q, psi0] = compute_q_and_psi(theta, basis);
            const auto eta = upset_accumulate(q.probs);
            const auto g = fisher_matrix(eta, basis);
            CHECK((g - g.transpose()).cwiseAbs().maxCoeff() == 0.0);
            for (std::size_t i = 0; i < flats.size(); ++i)
                for (std::size_t j = i; j < flats.size(); ++j) {
                    double fd;
                    if (i == j) {
                        DenseTensor plus = theta, minus = theta;
                        plus[flats[i]] += h;
                        minus[flats[i]] -= h;
                        fd = (oracles::psi_brute(plus, basis) - 2 * psi0 +
                              oracles::psi_brute(minus, basis)) /
                             (h * h);
                    } else {
                        DenseTensor pp = theta, pm = theta, mp = theta, mm = theta;
                        pp[flats[i]] += h;
                        pp[flats[j]] += h;
                        pm[flats[i]] += h;
                        pm[flats[j]] -= h;
                        mp[flats[i]] -= h;
                        mp[flats[j]] += h;
                        mm[flats[i]] -= h;
                        mm[flats[j]] -= h;
                        fd = (oracles::psi_brute(pp, basis) - oracles::psi_brute(pm, basis) -
                              oracles::psi_brute(mp, basis) + oracles::psi_brute(mm, basis)) /
                             (4 * h * h);
                    }
                    CHECK(std::abs(fd - g(static_cast<Eigen::Index>(i),
                                          static_cast<Eigen::Index>(j))) < 1e-5);
                }
        }
    }
}

TEST_CASE("natural_gradient_step worked example") {
    const DenseTensor x({2}, {1.0, 2.0});
    const Basis basis = basis_of({{2}});
    auto state = make_state(x, basis, DenseTensor({2}));
    CHECK(state.eta.at({2}) == doctest::Approx(0.5));
    CHECK(state.eta_hat.at({2}) == doctest::Approx(2.0 / 3.0));

    natural_gradient_step(state, basis, 0.0);
    // G = 0.25, gradient = 0.5 - 2/3 = -1/6, delta = -2/3.
    CHECK(state.theta.at({2}) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(state.step == 1);
    CHECK(state.theta[0] == doctest::Approx(-state.psi));
    CHECK(state.q.probs.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("natural_gradient_step fixed point") {
    const DenseTensor x({2}, {1.0, 2.0});
    const Basis basis = basis_of({{2}});
    DenseTensor theta0({2});
    theta0.at({2}) = std::log(2.0);  // the closed-form optimum log(p2/p1)
    auto state = make_state(x, basis, theta0);
    CHECK(state.residual < 1e-15);
    natural_gradient_step(state, basis, 0.0);
    CHECK(state.theta.at({2}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(state.residual < 1e-12);
}

TEST_CASE("natural gradient converges to the closed-form optimum") {
    const DenseTensor x({2}, {1.0, 2.0});
    SolverOptions options;
    options.epsilon = 1e-12;
    options.repeat_max = 100;
    const auto result = decompose_with_basis(x, basis_of({{2}}), options);
    CHECK(result.converged);
    CHECK(result.theta_final.at({2}) == doctest::Approx(std::log(2.0)).epsilon(1e-9));
    CHECK(result.kl < 1e-15);
}

TEST_CASE("gradient_descent_step") {
    const DenseTensor x({2}, {1.0, 2.0});
    const Basis basis = basis_of({{2}});
    SUBCASE("unit learning rate hand value") {
        auto state = make_state(x, basis, DenseTensor({2}));
        gradient_descent_step(state, basis, 1.0);
        CHECK(state.theta.at({2}) == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
    }
    SUBCASE("fixed point") {
        DenseTensor theta0({2});
        theta0.at({2}) = std::log(2.0);
        auto state = make_state(x, basis, theta0);
        gradient_descent_step(state, basis, 0.5);
        CHECK(state.theta.at({2}) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
}

TEST_CASE("gradient descent agrees with natural gradient on random 2x2") {
    Rng rng(47);
    for (int rep = 0; rep < 6; ++rep) {
        const auto x = oracles::random_positive({2, 2}, rng, 0.2, 1.0);
        Rng pick(rng.next_u64());
        Basis basis = random_small_basis({2, 2}, pick);

        SolverOptions ng;
        ng.epsilon = 1e-11;
        ng.repeat_max = 200;
        SolverOptions gd = ng;
        gd.method = Method::GradientDescent;
        gd.learning_rate = 0.5;
        gd.repeat_max = 200000;

        const auto a = decompose_with_basis(x, basis, ng);
        const auto b = decompose_with_basis(x, basis, gd);
        REQUIRE(a.converged);
        REQUIRE(b.converged);
        for (std::size_t i = 0; i < a.q.probs.size(); ++i)
            CHECK(std::abs(a.q.probs[i] - b.q.probs[i]) < 1e-6);
    }
}

TEST_CASE("init_theta schemes") {
    const std::vector<int> shape{2, 2};
    const Basis basis = basis_of({{1, 2}, {2, 1}, {2, 2}});
    SUBCASE("zero") {
        CHECK(init_theta(InitScheme::Zero, basis, shape, 3.0, 0).sum() == 0.0);
    }
    SUBCASE("random is seeded and bounded") {
        const auto a = init_theta(InitScheme::Random, basis, shape, 2.0, 5);
        const auto b = init_theta(InitScheme::Random, basis, shape, 2.0, 5);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i] == b[i]);
            CHECK(a[i] >= 0.0);
            CHECK(a[i] <= 2.0);
        }
        CHECK(a[0] == 0.0);  // bottom is not a parameter
    }
    SUBCASE("uniform constant") {
        const auto t = init_theta(InitScheme::Uniform, basis, shape, 2.0, 0);
        for (std::size_t flat : basis.flat_indices(shape))
            CHECK(t[flat] == doctest::Approx(0.5));
    }
    SUBCASE("gaussian peaks at the central flat index") {
        // |Omega| = 4, so the 1-based flat index 2 sits at x = 0.
        const auto t = init_theta(InitScheme::Gaussian, basis, shape, 0.0, 0);
        CHECK(t.at({1, 2}) == doctest::Approx(0.3989422804).epsilon(1e-9));
        CHECK(t.at({2, 1}) == doctest::Approx(0.3989422804 * std::exp(-0.5)).epsilon(1e-9));
    }
}

TEST_CASE("decompose with the full basis reproduces strictly positive tensors") {
    Rng rng(53);
    SolverOptions options;
    options.epsilon = 1e-12;
    options.repeat_max = 200;
    for (const auto& shape : {std::vector<int>{2, 2, 2}, std::vector<int>{3, 3}}) {
        const auto x = oracles::random_positive(shape, rng, 0.1, 1.0);
        const auto result = decompose_with_basis(x, full_basis(shape), options);
        CHECK(result.kl < 1e-9);
        const auto p = normalize(x);
        for (std::size_t i = 0; i < p.probs.size(); ++i)
            CHECK(std::abs(result.q.probs[i] - p.probs[i]) < 1e-9);
        CHECK(result.rmse_value < 1e-6 * x.max_value());
    }
}

TEST_CASE("decompose with an empty basis returns the uniform model") {
    const DenseTensor x({2, 2}, {4, 2, 1, 1});
    Basis empty;
    SolverOptions options;
    const auto result = decompose_with_basis(x, empty, options);
    CHECK(result.iterations == 0);
    CHECK(result.converged);
    for (double v : result.q.probs.values()) CHECK(v == doctest::Approx(0.25));
    const auto p = normalize(x).probs;
    double expected_kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) expected_kl += p[i] * std::log(p[i] * 4.0);
    CHECK(result.kl == doctest::Approx(expected_kl));
}

TEST_CASE("rmse is non-increasing along a nested basis ladder") {
    Rng rng(59);
    const auto x = oracles::random_positive({6, 6, 4}, rng, 0.0, 3.0);
    SolverOptions options;
    options.epsilon = 1e-10;
    options.repeat_max = 200;
    double previous = std::numeric_limits<double>::infinity();
    for (int c : {1, 2, 3, 5, 8}) {
        const auto result = decompose(x, c, BasisMode::Random, options, 77);
        CHECK(result.rmse_value <= previous + 1e-7);
        previous = result.rmse_value;
    }
}

TEST_CASE("all four initializations reach the same optimum") {
    Rng rng(61);
    const auto x = oracles::random_positive({5, 5, 4}, rng, 0.5, 1.5);
    SolverOptions options;
    options.epsilon = 1e-10;
    options.repeat_max = 300;
    const Basis basis = select_basis(normalize(x), 3, BasisMode::Random, 5);
    double reference = -1.0;
    for (InitScheme scheme :
         {InitScheme::Zero, InitScheme::Random, InitScheme::Uniform, InitScheme::Gaussian}) {
        SolverOptions local = options;
        local.init = scheme;
        local.init_seed = 17;
        const auto result = decompose_with_basis(x, basis, local);
        REQUIRE(result.converged);
        if (reference < 0)
            reference = result.rmse_value;
        else
            CHECK(std::abs(result.rmse_value - reference) < 1e-6);
    }
}

TEST_CASE("engine reaches the brute-force global optimum on 2x2") {
    Rng rng(67);
    SolverOptions options;
    options.epsilon = 1e-12;
    options.repeat_max = 300;
    for (int rep = 0; rep < 6; ++rep) {
        const auto x = oracles::random_positive({2, 2}, rng, 0.1, 1.0);
        Rng pick(rng.next_u64());
        Basis basis = random_small_basis({2, 2}, pick);
        while (basis.size() > 2) basis.members.pop_back();
        const auto result = decompose_with_basis(x, basis, options);
        const double oracle = oracles::min_kl_brute(normalize(x).probs, basis);
        CHECK(std::abs(result.kl - oracle) < 1e-5);
    }
}

TEST_CASE("conservation holds after every step") {
    Rng rng(71);
    const auto x = oracles::random_positive({3, 3}, rng);
    const Basis basis = random_small_basis({3, 3}, rng);
    auto state = make_state(x, basis, DenseTensor({3, 3}));
    for (int i = 0; i < 5; ++i) {
        natural_gradient_step(state, basis, 1e-9);
        CHECK(std::abs(state.q.probs.sum() - 1.0) < 1e-12);
        CHECK(std::abs(state.eta[0] - 1.0) < 1e-12);
    }
}

TEST_CASE("divergence guard returns the previous state") {
    const DenseTensor x({2}, {4.0, 1.0});
    SolverOptions options;
    options.method = Method::GradientDescent;
    options.learning_rate = 40.0;  // deliberate overshoot
    options.epsilon = 1e-10;
    options.repeat_max = 100;
    const auto result = decompose_with_basis(x, basis_of({{2}}), options);
    CHECK(result.rolled_back);
    CHECK_FALSE(result.converged);
    CHECK(result.iterations >= 1);
    CHECK(std::abs(result.q.probs.sum() - 1.0) < 1e-12);
}

TEST_CASE("repeat_max is a normal return") {
    const DenseTensor x({2}, {1.0, 2.0});
    SolverOptions options;
    options.method = Method::GradientDescent;
    options.learning_rate = 0.1;
    options.epsilon = 1e-14;
    options.repeat_max = 3;
    const auto result = decompose_with_basis(x, basis_of({{2}}), options);
    CHECK_FALSE(result.converged);
    CHECK(result.iterations == 3);
}

TEST_CASE("reconstruct") {
    SUBCASE("zero theta scales the uniform model") {
        const Basis basis = basis_of({{2, 2}});
        const auto out = reconstruct(DenseTensor({2, 2}), basis, 4.0);
        for (double v : out.values()) CHECK(v == doctest::Approx(1.0));
    }
    SUBCASE("converged 1-D theta restores the input") {
        const DenseTensor x({2}, {1.0, 2.0});
        SolverOptions options;
        options.epsilon = 1e-13;
        const auto result = decompose_with_basis(x, basis_of({{2}}), options);
        const auto out = reconstruct(result.theta_final, result.basis, 3.0);
        CHECK(out[0] == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(out[1] == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("round trip through a saturated model") {
        Rng rng(73);
        const auto x = oracles::random_positive({2, 3}, rng, 0.2, 2.0);
        SolverOptions options;
        options.epsilon = 1e-12;
        options.repeat_max = 200;
        const auto result = decompose_with_basis(x, full_basis({2, 3}), options);
        const auto out = reconstruct(result.theta_final, result.basis, normalize(x).scale);
        for (std::size_t i = 0; i < x.size(); ++i)
            CHECK(std::abs(out[i] - x[i]) < 1e-6 * x[i]);
    }
}
