#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "jlssabs/composition.hpp"
#include "jlssabs/linalg.hpp"
#include "jlssabs/rng.hpp"
#include "sec6_fixtures.hpp"

using namespace jlssabs;
using fixtures::mat;
using fixtures::vec;

namespace {

/// Abstraction stub carrying only gains, for the gain-matrix assembly tests.
abstraction::AbstractionResult gains_only(double h, double r_ext, double r_int,
                                          double a = 1.0) {
    abstraction::AbstractionResult res;
    res.gains = {a, h, r_ext, r_int};
    return res;
}

std::vector<abstraction::AbstractionResult> sec6_paper_gains(double d) {
    // the worked example's reported slopes, used as regression input data
    return {gains_only(2.0, 0.16, 1.3 * d * d), gains_only(2.0, 0.16, 1.3 * d * d),
            gains_only(2.0, 150.0, 7.9 * d * d), gains_only(2.0, 150.0, 7.9 * d * d)};
}

/// Real end-to-end abstractions of the four benchmark subsystems.
std::vector<abstraction::AbstractionResult> sec6_abstractions(double d) {
    std::vector<abstraction::AbstractionResult> out;
    abstraction::AbstractionOptions o12;
    o12.kappa_hat = 3.0;
    o12.pi = 1.0;
    o12.bhat_mode = abstraction::BhatMode::Identity;
    o12.verify_trials = 2000;
    abstraction::AbstractionOptions o34;
    o34.kappa_hat = 2.5;  // kappa = 3 is infeasible for the autonomous triple integrator
    o34.pi = 1.0;
    o34.bhat_mode = abstraction::BhatMode::BehaviorPreserving;
    o34.verify_trials = 2000;
    out.push_back(abstraction::build_abstraction(fixtures::double_integrator(d),
                                                 fixtures::p_double(), o12));
    out.push_back(abstraction::build_abstraction(fixtures::double_integrator(d),
                                                 fixtures::p_double(), o12));
    out.push_back(abstraction::build_abstraction(fixtures::triple_integrator(d),
                                                 fixtures::p_triple(), o34));
    out.push_back(abstraction::build_abstraction(fixtures::triple_integrator(d),
                                                 fixtures::p_triple(), o34));
    return out;
}

}  // namespace

TEST_CASE("build_gain_matrices reproduces the example Delta") {
    const double d = 0.5;
    Network net = fixtures::network(d);
    auto abs = sec6_paper_gains(d);
    auto [lambda, delta] = composition::build_gain_matrices(net, abs, true);
    CHECK((lambda - 2.0 * Matrix::Identity(4, 4)).norm() <= 1e-12);
    Matrix expect = d * d *
                    mat({{0, 0, 1.3, 0}, {0, 0, 0, 1.3}, {0, 7.9, 0, 0}, {7.9, 0, 0, 0}});
    CHECK((delta - expect).norm() <= 1e-12);

    // triangle_mode off: every nonzero entry times (N-1) = 3
    auto [l2, d2] = composition::build_gain_matrices(net, abs, false);
    CHECK((d2 - 3.0 * expect).norm() <= 1e-12);
}

TEST_CASE("build_gain_matrices on a decoupled network") {
    Network net;
    JlssSystem sys = fixtures::double_integrator(0.5);
    sys.D = Matrix::Zero(2, 0);
    net.subsystems = {{1, sys, {}, {{OutputBlock::kExternal, 1}}},
                      {2, sys, {}, {{OutputBlock::kExternal, 1}}}};
    auto abs = std::vector<abstraction::AbstractionResult>{gains_only(2, 1, 1),
                                                           gains_only(2, 1, 1)};
    auto [lambda, delta] = composition::build_gain_matrices(net, abs, true);
    CHECK(delta.norm() == 0.0);
}

TEST_CASE("find_mu on the example gains") {
    const double d = 0.5;
    Matrix lambda = 2.0 * Matrix::Identity(4, 4);
    Matrix delta = d * d *
                   mat({{0, 0, 1.3, 0}, {0, 0, 0, 1.3}, {0, 7.9, 0, 0}, {7.9, 0, 0, 0}});
    Vector mu = composition::find_mu(lambda, delta);
    Vector check = (-lambda + delta).transpose() * mu;
    for (Index i = 0; i < 4; ++i) {
        CHECK(mu(i) > 0.0);
        CHECK(check(i) < 0.0);
    }
    // radius oracle: single 4-cycle, sqrt(1.3 * 7.9) d^2 / 2
    const double radius = la::spectral_radius(Matrix(lambda.inverse() * delta));
    CHECK(radius == doctest::Approx(0.5 * std::sqrt(1.3 * 7.9) * d * d).epsilon(1e-10));

    // the example's mu = [2 2 1 1] certifies with margins [-2.025 -2.025 -1.35 -1.35]
    Vector mu_ex = vec({2, 2, 1, 1});
    Vector margins = (-lambda + delta).transpose() * mu_ex;
    CHECK(margins(0) == doctest::Approx(-2.025).epsilon(1e-12));
    CHECK(margins(1) == doctest::Approx(-2.025).epsilon(1e-12));
    CHECK(margins(2) == doctest::Approx(-1.35).epsilon(1e-12));
    CHECK(margins(3) == doctest::Approx(-1.35).epsilon(1e-12));
}

TEST_CASE("find_mu trivial and infeasible cases") {
    Matrix lambda = 2.0 * Matrix::Identity(3, 3);
    Vector mu = composition::find_mu(lambda, Matrix::Zero(3, 3));
    CHECK((mu - Vector::Ones(3)).norm() <= 1e-12);

    // d = 1: radius 1.602..., rejected
    Matrix delta = mat({{0, 0, 1.3, 0}, {0, 0, 0, 1.3}, {0, 7.9, 0, 0}, {7.9, 0, 0, 0}});
    try {
        composition::find_mu(2.0 * Matrix::Identity(4, 4), delta);
        FAIL("expected InfeasibleError");
    } catch (const InfeasibleError& e) {
        CHECK(e.value == doctest::Approx(0.5 * std::sqrt(1.3 * 7.9)).epsilon(1e-9));
    }
}

TEST_CASE("small-gain feasibility matches the radius threshold") {
    rng::Stream st(23, 0, rng::Role::Verify);
    for (int rep = 0; rep < 30; ++rep) {
        const Index n = 2 + static_cast<Index>(st.next_u64() % 4);
        Matrix lambda = Matrix::Zero(n, n);
        for (Index i = 0; i < n; ++i) lambda(i, i) = 0.5 + 2.0 * st.uniform01();
        Matrix delta = Matrix::Zero(n, n);
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j)
                if (i != j) delta(i, j) = st.uniform01();
        const double r = la::spectral_radius(Matrix(lambda.inverse() * delta));
        if (r < 1e-6) continue;
        // scale into the feasible regime and out of it
        Matrix feasible = delta * (0.8 / r);
        Vector mu = composition::find_mu(lambda, feasible);
        Vector chk = (-lambda + feasible).transpose() * mu;
        for (Index i = 0; i < n; ++i) CHECK(chk(i) < 0.0);
        Matrix infeasible = delta * (1.05 / r);
        CHECK_THROWS_AS(composition::find_mu(lambda, infeasible), InfeasibleError);
    }
}

TEST_CASE("compose on the example gains") {
    const double d = 0.5;
    Network net = fixtures::network(d);
    auto abs = sec6_paper_gains(d);
    composition::ComposeOptions opts;
    opts.triangle_mode = true;
    Vector mu = vec({2, 2, 1, 1});
    auto cert = composition::compose(net, abs, mu, opts);

    CHECK(cert.literal.alpha_slope == doctest::Approx(1.0));
    CHECK(cert.literal.eta_slope == doctest::Approx(1.0125).epsilon(1e-12));
    // paper-example variant reproduces the reported eta and rho_ext numerals
    CHECK(cert.paper_example.eta_slope == doctest::Approx(1.35).epsilon(1e-12));
    CHECK(cert.paper_example.rho_ext_slope == doctest::Approx(150.0).epsilon(1e-12));

    // with external inputs of 3 and 4 pinned to zero, the paper's 0.16 appears
    composition::ComposeOptions zo = opts;
    zo.zero_ext_ids = {3, 4};
    auto cert2 = composition::compose(net, abs, mu, zo);
    CHECK(cert2.paper_example.rho_ext_slope == doctest::Approx(0.16).epsilon(1e-12));
    const double rho_lit = std::hypot(2 * 0.16, 2 * 0.16);
    CHECK(cert2.literal.rho_ext_slope == doctest::Approx(rho_lit).epsilon(1e-12));
}

TEST_CASE("compose with a single subsystem returns the subsystem slopes") {
    Network net;
    JlssSystem sys = fixtures::double_integrator(0.5);
    sys.D = Matrix::Zero(2, 0);
    net.subsystems = {{1, sys, {}, {{OutputBlock::kExternal, 1}}}};
    auto abs = std::vector<abstraction::AbstractionResult>{gains_only(2.0, 0.7, 0.0)};
    Vector mu = composition::find_mu(2.0 * Matrix::Identity(1, 1), Matrix::Zero(1, 1));
    auto cert = composition::compose(net, abs, mu, {});
    CHECK(cert.literal.alpha_slope == doctest::Approx(1.0));
    CHECK(cert.literal.eta_slope == doctest::Approx(2.0));
    CHECK(cert.literal.rho_ext_slope == doctest::Approx(0.7));
}

TEST_CASE("compose rho_ext vanishes when all subsystems have none") {
    const double d = 0.5;
    Network net = fixtures::network(d);
    auto abs = std::vector<abstraction::AbstractionResult>{
        gains_only(2, 0, 1.3 * d * d), gains_only(2, 0, 1.3 * d * d),
        gains_only(2, 0, 7.9 * d * d), gains_only(2, 0, 7.9 * d * d)};
    auto cert = composition::compose(net, abs, vec({2, 2, 1, 1}), {});
    CHECK(cert.literal.rho_ext_slope == 0.0);
}

TEST_CASE("composite_V") {
    const double d = 0.5;
    auto abs = sec6_abstractions(d);
    Network net = fixtures::network(d);
    composition::ComposeOptions opts;
    opts.zero_ext_ids = {3, 4};
    auto [lambda, delta] = composition::build_gain_matrices(net, abs, true);
    Vector mu = composition::find_mu(lambda, delta);
    auto cert = composition::compose(net, abs, mu, opts);

    // x on the abstraction diagonal: V = 0
    Vector xh(6);
    xh << 0.5, -1.0, 0.25, 0.75, -0.5, 1.5;
    Vector x(10);
    Index xo = 0, xho = 0;
    for (int i = 0; i < 4; ++i) {
        const Matrix& p = abs[i].cert.P;
        x.segment(xo, p.rows()) = p * xh.segment(xho, p.cols());
        xo += p.rows();
        xho += p.cols();
    }
    CHECK(composition::composite_V(cert, abs, x, xh) <= 1e-12);

    // random point: equals the per-block sum computed independently
    rng::Stream st(5, 0, rng::Role::Verify);
    for (Index i = 0; i < 10; ++i) x(i) = 2.0 * st.uniform01() - 1.0;
    for (Index i = 0; i < 6; ++i) xh(i) = 2.0 * st.uniform01() - 1.0;
    double expect = 0.0;
    xo = xho = 0;
    for (int i = 0; i < 4; ++i) {
        const Matrix& p = abs[i].cert.P;
        Vector v = x.segment(xo, p.rows()) - p * xh.segment(xho, p.cols());
        expect += mu(i) * v.dot(abs[i].cert.M * v);
        xo += p.rows();
        xho += p.cols();
    }
    CHECK(composition::composite_V(cert, abs, x, xh) ==
          doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("composite dissipation and sandwich hold on the benchmark network") {
    const double d = 0.5;
    Network net = fixtures::network(d);
    auto abs = sec6_abstractions(d);
    auto [lambda, delta] = composition::build_gain_matrices(net, abs, true);
    Vector mu = composition::find_mu(lambda, delta);
    composition::ComposeOptions opts;
    opts.zero_ext_ids = {3, 4};
    auto cert = composition::compose(net, abs, mu, opts);

    auto chk = composition::check_composite_dissipation(net, abs, cert, 10000, 31);
    CHECK(chk.worst_slack >= -1e-7);
    CHECK(chk.worst_sandwich >= -1e-7);

    // parallel path equals the serial reference bit-exactly
    auto chk2 = composition::check_composite_dissipation(net, abs, cert, 2000, 31, false);
    auto chk3 = composition::check_composite_dissipation(net, abs, cert, 2000, 31, true);
    CHECK(chk2.worst_slack == chk3.worst_slack);
}

TEST_CASE("mu rescaling leaves eta invariant and scales rho_ext") {
    const double d = 0.5;
    Network net = fixtures::network(d);
    auto abs = sec6_paper_gains(d);
    Vector mu = vec({2, 2, 1, 1});
    auto c1 = composition::compose(net, abs, mu, {});
    auto c2 = composition::compose(net, abs, Vector(3.0 * mu), {});
    CHECK(c2.literal.eta_slope == doctest::Approx(c1.literal.eta_slope).epsilon(1e-12));
    CHECK(c2.literal.rho_ext_slope ==
          doctest::Approx(3.0 * c1.literal.rho_ext_slope).epsilon(1e-12));
    CHECK(c2.literal.alpha_slope ==
          doctest::Approx(3.0 * c1.literal.alpha_slope).epsilon(1e-12));
}
