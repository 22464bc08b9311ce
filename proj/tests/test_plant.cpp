#include "aimreg/numerics.hpp"
#include "aimreg/plant.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace aimreg;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vector vec2(double a, double b) {
    Vector v(2);
    v << a, b;
    return v;
}

/// Point on the exosystem orbit through w0 at time t (closed form).
Vector exo_flow(const Vector& w0, double rho, double t) {
    const double om = std::sqrt(rho);
    return vec2(w0(0) * std::cos(om * t) + w0(1) / om * std::sin(om * t),
                -w0(0) * om * std::sin(om * t) + w0(1) * std::cos(om * t));
}

}  // namespace

TEST_CASE("chain-of-integrators matrices") {
    const auto [a, b, c] = plant::build_chain_matrices(2, 1);
    Matrix ea(2, 2);
    ea << 0, 1, 0, 0;
    CHECK(a == ea);
    CHECK(b == vec2(0, 1));
    CHECK(c == vec2(1, 0).transpose());

    const auto [a3, b3, c3] = plant::build_chain_matrices(3, 2);
    CHECK(a3.rows() == 6);
    CHECK(b3.cols() == 2);
    CHECK(c3.rows() == 2);
    CHECK(a3.block(0, 2, 4, 4) == Matrix::Identity(4, 4));
    CHECK(b3.bottomRows(2) == Matrix::Identity(2, 2));
    CHECK(c3.leftCols(2) == Matrix::Identity(2, 2));
    CHECK_THROWS_AS(plant::build_chain_matrices(0, 1), InvalidInput);
}

TEST_CASE("triangular output") {
    CHECK(plant::triangular_output(vec2(0, 1)) == 0.0);
    CHECK_THAT(plant::triangular_output(vec2(1, 0)), WithinAbs(M_PI, 1e-15));
    CHECK_THAT(plant::triangular_output(vec2(-1, 0)), WithinAbs(-M_PI, 1e-15));
    CHECK(plant::triangular_output(vec2(0, 0)) == 0.0);
}

TEST_CASE("triangular output is a triangle wave along the rho = 1 flow") {
    // With rho = 1 the phase advances uniformly, so p1* is piecewise linear in t.
    const Vector w0 = vec2(0.0, 1.0);
    for (double t = 0.05; t < M_PI / 2.0; t += 0.1) {
        CHECK_THAT(plant::triangular_output(exo_flow(w0, 1.0, t)), WithinAbs(2.0 * t, 1e-12));
    }
}

TEST_CASE("Lie derivative examples") {
    const auto d = plant::lie_derivatives_p1star(vec2(0, 1), 1.0);
    CHECK_THAT(d.first, WithinAbs(2.0, 1e-15));
    CHECK_THAT(d.second, WithinAbs(0.0, 1e-15));
}

TEST_CASE("Lie derivatives agree with finite differences along the flow") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ang(0.0, 2.0 * M_PI);
    std::uniform_real_distribution<double> rad(0.3, 2.0);
    for (const double rho : {0.5, 1.0, 2.0, 3.5}) {
        for (int k = 0; k < 40; ++k) {
            const double th = ang(rng);
            const Vector w = rad(rng) * vec2(std::cos(th), std::sin(th));
            if (std::abs(w(1)) / w.norm() < 0.05) {
                continue;
            }
            const double h = 1e-5;
            const auto d = plant::lie_derivatives_p1star(w, rho);
            const double fd1 = (plant::triangular_output(exo_flow(w, rho, h)) -
                                plant::triangular_output(exo_flow(w, rho, -h))) /
                               (2.0 * h);
            const double fd2 = (plant::lie_derivatives_p1star(exo_flow(w, rho, h), rho).first -
                                plant::lie_derivatives_p1star(exo_flow(w, rho, -h), rho).first) /
                               (2.0 * h);
            CHECK_THAT(d.first, WithinAbs(fd1, 1e-6 * (1.0 + std::abs(fd1))));
            CHECK_THAT(d.second, WithinAbs(fd2, 1e-5 * (1.0 + std::abs(fd2))));
        }
    }
}

TEST_CASE("p1* and its Lie derivatives are positively homogeneous of degree one") {
    const Vector w = vec2(0.4, -0.9);
    const double rho = 2.0;
    const auto d = plant::lie_derivatives_p1star(w, rho);
    for (const double lam : {0.25, 3.0}) {
        const auto dl = plant::lie_derivatives_p1star(lam * w, rho);
        CHECK_THAT(plant::triangular_output(lam * w),
                   WithinRel(lam * plant::triangular_output(w), 1e-13));
        CHECK_THAT(dl.first, WithinRel(lam * d.first, 1e-13));
        CHECK_THAT(dl.second, WithinRel(lam * d.second, 1e-13));
    }
}

TEST_CASE("branch policy at the wave peaks") {
    const Vector peak = vec2(1.0, 0.0);
    CHECK_THROWS_AS(plant::lie_derivatives_p1star(peak, 2.0, plant::BranchPolicy::reject),
                    BranchPointError);
    // One-sided value equals the limit from the side the flow moves into.
    const auto at = plant::lie_derivatives_p1star(peak, 2.0, plant::BranchPolicy::one_sided);
    const auto after = plant::lie_derivatives_p1star(exo_flow(peak, 2.0, 1e-7), 2.0);
    CHECK_THAT(at.first, WithinAbs(after.first, 1e-5));
    CHECK_THROWS_AS(plant::lie_derivatives_p1star(vec2(0, 0), 2.0), InvalidInput);
}

TEST_CASE("Van der Pol ideal feedforward zeroes the steady-state perturbation") {
    const auto p = plant::build_vdp_scenario({});
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int k = 0; k < 50; ++k) {
        const Vector w = vec2(u(rng), u(rng));
        const Vector x0 = Vector::Zero(2);
        const Vector z;
        const Vector q = p.eval_q(w, z, x0);
        const Vector us = p.eval_ustar(w);
        CHECK_THAT(q(0) + p.eval_b(w, z, x0)(0, 0) * us(0), WithinAbs(0.0, 1e-10));
    }
}

TEST_CASE("Van der Pol error coordinates reproduce the original dynamics") {
    // d/dt of x = p - (p1*, L_s p1*) under the plant field equals x' = A x + B (q + u).
    const double a = 2.0;
    const double rho = 2.0;
    const auto spec = plant::build_vdp_scenario({a, rho});
    const Vector w = vec2(0.3, 0.8);
    const Vector p = vec2(0.5, -0.2);
    const double u = 0.7;
    const Vector x = plant::vdp_error_coordinates(p, w, rho);
    const Vector z;
    const double p2dot = -p(0) + a * (1.0 - p(0) * p(0)) * p(1) + u;
    const auto lie = plant::lie_derivatives_p1star(w, rho);
    const double x2dot = p2dot - lie.second;
    CHECK_THAT(spec.eval_q(w, z, x)(0) + u, WithinAbs(x2dot, 1e-12));
    CHECK_THAT(x(1), WithinAbs(p(1) - lie.first, 1e-15));
}

TEST_CASE("exosystem invariant is conserved by RK4 over 100 s") {
    const double rho = 2.0;
    const VectorField f = [rho](double, const Vector& w) { return plant::harmonic_field(w, rho); };
    Vector w = vec2(1.0, 0.0);
    const double v0 = plant::exo_invariant(w, rho);
    const double dt = 1e-3;
    for (int i = 0; i < 100000; ++i) {
        w = numerics::rk4_step(f, i * dt, w, dt);
    }
    CHECK(std::abs(plant::exo_invariant(w, rho) - v0) <= 1e-6 * v0);
    // Returns to the start after a whole number of periods.
    const Vector back = exo_flow(vec2(1.0, 0.0), rho, 100.0);
    CHECK((w - back).norm() < 1e-8);
}

TEST_CASE("scenario parameter validation") {
    plant::VdpParams bad;
    bad.a = 10.0;
    CHECK_THROWS_AS(plant::build_vdp_scenario(bad), InvalidConfig);
    plant::LinearHarmonicParams lh;
    lh.omega = -1.0;
    CHECK_THROWS_AS(plant::build_linear_harmonic_scenario(lh), InvalidConfig);
}

TEST_CASE("control-direction bound") {
    auto p = plant::build_vdp_scenario({});
    std::vector<plant::PlantPoint> pts{{vec2(1, 0), Vector(), vec2(0, 0)}};
    CHECK(plant::max_b_deviation(p, pts) == 0.0);
    CHECK_NOTHROW(p.validate(pts));
    p.b_bar = Matrix::Constant(1, 1, 0.4);  // |(1 - 0.4) / 0.4| = 1.5 > 0.5
    CHECK_THROWS_AS(p.validate(pts), InvalidConfig);
}

TEST_CASE("internal-model steady state solves the Sylvester equation") {
    const Matrix s = plant::harmonic_matrix(1.3);
    Matrix f = Matrix::Zero(4, 4);
    f.diagonal().setConstant(-1.0);
    f.diagonal(1).setConstant(1.0);
    Matrix g = Matrix::Zero(4, 1);
    g(3, 0) = 1.0;
    const Matrix ct = vec2(0.7, -0.2).transpose();
    const Matrix pi = plant::internal_model_steady_state(s, f, g, ct);
    CHECK((pi * s - f * pi - g * ct).norm() < 1e-12);
    CHECK_THROWS_AS(plant::internal_model_steady_state(s, f, g, Matrix::Ones(1, 3)), InvalidInput);
}

TEST_CASE("linear-harmonic ideal feedforward") {
    plant::LinearHarmonicParams lh;
    lh.c = vec2(2.0, -1.0);
    const auto p = plant::build_linear_harmonic_scenario(lh);
    const Vector w = vec2(0.5, 0.25);
    CHECK_THAT(p.eval_ustar(w)(0), WithinAbs(0.75, 1e-15));
    CHECK_THAT(p.eval_q(w, Vector(), Vector::Zero(2))(0) + p.eval_ustar(w)(0), WithinAbs(0.0, 1e-15));
}
