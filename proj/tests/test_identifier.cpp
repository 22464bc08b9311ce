#include "aimreg/identifier.hpp"
#include "aimreg/numerics.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace aimreg;
using namespace aimreg::identifier;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Vector v(std::initializer_list<double> xs) {
    Vector out(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) {
        out(i++) = x;
    }
    return out;
}

Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i) = u(rng);
    }
    return out;
}

std::size_t binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) {
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    }
    return static_cast<std::size_t>(std::llround(r));
}

}  // namespace

TEST_CASE("regressor lengths") {
    for (const std::size_t n : {1u, 3u, 5u}) {
        std::size_t expected = 0;
        for (std::size_t k = 1; k <= n; k += 2) {
            expected += binomial(6 + k - 1, k);
        }
        CHECK(PolyRegressor(6, n, RegressorMode::full_multiset).size() == expected);
        CHECK(PolyRegressor(6, n, RegressorMode::pure_powers).size() == 6 * ((n + 1) / 2));
    }
    CHECK(PolyRegressor(6, 1, RegressorMode::full_multiset).size() == 6);
    CHECK(PolyRegressor(6, 3, RegressorMode::full_multiset).size() == 62);
    CHECK(PolyRegressor(6, 5, RegressorMode::full_multiset).size() == 314);
}

TEST_CASE("regressor ordering and values") {
    const PolyRegressor reg(2, 3, RegressorMode::full_multiset);
    const std::vector<std::vector<std::size_t>> expected{{0}, {1}, {0, 0, 0}, {0, 0, 1}, {0, 1, 1}, {1, 1, 1}};
    CHECK(reg.index_list() == expected);
    const Vector s = reg.eval(v({2.0, 3.0}));
    CHECK(s == v({2.0, 3.0, 8.0, 12.0, 18.0, 27.0}));

    const PolyRegressor pure(2, 3, RegressorMode::pure_powers);
    CHECK(pure.eval(v({2.0, 3.0})) == v({2.0, 3.0, 8.0, 27.0}));
}

TEST_CASE("regressor rejects even or zero order") {
    CHECK_THROWS_AS(build_poly_regressor(3, 2, RegressorMode::full_multiset), InvalidConfig);
    CHECK_THROWS_AS(build_poly_regressor(3, 0, RegressorMode::full_multiset), InvalidConfig);
    CHECK_THROWS_AS(build_poly_regressor(0, 1, RegressorMode::full_multiset), InvalidConfig);
}

TEST_CASE("regressor is odd") {
    std::mt19937_64 rng(1);
    const PolyRegressor reg(4, 5, RegressorMode::full_multiset);
    for (int k = 0; k < 10; ++k) {
        const Vector eta = random_vector(rng, 4);
        CHECK((reg.eval(-eta) + reg.eval(eta)).norm() == 0.0);
    }
}

TEST_CASE("regressor derivatives agree with central differences") {
    std::mt19937_64 rng(2);
    for (const auto mode : {RegressorMode::full_multiset, RegressorMode::pure_powers}) {
        const PolyRegressor reg(3, 5, mode);
        for (int k = 0; k < 10; ++k) {
            const Vector eta = random_vector(rng, 3);
            const Vector dir = random_vector(rng, 3);
            const Matrix jac = reg.jacobian(eta);
            REQUIRE(jac.rows() == static_cast<Eigen::Index>(reg.size()));
            REQUIRE(jac.cols() == 3);
            const double h = 1e-6;
            Matrix fd(reg.size(), 3);
            for (int i = 0; i < 3; ++i) {
                Vector e = Vector::Zero(3);
                e(i) = h;
                fd.col(i) = (reg.eval(eta + e) - reg.eval(eta - e)) / (2.0 * h);
            }
            CHECK((jac - fd).norm() <= 1e-7 * (1.0 + jac.norm()));
            CHECK((reg.directional(eta, dir) - jac * dir).norm() <= 1e-12 * (1.0 + jac.norm()));
        }
    }
}

TEST_CASE("linear-in-parameters model") {
    const PolyRegressor reg(2, 1, RegressorMode::full_multiset);
    const LinearInParamsModel model(reg, 2);
    CHECK(model.d_theta() == 4);
    const Vector theta = v({1.0, 2.0, -1.0, 0.5});
    const Vector eta = v({3.0, 4.0});
    CHECK(model.gamma_hat(theta, eta) == v({11.0, -1.0}));
    Matrix jac(2, 2);
    jac << 1.0, 2.0, -1.0, 0.5;
    CHECK(model.dgamma_deta(theta, eta) == jac);
    CHECK(model.gamma_directional(theta, eta, v({1.0, 1.0})) == v({3.0, -0.5}));
    CHECK(prediction_error(model, theta, eta, v({11.0, 0.0})) == v({0.0, 1.0}));
    CHECK_THROWS_AS(model.gamma_hat(v({1.0}), eta), InvalidInput);
}

TEST_CASE("single least-squares jump from zero") {
    const PolyRegressor reg(1, 1, RegressorMode::full_multiset);
    LsConfig cfg;
    auto s = make_ls_state(1, 1, cfg);
    s = ls_jump(s, v({1.0}), v({2.0}), reg);
    CHECK_THAT(s.xi1(0, 0), WithinAbs(1.0, 1e-15));
    CHECK_THAT(s.xi2(0), WithinAbs(2.0, 1e-15));
    CHECK_THAT(s.theta(0), WithinRel(2.0 / 1.001, 1e-14));
    CHECK_THAT(s.theta(0), WithinAbs(1.998001998, 1e-9));

    s = ls_jump(s, v({1.0}), v({2.0}), reg);
    CHECK_THAT(s.xi1(0, 0), WithinAbs(1.99, 1e-14));
    CHECK_THAT(s.theta(0), WithinRel(2.0 * 1.99 / 1.991, 1e-14));
}

TEST_CASE("theta map examples") {
    Matrix xi1(2, 2);
    xi1 << 2.0, 0.0, 0.0, 0.0;
    const Vector xi2 = v({4.0, 0.0});
    const Vector th = theta_map_ls(xi1, xi2, Matrix::Zero(2, 2), 1e6, 1e-12);
    CHECK((th - v({2.0, 0.0})).norm() < 1e-14);

    const Vector clamped = theta_map_ls(xi1, xi2, Matrix::Zero(2, 2), 0.5, 1e-12);
    CHECK_THAT(clamped.norm(), WithinRel(0.5, 1e-14));

    // Two output channels share xi1.
    const Vector two = theta_map_ls(Matrix::Identity(2, 2), v({1.0, 2.0, 3.0, 4.0}),
                                    Matrix::Identity(2, 2), 1e6, 1e-12);
    CHECK((two - v({0.5, 1.0, 1.5, 2.0})).norm() < 1e-14);
}

TEST_CASE("persistence of excitation margin") {
    const std::vector<Vector> samples{v({1.0, 0.0}), v({0.0, 1.0})};
    CHECK_THAT(pe_margin(samples, 0.5, Matrix::Zero(2, 2)), WithinRel(0.5, 1e-12));
    CHECK(pe_check(samples, 0.5, Matrix::Zero(2, 2), 0.4));
    CHECK_FALSE(pe_check(samples, 0.5, Matrix::Zero(2, 2), 0.6));
    const std::vector<Vector> none;
    CHECK_THAT(pe_margin(none, 0.5, 1e-3 * Matrix::Identity(2, 2)), WithinRel(1e-3, 1e-12));
}

TEST_CASE("least-squares configuration is validated") {
    LsConfig cfg;
    cfg.mu_f = 1.0;
    CHECK_THROWS_AS(make_ls_state(3, 1, cfg), InvalidConfig);
    cfg = {};
    cfg.rho_sigma = 0.0;
    CHECK_THROWS_AS(make_ls_state(3, 1, cfg), InvalidConfig);
    cfg = {};
    cfg.omega = Matrix::Identity(2, 2);
    CHECK_THROWS_AS(make_ls_state(3, 1, cfg), InvalidConfig);
}

TEST_CASE("recursion matches the from-scratch weighted minimizer") {
    std::mt19937_64 rng(8);
    const PolyRegressor reg(3, 3, RegressorMode::full_multiset);
    LsConfig cfg;
    LsIdentifier id(reg, 2, cfg);
    const Matrix omega = 1e-3 * Matrix::Identity(reg.size(), reg.size());
    std::vector<Vector> sig;
    std::vector<Vector> out;
    for (int j = 0; j < 60; ++j) {
        const Vector eta = random_vector(rng, 3);
        const Vector u = random_vector(rng, 2, 3.0);
        id.jump(eta, u);
        sig.push_back(reg.eval(eta));
        out.push_back(u);

        const auto n = static_cast<Eigen::Index>(sig.size());
        Matrix g = omega;
        Matrix c = Matrix::Zero(reg.size(), 2);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double w = std::pow(0.99, static_cast<double>(n - i - 1));
            g += w * sig[i] * sig[i].transpose();
            c += w * sig[i] * out[i].transpose();
        }
        const Matrix sol = numerics::pseudoinverse(g) * c;
        const Vector expected = Eigen::Map<const Vector>(sol.data(), sol.size());
        REQUIRE((id.theta() - expected).norm() <= 1e-8 * (1.0 + expected.norm()));
    }
}

TEST_CASE("least-squares state vector round-trip") {
    const PolyRegressor reg(2, 1, RegressorMode::full_multiset);
    LsIdentifier id(reg, 1, {});
    id.jump(v({1.0, 0.5}), v({2.0}));
    id.jump(v({-0.3, 0.9}), v({1.0}));
    const Vector xi = id.state_vector();
    CHECK(xi.size() == 4 + 2);
    auto copy = id.clone();
    copy->set_state_vector(xi);
    CHECK((copy->theta() - id.theta()).norm() < 1e-14);
    CHECK((id.theta_map(xi) - id.theta()).norm() < 1e-14);
    CHECK(id.name() == "least-squares");
}

TEST_CASE("regularization bias shrinks as Omega shrinks") {
    // Planted linear model; larger Omega pulls theta further from theta_true.
    const PolyRegressor reg(2, 1, RegressorMode::full_multiset);
    const Vector theta_true = v({1.5, -2.0});
    double prev = -1.0;
    for (const double scale : {1e-6, 1e-4, 1e-2, 1.0}) {
        LsConfig cfg;
        cfg.omega_scale = scale;
        LsIdentifier id(reg, 1, cfg);
        std::mt19937_64 local(4);
        for (int j = 0; j < 100; ++j) {
            const Vector eta = random_vector(local, 2);
            id.jump(eta, v({theta_true.dot(eta)}));
        }
        const double bias = (id.theta() - theta_true).norm();
        CHECK(bias > prev);
        prev = bias;
    }
}

TEST_CASE("batch solver examples") {
    const PolyRegressor reg(1, 1, RegressorMode::full_multiset);
    const std::vector<Vector> win{v({1.0}), v({2.0})};
    const std::vector<Vector> wout{v({2.0}), v({4.0})};
    const Vector th = batch_solver_ls(win, wout, reg, Matrix::Zero(1, 1));
    CHECK_THAT(th(0), WithinAbs(2.0, 1e-14));

    // Weights 1 and 2 on u = 3, 1.5 at eta = 1: theta = (3 + 3) / 3.
    const std::vector<Vector> win2{v({1.0}), v({1.0})};
    const std::vector<Vector> wout2{v({3.0}), v({1.5})};
    const std::vector<double> w{1.0, 2.0};
    CHECK_THAT(batch_solver_ls(win2, wout2, reg, Matrix::Zero(1, 1), w)(0), WithinAbs(2.0, 1e-14));

    const Vector reg_th = batch_solver_ls(win, wout, reg, Matrix::Identity(1, 1));
    CHECK_THAT(reg_th(0), WithinAbs(10.0 / 6.0, 1e-14));
    CHECK(batch_ls_optimality_residual(win, wout, reg, Matrix::Identity(1, 1), {}, reg_th) <= 1e-8);
    CHECK(batch_ls_optimality_residual(win, wout, reg, Matrix::Identity(1, 1), {}, v({0.0})) > 1e-3);

    const std::vector<Vector> short_out{v({1.0})};
    CHECK_THROWS_AS(batch_solver_ls(win, short_out, reg, Matrix::Zero(1, 1)), InvalidInput);
}

TEST_CASE("batch solver recovers a planted parameter") {
    std::mt19937_64 rng(12);
    const PolyRegressor reg(4, 3, RegressorMode::full_multiset);
    const Vector theta_true = random_vector(rng, static_cast<Eigen::Index>(reg.size()) * 2);
    const LinearInParamsModel model(reg, 2);
    std::vector<Vector> win;
    std::vector<Vector> wout;
    for (std::size_t i = 0; i < 3 * reg.size(); ++i) {
        win.push_back(random_vector(rng, 4));
        wout.push_back(model.gamma_hat(theta_true, win.back()));
    }
    const Vector th = batch_solver_ls(win, wout, reg, Matrix::Zero(reg.size(), reg.size()));
    CHECK((th - theta_true).norm() <= 1e-8 * (1.0 + theta_true.norm()));
}

TEST_CASE("mini-batch shift registers") {
    std::size_t calls = 0;
    BatchSolver count_solver = [&calls](std::span<const Vector> in, std::span<const Vector>) {
        ++calls;
        return Vector::Constant(1, in.front()(0));
    };
    auto s = make_minibatch_state(3, 1, count_solver);
    CHECK(s.theta.size() == 1);
    CHECK(s.theta(0) == 0.0);
    for (int k = 1; k <= 5; ++k) {
        s = mb_jump(s, v({static_cast<double>(k)}), v({10.0 * k}));
        REQUIRE(s.window_in.size() == std::min<std::size_t>(k, 3));
        CHECK(s.window_in.back()(0) == k);
        CHECK(s.window_out.back()(0) == 10.0 * k);
    }
    CHECK(calls == 3);
    CHECK(s.window_in.front()(0) == 3.0);
    CHECK(s.theta(0) == 3.0);
    CHECK_THROWS_AS(make_minibatch_state(0, 1, count_solver), InvalidConfig);
}

TEST_CASE("mini-batch holds theta until the window fills") {
    const PolyRegressor reg(1, 1, RegressorMode::full_multiset);
    auto id = make_ls_minibatch(reg, 1, 4, Matrix::Zero(1, 1));
    for (int k = 1; k <= 3; ++k) {
        id->jump(v({1.0 * k}), v({2.0 * k}));
        CHECK(id->theta()(0) == 0.0);
    }
    id->jump(v({4.0}), v({8.0}));
    CHECK_THAT(id->theta()(0), WithinAbs(2.0, 1e-14));
    const Vector xi = id->state_vector();
    CHECK(xi.size() == 8);
    CHECK((id->theta_map(xi) - id->theta()).norm() < 1e-14);
    auto copy = id->clone();
    copy->set_state_vector(xi);
    CHECK(copy->theta()(0) == id->theta()(0));
    CHECK(id->name() == "mini-batch");
}
