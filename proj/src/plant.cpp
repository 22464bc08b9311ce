#include "aimreg/plant.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aimreg::plant {

std::tuple<Matrix, Matrix, Matrix> build_chain_matrices(std::size_t r, std::size_t d_y) {
    if (r == 0 || d_y == 0) {
        throw InvalidInput("build_chain_matrices: r and d_y must be positive");
    }
    const auto n = static_cast<Eigen::Index>(r * d_y);
    const auto m = static_cast<Eigen::Index>(d_y);
    Matrix a = Matrix::Zero(n, n);
    if (r > 1) {
        a.topRightCorner(n - m, n - m).setIdentity();
    }
    Matrix b = Matrix::Zero(n, m);
    b.bottomRows(m).setIdentity();
    Matrix c = Matrix::Zero(m, n);
    c.leftCols(m).setIdentity();
    return {a, b, c};
}

double max_b_deviation(const PlantSpec& plant, std::span<const PlantPoint> test_points) {
    const Matrix bbar_inv = plant.b_bar.inverse();
    double worst = 0.0;
    for (const auto& pt : test_points) {
        const Matrix dev = (plant.eval_b(pt.w, pt.z, pt.x) - plant.b_bar) * bbar_inv;
        Eigen::JacobiSVD<Matrix> svd(dev);
        worst = std::max(worst, svd.singularValues()(0));
    }
    return worst;
}

void PlantSpec::validate(std::span<const PlantPoint> test_points) const {
    if (d_w == 0 || d_y == 0 || r == 0) {
        throw InvalidConfig("plant: d_w, d_y and r must be positive");
    }
    if (!eval_s || !eval_q || !eval_b || (d_z > 0 && !eval_f)) {
        throw InvalidConfig("plant: missing evaluator");
    }
    const auto m = static_cast<Eigen::Index>(d_y);
    if (b_bar.rows() != m || b_bar.cols() != m || !b_bar.allFinite()) {
        throw InvalidConfig("plant: b_bar must be a finite d_y x d_y matrix");
    }
    Eigen::FullPivLU<Matrix> lu(b_bar);
    if (!lu.isInvertible()) {
        throw InvalidConfig("plant: b_bar must be nonsingular");
    }
    if (!(mu_b > 0.0 && mu_b < 1.0)) {
        throw InvalidConfig("plant: mu_b must lie in (0, 1)");
    }
    if (!test_points.empty()) {
        const double dev = max_b_deviation(*this, test_points);
        if (dev > 1.0 - mu_b) {
            std::ostringstream os;
            os << "plant: |(b - b_bar) b_bar^-1| = " << dev << " exceeds 1 - mu_b = " << 1.0 - mu_b;
            throw InvalidConfig(os.str());
        }
    }
}

double triangular_output(const Vector& w) {
    const double r = std::hypot(w(0), w(1));
    if (r == 0.0) {
        return 0.0;
    }
    const double s = std::clamp(w(0) / r, -1.0, 1.0);
    return 2.0 * r * std::asin(s);
}

LieDerivatives lie_derivatives_p1star(const Vector& w, double rho, BranchPolicy policy) {
    const double w1 = w(0);
    const double w2 = w(1);
    const double r = std::hypot(w1, w2);
    if (r == 0.0) {
        throw InvalidInput("lie_derivatives_p1star: w must be nonzero");
    }

    // Away from w_2 = 0, d asin(w_1/r) = (|w_2| dw_1 - w_1 sgn(w_2) dw_2) / r^2.
    double sgn = w2 > 0.0 ? 1.0 : -1.0;
    if (std::abs(w2) / r < kBranchTolerance) {
        if (policy == BranchPolicy::reject) {
            throw BranchPointError("lie_derivatives_p1star: w_2 within branch tolerance");
        }
        // w_2' = -rho w_1, so the flow leaves the peak towards sgn(w_2) = -sgn(w_1).
        sgn = w1 > 0.0 ? -1.0 : 1.0;
    }

    const double ang = std::asin(std::clamp(w1 / r, -1.0, 1.0));
    const double v = rho * w1 * w1 + w2 * w2;  // conserved along the flow
    const double k = 1.0 - rho;
    const double r3 = r * r * r;

    LieDerivatives out;
    out.first = 2.0 * k * ang * w1 * w2 / r + 2.0 * sgn * v / r;
    // The sgn-dependent terms cancel in the second derivative.
    out.second = 2.0 * k * ang * ((w2 * w2 - rho * w1 * w1) / r - k * w1 * w1 * w2 * w2 / r3);
    return out;
}

double exo_invariant(const Vector& w, double rho) {
    return 0.5 * (rho * w(0) * w(0) + w(1) * w(1));
}

Vector harmonic_field(const Vector& w, double rho) {
    Vector d(2);
    d << w(1), -rho * w(0);
    return d;
}

PlantSpec build_vdp_scenario(const VdpParams& params) {
    const double a = params.a;
    const double rho = params.rho;
    if (!(params.a_min > 0.0) || !(params.a_max >= params.a_min) || a < params.a_min ||
        a > params.a_max) {
        throw InvalidConfig("vdp: a must lie in [a_min, a_max] with a_min > 0");
    }
    if (!(params.rho_min > 0.0) || !(params.rho_max >= params.rho_min) || rho < params.rho_min ||
        rho > params.rho_max) {
        throw InvalidConfig("vdp: rho must lie in [rho_min, rho_max] with rho_min > 0");
    }

    PlantSpec p;
    p.d_w = 2;
    p.d_z = 0;
    p.d_y = 1;
    p.r = 2;
    p.b_bar = Matrix::Identity(1, 1);
    p.mu_b = 0.5;
    p.eval_s = [rho](const Vector& w) { return harmonic_field(w, rho); };
    p.eval_q = [a, rho](const Vector& w, const Vector&, const Vector& x) {
        const double ref = triangular_output(w);
        const auto lie = lie_derivatives_p1star(w, rho, BranchPolicy::one_sided);
        const double p1 = x(0) + ref;
        Vector q(1);
        q(0) = -x(0) - ref - lie.second + a * (1.0 - p1 * p1) * (x(1) + lie.first);
        return q;
    };
    p.eval_b = [](const Vector&, const Vector&, const Vector&) -> Matrix { return Matrix::Identity(1, 1); };
    p.eval_ustar = [a, rho](const Vector& w) {
        const double ref = triangular_output(w);
        const auto lie = lie_derivatives_p1star(w, rho, BranchPolicy::one_sided);
        Vector u(1);
        u(0) = ref + lie.second - a * (1.0 - ref * ref) * lie.first;
        return u;
    };
    p.eval_reference = [](const Vector& w) {
        Vector y(1);
        y(0) = triangular_output(w);
        return y;
    };
    return p;
}

Vector vdp_error_coordinates(const Vector& p, const Vector& w, double rho) {
    const auto lie = lie_derivatives_p1star(w, rho, BranchPolicy::one_sided);
    Vector x(2);
    x << p(0) - triangular_output(w), p(1) - lie.first;
    return x;
}

Matrix harmonic_matrix(double omega) {
    Matrix s(2, 2);
    s << 0.0, omega, -omega, 0.0;
    return s;
}

PlantSpec build_linear_harmonic_scenario(const LinearHarmonicParams& params) {
    if (!(params.omega > 0.0) || params.c.size() != 2 || !params.c.allFinite()) {
        throw InvalidConfig("linear-harmonic: need omega > 0 and a 2-vector c");
    }
    const Matrix s = harmonic_matrix(params.omega);
    const Vector c = params.c;
    const double k = params.stiffness;

    PlantSpec p;
    p.d_w = 2;
    p.d_z = 0;
    p.d_y = 1;
    p.r = 2;
    p.b_bar = Matrix::Identity(1, 1);
    p.mu_b = 0.5;
    p.eval_s = [s](const Vector& w) -> Vector { return s * w; };
    p.eval_q = [c, k](const Vector& w, const Vector&, const Vector& x) {
        Vector q(1);
        q(0) = -k * x(0) - c.dot(w);
        return q;
    };
    p.eval_b = [](const Vector&, const Vector&, const Vector&) -> Matrix { return Matrix::Identity(1, 1); };
    p.eval_ustar = [c](const Vector& w) {
        Vector u(1);
        u(0) = c.dot(w);
        return u;
    };
    p.eval_reference = [](const Vector&) { return Vector::Zero(1).eval(); };
    return p;
}

Matrix internal_model_steady_state(const Matrix& s, const Matrix& f, const Matrix& g,
                                   const Matrix& c_t) {
    const Eigen::Index n = f.rows();
    const Eigen::Index m = s.rows();
    if (f.cols() != n || s.cols() != m || g.rows() != n || c_t.rows() != g.cols() ||
        c_t.cols() != m) {
        throw InvalidInput("internal_model_steady_state: dimension mismatch");
    }
    // vec(Pi S - F Pi) = (S^T kron I - I kron F) vec(Pi)
    Matrix lhs = Matrix::Zero(n * m, n * m);
    const Matrix eye_n = Matrix::Identity(n, n);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            lhs.block(i * n, j * n, n, n) = s(j, i) * eye_n;
        }
        lhs.block(i * n, i * n, n, n) -= f;
    }
    const Matrix rhs_mat = g * c_t;
    const Vector rhs = Eigen::Map<const Vector>(rhs_mat.data(), rhs_mat.size());
    const Vector sol = lhs.fullPivLu().solve(rhs);
    return Eigen::Map<const Matrix>(sol.data(), n, m);
}

}  // namespace aimreg::plant
