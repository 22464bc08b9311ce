#include "aimreg/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace aimreg::numerics {

namespace {

void require_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw InvalidInput(std::string(what) + ": non-finite entries");
    }
}

void require_cutoff(double cutoff_rel) {
    if (!(cutoff_rel > 0.0 && cutoff_rel < 1.0)) {
        throw InvalidInput("cutoff_rel must lie in (0, 1)");
    }
}

}  // namespace

Matrix pseudoinverse(const Matrix& m, double cutoff_rel) {
    require_finite(m, "pseudoinverse");
    require_cutoff(cutoff_rel);
    if (m.size() == 0) {
        return Matrix::Zero(m.cols(), m.rows());
    }
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    const double cut = cutoff_rel * s(0);
    Vector inv = Vector::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cut && s(i) > 0.0) {
            inv(i) = 1.0 / s(i);
        }
    }
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

Matrix symmetric_pseudo_solve(const Matrix& sym, const Matrix& rhs, double cutoff_rel) {
    require_finite(sym, "symmetric_pseudo_solve");
    require_finite(rhs, "symmetric_pseudo_solve");
    require_cutoff(cutoff_rel);
    if (sym.rows() != sym.cols() || sym.rows() != rhs.rows()) {
        throw InvalidInput("symmetric_pseudo_solve: shape mismatch");
    }
    if (sym.size() == 0) {
        return Matrix::Zero(0, rhs.cols());
    }

    // Fast path: positive definite with a comfortable margin above the
    // cutoff, where pseudoinverse and inverse coincide.
    Eigen::LLT<Matrix> llt(sym);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e3 * cutoff_rel) {
        return llt.solve(rhs);
    }

    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    const Vector& lam = eig.eigenvalues();
    const double smax = lam.cwiseAbs().maxCoeff();
    const double cut = cutoff_rel * smax;
    Vector inv = Vector::Zero(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        if (std::abs(lam(i)) > cut && lam(i) != 0.0) {
            inv(i) = 1.0 / lam(i);
        }
    }
    const Matrix& v = eig.eigenvectors();
    return v * (inv.asDiagonal() * (v.transpose() * rhs));
}

Vector singular_values(const Matrix& m) {
    require_finite(m, "singular_values");
    if (m.size() == 0) {
        return Vector();
    }
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues();
}

double min_nonzero_singular_value(const Matrix& m, double cutoff_rel) {
    const Vector s = singular_values(m);
    if (s.size() == 0 || s(0) <= 0.0) {
        return 0.0;
    }
    const double cut = cutoff_rel * s(0);
    double best = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cut) {
            best = s(i);
        }
    }
    return best;
}

std::size_t matrix_rank(const Matrix& m, double cutoff_rel) {
    const Vector s = singular_values(m);
    if (s.size() == 0 || s(0) <= 0.0) {
        return 0;
    }
    const double cut = cutoff_rel * s(0);
    return static_cast<std::size_t>((s.array() > cut).count());
}

std::vector<double> poly_from_roots(std::span<const double> roots) {
    // coeffs[0] is the leading 1.
    std::vector<double> c{1.0};
    for (double r : roots) {
        std::vector<double> next(c.size() + 1, 0.0);
        for (std::size_t i = 0; i < c.size(); ++i) {
            next[i] += c[i];
            next[i + 1] -= r * c[i];
        }
        c = std::move(next);
    }
    return {c.begin() + 1, c.end()};
}

std::vector<std::complex<double>> poly_roots(std::span<const double> monic_tail) {
    const auto n = static_cast<Eigen::Index>(monic_tail.size());
    if (n == 0) {
        return {};
    }
    Matrix companion = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        companion(0, i) = -monic_tail[static_cast<std::size_t>(i)];
    }
    for (Eigen::Index i = 1; i < n; ++i) {
        companion(i, i - 1) = 1.0;
    }
    return eigenvalues(companion);
}

Matrix place_poles(std::size_t r, std::size_t d_y, std::span<const double> desired) {
    if (r == 0 || d_y == 0) {
        throw InvalidInput("place_poles: r and d_y must be positive");
    }
    if (desired.size() != r) {
        throw InvalidInput("place_poles: need exactly r desired poles");
    }
    for (double p : desired) {
        if (!std::isfinite(p) || p >= 0.0) {
            std::ostringstream os;
            os << "place_poles: desired pole " << p << " is not strictly negative";
            throw InvalidInput(os.str());
        }
    }
    // For the integrator chain, A - B K restricted to one channel is a
    // companion matrix whose last row is -K, so K holds the characteristic
    // polynomial coefficients in ascending order.
    const std::vector<double> c = poly_from_roots(desired);
    Matrix k = Matrix::Zero(static_cast<Eigen::Index>(d_y), static_cast<Eigen::Index>(r * d_y));
    for (std::size_t ch = 0; ch < d_y; ++ch) {
        for (std::size_t i = 0; i < r; ++i) {
            k(static_cast<Eigen::Index>(ch), static_cast<Eigen::Index>(i * d_y + ch)) = c[r - 1 - i];
        }
    }
    return k;
}

std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
    require_finite(m, "eigenvalues");
    if (m.rows() != m.cols()) {
        throw InvalidInput("eigenvalues: matrix must be square");
    }
    if (m.size() == 0) {
        return {};
    }
    Eigen::EigenSolver<Matrix> es(m, false);
    const auto& ev = es.eigenvalues();
    return {ev.data(), ev.data() + ev.size()};
}

bool is_hurwitz(const Matrix& m) {
    const auto ev = eigenvalues(m);
    return std::all_of(ev.begin(), ev.end(), [](const auto& z) { return z.real() < 0.0; });
}

Matrix controllability_matrix(const Matrix& f, const Matrix& g) {
    require_finite(f, "controllability_matrix");
    require_finite(g, "controllability_matrix");
    if (f.rows() != f.cols() || g.rows() != f.rows()) {
        throw InvalidInput("controllability_matrix: dimension mismatch");
    }
    const Eigen::Index n = f.rows();
    const Eigen::Index m = g.cols();
    Matrix ctrb(n, n * m);
    Matrix block = g;
    for (Eigen::Index i = 0; i < n; ++i) {
        ctrb.middleCols(i * m, m) = block;
        block = f * block;
    }
    return ctrb;
}

bool is_controllable(const Matrix& f, const Matrix& g, double cutoff_rel) {
    const Matrix ctrb = controllability_matrix(f, g);
    return matrix_rank(ctrb, cutoff_rel) == static_cast<std::size_t>(f.rows());
}

Vector rk4_step(const VectorField& field, double t, const Vector& state, double dt) {
    auto eval = [&](double ts, const Vector& xs) {
        Vector d = field(ts, xs);
        if (!d.allFinite()) {
            throw IntegrationBlowup(HybridTime{ts, 0}, xs, "rk4_step: non-finite vector field");
        }
        return d;
    };
    const double h2 = 0.5 * dt;
    const Vector k1 = eval(t, state);
    const Vector k2 = eval(t + h2, state + h2 * k1);
    const Vector k3 = eval(t + h2, state + h2 * k2);
    const Vector k4 = eval(t + dt, state + dt * k3);
    Vector next = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!next.allFinite()) {
        throw IntegrationBlowup(HybridTime{t + dt, 0}, next, "rk4_step: non-finite state");
    }
    return next;
}

Vector clamp_norm(const Vector& v, double radius) {
    const double n = v.norm();
    if (n <= radius) {
        return v;
    }
    return v * (radius / n);
}

Matrix clamp_norm(const Matrix& m, double radius) {
    const double n = m.norm();
    if (n <= radius) {
        return m;
    }
    return m * (radius / n);
}

}  // namespace aimreg::numerics
