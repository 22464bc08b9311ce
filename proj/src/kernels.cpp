#include "aimreg/kernels.hpp"

#include <omp.h>

#include <algorithm>

namespace aimreg::kernels {

namespace {

void check_rows(const Matrix& rows, const Vector& weights) {
    if (rows.rows() != weights.size()) {
        throw InvalidInput("kernels: one weight per sample row required");
    }
}

// Outer-product scale so that |s * sigma sigma^T|_F <= clamp. The Frobenius
// norm of sigma sigma^T is |sigma|^2.
double outer_scale(const Vector& sigma, double clamp) {
    const double n2 = sigma.squaredNorm();
    return n2 > clamp ? clamp / n2 : 1.0;
}

}  // namespace

Matrix weighted_gram(const Matrix& rows, const Vector& weights) {
    check_rows(rows, weights);
    const Eigen::Index n = rows.rows();
    const Eigen::Index d = rows.cols();
    Matrix out = Matrix::Zero(d, d);

    // Column-parallel: each thread owns whole columns of the lower triangle.
#pragma omp parallel for schedule(dynamic, 4)
    for (Eigen::Index c = 0; c < d; ++c) {
        for (Eigen::Index r = c; r < d; ++r) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += weights(i) * rows(i, r) * rows(i, c);
            }
            out(r, c) = acc;
        }
    }
    out.triangularView<Eigen::StrictlyUpper>() = out.transpose();
    return out;
}

Matrix weighted_cross(const Matrix& rows, const Vector& weights, const Matrix& outputs) {
    check_rows(rows, weights);
    if (outputs.rows() != rows.rows()) {
        throw InvalidInput("weighted_cross: output count mismatch");
    }
    const Eigen::Index n = rows.rows();
    const Eigen::Index d = rows.cols();
    const Eigen::Index m = outputs.cols();
    Matrix out = Matrix::Zero(d, m);

#pragma omp parallel for collapse(2) schedule(static)
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index k = 0; k < m; ++k) {
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += weights(i) * rows(i, r) * outputs(i, k);
            }
            out(r, k) = acc;
        }
    }
    return out;
}

void forgetting_outer_update(Matrix& xi1, double mu, const Vector& sigma, double clamp) {
    const Eigen::Index d = sigma.size();
    if (xi1.rows() != d || xi1.cols() != d) {
        throw InvalidInput("forgetting_outer_update: shape mismatch");
    }
    const double s = outer_scale(sigma, clamp);

#pragma omp parallel for schedule(dynamic, 8)
    for (Eigen::Index c = 0; c < d; ++c) {
        const double sc = s * sigma(c);
        for (Eigen::Index r = c; r < d; ++r) {
            const double v = 0.5 * mu * (xi1(r, c) + xi1(c, r)) + sc * sigma(r);
            xi1(r, c) = v;
            xi1(c, r) = v;
        }
    }
}

namespace reference {

Matrix weighted_gram(const Matrix& rows, const Vector& weights) {
    check_rows(rows, weights);
    const Eigen::Index d = rows.cols();
    Matrix out = Matrix::Zero(d, d);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index r = 0; r < d; ++r) {
            for (Eigen::Index c = 0; c < d; ++c) {
                out(r, c) += weights(i) * rows(i, r) * rows(i, c);
            }
        }
    }
    return out;
}

Matrix weighted_cross(const Matrix& rows, const Vector& weights, const Matrix& outputs) {
    check_rows(rows, weights);
    if (outputs.rows() != rows.rows()) {
        throw InvalidInput("weighted_cross: output count mismatch");
    }
    Matrix out = Matrix::Zero(rows.cols(), outputs.cols());
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index r = 0; r < rows.cols(); ++r) {
            for (Eigen::Index k = 0; k < outputs.cols(); ++k) {
                out(r, k) += weights(i) * rows(i, r) * outputs(i, k);
            }
        }
    }
    return out;
}

void forgetting_outer_update(Matrix& xi1, double mu, const Vector& sigma, double clamp) {
    const Eigen::Index d = sigma.size();
    if (xi1.rows() != d || xi1.cols() != d) {
        throw InvalidInput("forgetting_outer_update: shape mismatch");
    }
    const double s = outer_scale(sigma, clamp);
    Matrix next(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) {
            const Eigen::Index lo = std::min(r, c);
            const Eigen::Index hi = std::max(r, c);
            next(r, c) = 0.5 * mu * (xi1(r, c) + xi1(c, r)) + (s * sigma(lo)) * sigma(hi);
        }
    }
    xi1 = std::move(next);
}

}  // namespace reference

}  // namespace aimreg::kernels
