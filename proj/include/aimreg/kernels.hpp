#pragma once

// Data-parallel accumulation kernels for the least-squares identifier.
//
// The functions in aimreg::kernels are OpenMP-parallel; aimreg::kernels::reference
// holds plain serial loops with the same contracts. The reference versions are
// kept for tests and for the benchmark target, not for production paths.

#include "aimreg/core.hpp"

namespace aimreg::kernels {

/// sum_i weights(i) * rows(i)^T rows(i), with samples stored as rows.
Matrix weighted_gram(const Matrix& rows, const Vector& weights);

/// sum_i weights(i) * rows(i)^T outputs(i); result is d x d_out.
Matrix weighted_cross(const Matrix& rows, const Vector& weights, const Matrix& outputs);

/// In-place forgetting update xi1 <- mu * xi1 + s * sigma sigma^T, where s
/// scales the outer product down to Frobenius norm `clamp` when it exceeds it.
/// The result is exactly symmetric.
void forgetting_outer_update(Matrix& xi1, double mu, const Vector& sigma, double clamp);

namespace reference {

Matrix weighted_gram(const Matrix& rows, const Vector& weights);
Matrix weighted_cross(const Matrix& rows, const Vector& weights, const Matrix& outputs);
void forgetting_outer_update(Matrix& xi1, double mu, const Vector& sigma, double clamp);

}  // namespace reference

}  // namespace aimreg::kernels
