#pragma once

// Small dense linear algebra and fixed-step integration.

#include "aimreg/core.hpp"

#include <complex>
#include <span>
#include <vector>

namespace aimreg::numerics {

/// Default relative singular-value cutoff for pseudoinverses and rank tests.
inline constexpr double kDefaultCutoffRel = 1e-12;

/// Moore-Penrose pseudoinverse via SVD. Singular values below
/// cutoff_rel * sigma_max are treated as zero.
Matrix pseudoinverse(const Matrix& m, double cutoff_rel = kDefaultCutoffRel);

/// Pseudoinverse of a symmetric matrix applied to the columns of rhs.
///
/// For symmetric input the singular values are the absolute eigenvalues, so a
/// self-adjoint eigendecomposition gives the same cutoff semantics as
/// pseudoinverse() at a fraction of the cost. When the matrix is well
/// conditioned relative to the cutoff, a Cholesky solve is used instead.
Matrix symmetric_pseudo_solve(const Matrix& sym, const Matrix& rhs,
                              double cutoff_rel = kDefaultCutoffRel);

/// Singular values in descending order.
Vector singular_values(const Matrix& m);

/// Smallest singular value above cutoff_rel * sigma_max, or 0 if none.
double min_nonzero_singular_value(const Matrix& m, double cutoff_rel = kDefaultCutoffRel);

std::size_t matrix_rank(const Matrix& m, double cutoff_rel = kDefaultCutoffRel);

/// Monic polynomial coefficients (highest power first, leading 1 omitted)
/// whose roots are the given reals: (s - r_1)...(s - r_n).
std::vector<double> poly_from_roots(std::span<const double> roots);

/// Roots of s^n + c_1 s^{n-1} + ... + c_n via companion-matrix eigenvalues.
std::vector<std::complex<double>> poly_roots(std::span<const double> monic_tail);

/// State-feedback gain K for the chain of r integrators of dimension d_y such
/// that eig(A - B K) equals `desired` (repeated for every output channel).
/// Only real, strictly negative poles are accepted.
Matrix place_poles(std::size_t r, std::size_t d_y, std::span<const double> desired);

std::vector<std::complex<double>> eigenvalues(const Matrix& m);

bool is_hurwitz(const Matrix& m);

/// Kalman rank test on [G, FG, ..., F^{n-1} G].
bool is_controllable(const Matrix& f, const Matrix& g, double cutoff_rel = 1e-10);

Matrix controllability_matrix(const Matrix& f, const Matrix& g);

/// Classical fourth-order Runge-Kutta step from (t, state) over dt.
/// Throws IntegrationBlowup if any stage evaluation is non-finite.
Vector rk4_step(const VectorField& field, double t, const Vector& state, double dt);

/// Norm clamp: v unchanged when |v| <= radius, otherwise rescaled onto the sphere.
Vector clamp_norm(const Vector& v, double radius);
Matrix clamp_norm(const Matrix& m, double radius);

}  // namespace aimreg::numerics
