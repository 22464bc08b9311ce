#pragma once

// Normal-form plants driven by an exosystem, and the two shipped scenarios:
// the forced Van der Pol oscillator tracking a triangular wave, and a linear
// plant driven by a harmonic exosystem whose ideal feedforward is linear.
//
//   w' = s(w)
//   z' = f(w, z, x)
//   x' = A x + B (q(w, z, x) + b(w, z, x) u),   y = C x
//
// with (A, B, C) the chain of r integrators of dimension d_y.

#include "aimreg/core.hpp"

#include <functional>
#include <span>
#include <tuple>
#include <vector>

namespace aimreg::plant {

using ExoField = std::function<Vector(const Vector& w)>;
using PlantField = std::function<Vector(const Vector& w, const Vector& z, const Vector& x)>;
using PlantMatrixField = std::function<Matrix(const Vector& w, const Vector& z, const Vector& x)>;

struct ExoSpec {
    std::size_t d_w = 0;
    ExoField s;
};

struct PlantPoint {
    Vector w;
    Vector z;
    Vector x;
};

struct PlantSpec {
    std::size_t d_w = 0;
    std::size_t d_z = 0;
    std::size_t d_y = 1;
    std::size_t r = 1;

    ExoField eval_s;
    PlantField eval_f;  // unused when d_z == 0
    PlantField eval_q;
    PlantMatrixField eval_b;

    Matrix b_bar;
    double mu_b = 0.5;

    /// Ideal steady-state feedforward u*(w) = -b(w, pi(w), 0)^{-1} q(w, pi(w), 0),
    /// when the scenario knows it in closed form. Optional.
    ExoField eval_ustar;
    /// Reference the first output tracks (for reporting only). Optional.
    ExoField eval_reference;

    std::size_t d_x() const noexcept { return r * d_y; }
    ExoSpec exo() const { return {d_w, eval_s}; }

    /// Structural checks, plus the sampled bound |(b - b_bar) b_bar^{-1}| <= 1 - mu_b
    /// at each test point. Throws InvalidConfig on violation.
    void validate(std::span<const PlantPoint> test_points = {}) const;
};

/// Chain-of-integrators matrices (A, B, C) for r blocks of dimension d_y.
std::tuple<Matrix, Matrix, Matrix> build_chain_matrices(std::size_t r, std::size_t d_y);

/// Largest |(b - b_bar) b_bar^{-1}| (spectral norm) over the test points.
double max_b_deviation(const PlantSpec& plant, std::span<const PlantPoint> test_points);

// ---------------------------------------------------------------------------
// Triangular-wave reference
// ---------------------------------------------------------------------------

/// p1*(w) = 2 |w| asin(w_1 / |w|), with p1*(0) = 0.
double triangular_output(const Vector& w);

/// How to treat points where w_2 ~ 0 (the wave peaks, where p1* has a kink).
enum class BranchPolicy {
    /// Throw BranchPointError inside the tolerance band.
    reject,
    /// Use the limit from the side the exosystem flow is heading into.
    one_sided,
};

/// Relative tolerance |w_2| / |w| defining the branch-point band.
inline constexpr double kBranchTolerance = 1e-9;

struct LieDerivatives {
    double first = 0.0;   // L_s p1*
    double second = 0.0;  // L_s^2 p1*
};

/// First and second Lie derivatives of p1* along s(w) = (w_2, -rho w_1).
LieDerivatives lie_derivatives_p1star(const Vector& w, double rho,
                                      BranchPolicy policy = BranchPolicy::reject);

/// Quadratic exosystem invariant (rho w_1^2 + w_2^2) / 2.
double exo_invariant(const Vector& w, double rho);

Vector harmonic_field(const Vector& w, double rho);

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

struct VdpParams {
    double a = 2.0;
    double rho = 2.0;
    /// Known parameter ranges; a must lie in a_range, rho in rho_range.
    double a_min = 0.5;
    double a_max = 4.0;
    double rho_min = 0.5;
    double rho_max = 4.0;
};

/// Forced Van der Pol oscillator p1'' = -p1 + a (1 - p1^2) p1' + u, written in
/// the error coordinates x = (p1 - p1*(w), p2 - L_s p1*(w)).
PlantSpec build_vdp_scenario(const VdpParams& params);

/// Van der Pol state p mapped to the error coordinates x.
Vector vdp_error_coordinates(const Vector& p, const Vector& w, double rho);

struct LinearHarmonicParams {
    double omega = 1.0;
    /// u*(w) = c^T w
    Vector c = Vector::Constant(2, 1.0);
    /// q(w, x) = -stiffness * x_1 - c^T w
    double stiffness = 1.0;
};

/// Double integrator with linear stiffness driven by a harmonic exosystem
/// w' = omega (w_2, -w_1); the ideal feedforward is linear in w.
PlantSpec build_linear_harmonic_scenario(const LinearHarmonicParams& params);

/// Exosystem matrix S of the linear harmonic scenario.
Matrix harmonic_matrix(double omega);

/// Solve Pi S = F Pi + G c^T for Pi, so that eta = Pi w is the steady state of
/// eta' = F eta + G c^T w along w' = S w.
Matrix internal_model_steady_state(const Matrix& s, const Matrix& f, const Matrix& g,
                                   const Matrix& c_t);

}  // namespace aimreg::plant
