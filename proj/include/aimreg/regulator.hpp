#pragma once

// Continuous-time controller stack: saturated linear stabilizer, internal
// model unit eta' = F eta + G u, and the extended high-gain observer that
// estimates (x, sigma) with the consistency term psi.

#include "aimreg/core.hpp"
#include "aimreg/identifier.hpp"

#include <vector>

namespace aimreg::regulator {

struct StabilizerConfig {
    Matrix K;  // kappa(x) = -K x
    double sat_level = 100.0;
    Matrix b_bar_inv;

    /// Throws InvalidConfig unless A - B K is Hurwitz for the chain of r
    /// integrators of dimension d_y and sat_level > 0.
    void validate(std::size_t r, std::size_t d_y) const;
};

/// Stabilizer whose closed-loop poles (per channel) are `poles`.
StabilizerConfig make_stabilizer(std::size_t r, std::size_t d_y, const std::vector<double>& poles,
                                 double sat_level, const Matrix& b_bar);

struct InternalModelConfig {
    Matrix F;
    Matrix G;

    std::size_t d_eta() const noexcept { return static_cast<std::size_t>(F.rows()); }
    /// F Hurwitz and (F, G) controllable, else InvalidConfig.
    void validate() const;
};

/// Bidiagonal F (diagonal -1, superdiagonal +1) with G holding the last d_y
/// unit vectors as columns.
InternalModelConfig default_internal_model(std::size_t d_eta, std::size_t d_y);

/// 2 (d_w + d_z + 1)
std::size_t default_eta_dimension(std::size_t d_w, std::size_t d_z);

struct ObserverConfig {
    double ell = 1.0;
    /// One list (h_1, ..., h_{r+1}) per output channel.
    std::vector<std::vector<double>> h_coeffs;
    double psi_bar = 100.0;

    /// Checks ell >= 1, psi_bar > 0, and that every channel polynomial
    /// s^{r+1} + h_1 s^r + ... + h_{r+1} has real negative roots.
    void validate(std::size_t r, std::size_t d_y) const;
};

struct ObserverGains {
    Matrix Lambda;       // diag(ell I, ..., ell^r I)
    Matrix H;            // r d_y x d_y, stacked diag(h_i)
    Matrix H_last;       // d_y x d_y, diag(h_{r+1})
    double ell_top = 1;  // ell^{r+1}
};

ObserverGains build_observer_gains(const ObserverConfig& obs, std::size_t r, std::size_t d_y);

struct RegulatorState {
    double varsigma = 0.0;
    Vector eta;
    Vector x_hat;
    Vector sigma_hat;
    Vector theta;
};

/// Norm clamp onto the ball of radius level.
Vector saturate(const Vector& s, double level);

/// u = b_bar^{-1} sat(-sigma_hat - K x_hat, M).
Vector control_output(const RegulatorState& state, const StabilizerConfig& stab);

Vector internal_model_flow(const Vector& eta, const Vector& u, const InternalModelConfig& im);

/// sat((d gamma_hat / d eta)(theta, eta) (F eta + G u), psi_bar).
Vector psi_consistency(const Vector& theta, const Vector& eta, const Vector& u,
                       const identifier::IdentifierModel& model, const InternalModelConfig& im,
                       double psi_bar);

struct ObserverPlantData {
    Matrix A;
    Matrix B;
    Matrix b_bar;
};

struct ObserverDerivative {
    Vector x_hat_dot;
    Vector sigma_hat_dot;
};

/// x_hat' = A x_hat + B (sigma_hat + b_bar u) + Lambda H (y - x_hat_1)
/// sigma_hat' = -b_bar psi + ell^{r+1} H_{r+1} (y - x_hat_1)
ObserverDerivative observer_flow(const RegulatorState& state, const Vector& y, const Vector& u,
                                 const Vector& psi, const ObserverPlantData& plant,
                                 const ObserverGains& gains);

/// Conservative saturation level bound_c + bound_bk + rho2.
double compute_sat_level(double bound_c, double bound_bk, double rho2);

/// Jump: varsigma resets to 0, everything else is held. The identifier
/// update of theta happens outside, in the closed-loop jump map.
RegulatorState regulator_jump(const RegulatorState& state);

}  // namespace aimreg::regulator
