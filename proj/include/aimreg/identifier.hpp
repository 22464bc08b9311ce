#pragma once

// Discrete-time identifiers updated at clock ticks.
//
// Two constructions are provided:
//  - a recursive least-squares identifier with forgetting factor and
//    quadratic regularization for models linear in the parameters;
//  - a mini-batch identifier that keeps the last N_w samples in a pair of
//    shift registers and re-runs a batch solver on the window.
//
// Both are exposed through the Identifier interface used by the closed-loop
// simulator and by the verification harness.

#include "aimreg/core.hpp"

#include <deque>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aimreg::identifier {

// ---------------------------------------------------------------------------
// Model sets
// ---------------------------------------------------------------------------

/// Parametrized model gamma_hat(theta, eta) : R^d_eta -> R^d_y, C^1 in eta.
class IdentifierModel {
public:
    virtual ~IdentifierModel() = default;

    virtual std::size_t d_theta() const = 0;
    virtual std::size_t d_eta() const = 0;
    virtual std::size_t d_y() const = 0;

    virtual Vector gamma_hat(const Vector& theta, const Vector& eta) const = 0;

    /// d gamma_hat / d eta, a d_y x d_eta matrix.
    virtual Matrix dgamma_deta(const Vector& theta, const Vector& eta) const = 0;

    /// (d gamma_hat / d eta) * direction. Override when cheaper than forming
    /// the Jacobian.
    virtual Vector gamma_directional(const Vector& theta, const Vector& eta,
                                     const Vector& direction) const {
        return dgamma_deta(theta, eta) * direction;
    }
};

enum class RegressorMode {
    /// Every non-decreasing multi-index of each odd order n <= N.
    full_multiset,
    /// Only pure powers eta_i^n for odd n <= N.
    pure_powers,
};

/// Polynomial regressor sigma(eta) with odd orders up to N.
///
/// Components are grouped by order (1, 3, 5, ...) and, inside each order,
/// listed in lexicographic order of their non-decreasing multi-index.
class PolyRegressor {
public:
    PolyRegressor(std::size_t d_eta, std::size_t max_order, RegressorMode mode);

    std::size_t size() const noexcept { return exponents_.size(); }
    std::size_t d_eta() const noexcept { return d_eta_; }
    std::size_t max_order() const noexcept { return max_order_; }
    RegressorMode mode() const noexcept { return mode_; }

    /// Zero-based multi-indices, one per component.
    const std::vector<std::vector<std::size_t>>& index_list() const noexcept { return indices_; }

    Vector eval(const Vector& eta) const;

    /// d sigma / d eta, size() x d_eta.
    Matrix jacobian(const Vector& eta) const;

    /// (d sigma / d eta) * direction without forming the Jacobian.
    Vector directional(const Vector& eta, const Vector& direction) const;

private:
    std::size_t d_eta_;
    std::size_t max_order_;
    RegressorMode mode_;
    std::vector<std::vector<std::size_t>> indices_;
    std::vector<std::vector<int>> exponents_;
};

/// Throws InvalidConfig for even or zero N.
PolyRegressor build_poly_regressor(std::size_t d_eta, std::size_t max_order, RegressorMode mode);

/// gamma_hat_k(theta, eta) = theta_k^T sigma(eta), with theta the stack of
/// d_y blocks of length sigma.size().
class LinearInParamsModel final : public IdentifierModel {
public:
    LinearInParamsModel(PolyRegressor regressor, std::size_t d_y);

    std::size_t d_theta() const override { return regressor_.size() * d_y_; }
    std::size_t d_eta() const override { return regressor_.d_eta(); }
    std::size_t d_y() const override { return d_y_; }

    Vector gamma_hat(const Vector& theta, const Vector& eta) const override;
    Matrix dgamma_deta(const Vector& theta, const Vector& eta) const override;
    Vector gamma_directional(const Vector& theta, const Vector& eta,
                             const Vector& direction) const override;

    const PolyRegressor& regressor() const noexcept { return regressor_; }

private:
    PolyRegressor regressor_;
    std::size_t d_y_;
};

/// eps(theta, w) = u*(w) - gamma_hat(theta, tau(w)).
Vector prediction_error(const IdentifierModel& model, const Vector& theta, const Vector& tau_w,
                        const Vector& ustar_w);

// ---------------------------------------------------------------------------
// Least squares with forgetting
// ---------------------------------------------------------------------------

struct LsIdentifierState {
    Matrix xi1;    // d_sigma x d_sigma, symmetric PSD
    Vector xi2;    // d_sigma * d_y, channel blocks stacked
    Vector theta;  // d_sigma * d_y

    double mu_f = 0.99;
    Matrix omega;
    double rho_sigma = 1e6;
    double rho_lambda = 1e6;
    double theta_bound = 1e6;
    double cutoff_rel = 1e-12;

    std::size_t d_y() const noexcept {
        return xi1.rows() == 0 ? 0 : static_cast<std::size_t>(xi2.size() / xi1.rows());
    }
};

struct LsConfig {
    double mu_f = 0.99;
    /// Diagonal regularization Omega = omega_scale * I unless omega is set.
    double omega_scale = 1e-3;
    Matrix omega;
    double rho_sigma = 1e6;
    double rho_lambda = 1e6;
    double theta_bound = 1e6;
    double cutoff_rel = 1e-12;
};

/// Zero-initialized state for a regressor of length d_sigma and d_y outputs.
LsIdentifierState make_ls_state(std::size_t d_sigma, std::size_t d_y, const LsConfig& config);

/// theta = clamp((xi1 + omega)^+ xi2_k, theta_bound) for every channel block k.
Vector theta_map_ls(const Matrix& xi1, const Vector& xi2, const Matrix& omega, double theta_bound,
                    double cutoff_rel);

/// One jump: xi1+ = mu xi1 + Sigma(sigma(eta)), xi2+ = mu xi2 + lambda(sigma(eta), u),
/// theta+ = theta_map_ls(xi+). Sigma and lambda are norm-clamped at rho_sigma
/// and rho_lambda.
LsIdentifierState ls_jump(const LsIdentifierState& state, const Vector& eta_in, const Vector& u_out,
                          const PolyRegressor& regressor);

/// Minimum non-zero singular value of omega + sum_i mu^{j-i-1} sigma_i sigma_i^T.
double pe_margin(std::span<const Vector> regressor_samples, double mu_f, const Matrix& omega,
                 double cutoff_rel = 1e-12);

/// Persistence-of-excitation test pe_margin(...) >= epsilon.
bool pe_check(std::span<const Vector> regressor_samples, double mu_f, const Matrix& omega,
              double epsilon, double cutoff_rel = 1e-12);

// ---------------------------------------------------------------------------
// Mini-batch
// ---------------------------------------------------------------------------

/// A batch algorithm mapping a full window of (eta, u) samples to theta.
using BatchSolver =
    std::function<Vector(std::span<const Vector> window_in, std::span<const Vector> window_out)>;

/// Regularized weighted least squares on a window:
///   argmin_theta sum_i w_i |u_i - theta^T sigma(eta_i)|^2 + theta^T Omega theta
/// via the normal equations and a pseudoinverse. Empty weights mean all ones.
Vector batch_solver_ls(std::span<const Vector> window_in, std::span<const Vector> window_out,
                       const PolyRegressor& regressor, const Matrix& omega,
                       std::span<const double> weights = {}, double cutoff_rel = 1e-12);

/// First-order optimality residual of theta for the window cost above,
/// relative to the size of the normal-equation terms.
double batch_ls_optimality_residual(std::span<const Vector> window_in,
                                    std::span<const Vector> window_out,
                                    const PolyRegressor& regressor, const Matrix& omega,
                                    std::span<const double> weights, const Vector& theta);

struct MiniBatchState {
    std::size_t n_w = 0;
    std::deque<Vector> window_in;
    std::deque<Vector> window_out;
    std::size_t fill_count = 0;
    Vector theta;
    BatchSolver solver;
};

MiniBatchState make_minibatch_state(std::size_t n_w, std::size_t d_theta, BatchSolver solver);

/// Shift the newest sample into both registers, dropping the oldest once the
/// window is full; once fill_count >= n_w, theta+ = solver(window).
MiniBatchState mb_jump(const MiniBatchState& state, const Vector& eta_in, const Vector& u_out);

// ---------------------------------------------------------------------------
// Polymorphic interface
// ---------------------------------------------------------------------------

class Identifier {
public:
    virtual ~Identifier() = default;

    virtual void jump(const Vector& eta_in, const Vector& u_out) = 0;
    virtual const Vector& theta() const = 0;
    virtual const IdentifierModel& model() const = 0;

    /// Flattened internal state xi, for stability and regularity checks.
    virtual Vector state_vector() const = 0;
    virtual void set_state_vector(const Vector& xi) = 0;
    /// Output map evaluated at an arbitrary state vector.
    virtual Vector theta_map(const Vector& xi) const = 0;

    virtual std::unique_ptr<Identifier> clone() const = 0;
    virtual std::string name() const = 0;
};

class LsIdentifier final : public Identifier {
public:
    LsIdentifier(PolyRegressor regressor, std::size_t d_y, const LsConfig& config);

    void jump(const Vector& eta_in, const Vector& u_out) override;
    const Vector& theta() const override { return state_.theta; }
    const IdentifierModel& model() const override { return model_; }
    Vector state_vector() const override;
    void set_state_vector(const Vector& xi) override;
    Vector theta_map(const Vector& xi) const override;
    std::unique_ptr<Identifier> clone() const override;
    std::string name() const override { return "least-squares"; }

    const LsIdentifierState& state() const noexcept { return state_; }

private:
    LinearInParamsModel model_;
    LsIdentifierState state_;
};

class MiniBatchIdentifier final : public Identifier {
public:
    MiniBatchIdentifier(std::shared_ptr<const IdentifierModel> model, std::size_t n_w,
                        BatchSolver solver);

    void jump(const Vector& eta_in, const Vector& u_out) override;
    const Vector& theta() const override { return state_.theta; }
    const IdentifierModel& model() const override { return *model_; }
    /// Window contents, zero-padded in front while the window is filling.
    Vector state_vector() const override;
    /// Loads a full window; fill_count becomes n_w.
    void set_state_vector(const Vector& xi) override;
    Vector theta_map(const Vector& xi) const override;
    std::unique_ptr<Identifier> clone() const override;
    std::string name() const override { return "mini-batch"; }

    const MiniBatchState& state() const noexcept { return state_; }

private:
    std::shared_ptr<const IdentifierModel> model_;
    MiniBatchState state_;
};

/// Mini-batch identifier over a linear-in-parameters model with the default
/// regularized least-squares batch solver.
std::unique_ptr<MiniBatchIdentifier> make_ls_minibatch(PolyRegressor regressor, std::size_t d_y,
                                                       std::size_t n_w, const Matrix& omega,
                                                       double cutoff_rel = 1e-12);

}  // namespace aimreg::identifier
