#pragma once

// Identifier verification harness.
//
// The core process samples an exosystem at clock ticks and feeds the
// identifier the ideal pairs (tau(w), u*(w)), optionally perturbed. tau and u*
// are supplied by the caller: they are test fixtures, never used by the
// closed loop itself.

#include "aimreg/core.hpp"
#include "aimreg/hybrid.hpp"
#include "aimreg/identifier.hpp"
#include "aimreg/plant.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aimreg::harness {

struct CoreSample {
    std::size_t j = 0;
    double t = 0.0;
    Vector w;
    Vector win;
    Vector wout;
};

/// Perturbations indexed by jump count. Empty functions mean zero.
struct Disturbance {
    std::function<Vector(std::size_t j)> d_in;
    std::function<Vector(std::size_t j)> d_out;
};

struct CoreProcessRun {
    hybrid::ClockConfig clock;
    plant::ExoSpec exo;
    Vector w0;
    plant::ExoField tau_eval;
    plant::ExoField ustar_eval;
};

/// One sample per clock tick in (0, horizon], taken at the pre-jump point.
std::vector<CoreSample> run_core_process(const CoreProcessRun& run, double horizon, double dt,
                                         const Disturbance& disturbance = {});

/// Forgetting-weighted regularized LS minimizer rebuilt from scratch:
/// (Omega + sum_i mu^{n-i-1} s_i s_i^T)^+ sum_i mu^{n-i-1} s_i u_i^T, with
/// n = samples.size() and s_i = sigma(win_i).
Vector brute_force_cost_minimizer(std::span<const CoreSample> samples,
                                  const identifier::PolyRegressor& regressor, double mu_f,
                                  const Matrix& omega, double cutoff_rel = 1e-12);

/// Window minimizer of sum_i |u_i - theta^T sigma_i|^2 + theta^T Omega theta,
/// solved as the augmented least-squares problem [Phi; Omega^{1/2}] theta = [U; 0]
/// with a complete orthogonal decomposition (minimum-norm solution).
Vector brute_force_window_minimizer(std::span<const CoreSample> window,
                                    const identifier::PolyRegressor& regressor,
                                    const Matrix& omega);

/// An identifier factory together with its optimality oracle.
struct IdentifierUnderTest {
    std::function<std::unique_ptr<identifier::Identifier>()> make;
    /// Optimal theta given every sample fed so far.
    std::function<Vector(std::span<const CoreSample>)> oracle;
    /// First sample count from which optimality must hold.
    std::function<std::size_t(std::span<const CoreSample>)> j_star;
};

IdentifierUnderTest ls_under_test(const identifier::PolyRegressor& regressor, std::size_t d_y,
                                  const identifier::LsConfig& config, double pe_epsilon = 1e-6);

IdentifierUnderTest minibatch_under_test(const identifier::PolyRegressor& regressor,
                                         std::size_t d_y, std::size_t n_w, const Matrix& omega,
                                         double cutoff_rel = 1e-12);

struct VerifyOptions {
    double horizon = 10.0;
    double dt = 1e-3;
    std::size_t trials = 10;
    std::uint64_t seed = 1;
    double optimality_tol = 1e-8;
    /// Sup norm of the random input perturbations used for the ISS estimate.
    double disturbance_level = 1e-3;
    double fd_step = 1e-6;
    double fd_tol = 1e-5;
};

struct IdentifierReport {
    bool optimality = false;
    bool stability = false;
    bool regularity = false;

    std::size_t j_star = 0;
    std::size_t samples = 0;
    double max_optimality_error = 0.0;
    /// max_j (|dxi(j)| / |dxi(0)|)^(1/j) over the contraction trials.
    double contraction_rate = 0.0;
    double final_contraction_ratio = 0.0;
    /// sup_j |dxi(j)| / disturbance level, maximized over trials.
    double iss_gain = 0.0;
    double theta_map_lipschitz = 0.0;
    double max_jacobian_error = 0.0;
    std::vector<std::string> notes;

    std::string to_text() const;
};

/// Definition-style check of the identifier requirement: optimality against
/// the oracle from j*, contraction and empirical ISS of the internal state,
/// and regularity of the output map and the model Jacobian.
IdentifierReport verify_identifier_requirement(const IdentifierUnderTest& iut,
                                               const CoreProcessRun& run,
                                               const VerifyOptions& options = {});

}  // namespace aimreg::harness
