#include "aimreg/regulator.hpp"

#include "aimreg/numerics.hpp"
#include "aimreg/plant.hpp"

#include <cmath>
#include <sstream>

namespace aimreg::regulator {

void StabilizerConfig::validate(std::size_t r, std::size_t d_y) const {
    const auto n = static_cast<Eigen::Index>(r * d_y);
    const auto m = static_cast<Eigen::Index>(d_y);
    if (K.rows() != m || K.cols() != n) {
        throw InvalidConfig("stabilizer: K must be d_y x (r d_y)");
    }
    if (b_bar_inv.rows() != m || b_bar_inv.cols() != m || !b_bar_inv.allFinite()) {
        throw InvalidConfig("stabilizer: b_bar_inv must be d_y x d_y");
    }
    if (!(sat_level > 0.0) || !std::isfinite(sat_level)) {
        throw InvalidConfig("stabilizer: saturation level must be positive");
    }
    const auto [a, b, c] = plant::build_chain_matrices(r, d_y);
    if (!numerics::is_hurwitz(a - b * K)) {
        throw InvalidConfig("stabilizer: A - B K is not Hurwitz");
    }
}

StabilizerConfig make_stabilizer(std::size_t r, std::size_t d_y, const std::vector<double>& poles,
                                 double sat_level, const Matrix& b_bar) {
    StabilizerConfig s;
    try {
        s.K = numerics::place_poles(r, d_y, poles);
    } catch (const InvalidInput& e) {
        throw InvalidConfig(std::string("stabilizer: ") + e.what());
    }
    s.sat_level = sat_level;
    s.b_bar_inv = b_bar.inverse();
    s.validate(r, d_y);
    return s;
}

void InternalModelConfig::validate() const {
    const Eigen::Index n = F.rows();
    if (n == 0 || F.cols() != n || G.rows() != n || G.cols() == 0) {
        throw InvalidConfig("internal model: F must be square and G must have d_eta rows");
    }
    if (!F.allFinite() || !G.allFinite()) {
        throw InvalidConfig("internal model: non-finite F or G");
    }
    if (!numerics::is_hurwitz(F)) {
        throw InvalidConfig("internal model: F is not Hurwitz");
    }
    if (!numerics::is_controllable(F, G)) {
        throw InvalidConfig("internal model: (F, G) is not controllable");
    }
}

InternalModelConfig default_internal_model(std::size_t d_eta, std::size_t d_y) {
    if (d_eta == 0 || d_y == 0 || d_y > d_eta) {
        throw InvalidConfig("internal model: need 0 < d_y <= d_eta");
    }
    const auto n = static_cast<Eigen::Index>(d_eta);
    const auto m = static_cast<Eigen::Index>(d_y);
    InternalModelConfig im;
    im.F = -Matrix::Identity(n, n);
    for (Eigen::Index i = 0; i + 1 < n; ++i) {
        im.F(i, i + 1) = 1.0;
    }
    im.G = Matrix::Zero(n, m);
    im.G.bottomRows(m).setIdentity();
    return im;
}

std::size_t default_eta_dimension(std::size_t d_w, std::size_t d_z) {
    return 2 * (d_w + d_z + 1);
}

void ObserverConfig::validate(std::size_t r, std::size_t d_y) const {
    if (!(ell >= 1.0) || !std::isfinite(ell)) {
        throw InvalidConfig("observer: ell must be >= 1");
    }
    if (!(psi_bar > 0.0) || !std::isfinite(psi_bar)) {
        throw InvalidConfig("observer: psi_bar must be positive");
    }
    if (h_coeffs.size() != d_y) {
        throw InvalidConfig("observer: need one coefficient list per output channel");
    }
    for (std::size_t ch = 0; ch < d_y; ++ch) {
        const auto& h = h_coeffs[ch];
        if (h.size() != r + 1) {
            std::ostringstream os;
            os << "observer: channel " << ch << " needs " << r + 1 << " coefficients";
            throw InvalidConfig(os.str());
        }
        // Repeated roots come out of the companion eigensolver with an
        // imaginary part of order eps^(1/k), hence the loose tolerance.
        for (const auto& root : numerics::poly_roots(h)) {
            const double scale = 1.0 + std::abs(root);
            if (std::abs(root.imag()) > 1e-4 * scale || !(root.real() < 0.0)) {
                std::ostringstream os;
                os << "observer: channel " << ch << " has characteristic root " << root.real()
                   << (root.imag() < 0 ? " - " : " + ") << std::abs(root.imag())
                   << "i; roots must be real and negative";
                throw InvalidConfig(os.str());
            }
        }
    }
}

ObserverGains build_observer_gains(const ObserverConfig& obs, std::size_t r, std::size_t d_y) {
    obs.validate(r, d_y);
    const auto m = static_cast<Eigen::Index>(d_y);
    const auto n = static_cast<Eigen::Index>(r * d_y);
    ObserverGains g;
    g.Lambda = Matrix::Zero(n, n);
    g.H = Matrix::Zero(n, m);
    g.H_last = Matrix::Zero(m, m);
    double p = 1.0;
    for (std::size_t i = 0; i < r; ++i) {
        p *= obs.ell;
        const auto row = static_cast<Eigen::Index>(i) * m;
        g.Lambda.block(row, row, m, m) = p * Matrix::Identity(m, m);
        for (Eigen::Index ch = 0; ch < m; ++ch) {
            g.H(row + ch, ch) = obs.h_coeffs[static_cast<std::size_t>(ch)][i];
        }
    }
    for (Eigen::Index ch = 0; ch < m; ++ch) {
        g.H_last(ch, ch) = obs.h_coeffs[static_cast<std::size_t>(ch)][r];
    }
    g.ell_top = p * obs.ell;
    return g;
}

Vector saturate(const Vector& s, double level) {
    if (!(level > 0.0)) {
        throw InvalidInput("saturate: level must be positive");
    }
    return numerics::clamp_norm(s, level);
}

Vector control_output(const RegulatorState& state, const StabilizerConfig& stab) {
    return stab.b_bar_inv * saturate(-state.sigma_hat - stab.K * state.x_hat, stab.sat_level);
}

Vector internal_model_flow(const Vector& eta, const Vector& u, const InternalModelConfig& im) {
    return im.F * eta + im.G * u;
}

Vector psi_consistency(const Vector& theta, const Vector& eta, const Vector& u,
                       const identifier::IdentifierModel& model, const InternalModelConfig& im,
                       double psi_bar) {
    const Vector eta_dot = internal_model_flow(eta, u, im);
    return saturate(model.gamma_directional(theta, eta, eta_dot), psi_bar);
}

ObserverDerivative observer_flow(const RegulatorState& state, const Vector& y, const Vector& u,
                                 const Vector& psi, const ObserverPlantData& plant,
                                 const ObserverGains& gains) {
    const Eigen::Index m = y.size();
    const Vector innov = y - state.x_hat.head(m);
    ObserverDerivative d;
    d.x_hat_dot = plant.A * state.x_hat + plant.B * (state.sigma_hat + plant.b_bar * u) +
                  gains.Lambda * (gains.H * innov);
    d.sigma_hat_dot = -plant.b_bar * psi + gains.ell_top * (gains.H_last * innov);
    return d;
}

double compute_sat_level(double bound_c, double bound_bk, double rho2) {
    if (bound_c < 0.0 || bound_bk < 0.0 || rho2 < 0.0) {
        throw InvalidInput("compute_sat_level: bounds must be non-negative");
    }
    return bound_c + bound_bk + rho2;
}

RegulatorState regulator_jump(const RegulatorState& state) {
    RegulatorState next = state;
    next.varsigma = 0.0;
    return next;
}

}  // namespace aimreg::regulator
