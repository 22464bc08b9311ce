#include "aimreg/identifier.hpp"

#include "aimreg/kernels.hpp"
#include "aimreg/numerics.hpp"

#include <cmath>
#include <sstream>

namespace aimreg::identifier {

namespace {

// Appends every non-decreasing multi-index of length n over {0..d-1} in
// lexicographic order.
void enumerate_multisets(std::size_t d, std::size_t n, std::vector<std::size_t>& prefix,
                         std::vector<std::vector<std::size_t>>& out) {
    if (prefix.size() == n) {
        out.push_back(prefix);
        return;
    }
    const std::size_t start = prefix.empty() ? 0 : prefix.back();
    for (std::size_t i = start; i < d; ++i) {
        prefix.push_back(i);
        enumerate_multisets(d, n, prefix, out);
        prefix.pop_back();
    }
}

Matrix stack_rows(std::span<const Vector> samples, Eigen::Index cols) {
    Matrix rows(static_cast<Eigen::Index>(samples.size()), cols);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i].size() != cols) {
            throw InvalidInput("sample dimension mismatch");
        }
        rows.row(static_cast<Eigen::Index>(i)) = samples[i].transpose();
    }
    return rows;
}

}  // namespace

// ---------------------------------------------------------------------------
// PolyRegressor
// ---------------------------------------------------------------------------

PolyRegressor::PolyRegressor(std::size_t d_eta, std::size_t max_order, RegressorMode mode)
    : d_eta_(d_eta), max_order_(max_order), mode_(mode) {
    if (d_eta == 0) {
        throw InvalidConfig("regressor: d_eta must be positive");
    }
    if (max_order == 0 || max_order % 2 == 0) {
        std::ostringstream os;
        os << "regressor: order N = " << max_order << " must be odd and positive";
        throw InvalidConfig(os.str());
    }
    for (std::size_t n = 1; n <= max_order; n += 2) {
        if (mode == RegressorMode::full_multiset) {
            std::vector<std::size_t> prefix;
            enumerate_multisets(d_eta, n, prefix, indices_);
        } else {
            for (std::size_t i = 0; i < d_eta; ++i) {
                indices_.emplace_back(n, i);
            }
        }
    }
    exponents_.reserve(indices_.size());
    for (const auto& idx : indices_) {
        std::vector<int> e(d_eta, 0);
        for (std::size_t i : idx) {
            ++e[i];
        }
        exponents_.push_back(std::move(e));
    }
}

Vector PolyRegressor::eval(const Vector& eta) const {
    if (static_cast<std::size_t>(eta.size()) != d_eta_) {
        throw InvalidInput("regressor: eta dimension mismatch");
    }
    Vector out(static_cast<Eigen::Index>(indices_.size()));
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        double p = 1.0;
        for (std::size_t i : indices_[k]) {
            p *= eta(static_cast<Eigen::Index>(i));
        }
        out(static_cast<Eigen::Index>(k)) = p;
    }
    return out;
}

Matrix PolyRegressor::jacobian(const Vector& eta) const {
    if (static_cast<std::size_t>(eta.size()) != d_eta_) {
        throw InvalidInput("regressor: eta dimension mismatch");
    }
    Matrix jac = Matrix::Zero(static_cast<Eigen::Index>(indices_.size()),
                              static_cast<Eigen::Index>(d_eta_));
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        const auto& e = exponents_[k];
        for (std::size_t m = 0; m < d_eta_; ++m) {
            if (e[m] == 0) {
                continue;
            }
            double p = static_cast<double>(e[m]);
            for (std::size_t l = 0; l < d_eta_; ++l) {
                const int pw = l == m ? e[l] - 1 : e[l];
                for (int q = 0; q < pw; ++q) {
                    p *= eta(static_cast<Eigen::Index>(l));
                }
            }
            jac(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(m)) = p;
        }
    }
    return jac;
}

Vector PolyRegressor::directional(const Vector& eta, const Vector& direction) const {
    if (static_cast<std::size_t>(eta.size()) != d_eta_ ||
        static_cast<std::size_t>(direction.size()) != d_eta_) {
        throw InvalidInput("regressor: dimension mismatch");
    }
    // Product rule over the factors of each monomial.
    Vector out(static_cast<Eigen::Index>(indices_.size()));
    for (std::size_t k = 0; k < indices_.size(); ++k) {
        const auto& idx = indices_[k];
        double acc = 0.0;
        for (std::size_t p = 0; p < idx.size(); ++p) {
            double term = direction(static_cast<Eigen::Index>(idx[p]));
            for (std::size_t q = 0; q < idx.size(); ++q) {
                if (q != p) {
                    term *= eta(static_cast<Eigen::Index>(idx[q]));
                }
            }
            acc += term;
        }
        out(static_cast<Eigen::Index>(k)) = acc;
    }
    return out;
}

PolyRegressor build_poly_regressor(std::size_t d_eta, std::size_t max_order, RegressorMode mode) {
    return PolyRegressor(d_eta, max_order, mode);
}

// ---------------------------------------------------------------------------
// LinearInParamsModel
// ---------------------------------------------------------------------------

LinearInParamsModel::LinearInParamsModel(PolyRegressor regressor, std::size_t d_y)
    : regressor_(std::move(regressor)), d_y_(d_y) {
    if (d_y == 0) {
        throw InvalidConfig("model: d_y must be positive");
    }
}

Vector LinearInParamsModel::gamma_hat(const Vector& theta, const Vector& eta) const {
    if (static_cast<std::size_t>(theta.size()) != d_theta()) {
        throw InvalidInput("model: theta dimension mismatch");
    }
    const Vector sigma = regressor_.eval(eta);
    const auto d = static_cast<Eigen::Index>(regressor_.size());
    Vector out(static_cast<Eigen::Index>(d_y_));
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        out(k) = theta.segment(k * d, d).dot(sigma);
    }
    return out;
}

Matrix LinearInParamsModel::dgamma_deta(const Vector& theta, const Vector& eta) const {
    if (static_cast<std::size_t>(theta.size()) != d_theta()) {
        throw InvalidInput("model: theta dimension mismatch");
    }
    const Matrix jac = regressor_.jacobian(eta);
    const auto d = static_cast<Eigen::Index>(regressor_.size());
    Matrix out(static_cast<Eigen::Index>(d_y_), jac.cols());
    for (Eigen::Index k = 0; k < out.rows(); ++k) {
        out.row(k) = theta.segment(k * d, d).transpose() * jac;
    }
    return out;
}

Vector LinearInParamsModel::gamma_directional(const Vector& theta, const Vector& eta,
                                              const Vector& direction) const {
    if (static_cast<std::size_t>(theta.size()) != d_theta()) {
        throw InvalidInput("model: theta dimension mismatch");
    }
    const Vector ds = regressor_.directional(eta, direction);
    const auto d = static_cast<Eigen::Index>(regressor_.size());
    Vector out(static_cast<Eigen::Index>(d_y_));
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        out(k) = theta.segment(k * d, d).dot(ds);
    }
    return out;
}

Vector prediction_error(const IdentifierModel& model, const Vector& theta, const Vector& tau_w,
                        const Vector& ustar_w) {
    return ustar_w - model.gamma_hat(theta, tau_w);
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

LsIdentifierState make_ls_state(std::size_t d_sigma, std::size_t d_y, const LsConfig& config) {
    if (d_sigma == 0 || d_y == 0) {
        throw InvalidConfig("ls: empty regressor or output");
    }
    if (!(config.mu_f > 0.0 && config.mu_f < 1.0)) {
        throw InvalidConfig("ls: forgetting factor must lie in (0, 1)");
    }
    if (!(config.rho_sigma > 0.0) || !(config.rho_lambda > 0.0) || !(config.theta_bound > 0.0)) {
        throw InvalidConfig("ls: clamp radii must be positive");
    }
    if (!(config.cutoff_rel > 0.0 && config.cutoff_rel < 1.0)) {
        throw InvalidConfig("ls: cutoff_rel must lie in (0, 1)");
    }
    const auto d = static_cast<Eigen::Index>(d_sigma);
    LsIdentifierState s;
    s.xi1 = Matrix::Zero(d, d);
    s.xi2 = Vector::Zero(d * static_cast<Eigen::Index>(d_y));
    s.theta = Vector::Zero(s.xi2.size());
    s.mu_f = config.mu_f;
    if (config.omega.size() != 0) {
        if (config.omega.rows() != d || config.omega.cols() != d || !config.omega.allFinite()) {
            throw InvalidConfig("ls: omega must be d_sigma x d_sigma");
        }
        if (!config.omega.isApprox(config.omega.transpose())) {
            throw InvalidConfig("ls: omega must be symmetric");
        }
        s.omega = config.omega;
    } else {
        if (!(config.omega_scale >= 0.0)) {
            throw InvalidConfig("ls: omega scale must be non-negative");
        }
        s.omega = config.omega_scale * Matrix::Identity(d, d);
    }
    s.rho_sigma = config.rho_sigma;
    s.rho_lambda = config.rho_lambda;
    s.theta_bound = config.theta_bound;
    s.cutoff_rel = config.cutoff_rel;
    return s;
}

Vector theta_map_ls(const Matrix& xi1, const Vector& xi2, const Matrix& omega, double theta_bound,
                    double cutoff_rel) {
    const Eigen::Index d = xi1.rows();
    if (xi1.cols() != d || omega.rows() != d || omega.cols() != d || d == 0 ||
        xi2.size() % d != 0) {
        throw InvalidInput("theta_map_ls: shape mismatch");
    }
    const Matrix sym = 0.5 * (xi1 + xi1.transpose()) + 0.5 * (omega + omega.transpose());
    const Eigen::Map<const Matrix> rhs(xi2.data(), d, xi2.size() / d);
    const Matrix sol = numerics::symmetric_pseudo_solve(sym, rhs, cutoff_rel);
    const Vector theta = Eigen::Map<const Vector>(sol.data(), sol.size());
    return numerics::clamp_norm(theta, theta_bound);
}

LsIdentifierState ls_jump(const LsIdentifierState& state, const Vector& eta_in, const Vector& u_out,
                          const PolyRegressor& regressor) {
    const Vector sigma = regressor.eval(eta_in);
    const Eigen::Index d = sigma.size();
    if (state.xi1.rows() != d) {
        throw InvalidInput("ls_jump: regressor does not match identifier state");
    }
    if (u_out.size() * d != state.xi2.size()) {
        throw InvalidInput("ls_jump: output dimension mismatch");
    }
    LsIdentifierState next = state;
    kernels::forgetting_outer_update(next.xi1, state.mu_f, sigma, state.rho_sigma);

    Vector lambda(state.xi2.size());
    for (Eigen::Index k = 0; k < u_out.size(); ++k) {
        lambda.segment(k * d, d) = sigma * u_out(k);
    }
    next.xi2 = state.mu_f * state.xi2 + numerics::clamp_norm(lambda, state.rho_lambda);
    next.theta = theta_map_ls(next.xi1, next.xi2, next.omega, next.theta_bound, next.cutoff_rel);
    return next;
}

double pe_margin(std::span<const Vector> regressor_samples, double mu_f, const Matrix& omega,
                 double cutoff_rel) {
    const Eigen::Index d = omega.rows();
    const std::size_t j = regressor_samples.size();
    Matrix gram = omega;
    if (j > 0) {
        const Matrix rows = stack_rows(regressor_samples, d);
        Vector weights(static_cast<Eigen::Index>(j));
        for (std::size_t i = 0; i < j; ++i) {
            weights(static_cast<Eigen::Index>(i)) = std::pow(mu_f, static_cast<double>(j - i - 1));
        }
        gram += kernels::weighted_gram(rows, weights);
    }
    return numerics::min_nonzero_singular_value(gram, cutoff_rel);
}

bool pe_check(std::span<const Vector> regressor_samples, double mu_f, const Matrix& omega,
              double epsilon, double cutoff_rel) {
    return pe_margin(regressor_samples, mu_f, omega, cutoff_rel) >= epsilon;
}

// ---------------------------------------------------------------------------
// Mini-batch
// ---------------------------------------------------------------------------

namespace {

struct NormalEquations {
    Matrix gram;
    Matrix cross;
};

NormalEquations window_normal_equations(std::span<const Vector> window_in,
                                        std::span<const Vector> window_out,
                                        const PolyRegressor& regressor, const Matrix& omega,
                                        std::span<const double> weights) {
    const std::size_t n = window_in.size();
    if (window_out.size() != n || n == 0) {
        throw InvalidInput("batch_solver_ls: window sizes differ or window empty");
    }
    if (!weights.empty() && weights.size() != n) {
        throw InvalidInput("batch_solver_ls: one weight per sample required");
    }
    const auto d = static_cast<Eigen::Index>(regressor.size());
    if (omega.rows() != d || omega.cols() != d) {
        throw InvalidInput("batch_solver_ls: omega shape mismatch");
    }
    const Eigen::Index m = window_out[0].size();
    Matrix phi(static_cast<Eigen::Index>(n), d);
    Matrix u(static_cast<Eigen::Index>(n), m);
    Vector w = Vector::Ones(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        phi.row(ii) = regressor.eval(window_in[i]).transpose();
        if (window_out[i].size() != m) {
            throw InvalidInput("batch_solver_ls: output dimension mismatch");
        }
        u.row(ii) = window_out[i].transpose();
        if (!weights.empty()) {
            w(ii) = weights[i];
        }
    }
    return {kernels::weighted_gram(phi, w) + omega, kernels::weighted_cross(phi, w, u)};
}

}  // namespace

Vector batch_solver_ls(std::span<const Vector> window_in, std::span<const Vector> window_out,
                       const PolyRegressor& regressor, const Matrix& omega,
                       std::span<const double> weights, double cutoff_rel) {
    const auto ne = window_normal_equations(window_in, window_out, regressor, omega, weights);
    const Matrix sol = numerics::pseudoinverse(ne.gram, cutoff_rel) * ne.cross;
    return Eigen::Map<const Vector>(sol.data(), sol.size());
}

double batch_ls_optimality_residual(std::span<const Vector> window_in,
                                    std::span<const Vector> window_out,
                                    const PolyRegressor& regressor, const Matrix& omega,
                                    std::span<const double> weights, const Vector& theta) {
    const auto ne = window_normal_equations(window_in, window_out, regressor, omega, weights);
    const Eigen::Map<const Matrix> th(theta.data(), ne.gram.rows(), ne.cross.cols());
    const double scale = ne.gram.norm() * th.norm() + ne.cross.norm();
    const double res = (ne.gram * th - ne.cross).norm();
    return scale > 0.0 ? res / scale : res;
}

MiniBatchState make_minibatch_state(std::size_t n_w, std::size_t d_theta, BatchSolver solver) {
    if (n_w == 0) {
        throw InvalidConfig("mini-batch: window length must be positive");
    }
    if (!solver) {
        throw InvalidConfig("mini-batch: missing batch solver");
    }
    MiniBatchState s;
    s.n_w = n_w;
    s.theta = Vector::Zero(static_cast<Eigen::Index>(d_theta));
    s.solver = std::move(solver);
    return s;
}

MiniBatchState mb_jump(const MiniBatchState& state, const Vector& eta_in, const Vector& u_out) {
    MiniBatchState next = state;
    next.window_in.push_back(eta_in);
    next.window_out.push_back(u_out);
    if (next.window_in.size() > next.n_w) {
        next.window_in.pop_front();
        next.window_out.pop_front();
    }
    ++next.fill_count;
    if (next.fill_count >= next.n_w) {
        const std::vector<Vector> win(next.window_in.begin(), next.window_in.end());
        const std::vector<Vector> wout(next.window_out.begin(), next.window_out.end());
        next.theta = next.solver(win, wout);
    }
    return next;
}

// ---------------------------------------------------------------------------
// Identifier implementations
// ---------------------------------------------------------------------------

LsIdentifier::LsIdentifier(PolyRegressor regressor, std::size_t d_y, const LsConfig& config)
    : model_(regressor, d_y), state_(make_ls_state(regressor.size(), d_y, config)) {}

void LsIdentifier::jump(const Vector& eta_in, const Vector& u_out) {
    state_ = ls_jump(state_, eta_in, u_out, model_.regressor());
}

Vector LsIdentifier::state_vector() const {
    Vector xi(state_.xi1.size() + state_.xi2.size());
    xi.head(state_.xi1.size()) = Eigen::Map<const Vector>(state_.xi1.data(), state_.xi1.size());
    xi.tail(state_.xi2.size()) = state_.xi2;
    return xi;
}

void LsIdentifier::set_state_vector(const Vector& xi) {
    const Eigen::Index n1 = state_.xi1.size();
    if (xi.size() != n1 + state_.xi2.size()) {
        throw InvalidInput("LsIdentifier: state vector size mismatch");
    }
    const Eigen::Index d = state_.xi1.rows();
    const Matrix m = Eigen::Map<const Matrix>(xi.data(), d, d);
    state_.xi1 = 0.5 * (m + m.transpose());
    state_.xi2 = xi.tail(state_.xi2.size());
    state_.theta = theta_map_ls(state_.xi1, state_.xi2, state_.omega, state_.theta_bound,
                                state_.cutoff_rel);
}

Vector LsIdentifier::theta_map(const Vector& xi) const {
    const Eigen::Index d = state_.xi1.rows();
    const Matrix m = Eigen::Map<const Matrix>(xi.data(), d, d);
    return theta_map_ls(0.5 * (m + m.transpose()), xi.tail(state_.xi2.size()), state_.omega,
                        state_.theta_bound, state_.cutoff_rel);
}

std::unique_ptr<Identifier> LsIdentifier::clone() const {
    return std::make_unique<LsIdentifier>(*this);
}

MiniBatchIdentifier::MiniBatchIdentifier(std::shared_ptr<const IdentifierModel> model,
                                         std::size_t n_w, BatchSolver solver)
    : model_(std::move(model)),
      state_(make_minibatch_state(n_w, model_ ? model_->d_theta() : 0, std::move(solver))) {
    if (!model_) {
        throw InvalidConfig("mini-batch: missing model");
    }
}

void MiniBatchIdentifier::jump(const Vector& eta_in, const Vector& u_out) {
    state_ = mb_jump(state_, eta_in, u_out);
}

Vector MiniBatchIdentifier::state_vector() const {
    const auto de = static_cast<Eigen::Index>(model_->d_eta());
    const auto dy = static_cast<Eigen::Index>(model_->d_y());
    const auto n = static_cast<Eigen::Index>(state_.n_w);
    Vector xi = Vector::Zero(n * (de + dy));
    const auto filled = static_cast<Eigen::Index>(state_.window_in.size());
    const Eigen::Index offset = n - filled;
    for (Eigen::Index i = 0; i < filled; ++i) {
        const auto k = static_cast<std::size_t>(i);
        xi.segment((offset + i) * de, de) = state_.window_in[k];
        xi.segment(n * de + (offset + i) * dy, dy) = state_.window_out[k];
    }
    return xi;
}

namespace {

std::pair<std::vector<Vector>, std::vector<Vector>> unpack_window(const Vector& xi, std::size_t n_w,
                                                                  Eigen::Index de,
                                                                  Eigen::Index dy) {
    const auto n = static_cast<Eigen::Index>(n_w);
    if (xi.size() != n * (de + dy)) {
        throw InvalidInput("MiniBatchIdentifier: state vector size mismatch");
    }
    std::vector<Vector> win;
    std::vector<Vector> wout;
    for (Eigen::Index i = 0; i < n; ++i) {
        win.emplace_back(xi.segment(i * de, de));
        wout.emplace_back(xi.segment(n * de + i * dy, dy));
    }
    return {std::move(win), std::move(wout)};
}

}  // namespace

void MiniBatchIdentifier::set_state_vector(const Vector& xi) {
    auto [win, wout] = unpack_window(xi, state_.n_w, static_cast<Eigen::Index>(model_->d_eta()),
                                     static_cast<Eigen::Index>(model_->d_y()));
    state_.window_in.assign(win.begin(), win.end());
    state_.window_out.assign(wout.begin(), wout.end());
    state_.fill_count = state_.n_w;
    state_.theta = state_.solver(win, wout);
}

Vector MiniBatchIdentifier::theta_map(const Vector& xi) const {
    auto [win, wout] = unpack_window(xi, state_.n_w, static_cast<Eigen::Index>(model_->d_eta()),
                                     static_cast<Eigen::Index>(model_->d_y()));
    return state_.solver(win, wout);
}

std::unique_ptr<Identifier> MiniBatchIdentifier::clone() const {
    return std::make_unique<MiniBatchIdentifier>(*this);
}

std::unique_ptr<MiniBatchIdentifier> make_ls_minibatch(PolyRegressor regressor, std::size_t d_y,
                                                       std::size_t n_w, const Matrix& omega,
                                                       double cutoff_rel) {
    auto model = std::make_shared<LinearInParamsModel>(regressor, d_y);
    BatchSolver solver = [regressor = std::move(regressor), omega,
                          cutoff_rel](std::span<const Vector> in, std::span<const Vector> out) {
        return batch_solver_ls(in, out, regressor, omega, {}, cutoff_rel);
    };
    return std::make_unique<MiniBatchIdentifier>(std::move(model), n_w, std::move(solver));
}

}  // namespace aimreg::identifier
