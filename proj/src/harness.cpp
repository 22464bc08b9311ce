#include "aimreg/harness.hpp"

#include "aimreg/kernels.hpp"
#include "aimreg/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace aimreg::harness {

std::vector<CoreSample> run_core_process(const CoreProcessRun& run, double horizon, double dt,
                                         const Disturbance& disturbance) {
    if (!run.exo.s || !run.tau_eval || !run.ustar_eval) {
        throw InvalidConfig("core process: exosystem, tau and u* evaluators are required");
    }
    if (static_cast<std::size_t>(run.w0.size()) != run.exo.d_w) {
        throw InvalidConfig("core process: w0 has the wrong dimension");
    }
    std::vector<CoreSample> samples;
    const auto flow = [&run](double, const Vector& w) { return run.exo.s(w); };
    const auto jump = [&](const HybridTime& ht, const Vector& w) {
        CoreSample s;
        s.j = ht.j;
        s.t = ht.t;
        s.w = w;
        s.win = run.tau_eval(w);
        s.wout = run.ustar_eval(w);
        if (disturbance.d_in) {
            s.win += disturbance.d_in(ht.j);
        }
        if (disturbance.d_out) {
            s.wout += disturbance.d_out(ht.j);
        }
        samples.push_back(std::move(s));
        return w;
    };
    hybrid::SimOptions opts;
    opts.horizon = horizon;
    opts.dt = dt;
    opts.store_samples = false;
    hybrid::simulate(flow, jump, run.w0, run.clock, opts);
    return samples;
}

namespace {

struct SampleMatrices {
    Matrix phi;
    Matrix u;
};

SampleMatrices stack(std::span<const CoreSample> samples,
                     const identifier::PolyRegressor& regressor) {
    const auto n = static_cast<Eigen::Index>(samples.size());
    const auto d = static_cast<Eigen::Index>(regressor.size());
    const Eigen::Index m = samples.empty() ? 0 : samples[0].wout.size();
    SampleMatrices out{Matrix(n, d), Matrix(n, m)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& s = samples[static_cast<std::size_t>(i)];
        out.phi.row(i) = regressor.eval(s.win).transpose();
        out.u.row(i) = s.wout.transpose();
    }
    return out;
}

Vector flatten(const Matrix& m) {
    return Eigen::Map<const Vector>(m.data(), m.size());
}

}  // namespace

Vector brute_force_cost_minimizer(std::span<const CoreSample> samples,
                                  const identifier::PolyRegressor& regressor, double mu_f,
                                  const Matrix& omega, double cutoff_rel) {
    if (samples.empty()) {
        throw InvalidInput("brute_force_cost_minimizer: no samples");
    }
    const auto [phi, u] = stack(samples, regressor);
    const Eigen::Index n = phi.rows();
    Vector weights(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        weights(i) = std::pow(mu_f, static_cast<double>(n - i - 1));
    }
    const Matrix gram = kernels::reference::weighted_gram(phi, weights) + omega;
    const Matrix cross = kernels::reference::weighted_cross(phi, weights, u);
    return flatten(numerics::pseudoinverse(gram, cutoff_rel) * cross);
}

Vector brute_force_window_minimizer(std::span<const CoreSample> window,
                                    const identifier::PolyRegressor& regressor,
                                    const Matrix& omega) {
    if (window.empty()) {
        throw InvalidInput("brute_force_window_minimizer: empty window");
    }
    const auto [phi, u] = stack(window, regressor);
    const Eigen::Index n = phi.rows();
    const Eigen::Index d = phi.cols();
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (omega + omega.transpose()));
    const Vector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Matrix root = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();

    Matrix aug(n + d, d);
    aug.topRows(n) = phi;
    aug.bottomRows(d) = root;
    Matrix rhs = Matrix::Zero(n + d, u.cols());
    rhs.topRows(n) = u;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(aug);
    return flatten(cod.solve(rhs));
}

IdentifierUnderTest ls_under_test(const identifier::PolyRegressor& regressor, std::size_t d_y,
                                  const identifier::LsConfig& config, double pe_epsilon) {
    const auto d = static_cast<Eigen::Index>(regressor.size());
    const Matrix omega =
        config.omega.size() ? config.omega : Matrix(config.omega_scale * Matrix::Identity(d, d));
    IdentifierUnderTest iut;
    iut.make = [regressor, d_y, config]() {
        return std::make_unique<identifier::LsIdentifier>(regressor, d_y, config);
    };
    iut.oracle = [regressor, config, omega](std::span<const CoreSample> s) {
        return brute_force_cost_minimizer(s, regressor, config.mu_f, omega, config.cutoff_rel);
    };
    iut.j_star = [regressor, config, omega, pe_epsilon](std::span<const CoreSample> s) {
        std::vector<Vector> sig;
        for (std::size_t j = 0; j <= s.size(); ++j) {
            if (identifier::pe_check(sig, config.mu_f, omega, pe_epsilon, config.cutoff_rel)) {
                return j;
            }
            if (j < s.size()) {
                sig.push_back(regressor.eval(s[j].win));
            }
        }
        return s.size() + 1;
    };
    return iut;
}

IdentifierUnderTest minibatch_under_test(const identifier::PolyRegressor& regressor,
                                         std::size_t d_y, std::size_t n_w, const Matrix& omega,
                                         double cutoff_rel) {
    IdentifierUnderTest iut;
    iut.make = [regressor, d_y, n_w, omega, cutoff_rel]() -> std::unique_ptr<identifier::Identifier> {
        return identifier::make_ls_minibatch(regressor, d_y, n_w, omega, cutoff_rel);
    };
    iut.oracle = [regressor, n_w, omega](std::span<const CoreSample> s) {
        return brute_force_window_minimizer(s.last(std::min(n_w, s.size())), regressor, omega);
    };
    iut.j_star = [n_w](std::span<const CoreSample>) { return n_w; };
    return iut;
}

std::string IdentifierReport::to_text() const {
    std::ostringstream os;
    os << "optimality: " << (optimality ? "pass" : "FAIL") << " (j* = " << j_star
       << ", samples = " << samples << ", max error = " << max_optimality_error << ")\n";
    os << "stability:  " << (stability ? "pass" : "FAIL") << " (contraction rate = "
       << contraction_rate << ", final ratio = " << final_contraction_ratio
       << ", empirical ISS gain = " << iss_gain << ")\n";
    os << "regularity: " << (regularity ? "pass" : "FAIL") << " (theta-map Lipschitz estimate = "
       << theta_map_lipschitz << ", max Jacobian error = " << max_jacobian_error << ")\n";
    for (const auto& n : notes) {
        os << "note: " << n << '\n';
    }
    return os.str();
}

namespace {

Vector random_vector(std::mt19937_64& rng, Eigen::Index n) {
    std::normal_distribution<double> nd;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        v(i) = nd(rng);
    }
    return v;
}

void check_optimality(const IdentifierUnderTest& iut, std::span<const CoreSample> samples,
                      const VerifyOptions& options, IdentifierReport& report) {
    auto id = iut.make();
    report.j_star = iut.j_star(samples);
    report.optimality = report.j_star <= samples.size();
    if (!report.optimality) {
        report.notes.push_back("excitation condition never met on this run");
    }
    for (std::size_t n = 1; n <= samples.size(); ++n) {
        const auto& s = samples[n - 1];
        id->jump(s.win, s.wout);
        if (n < std::max<std::size_t>(report.j_star, 1)) {
            continue;
        }
        const Vector oracle = iut.oracle(samples.first(n));
        const double err = (id->theta() - oracle).norm() / (1.0 + oracle.norm());
        report.max_optimality_error = std::max(report.max_optimality_error, err);
        if (!(err <= options.optimality_tol)) {
            report.optimality = false;
        }
    }
}

void check_stability(const IdentifierUnderTest& iut, std::span<const CoreSample> samples,
                     const VerifyOptions& options, std::mt19937_64& rng,
                     IdentifierReport& report) {
    bool contraction_ok = true;
    bool iss_ok = true;
    for (std::size_t trial = 0; trial < options.trials; ++trial) {
        auto a = iut.make();
        auto b = iut.make();
        const Vector xi0 = a->state_vector();
        a->set_state_vector(xi0);
        b->set_state_vector(xi0 + random_vector(rng, xi0.size()));
        const double d0 = (b->state_vector() - a->state_vector()).norm();
        double ratio = 1.0;
        for (std::size_t j = 0; j < samples.size(); ++j) {
            a->jump(samples[j].win, samples[j].wout);
            b->jump(samples[j].win, samples[j].wout);
            ratio = (b->state_vector() - a->state_vector()).norm() / d0;
            if (!std::isfinite(ratio) || ratio > 1.0 + 1e-9) {
                contraction_ok = false;
            }
            if (ratio > 0.0) {
                report.contraction_rate = std::max(
                    report.contraction_rate, std::pow(ratio, 1.0 / static_cast<double>(j + 1)));
            }
        }
        report.final_contraction_ratio = std::max(report.final_contraction_ratio, ratio);
        if (!(ratio <= 0.5)) {
            contraction_ok = false;
        }

        // Same stream with bounded input perturbations.
        auto nominal = iut.make();
        auto perturbed = iut.make();
        std::uniform_real_distribution<double> ud(-options.disturbance_level,
                                                  options.disturbance_level);
        double sup = 0.0;
        for (const auto& s : samples) {
            Vector win = s.win;
            Vector wout = s.wout;
            for (Eigen::Index i = 0; i < win.size(); ++i) {
                win(i) += ud(rng);
            }
            for (Eigen::Index i = 0; i < wout.size(); ++i) {
                wout(i) += ud(rng);
            }
            nominal->jump(s.win, s.wout);
            perturbed->jump(win, wout);
            sup = std::max(sup, (perturbed->state_vector() - nominal->state_vector()).norm());
        }
        const double gain = sup / options.disturbance_level;
        if (!std::isfinite(gain)) {
            iss_ok = false;
        } else {
            report.iss_gain = std::max(report.iss_gain, gain);
        }
    }
    report.stability = contraction_ok && iss_ok;
    if (!contraction_ok) {
        report.notes.push_back("state difference did not contract along a common input stream");
    }
    report.notes.push_back(
        "ISS gain is an empirical estimate over random streams, not a certified bound");
}

void check_regularity(const IdentifierUnderTest& iut, std::span<const CoreSample> samples,
                      const VerifyOptions& options, std::mt19937_64& rng,
                      IdentifierReport& report) {
    auto id = iut.make();
    bool ok = true;
    const std::size_t probes = std::min<std::size_t>(10, samples.size());
    const std::size_t every = probes ? std::max<std::size_t>(1, samples.size() / probes) : 1;
    for (std::size_t j = 0; j < samples.size(); ++j) {
        id->jump(samples[j].win, samples[j].wout);
        if ((j + 1) % every != 0) {
            continue;
        }
        const Vector xi = id->state_vector();
        Vector delta = random_vector(rng, xi.size());
        delta *= 1e-6 * (1.0 + xi.norm()) / delta.norm();
        const double lip = (id->theta_map(xi + delta) - id->theta_map(xi)).norm() / delta.norm();
        if (!std::isfinite(lip)) {
            ok = false;
        } else {
            report.theta_map_lipschitz = std::max(report.theta_map_lipschitz, lip);
        }
    }

    const auto& model = id->model();
    const auto dth = static_cast<Eigen::Index>(model.d_theta());
    for (std::size_t k = 0; k < probes; ++k) {
        const Vector theta = random_vector(rng, dth);
        const Vector eta = samples[k * every].win;
        const Matrix jac = model.dgamma_deta(theta, eta);
        Matrix fd(jac.rows(), jac.cols());
        for (Eigen::Index i = 0; i < eta.size(); ++i) {
            const double h = options.fd_step * (1.0 + std::abs(eta(i)));
            Vector ep = eta;
            Vector em = eta;
            ep(i) += h;
            em(i) -= h;
            fd.col(i) = (model.gamma_hat(theta, ep) - model.gamma_hat(theta, em)) / (2.0 * h);
        }
        const double scale = std::max(1.0, jac.cwiseAbs().maxCoeff());
        const double err = (jac - fd).cwiseAbs().maxCoeff() / scale;
        report.max_jacobian_error = std::max(report.max_jacobian_error, err);
        if (!(err <= options.fd_tol)) {
            ok = false;
        }
    }
    report.regularity = ok;
}

}  // namespace

IdentifierReport verify_identifier_requirement(const IdentifierUnderTest& iut,
                                               const CoreProcessRun& run,
                                               const VerifyOptions& options) {
    IdentifierReport report;
    const auto samples = run_core_process(run, options.horizon, options.dt);
    report.samples = samples.size();
    if (samples.empty()) {
        report.notes.push_back("core process produced no samples; horizon shorter than t_low");
        return report;
    }
    std::mt19937_64 rng(options.seed);
    check_optimality(iut, samples, options, report);
    check_stability(iut, samples, options, rng, report);
    check_regularity(iut, samples, options, rng, report);
    return report;
}

}  // namespace aimreg::harness
