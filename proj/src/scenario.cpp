#include "aimreg/scenario.hpp"

#include "aimreg/numerics.hpp"
#include "aimreg/plant.hpp"
#include "aimreg/regulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

namespace aimreg::scenario {

using nlohmann::json;

// ---------------------------------------------------------------------------
// JSON config
// ---------------------------------------------------------------------------

namespace {

void reject_unknown(const json& obj, const std::string& where, std::set<std::string> allowed) {
    if (!obj.is_object()) {
        throw InvalidConfig("config: '" + where + "' must be an object");
    }
    for (const auto& item : obj.items()) {
        if (!allowed.count(item.key())) {
            throw InvalidConfig("config: unknown key '" + where + "." + item.key() + "'");
        }
    }
}

template <typename T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key)) {
        return;
    }
    try {
        out = obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw InvalidConfig("config: bad value for '" + where + "." + key + "'");
    }
}

Matrix matrix_from_json(const json& j, const std::string& name) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw InvalidConfig("config: '" + name + "' must be a non-empty array of rows");
    }
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& row = j[static_cast<std::size_t>(i)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
            throw InvalidConfig("config: '" + name + "' rows must have equal length");
        }
        for (Eigen::Index k = 0; k < cols; ++k) {
            const auto& v = row[static_cast<std::size_t>(k)];
            if (!v.is_number()) {
                throw InvalidConfig("config: '" + name + "' entries must be numbers");
            }
            m(i, k) = v.get<double>();
        }
    }
    return m;
}

json matrix_to_json(const Matrix& m) {
    json out = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < m.cols(); ++k) {
            row.push_back(m(i, k));
        }
        out.push_back(row);
    }
    return out;
}

}  // namespace

std::string to_string(IdentifierKind kind) {
    switch (kind) {
        case IdentifierKind::none: return "none";
        case IdentifierKind::ls: return "ls";
        case IdentifierKind::mini_batch: return "mini-batch";
    }
    return "?";
}

std::string to_string(PlantKind kind) {
    return kind == PlantKind::vdp ? "vdp" : "linear-harmonic";
}

ScenarioConfig config_from_json(const json& j) {
    ScenarioConfig cfg;
    reject_unknown(j, "", {"plant", "regulator", "identifier", "clock", "sim", "output"});

    if (j.contains("plant")) {
        const auto& p = j["plant"];
        reject_unknown(p, "plant", {"kind", "a", "rho", "p0", "w0", "omega", "c", "stiffness"});
        std::string kind = to_string(cfg.plant.kind);
        read(p, "kind", kind, "plant");
        if (kind == "vdp") {
            cfg.plant.kind = PlantKind::vdp;
        } else if (kind == "linear-harmonic") {
            cfg.plant.kind = PlantKind::linear_harmonic;
        } else {
            throw InvalidConfig("config: plant.kind must be 'vdp' or 'linear-harmonic'");
        }
        read(p, "a", cfg.plant.a, "plant");
        read(p, "rho", cfg.plant.rho, "plant");
        read(p, "p0", cfg.plant.p0, "plant");
        read(p, "w0", cfg.plant.w0, "plant");
        read(p, "omega", cfg.plant.omega, "plant");
        read(p, "c", cfg.plant.c, "plant");
        read(p, "stiffness", cfg.plant.stiffness, "plant");
    }

    if (j.contains("regulator")) {
        const auto& r = j["regulator"];
        reject_unknown(r, "regulator",
                       {"K_poles", "sat_level", "d_eta", "F", "G", "ell", "h", "psi_bar"});
        read(r, "K_poles", cfg.regulator.k_poles, "regulator");
        read(r, "sat_level", cfg.regulator.sat_level, "regulator");
        read(r, "d_eta", cfg.regulator.d_eta, "regulator");
        if (r.contains("F")) {
            cfg.regulator.F = matrix_from_json(r["F"], "regulator.F");
        }
        if (r.contains("G")) {
            cfg.regulator.G = matrix_from_json(r["G"], "regulator.G");
        }
        if (cfg.regulator.F.has_value() != cfg.regulator.G.has_value()) {
            throw InvalidConfig("config: regulator.F and regulator.G must be given together");
        }
        if (cfg.regulator.F) {
            cfg.regulator.d_eta = static_cast<std::size_t>(cfg.regulator.F->rows());
        }
        read(r, "ell", cfg.regulator.ell, "regulator");
        read(r, "h", cfg.regulator.h, "regulator");
        read(r, "psi_bar", cfg.regulator.psi_bar, "regulator");
    }

    if (j.contains("identifier")) {
        const auto& id = j["identifier"];
        reject_unknown(id, "identifier",
                       {"kind", "mu_f", "omega_scale", "N", "mode", "N_w", "rho_sigma",
                        "rho_lambda", "theta_bound", "cutoff_rel"});
        std::string kind = to_string(cfg.identifier.kind);
        read(id, "kind", kind, "identifier");
        if (kind == "none") {
            cfg.identifier.kind = IdentifierKind::none;
        } else if (kind == "ls") {
            cfg.identifier.kind = IdentifierKind::ls;
        } else if (kind == "mini-batch") {
            cfg.identifier.kind = IdentifierKind::mini_batch;
        } else {
            throw InvalidConfig("config: identifier.kind must be none, ls or mini-batch");
        }
        read(id, "mu_f", cfg.identifier.mu_f, "identifier");
        read(id, "omega_scale", cfg.identifier.omega_scale, "identifier");
        read(id, "N", cfg.identifier.order, "identifier");
        std::string mode = "full-multiset";
        read(id, "mode", mode, "identifier");
        if (mode == "full-multiset") {
            cfg.identifier.mode = identifier::RegressorMode::full_multiset;
        } else if (mode == "pure-powers") {
            cfg.identifier.mode = identifier::RegressorMode::pure_powers;
        } else {
            throw InvalidConfig("config: identifier.mode must be full-multiset or pure-powers");
        }
        read(id, "N_w", cfg.identifier.n_w, "identifier");
        read(id, "rho_sigma", cfg.identifier.rho_sigma, "identifier");
        read(id, "rho_lambda", cfg.identifier.rho_lambda, "identifier");
        read(id, "theta_bound", cfg.identifier.theta_bound, "identifier");
        read(id, "cutoff_rel", cfg.identifier.cutoff_rel, "identifier");
    }

    if (j.contains("clock")) {
        const auto& c = j["clock"];
        reject_unknown(c, "clock", {"t_low", "t_high", "strategy", "period", "seed"});
        read(c, "t_low", cfg.clock.t_low, "clock");
        read(c, "t_high", cfg.clock.t_high, "clock");
        std::string strategy = "periodic";
        read(c, "strategy", strategy, "clock");
        if (strategy == "periodic") {
            double period = cfg.clock.t_low;
            read(c, "period", period, "clock");
            cfg.clock.strategy = hybrid::PeriodicStrategy{period};
        } else if (strategy == "uniform") {
            std::uint64_t seed = 0;
            read(c, "seed", seed, "clock");
            cfg.clock.strategy = hybrid::UniformRandomStrategy{seed};
        } else {
            throw InvalidConfig("config: clock.strategy must be periodic or uniform");
        }
    }

    if (j.contains("sim")) {
        const auto& s = j["sim"];
        reject_unknown(s, "sim", {"horizon", "dt", "record_stride"});
        read(s, "horizon", cfg.sim.horizon, "sim");
        read(s, "dt", cfg.sim.dt, "sim");
        read(s, "record_stride", cfg.sim.record_stride, "sim");
    }

    if (j.contains("output")) {
        const auto& o = j["output"];
        reject_unknown(o, "output", {"csv", "summary"});
        read(o, "csv", cfg.output.csv, "output");
        read(o, "summary", cfg.output.summary, "output");
    }

    cfg.validate();
    return cfg;
}

json config_to_json(const ScenarioConfig& cfg) {
    json j;
    j["plant"] = {{"kind", to_string(cfg.plant.kind)}, {"a", cfg.plant.a},
                  {"rho", cfg.plant.rho},              {"p0", cfg.plant.p0},
                  {"w0", cfg.plant.w0},                {"omega", cfg.plant.omega},
                  {"c", cfg.plant.c},                  {"stiffness", cfg.plant.stiffness}};
    j["regulator"] = {{"K_poles", cfg.regulator.k_poles}, {"sat_level", cfg.regulator.sat_level},
                      {"d_eta", cfg.regulator.d_eta},     {"ell", cfg.regulator.ell},
                      {"h", cfg.regulator.h},             {"psi_bar", cfg.regulator.psi_bar}};
    if (cfg.regulator.F) {
        j["regulator"]["F"] = matrix_to_json(*cfg.regulator.F);
        j["regulator"]["G"] = matrix_to_json(*cfg.regulator.G);
    }
    j["identifier"] = {
        {"kind", to_string(cfg.identifier.kind)},
        {"mu_f", cfg.identifier.mu_f},
        {"omega_scale", cfg.identifier.omega_scale},
        {"N", cfg.identifier.order},
        {"mode", cfg.identifier.mode == identifier::RegressorMode::full_multiset ? "full-multiset"
                                                                                  : "pure-powers"},
        {"N_w", cfg.identifier.n_w},
        {"rho_sigma", cfg.identifier.rho_sigma},
        {"rho_lambda", cfg.identifier.rho_lambda},
        {"theta_bound", cfg.identifier.theta_bound},
        {"cutoff_rel", cfg.identifier.cutoff_rel}};
    json clock = {{"t_low", cfg.clock.t_low}, {"t_high", cfg.clock.t_high}};
    if (const auto* p = std::get_if<hybrid::PeriodicStrategy>(&cfg.clock.strategy)) {
        clock["strategy"] = "periodic";
        clock["period"] = p->period;
    } else {
        clock["strategy"] = "uniform";
        clock["seed"] = std::get<hybrid::UniformRandomStrategy>(cfg.clock.strategy).seed;
    }
    j["clock"] = clock;
    j["sim"] = {{"horizon", cfg.sim.horizon},
                {"dt", cfg.sim.dt},
                {"record_stride", cfg.sim.record_stride}};
    j["output"] = {{"csv", cfg.output.csv}, {"summary", cfg.output.summary}};
    return j;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidConfig("config: cannot open '" + path + "'");
    }
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& e) {
        throw InvalidConfig("config: " + path + ": " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Closed loop
// ---------------------------------------------------------------------------

namespace {

/// Everything needed to evaluate the closed-loop flow and jump maps.
///
/// State layout: [w, x, varsigma, eta, x_hat, sigma_hat]. theta lives in the
/// identifier, which only changes at jumps.
class ClosedLoop {
public:
    explicit ClosedLoop(const ScenarioConfig& cfg) : cfg_(cfg) {
        build_plant();
        build_regulator();
        build_identifier();
        layout();
    }

    Vector initial_state() const {
        Vector s = Vector::Zero(n_);
        s.segment(o_w_, dw_) = w0_;
        s.segment(o_x_, dx_) = x0_;
        return s;
    }

    Vector flow(const Vector& s) const {
        const Vector w = s.segment(o_w_, dw_);
        const Vector x = s.segment(o_x_, dx_);
        const auto reg = regulator_state(s);
        const Vector u = regulator::control_output(reg, stab_);
        const Vector psi = psi_of(reg, u);

        Vector d(n_);
        d.segment(o_w_, dw_) = plant_.eval_s(w);
        const Vector empty_z;
        const Vector drive = plant_.eval_q(w, empty_z, x) + plant_.eval_b(w, empty_z, x) * u;
        d.segment(o_x_, dx_) = a_ * x + b_ * drive;
        d(o_vs_) = 1.0;
        d.segment(o_eta_, de_) = regulator::internal_model_flow(reg.eta, u, im_);
        const auto obs = regulator::observer_flow(reg, c_ * x, u, psi, obs_plant_, gains_);
        d.segment(o_xh_, dx_) = obs.x_hat_dot;
        d.segment(o_sh_, dy_) = obs.sigma_hat_dot;
        return d;
    }

    Vector jump(const HybridTime& ht, const Vector& s) {
        const auto reg = regulator_state(s);
        const Vector u = regulator::control_output(reg, stab_);
        inputs_.push_back({ht.t, reg.eta, u});
        if (ident_) {
            ident_->jump(reg.eta, u);
        }
        if (shadow_) {
            const Vector w = s.segment(o_w_, dw_);
            shadow_->jump(tau_ * w, plant_.eval_ustar(w));
        }
        Vector next = s;
        next(o_vs_) = regulator::regulator_jump(reg).varsigma;
        return next;
    }

    Row row(const HybridTime& ht, const Vector& s) const {
        const Vector w = s.segment(o_w_, dw_);
        const Vector x = s.segment(o_x_, dx_);
        const auto reg = regulator_state(s);
        const Vector u = regulator::control_output(reg, stab_);
        Row r;
        r.t = ht.t;
        r.j = ht.j;
        r.y = (c_ * x)(0);
        r.u = u(0);
        const Vector ustar = plant_.eval_ustar(w);
        r.u_star = ustar(0);
        r.gamma_hat = ident_ ? ident_->model().gamma_hat(reg.theta, reg.eta)(0) : 0.0;
        r.err_xhat = (x - reg.x_hat).norm();
        r.err_sigmahat = (reg.sigma_hat + plant_.b_bar * ustar).norm();
        if (shadow_) {
            const Vector eps = identifier::prediction_error(shadow_->model(), shadow_->theta(),
                                                            tau_ * w, ustar);
            r.eps_star = eps(0);
        }
        r.u_norm = u.norm();
        r.psi_norm = psi_of(reg, u).norm();
        return r;
    }

    Vector theta() const { return ident_ ? ident_->theta() : Vector(); }
    std::vector<JumpInput> take_inputs() { return std::move(inputs_); }
    double u_bound() const {
        return numerics::singular_values(stab_.b_bar_inv)(0) * stab_.sat_level;
    }
    double psi_bound() const { return cfg_.regulator.psi_bar; }

private:
    void build_plant() {
        const auto& p = cfg_.plant;
        if (p.w0.size() != 2 || p.p0.size() != 2) {
            throw InvalidConfig("plant: p0 and w0 must have two entries");
        }
        w0_ = Eigen::Map<const Vector>(p.w0.data(), 2);
        const Vector p0 = Eigen::Map<const Vector>(p.p0.data(), 2);
        if (p.kind == PlantKind::vdp) {
            plant::VdpParams vp;
            vp.a = p.a;
            vp.rho = p.rho;
            plant_ = plant::build_vdp_scenario(vp);
            x0_ = plant::vdp_error_coordinates(p0, w0_, p.rho);
        } else {
            plant::LinearHarmonicParams lp;
            lp.omega = p.omega;
            if (p.c.size() != 2) {
                throw InvalidConfig("plant: c must have two entries");
            }
            lp.c = Eigen::Map<const Vector>(p.c.data(), 2);
            lp.stiffness = p.stiffness;
            plant_ = plant::build_linear_harmonic_scenario(lp);
            x0_ = p0;
        }
        plant_.validate();
        std::tie(a_, b_, c_) = plant::build_chain_matrices(plant_.r, plant_.d_y);
        dw_ = static_cast<Eigen::Index>(plant_.d_w);
        dx_ = static_cast<Eigen::Index>(plant_.d_x());
        dy_ = static_cast<Eigen::Index>(plant_.d_y);
    }

    void build_regulator() {
        const auto& r = cfg_.regulator;
        stab_ = regulator::make_stabilizer(plant_.r, plant_.d_y, r.k_poles, r.sat_level,
                                           plant_.b_bar);
        if (r.F) {
            im_ = {*r.F, *r.G};
        } else {
            im_ = regulator::default_internal_model(r.d_eta, plant_.d_y);
        }
        im_.validate();
        if (im_.G.cols() != dy_) {
            throw InvalidConfig("regulator: G must have d_y columns");
        }
        de_ = static_cast<Eigen::Index>(im_.d_eta());
        regulator::ObserverConfig oc;
        oc.ell = r.ell;
        oc.h_coeffs.assign(plant_.d_y, r.h);
        oc.psi_bar = r.psi_bar;
        gains_ = regulator::build_observer_gains(oc, plant_.r, plant_.d_y);
        obs_plant_ = {a_, b_, plant_.b_bar};
    }

    void build_identifier() {
        const auto& id = cfg_.identifier;
        if (id.kind == IdentifierKind::none) {
            return;
        }
        ident_ = make_identifier(id);
        if (cfg_.plant.kind == PlantKind::linear_harmonic) {
            // tau(w) = Pi w is known in closed form here, so the ideal
            // identifier can run alongside and provide eps*.
            const Vector c = Eigen::Map<const Vector>(cfg_.plant.c.data(), 2);
            tau_ = plant::internal_model_steady_state(plant::harmonic_matrix(cfg_.plant.omega),
                                                      im_.F, im_.G, c.transpose());
            shadow_ = make_identifier(id);
        }
    }

    std::unique_ptr<identifier::Identifier> make_identifier(const IdentifierParams& id) const {
        auto reg = identifier::build_poly_regressor(static_cast<std::size_t>(de_), id.order,
                                                    id.mode);
        if (id.kind == IdentifierKind::ls) {
            identifier::LsConfig lc;
            lc.mu_f = id.mu_f;
            lc.omega_scale = id.omega_scale;
            lc.rho_sigma = id.rho_sigma;
            lc.rho_lambda = id.rho_lambda;
            lc.theta_bound = id.theta_bound;
            lc.cutoff_rel = id.cutoff_rel;
            return std::make_unique<identifier::LsIdentifier>(std::move(reg), plant_.d_y, lc);
        }
        if (!(id.omega_scale >= 0.0)) {
            throw InvalidConfig("identifier: omega_scale must be non-negative");
        }
        const auto d = static_cast<Eigen::Index>(reg.size());
        const Matrix omega = id.omega_scale * Matrix::Identity(d, d);
        return identifier::make_ls_minibatch(std::move(reg), plant_.d_y, id.n_w, omega,
                                             id.cutoff_rel);
    }

    void layout() {
        o_w_ = 0;
        o_x_ = o_w_ + dw_;
        o_vs_ = o_x_ + dx_;
        o_eta_ = o_vs_ + 1;
        o_xh_ = o_eta_ + de_;
        o_sh_ = o_xh_ + dx_;
        n_ = o_sh_ + dy_;
    }

    regulator::RegulatorState regulator_state(const Vector& s) const {
        regulator::RegulatorState r;
        r.varsigma = s(o_vs_);
        r.eta = s.segment(o_eta_, de_);
        r.x_hat = s.segment(o_xh_, dx_);
        r.sigma_hat = s.segment(o_sh_, dy_);
        if (ident_) {
            r.theta = ident_->theta();
        }
        return r;
    }

    Vector psi_of(const regulator::RegulatorState& reg, const Vector& u) const {
        if (!ident_) {
            return Vector::Zero(dy_);
        }
        return regulator::psi_consistency(reg.theta, reg.eta, u, ident_->model(), im_,
                                          cfg_.regulator.psi_bar);
    }

    const ScenarioConfig& cfg_;
    plant::PlantSpec plant_;
    Matrix a_, b_, c_;
    Vector w0_, x0_;
    regulator::StabilizerConfig stab_;
    regulator::InternalModelConfig im_;
    regulator::ObserverGains gains_;
    regulator::ObserverPlantData obs_plant_;
    std::unique_ptr<identifier::Identifier> ident_;
    std::unique_ptr<identifier::Identifier> shadow_;
    Matrix tau_;
    std::vector<JumpInput> inputs_;

    Eigen::Index dw_ = 0, dx_ = 0, dy_ = 0, de_ = 0;
    Eigen::Index o_w_ = 0, o_x_ = 0, o_vs_ = 0, o_eta_ = 0, o_xh_ = 0, o_sh_ = 0, n_ = 0;
};

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

void ScenarioConfig::validate() const {
    if (!(sim.horizon > 0.0) || !std::isfinite(sim.horizon)) {
        throw InvalidConfig("sim: horizon must be positive");
    }
    if (!(sim.dt > 0.0) || sim.dt > clock.t_low / 10.0 * (1.0 + 1e-12)) {
        throw InvalidConfig("sim: dt must lie in (0, t_low / 10]");
    }
    clock.validate();
    const ClosedLoop probe(*this);
    (void)probe;
}

Summary summarize(const std::vector<Row>& rows, double horizon, const Vector& final_theta,
                  std::size_t jumps_total) {
    Summary s;
    s.jumps_total = jumps_total;
    s.final_theta.assign(final_theta.data(), final_theta.data() + final_theta.size());
    if (rows.empty()) {
        return s;
    }
    const double t_ss = 0.8 * horizon;
    bool any = false;
    for (const auto& r : rows) {
        if (r.t >= t_ss) {
            any = true;
            s.steady_state_max_y = std::max(s.steady_state_max_y, std::abs(r.y));
            s.max_err_xhat = std::max(s.max_err_xhat, r.err_xhat);
            s.max_err_sigmahat = std::max(s.max_err_sigmahat, r.err_sigmahat);
        }
    }
    if (!any) {
        const auto& r = rows.back();
        s.steady_state_max_y = std::abs(r.y);
        s.max_err_xhat = r.err_xhat;
        s.max_err_sigmahat = r.err_sigmahat;
    }
    const double band = 2.0 * s.steady_state_max_y;
    for (auto it = rows.rbegin(); it != rows.rend(); ++it) {
        if (std::abs(it->y) > band) {
            s.settling_time_s = it->t;
            break;
        }
    }
    return s;
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    ClosedLoop loop(cfg);

    ScenarioResult result;
    result.u_bound = loop.u_bound();
    result.psi_bound = loop.psi_bound();

    hybrid::SimOptions opts;
    opts.horizon = cfg.sim.horizon;
    opts.dt = cfg.sim.dt;
    opts.record_stride = cfg.sim.record_stride;
    opts.store_samples = false;

    const auto flow = [&loop](double, const Vector& s) { return loop.flow(s); };
    const auto jump = [&loop](const HybridTime& ht, const Vector& s) { return loop.jump(ht, s); };
    const auto observe = [&loop, &result](const HybridTime& ht, const Vector& s) {
        result.rows.push_back(loop.row(ht, s));
    };
    const auto arc = hybrid::simulate(flow, jump, loop.initial_state(), cfg.clock, opts, observe);

    result.jump_inputs = loop.take_inputs();
    result.summary =
        summarize(result.rows, cfg.sim.horizon, loop.theta(), arc.jump_times.size());
    if (!cfg.output.csv.empty()) {
        write_csv(result.rows, cfg.output.csv);
    }
    if (!cfg.output.summary.empty()) {
        std::ofstream out(cfg.output.summary);
        if (!out) {
            throw InvalidConfig("output: cannot write '" + cfg.output.summary + "'");
        }
        out << summary_to_json(result.summary).dump(2) << '\n';
    }
    return result;
}

std::string csv_string(const std::vector<Row>& rows) {
    std::string out = "t,j,y,u,u_star,gamma_hat,err_xhat,err_sigmahat,eps_star\n";
    out.reserve(rows.size() * 120);
    for (const auto& r : rows) {
        out += fmt_double(r.t);
        out += ',';
        out += std::to_string(r.j);
        for (double v : {r.y, r.u, r.u_star, r.gamma_hat, r.err_xhat, r.err_sigmahat}) {
            out += ',';
            out += fmt_double(v);
        }
        out += ',';
        if (r.eps_star) {
            out += fmt_double(*r.eps_star);
        }
        out += '\n';
    }
    return out;
}

void write_csv(const std::vector<Row>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw InvalidConfig("output: cannot write '" + path + "'");
    }
    out << csv_string(rows);
}

json summary_to_json(const Summary& s) {
    return {{"steady_state_max_y", s.steady_state_max_y},
            {"settling_time_s", s.settling_time_s},
            {"final_theta", s.final_theta},
            {"jumps_total", s.jumps_total}};
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

std::vector<SweepCell> run_sweep(const ScenarioConfig& base, SweepAxis axis,
                                 const std::vector<double>& values) {
    if (values.empty()) {
        throw InvalidConfig("sweep: no values given");
    }
    std::vector<SweepCell> cells(values.size());
    const auto n = static_cast<long>(values.size());

#pragma omp parallel for schedule(dynamic, 1)
    for (long i = 0; i < n; ++i) {
        auto& cell = cells[static_cast<std::size_t>(i)];
        cell.value = values[static_cast<std::size_t>(i)];
        try {
            ScenarioConfig cfg = base;
            cfg.output.summary.clear();
            std::string tag;
            if (axis == SweepAxis::ell) {
                cfg.regulator.ell = cell.value;
                tag = "ell" + fmt_double(cell.value);
            } else {
                if (cell.value < 1.0 || cell.value != std::floor(cell.value)) {
                    throw InvalidConfig("sweep: N values must be positive integers");
                }
                if (cfg.identifier.kind == IdentifierKind::none) {
                    throw InvalidConfig("sweep: axis N needs an identifier");
                }
                cfg.identifier.order = static_cast<std::size_t>(cell.value);
                tag = "N" + fmt_double(cell.value);
            }
            if (!base.output.csv.empty()) {
                const std::filesystem::path p(base.output.csv);
                cfg.output.csv =
                    (p.parent_path() / (p.stem().string() + "_" + tag + ".csv")).string();
            }
            cell.summary = run_scenario(cfg).summary;
            cell.ok = true;
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    }
    return cells;
}

std::string sweep_table(const std::vector<SweepCell>& cells, SweepAxis axis) {
    std::ostringstream os;
    os << (axis == SweepAxis::ell ? "ell" : "N") << ",steady_state_max_y,settling_time_s,status\n";
    for (const auto& c : cells) {
        os << fmt_double(c.value) << ',';
        if (c.ok) {
            os << fmt_double(c.summary.steady_state_max_y) << ','
               << fmt_double(c.summary.settling_time_s) << ",ok\n";
        } else {
            os << ",," << '"' << c.error << '"' << '\n';
        }
    }
    return os.str();
}

}  // namespace aimreg::scenario

namespace aimreg::scenario {

namespace {

regulator::InternalModelConfig internal_model_of(const ScenarioConfig& cfg) {
    if (cfg.regulator.F) {
        return {*cfg.regulator.F, *cfg.regulator.G};
    }
    return regulator::default_internal_model(cfg.regulator.d_eta, 1);
}

}  // namespace

harness::IdentifierUnderTest identifier_under_test(const ScenarioConfig& cfg) {
    const auto& id = cfg.identifier;
    const auto im = internal_model_of(cfg);
    auto reg = identifier::build_poly_regressor(im.d_eta(), id.order, id.mode);
    switch (id.kind) {
        case IdentifierKind::ls: {
            identifier::LsConfig lc;
            lc.mu_f = id.mu_f;
            lc.omega_scale = id.omega_scale;
            lc.rho_sigma = id.rho_sigma;
            lc.rho_lambda = id.rho_lambda;
            lc.theta_bound = id.theta_bound;
            lc.cutoff_rel = id.cutoff_rel;
            return harness::ls_under_test(reg, 1, lc);
        }
        case IdentifierKind::mini_batch: {
            const auto d = static_cast<Eigen::Index>(reg.size());
            return harness::minibatch_under_test(reg, 1, id.n_w,
                                                 id.omega_scale * Matrix::Identity(d, d),
                                                 id.cutoff_rel);
        }
        case IdentifierKind::none: break;
    }
    throw InvalidConfig("check-identifier: identifier.kind is 'none'");
}

harness::CoreProcessRun core_process_for(const ScenarioConfig& cfg) {
    const auto im = internal_model_of(cfg);
    harness::CoreProcessRun run;
    run.clock = cfg.clock;
    run.w0 = Eigen::Map<const Vector>(cfg.plant.w0.data(),
                                      static_cast<Eigen::Index>(cfg.plant.w0.size()));
    Matrix s;
    Vector c;
    plant::PlantSpec spec;
    if (cfg.plant.kind == PlantKind::vdp) {
        plant::VdpParams vp;
        vp.a = cfg.plant.a;
        vp.rho = cfg.plant.rho;
        spec = plant::build_vdp_scenario(vp);
        s = Matrix(2, 2);
        s << 0.0, 1.0, -cfg.plant.rho, 0.0;
        c = Vector::Unit(2, 0);
    } else {
        plant::LinearHarmonicParams lp;
        lp.omega = cfg.plant.omega;
        lp.c = Eigen::Map<const Vector>(cfg.plant.c.data(), 2);
        lp.stiffness = cfg.plant.stiffness;
        spec = plant::build_linear_harmonic_scenario(lp);
        s = plant::harmonic_matrix(cfg.plant.omega);
        c = lp.c;
    }
    const Matrix pi = plant::internal_model_steady_state(s, im.F, im.G, c.transpose());
    run.exo = spec.exo();
    run.tau_eval = [pi](const Vector& w) -> Vector { return pi * w; };
    run.ustar_eval = spec.eval_ustar;
    return run;
}

}  // namespace aimreg::scenario
