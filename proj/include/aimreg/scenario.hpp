#pragma once

// Closed-loop scenario runner: wires a plant, the regulator and an
// identifier into one hybrid system, simulates it, and reduces the result to
// CSV rows and summary metrics.

#include "aimreg/core.hpp"
#include "aimreg/harness.hpp"
#include "aimreg/hybrid.hpp"
#include "aimreg/identifier.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace aimreg::scenario {

enum class PlantKind { vdp, linear_harmonic };
enum class IdentifierKind { none, ls, mini_batch };

struct PlantParams {
    PlantKind kind = PlantKind::vdp;
    double a = 2.0;
    double rho = 2.0;
    /// Van der Pol state (p1, p2); ignored by linear-harmonic, which starts at x = p0.
    std::vector<double> p0{0.1, 0.0};
    std::vector<double> w0{1.0, 0.0};
    // linear-harmonic only
    double omega = 1.0;
    std::vector<double> c{1.0, 1.0};
    double stiffness = 1.0;
};

struct RegulatorParams {
    std::vector<double> k_poles{-1.0, -2.0};
    double sat_level = 100.0;
    std::size_t d_eta = 6;
    /// Explicit internal model; both empty means the bidiagonal default.
    std::optional<Matrix> F;
    std::optional<Matrix> G;
    double ell = 20.0;
    std::vector<double> h{6.0, 11.0, 6.0};
    double psi_bar = 100.0;
};

struct IdentifierParams {
    IdentifierKind kind = IdentifierKind::ls;
    double mu_f = 0.99;
    double omega_scale = 1e-3;
    std::size_t order = 1;
    identifier::RegressorMode mode = identifier::RegressorMode::full_multiset;
    std::size_t n_w = 10;
    double rho_sigma = 1e6;
    double rho_lambda = 1e6;
    double theta_bound = 1e6;
    double cutoff_rel = 1e-12;
};

struct SimParams {
    double horizon = 100.0;
    double dt = 1e-3;
    std::size_t record_stride = 1;
};

struct OutputParams {
    std::string csv;
    std::string summary;
};

struct ScenarioConfig {
    PlantParams plant;
    RegulatorParams regulator;
    IdentifierParams identifier;
    hybrid::ClockConfig clock;
    SimParams sim;
    OutputParams output;

    /// Re-checks every module invariant by building the closed loop without
    /// running it. Throws InvalidConfig.
    void validate() const;
};

/// Parse a config; unknown keys and malformed values raise InvalidConfig.
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_config(const std::string& path);

std::string to_string(IdentifierKind kind);
std::string to_string(PlantKind kind);

/// One recorded sample. Scalar columns refer to the first output channel.
struct Row {
    double t = 0.0;
    std::size_t j = 0;
    double y = 0.0;
    double u = 0.0;
    double u_star = 0.0;
    double gamma_hat = 0.0;
    double err_xhat = 0.0;
    double err_sigmahat = 0.0;
    std::optional<double> eps_star;

    // Not written to the CSV; used by boundedness checks.
    double u_norm = 0.0;
    double psi_norm = 0.0;
};

struct Summary {
    double steady_state_max_y = 0.0;
    double settling_time_s = 0.0;
    double max_err_xhat = 0.0;
    double max_err_sigmahat = 0.0;
    std::vector<double> final_theta;
    std::size_t jumps_total = 0;
};

/// Identifier input at one clock tick.
struct JumpInput {
    double t = 0.0;
    Vector eta;
    Vector u;
};

struct ScenarioResult {
    std::vector<Row> rows;
    std::vector<JumpInput> jump_inputs;
    Summary summary;
    /// Bound |b_bar^{-1}| M on |u|.
    double u_bound = 0.0;
    double psi_bound = 0.0;
};

/// Steady-state window is the trailing 20% of the horizon; settling time is
/// the last instant |y| leaves the band of twice the steady-state maximum.
Summary summarize(const std::vector<Row>& rows, double horizon, const Vector& final_theta,
                  std::size_t jumps_total);

/// Build and simulate the closed loop. Writes CSV / summary files when the
/// output paths are set.
ScenarioResult run_scenario(const ScenarioConfig& cfg);

void write_csv(const std::vector<Row>& rows, const std::string& path);
std::string csv_string(const std::vector<Row>& rows);
nlohmann::json summary_to_json(const Summary& s);

/// Harness wiring for the configured identifier (kind none is rejected).
harness::IdentifierUnderTest identifier_under_test(const ScenarioConfig& cfg);

/// Core process on the configured exosystem. tau(w) = Pi w with
/// Pi S = F Pi + G c^T; for the linear-harmonic plant this is the true
/// steady state of the internal model, for the Van der Pol plant (c = e_1)
/// it is a test stand-in.
harness::CoreProcessRun core_process_for(const ScenarioConfig& cfg);

enum class SweepAxis { ell, order };

struct SweepCell {
    double value = 0.0;
    bool ok = false;
    std::string error;
    Summary summary;
};

/// Runs one scenario per value, varying a single axis. Cells run in parallel
/// and failures are recorded per cell. When base.output.csv is set, each
/// cell writes <stem>_<axis><value>.csv next to it.
std::vector<SweepCell> run_sweep(const ScenarioConfig& base, SweepAxis axis,
                                 const std::vector<double>& values);

std::string sweep_table(const std::vector<SweepCell>& cells, SweepAxis axis);

}  // namespace aimreg::scenario
