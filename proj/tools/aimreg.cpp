// Command-line front end: simulate, sweep, check-identifier, validate.
//
// Exit codes: 0 success, 1 configuration error, 2 integration failure,
// 3 assertion failure (with --assert-* options).

#include "aimreg/harness.hpp"
#include "aimreg/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

namespace {

namespace sc = aimreg::scenario;

constexpr int kExitConfig = 1;
constexpr int kExitIntegration = 2;
constexpr int kExitAssert = 3;

std::vector<double> parse_values(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::exception&) {
            throw aimreg::InvalidConfig("--values: cannot parse '" + item + "'");
        }
    }
    if (out.empty()) {
        throw aimreg::InvalidConfig("--values: empty list");
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive internal-model regulator simulator"};
    app.require_subcommand(1);

    std::string config_path;
    std::string csv_out;
    std::string summary_out;
    double assert_max_y = std::numeric_limits<double>::quiet_NaN();

    auto* sim = app.add_subcommand("simulate", "Run one closed-loop scenario");
    sim->add_option("config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sim->add_option("--csv", csv_out, "Override output.csv");
    sim->add_option("--summary", summary_out, "Override output.summary");
    sim->add_option("--assert-max-y", assert_max_y,
                    "Exit 3 if the steady-state max |y| exceeds this value");

    std::string axis_name;
    std::string values_arg;
    std::string table_out;
    bool assert_monotone = false;
    auto* sweep = app.add_subcommand("sweep", "Vary ell or N and tabulate steady-state metrics");
    sweep->add_option("config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    sweep->add_option("--axis", axis_name, "ell or N")
        ->required()
        ->check(CLI::IsMember({"ell", "N"}));
    sweep->add_option("--values", values_arg, "Comma-separated values")->required();
    sweep->add_option("--out", table_out, "Write the table here instead of stdout");
    sweep->add_flag("--assert-monotone", assert_monotone,
                    "Exit 3 unless steady-state max |y| is non-increasing (5% slack per step)");

    std::size_t trials = 10;
    std::uint64_t seed = 1;
    double check_horizon = 10.0;
    auto* check = app.add_subcommand("check-identifier",
                                     "Verify optimality, stability and regularity of the identifier");
    check->add_option("config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
    check->add_option("--trials", trials, "Random trials for the stability checks");
    check->add_option("--seed", seed, "Seed for the random trials");
    check->add_option("--horizon", check_horizon, "Core-process horizon in seconds");

    auto* validate = app.add_subcommand("validate", "Load and check a scenario config");
    validate->add_option("config", config_path, "Scenario JSON")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = sc::load_config(config_path);

        if (*validate) {
            std::cout << "ok\n";
            return 0;
        }

        if (*sim) {
            if (!csv_out.empty()) {
                cfg.output.csv = csv_out;
            }
            if (!summary_out.empty()) {
                cfg.output.summary = summary_out;
            }
            const auto result = sc::run_scenario(cfg);
            std::cout << sc::summary_to_json(result.summary).dump(2) << '\n';
            if (!std::isnan(assert_max_y) &&
                !(result.summary.steady_state_max_y <= assert_max_y)) {
                std::cerr << "assertion failed: steady-state max |y| = "
                          << result.summary.steady_state_max_y << " > " << assert_max_y << '\n';
                return kExitAssert;
            }
            return 0;
        }

        if (*sweep) {
            const auto axis = axis_name == "ell" ? sc::SweepAxis::ell : sc::SweepAxis::order;
            const auto cells = sc::run_sweep(cfg, axis, parse_values(values_arg));
            const auto table = sc::sweep_table(cells, axis);
            if (table_out.empty()) {
                std::cout << table;
            } else {
                std::ofstream(table_out) << table;
            }
            if (assert_monotone) {
                for (std::size_t i = 0; i < cells.size(); ++i) {
                    if (!cells[i].ok) {
                        std::cerr << "assertion failed: cell " << cells[i].value << " failed\n";
                        return kExitAssert;
                    }
                    if (i > 0 && cells[i].summary.steady_state_max_y >
                                     1.05 * cells[i - 1].summary.steady_state_max_y) {
                        std::cerr << "assertion failed: steady-state max |y| increases from "
                                  << cells[i - 1].value << " to " << cells[i].value << '\n';
                        return kExitAssert;
                    }
                }
            }
            return 0;
        }

        if (*check) {
            aimreg::harness::VerifyOptions opts;
            opts.trials = trials;
            opts.seed = seed;
            opts.horizon = check_horizon;
            opts.dt = std::min(cfg.sim.dt, cfg.clock.t_low / 10.0);
            const auto report = aimreg::harness::verify_identifier_requirement(
                sc::identifier_under_test(cfg), sc::core_process_for(cfg), opts);
            std::cout << report.to_text();
            return report.optimality && report.stability && report.regularity ? 0 : kExitAssert;
        }
    } catch (const aimreg::IntegrationBlowup& e) {
        std::cerr << "integration failure at t = " << e.at().t << ", j = " << e.at().j << ": "
                  << e.what() << '\n';
        return kExitIntegration;
    } catch (const aimreg::Error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return 0;
}
