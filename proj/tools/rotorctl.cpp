// rotorctl: scenario-driven command line front end.
//
// Exit codes:
//   0  success
//   2  configuration / file format error
//   3  rotor or fluid truncation window exhausted
//   4  integration blow-up (non-finite state or trace drift)
//   5  steady-state search did not converge

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rotoreng/scenario.hpp"

using namespace rotoreng;

namespace {

Scenario load_with_overrides(const std::string& path, const std::vector<std::string>& overrides)
{
    std::ifstream is(path);
    if (!is) throw config_error("scenario file '" + path + "' does not exist");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw config_error("scenario file '" + path + "' is not valid JSON: " + e.what());
    }
    for (const auto& o : overrides) apply_override(j, o);
    return parse_scenario_json(j);
}

void write_text(const std::string& path, const std::string& text)
{
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream os(path);
    if (!os) throw format_error("cannot open '" + path + "' for writing");
    os << text;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"rotor heat engine simulator"};
    app.require_subcommand(1);

    std::string scenario_path, out_path = "-", summary_path, save_state_path, state_path;
    std::vector<std::string> overrides;
    int workers = 1;
    double inertia = 1.0, hbar = 1.0;

    auto add_common = [&](CLI::App* cmd, bool needs_scenario = true) {
        if (needs_scenario)
            cmd->add_option("--scenario", scenario_path, "scenario JSON file")->required();
        cmd->add_option("--out", out_path, "output file ('-' for stdout)");
        cmd->add_option("--override", overrides,
                        "dot-path override, e.g. model.G=12 (repeatable)");
    };

    CLI::App* c_validate = app.add_subcommand("validate", "parse a scenario, print canonical form");
    add_common(c_validate);

    CLI::App* c_simulate = app.add_subcommand("simulate", "integrate and emit the time series CSV");
    add_common(c_simulate);
    c_simulate->add_option("--summary", summary_path, "also write a JSON run summary");
    c_simulate->add_option("--save-state", save_state_path, "save the final density matrix");

    CLI::App* c_steady = app.add_subcommand("steady", "solve for the steady state, emit JSON");
    add_common(c_steady);
    c_steady->add_option("--save-state", save_state_path, "save the steady density matrix");

    CLI::App* c_sweep = app.add_subcommand("sweep", "parameter sweep of steady-state summaries");
    add_common(c_sweep);
    c_sweep->add_option("--workers", workers, "parallel sweep workers")->check(CLI::PositiveNumber);

    CLI::App* c_driven = app.add_subcommand("driven", "externally driven cycle, emit CSV");
    add_common(c_driven);
    c_driven->add_option("--summary", summary_path, "also write a JSON cycle summary");

    CLI::App* c_ergo = app.add_subcommand("ergotropy", "ergotropy of a saved state vs L^2/2I");
    c_ergo->add_option("--state", state_path, "density matrix snapshot")->required();
    c_ergo->add_option("--inertia", inertia, "moment of inertia");
    c_ergo->add_option("--hbar", hbar, "reduced Planck constant");
    c_ergo->add_option("--out", out_path, "output file ('-' for stdout)");

    CLI::App* c_predict = app.add_subcommand("predict", "closed-form predictors for a scenario");
    add_common(c_predict);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_validate->parsed()) {
            const Scenario s = load_with_overrides(scenario_path, overrides);
            write_text(out_path, canonical_scenario(s.raw));
        } else if (c_simulate->parsed()) {
            const Scenario s = load_with_overrides(scenario_path, overrides);
            const RunResult r = run_simulate(s);
            if (out_path == "-") {
                TimeSeriesTable t = r.table;
                const std::string tmp = "/tmp/rotorctl_stdout.csv";
                t.write_csv(tmp, s.outputs);
                std::ifstream is(tmp);
                std::cout << is.rdbuf();
            } else {
                r.table.write_csv(out_path, s.outputs);
            }
            if (!summary_path.empty()) write_text(summary_path, r.summary.dump(2) + "\n");
            if (!save_state_path.empty()) save_state(r.final_state, save_state_path);
            else if (s.save_final) save_state(r.final_state, *s.save_final);
        } else if (c_steady->parsed()) {
            const Scenario s = load_with_overrides(scenario_path, overrides);
            const SteadySummary r = run_steady(s);
            write_text(out_path, r.summary.dump(2) + "\n");
            if (!save_state_path.empty()) save_state(r.state, save_state_path);
            else if (s.save_final) save_state(r.state, *s.save_final);
            if (!r.summary["converged"].get<bool>()) return 5;
        } else if (c_sweep->parsed()) {
            const Scenario s = load_with_overrides(scenario_path, overrides);
            const std::vector<SweepRow> rows = run_sweep(s, workers);
            if (out_path == "-") {
                const std::string tmp = "/tmp/rotorctl_sweep.csv";
                write_sweep_csv(s.sweep->param, rows, tmp);
                std::ifstream is(tmp);
                std::cout << is.rdbuf();
            } else {
                write_sweep_csv(s.sweep->param, rows, out_path);
            }
        } else if (c_driven->parsed()) {
            const Scenario s = load_with_overrides(scenario_path, overrides);
            const DrivenRunResult r = run_driven(s);
            if (out_path == "-") {
                const std::string tmp = "/tmp/rotorctl_driven.csv";
                write_driven_csv(r, tmp);
                std::ifstream is(tmp);
                std::cout << is.rdbuf();
            } else {
                write_driven_csv(r, out_path);
            }
            if (!summary_path.empty()) write_text(summary_path, r.summary.dump(2) + "\n");
        } else if (c_ergo->parsed()) {
            const DensityMatrix rho = load_state(state_path);
            rho.validate(1e-8);
            size_t rotor = 0;
            bool found = false;
            for (size_t i = 0; i < rho.layout.factors.size(); ++i)
                if (rho.layout.factors[i].kind == FactorKind::Rotor) {
                    rotor = i;
                    found = true;
                }
            if (!found) throw config_error("saved state has no rotor factor");
            const DensityMatrix reduced = partial_trace(rho, rotor);
            const Operator l = angular_momentum_op(reduced.layout, 0, hbar);
            const Operator e_kin(reduced.layout, Matrix(l.data * l.data / (2.0 * inertia)));
            const PassiveDecomposition pd = ergotropy(reduced, e_kin);
            const double l_mean = expectation_real(reduced, l);
            const json out = {
                {"energy", pd.current_energy},
                {"passive_energy", pd.passive_energy},
                {"ergotropy", pd.ergotropy},
                {"L_mean", l_mean},
                {"boost_bound", ergotropy_boost_bound(l_mean, inertia, hbar)},
            };
            write_text(out_path, out.dump(2) + "\n");
        } else if (c_predict->parsed()) {
            const Scenario s = load_with_overrides(scenario_path, overrides);
            if (s.kind != ModelKind::Mill && s.kind != ModelKind::EffectiveMill)
                throw config_error("predict requires a mill or effective_mill model");
            std::optional<PistonParams> match;
            if (s.piston_match) match = *s.piston_match;
            else if (s.kind == ModelKind::Piston) match = s.piston;
            std::optional<LoadParams> load = s.load;
            const PredictorSet p = predictors(s.mill, match, load);
            json out = {
                {"xi", p.xi},
                {"gain_up", p.gain_up},
                {"gain_down", p.gain_down},
                {"l_drift_rate", p.l_drift_rate},
                {"g_osc_match", p.g_osc_match},
            };
            if (match) out["g_match"] = p.g_match;
            if (load) {
                out["l_ss"] = p.l_ss;
                out["var_l_ss"] = p.var_l_ss;
            }
            write_text(out_path, out.dump(2) + "\n");
        }
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const format_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const layout_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const state_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const truncation_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const blowup_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const nonconvergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 5;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
