#pragma once

// Scenario files, CSV emission, and the run orchestration used by the CLI.
//
// Scenarios are strict-schema JSON (unknown keys are hard errors, every
// error names the offending key path). Canonical form = nlohmann's sorted
// object dump; parse -> dump -> parse is the round-trip contract.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <limits>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "json.hpp"

#include "rotoreng/dynamics.hpp"
#include "rotoreng/engines.hpp"
#include "rotoreng/metrics.hpp"
#include "rotoreng/stateio.hpp"

namespace rotoreng {

using json = nlohmann::json;

// the fixed time-series schema; order matters and is part of the contract
inline const std::vector<std::string>& csv_columns()
{
    static const std::vector<std::string> cols = {
        "t",        "L_mean",        "L2_mean",     "W_kin_rate", "W_int_rate",
        "W_net_rate", "ergotropy",   "ergotropy_rate", "W_out_rate", "Q_hot_rate",
        "Q_cold_rate", "excitation", "edge_lo",     "edge_hi",    "trace_err"};
    return cols;
}

struct SteadyConfig {
    enum class Method { Relax, Direct } method = Method::Relax;
    double tol = 1e-8;
    double t_max = 1e4;
};

struct InitialSpec {
    enum class Kind { Default, RotorLevel, RotorGaussian, File } kind = Kind::Default;
    int level = 0;
    double mean = 0.0;
    double sigma = 1.0;
    std::string path;
};

struct SweepConfig {
    std::string param;
    std::vector<double> values;
};

struct Scenario {
    ModelKind kind = ModelKind::FreeRotor;
    MillParams mill;
    PistonParams piston;
    FreeRotorParams free_rotor;
    std::optional<LoadParams> load;
    std::optional<double> drive_omega;
    IntegratorConfig integrator;
    SteadyConfig steady;
    InitialSpec initial;
    std::optional<SweepConfig> sweep;
    std::optional<PistonParams> piston_match;  // used by the predict command
    std::vector<std::string> outputs;          // empty = every column
    long seed = 0;
    std::optional<std::string> save_final;
    json raw;
};

// ---------------------------------------------------------------------
// parsing helpers

namespace detail {

[[noreturn]] inline void key_error(const std::string& path, const std::string& what)
{
    throw config_error("scenario key '" + path + "': " + what);
}

inline void check_keys(const json& obj, const std::string& path,
                       const std::set<std::string>& allowed)
{
    if (!obj.is_object()) key_error(path, "must be a JSON object");
    for (const auto& [k, v] : obj.items())
        if (!allowed.count(k)) key_error(path + "." + k, "unknown key");
}

inline double get_num(const json& obj, const std::string& path, const std::string& key,
                      std::optional<double> fallback = std::nullopt)
{
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        key_error(path + "." + key, "missing required value");
    }
    if (!obj[key].is_number()) key_error(path + "." + key, "must be a number");
    return obj[key].get<double>();
}

inline int get_int(const json& obj, const std::string& path, const std::string& key,
                   std::optional<int> fallback = std::nullopt)
{
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        key_error(path + "." + key, "missing required value");
    }
    if (!obj[key].is_number_integer()) key_error(path + "." + key, "must be an integer");
    return obj[key].get<int>();
}

inline std::string get_str(const json& obj, const std::string& path, const std::string& key,
                           std::optional<std::string> fallback = std::nullopt)
{
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        key_error(path + "." + key, "missing required value");
    }
    if (!obj[key].is_string()) key_error(path + "." + key, "must be a string");
    return obj[key].get<std::string>();
}

inline void parse_rotor_window(const json& mj, const std::string& path, bool driven, int& l_min,
                               int& l_max)
{
    if (driven) {
        if (mj.contains("l_min") || mj.contains("l_max"))
            key_error(path, "drive replaces the rotor; rotor truncation must not be given");
        l_min = -1;  // placeholder window, never used by the driven model
        l_max = 1;
        return;
    }
    l_min = get_int(mj, path, "l_min");
    l_max = get_int(mj, path, "l_max");
}

inline PistonParams parse_piston_block(const json& mj, const std::string& path, bool driven)
{
    check_keys(mj, path,
               {"type", "g", "kappa", "n_hot", "n_cold", "fluid", "n_max", "omega0", "l_min",
                "l_max", "I", "hbar"});
    PistonParams p;
    p.g = get_num(mj, path, "g");
    p.kappa = get_num(mj, path, "kappa");
    p.n_hot = get_num(mj, path, "n_hot", 0.0);
    p.n_cold = get_num(mj, path, "n_cold", 0.0);
    p.omega0 = get_num(mj, path, "omega0", 0.0);
    p.inertia = get_num(mj, path, "I", 1.0);
    p.hbar = get_num(mj, path, "hbar", 1.0);
    const std::string fluid = get_str(mj, path, "fluid", std::string("qubit"));
    if (fluid == "qubit") {
        if (mj.contains("n_max")) key_error(path + ".n_max", "only valid for an oscillator fluid");
        p.fluid = Factor::qubit();
    } else if (fluid == "oscillator") {
        p.fluid = Factor::oscillator(get_int(mj, path, "n_max"));
    } else {
        key_error(path + ".fluid", "must be 'qubit' or 'oscillator'");
    }
    parse_rotor_window(mj, path, driven, p.l_min, p.l_max);
    return p;
}

inline MillParams parse_mill_block(const json& mj, const std::string& path, bool driven)
{
    check_keys(mj, path,
               {"type", "G", "kappa", "n_hot", "n_cold", "delta", "omega0", "l_min", "l_max",
                "I", "hbar"});
    MillParams p;
    p.G = get_num(mj, path, "G");
    p.kappa = get_num(mj, path, "kappa");
    p.n_hot = get_num(mj, path, "n_hot", 0.0);
    p.n_cold = get_num(mj, path, "n_cold", 0.0);
    p.delta = get_num(mj, path, "delta", 0.0);
    p.omega0 = get_num(mj, path, "omega0", 0.0);
    p.inertia = get_num(mj, path, "I", 1.0);
    p.hbar = get_num(mj, path, "hbar", 1.0);
    parse_rotor_window(mj, path, driven, p.l_min, p.l_max);
    return p;
}

} // namespace detail

inline Scenario parse_scenario_json(const json& j)
{
    using namespace detail;
    Scenario s;
    s.raw = j;
    check_keys(j, "$",
               {"model", "load", "drive", "integrator", "steady", "initial", "sweep",
                "outputs", "seed", "save_final", "piston_match"});
    if (!j.contains("model")) key_error("$.model", "missing model block");

    const bool driven = j.contains("drive");
    if (driven) {
        check_keys(j["drive"], "$.drive", {"omega"});
        const double omega = get_num(j["drive"], "$.drive", "omega");
        if (omega <= 0.0) key_error("$.drive.omega", "must be positive");
        s.drive_omega = omega;
        if (j.contains("load"))
            key_error("$.load", "a driven model has no rotor to attach a load to");
    }

    const json& mj = j["model"];
    const std::string type = get_str(mj, "$.model", "type");
    if (type == "mill" || type == "effective_mill") {
        s.kind = (type == "mill") ? ModelKind::Mill : ModelKind::EffectiveMill;
        s.mill = parse_mill_block(mj, "$.model", driven);
        if (driven && type == "effective_mill")
            key_error("$.drive", "the reduced mill model has no driven counterpart");
    } else if (type == "piston") {
        s.kind = ModelKind::Piston;
        s.piston = parse_piston_block(mj, "$.model", driven);
    } else if (type == "free_rotor") {
        if (driven) key_error("$.drive", "a free rotor has no driven counterpart");
        check_keys(mj, "$.model", {"type", "l_min", "l_max", "I", "hbar"});
        s.kind = ModelKind::FreeRotor;
        s.free_rotor.l_min = get_int(mj, "$.model", "l_min");
        s.free_rotor.l_max = get_int(mj, "$.model", "l_max");
        s.free_rotor.inertia = get_num(mj, "$.model", "I", 1.0);
        s.free_rotor.hbar = get_num(mj, "$.model", "hbar", 1.0);
    } else {
        key_error("$.model.type", "must be mill, piston, effective_mill or free_rotor");
    }

    if (j.contains("load")) {
        check_keys(j["load"], "$.load", {"gamma", "T_R"});
        LoadParams lp;
        lp.gamma = get_num(j["load"], "$.load", "gamma");
        lp.T_R = get_num(j["load"], "$.load", "T_R");
        if (lp.gamma < 0.0) key_error("$.load.gamma", "must be >= 0");
        if (lp.T_R <= 0.0) key_error("$.load.T_R", "must be positive");
        s.load = lp;
    }

    if (j.contains("integrator")) {
        const json& ij = j["integrator"];
        check_keys(ij, "$.integrator",
                   {"method", "dt", "t_end", "record_every", "rtol", "atol", "dt_initial",
                    "edge_warn", "edge_abort"});
        const std::string method = get_str(ij, "$.integrator", "method", std::string("rk4"));
        if (method == "rk4")
            s.integrator.method = IntegratorMethod::RK4Fixed;
        else if (method == "rk45")
            s.integrator.method = IntegratorMethod::RK45Adaptive;
        else
            key_error("$.integrator.method", "must be 'rk4' or 'rk45'");
        s.integrator.dt = get_num(ij, "$.integrator", "dt", 0.0);
        s.integrator.t_end = get_num(ij, "$.integrator", "t_end", 1.0);
        s.integrator.record_every = get_int(ij, "$.integrator", "record_every", 1);
        s.integrator.rtol = get_num(ij, "$.integrator", "rtol", 1e-8);
        s.integrator.atol = get_num(ij, "$.integrator", "atol", 1e-10);
        s.integrator.dt_initial = get_num(ij, "$.integrator", "dt_initial", 0.0);
        s.integrator.edge_warn = get_num(ij, "$.integrator", "edge_warn", 1e-4);
        s.integrator.edge_abort = get_num(ij, "$.integrator", "edge_abort", 1e-2);
        if (s.integrator.dt < 0.0) key_error("$.integrator.dt", "must be >= 0");
        if (s.integrator.t_end <= 0.0) key_error("$.integrator.t_end", "must be positive");
        if (s.integrator.record_every < 1)
            key_error("$.integrator.record_every", "must be >= 1");
    }

    if (j.contains("steady")) {
        const json& sj = j["steady"];
        check_keys(sj, "$.steady", {"method", "tol", "t_max"});
        const std::string method = get_str(sj, "$.steady", "method", std::string("relax"));
        if (method == "relax")
            s.steady.method = SteadyConfig::Method::Relax;
        else if (method == "direct")
            s.steady.method = SteadyConfig::Method::Direct;
        else
            key_error("$.steady.method", "must be 'relax' or 'direct'");
        s.steady.tol = get_num(sj, "$.steady", "tol", 1e-8);
        s.steady.t_max = get_num(sj, "$.steady", "t_max", 1e4);
        if (s.steady.tol <= 0.0) key_error("$.steady.tol", "must be positive");
    }

    if (j.contains("initial")) {
        const json& nj = j["initial"];
        check_keys(nj, "$.initial", {"type", "l", "mean", "sigma", "path"});
        const std::string type_i = get_str(nj, "$.initial", "type");
        if (type_i == "default") {
            s.initial.kind = InitialSpec::Kind::Default;
        } else if (type_i == "rotor_level") {
            s.initial.kind = InitialSpec::Kind::RotorLevel;
            s.initial.level = get_int(nj, "$.initial", "l");
        } else if (type_i == "rotor_gaussian") {
            s.initial.kind = InitialSpec::Kind::RotorGaussian;
            s.initial.mean = get_num(nj, "$.initial", "mean");
            s.initial.sigma = get_num(nj, "$.initial", "sigma");
            if (s.initial.sigma <= 0.0) key_error("$.initial.sigma", "must be positive");
        } else if (type_i == "file") {
            s.initial.kind = InitialSpec::Kind::File;
            s.initial.path = get_str(nj, "$.initial", "path");
        } else {
            key_error("$.initial.type",
                      "must be default, rotor_level, rotor_gaussian or file");
        }
    }

    if (j.contains("sweep")) {
        const json& wj = j["sweep"];
        check_keys(wj, "$.sweep", {"param", "values", "from", "to", "points", "scale"});
        SweepConfig sw;
        sw.param = get_str(wj, "$.sweep", "param");
        if (wj.contains("values")) {
            if (!wj["values"].is_array() || wj["values"].empty())
                key_error("$.sweep.values", "must be a non-empty array of numbers");
            for (const auto& v : wj["values"]) {
                if (!v.is_number()) key_error("$.sweep.values", "must contain only numbers");
                sw.values.push_back(v.get<double>());
            }
        } else {
            const double from = get_num(wj, "$.sweep", "from");
            const double to = get_num(wj, "$.sweep", "to");
            const int points = get_int(wj, "$.sweep", "points");
            const std::string scale = get_str(wj, "$.sweep", "scale", std::string("linear"));
            if (points < 1) key_error("$.sweep.points", "must be >= 1");
            for (int i = 0; i < points; ++i) {
                const double f = points == 1 ? 0.0 : double(i) / (points - 1);
                if (scale == "linear")
                    sw.values.push_back(from + f * (to - from));
                else if (scale == "log") {
                    if (from <= 0.0 || to <= 0.0)
                        key_error("$.sweep", "log scale requires positive endpoints");
                    sw.values.push_back(from * std::pow(to / from, f));
                } else
                    key_error("$.sweep.scale", "must be 'linear' or 'log'");
            }
        }
        s.sweep = std::move(sw);
    }

    if (j.contains("piston_match"))
        s.piston_match = detail::parse_piston_block(j["piston_match"], "$.piston_match", true);

    if (j.contains("outputs")) {
        if (!j["outputs"].is_array()) key_error("$.outputs", "must be an array of column names");
        for (const auto& v : j["outputs"]) {
            if (!v.is_string()) key_error("$.outputs", "must contain only strings");
            const std::string name = v.get<std::string>();
            const auto& cols = csv_columns();
            if (std::find(cols.begin(), cols.end(), name) == cols.end())
                key_error("$.outputs", "'" + name + "' is not a documented column");
            s.outputs.push_back(name);
        }
    }
    if (j.contains("seed")) {
        if (!j["seed"].is_number_integer()) key_error("$.seed", "must be an integer");
        s.seed = j["seed"].get<long>();
    }
    if (j.contains("save_final")) s.save_final = detail::get_str(j, "$", "save_final");
    return s;
}

inline Scenario parse_scenario(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw config_error("scenario file '" + path + "' does not exist");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw config_error("scenario file '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_scenario_json(j);
}

inline std::string canonical_scenario(const json& j) { return j.dump(2) + "\n"; }

// dot-path override, value parsed as a JSON literal (strings may be bare)
inline void apply_override(json& j, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw config_error("override '" + assignment + "' must look like key.path=value");
    const std::string path = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);
    json* node = &j;
    std::string::size_type pos = 0;
    while (true) {
        const auto dot = path.find('.', pos);
        const std::string key = path.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (key.empty()) throw config_error("override '" + assignment + "': empty key segment");
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[key] = parsed.is_discarded() ? json(value) : parsed;
            return;
        }
        node = &(*node)[key];
        pos = dot + 1;
    }
}

// ---------------------------------------------------------------------
// model construction

inline ModelSpec build_model(const Scenario& s)
{
    ModelSpec m;
    switch (s.kind) {
        case ModelKind::Mill: m = build_mill(s.mill); break;
        case ModelKind::Piston: m = build_piston(s.piston); break;
        case ModelKind::EffectiveMill: m = build_effective_mill(s.mill); break;
        case ModelKind::FreeRotor: m = build_free_rotor(s.free_rotor); break;
    }
    if (s.drive_omega) return driven_model(m, *s.drive_omega);
    if (s.load)
        m.channels.push_back(
            build_load_channel(*s.load, m.layout, *m.rotor_index, m.hbar, m.inertia));
    return m;
}

inline DensityMatrix initial_state(const Scenario& s, const ModelSpec& m)
{
    switch (s.initial.kind) {
        case InitialSpec::Kind::Default: return default_initial_state(m);
        case InitialSpec::Kind::File: {
            DensityMatrix rho = load_state(s.initial.path);
            if (!(rho.layout == m.layout))
                throw config_error("initial state file does not match the model layout");
            rho.validate(1e-8);
            return rho;
        }
        case InitialSpec::Kind::RotorLevel:
        case InitialSpec::Kind::RotorGaussian: break;
    }
    if (!m.rotor_index)
        throw config_error("rotor initial state requested for a model without a rotor");
    const Factor& f = m.layout.factors[*m.rotor_index];
    DensityMatrix rho = default_initial_state(m);
    // replace the rotor marginal, keeping the fluid factors thermal
    Matrix rot = Matrix::Zero(f.dim(), f.dim());
    if (s.initial.kind == InitialSpec::Kind::RotorLevel) {
        const int idx = s.initial.level - f.l_min;
        if (idx < 0 || idx >= f.dim())
            throw config_error("initial rotor level is outside the truncation window");
        rot(idx, idx) = 1.0;
    } else {
        double z = 0.0;
        for (int i = 0; i < f.dim(); ++i) {
            const double l = f.l_min + i;
            const double w = std::exp(-0.5 * std::pow((l - s.initial.mean) / s.initial.sigma, 2));
            rot(i, i) = w;
            z += w;
        }
        if (z <= 0.0) throw config_error("initial rotor gaussian has no support in the window");
        rot /= z;
    }
    // rebuild the product state rotor (x) (fluid marginal of the default state)
    const int trail = m.layout.trailing_dim(*m.rotor_index);
    Matrix rest = Matrix::Zero(trail, trail);
    // default rotor state is |l=0><0|; extract the non-rotor block at l = 0
    const int l0 = -f.l_min;
    rest = rho.data.block(l0 * trail, l0 * trail, trail, trail);
    Matrix full = Matrix::Zero(m.layout.dim, m.layout.dim);
    for (int r = 0; r < f.dim(); ++r)
        for (int c = 0; c < f.dim(); ++c)
            if (rot(r, c) != cplx(0.0, 0.0))
                full.block(r * trail, c * trail, trail, trail) = rot(r, c) * rest;
    return DensityMatrix(m.layout, std::move(full));
}

// ---------------------------------------------------------------------
// CSV helpers

namespace detail {

inline std::string fmt17(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace detail

struct TimeSeriesTable {
    std::vector<std::array<double, 15>> rows;

    void write_csv(const std::string& path, const std::vector<std::string>& selected) const
    {
        std::ofstream os(path);
        if (!os) throw format_error("cannot open '" + path + "' for writing");
        const auto& cols = csv_columns();
        for (size_t c = 0; c < cols.size(); ++c) os << (c ? "," : "") << cols[c];
        os << "\n";
        auto keep = [&](size_t c) {
            if (selected.empty() || c == 0) return true;
            return std::find(selected.begin(), selected.end(), cols[c]) != selected.end();
        };
        const double nan = std::numeric_limits<double>::quiet_NaN();
        for (const auto& row : rows) {
            for (size_t c = 0; c < cols.size(); ++c)
                os << (c ? "," : "") << detail::fmt17(keep(c) ? row[c] : nan);
            os << "\n";
        }
        if (!os) throw format_error("write to '" + path + "' failed");
    }
};

// ---------------------------------------------------------------------
// run: transient simulation producing the pinned time series

struct RunResult {
    TimeSeriesTable table;
    EvolutionDiagnostics diagnostics;
    DensityMatrix final_state;
    json summary;
};

inline RunResult run_simulate(const Scenario& s)
{
    if (s.drive_omega)
        throw config_error("simulate runs autonomous models; use the driven command");
    const ModelSpec m = build_model(s);
    const DensityMatrix rho0 = initial_state(s, m);
    const WorkObservers obs = WorkObservers::build(m);
    const Operator l2_op(m.layout, Matrix(obs.l_op.data * obs.l_op.data));
    const Operator ekin_rotor = [&] {
        const Factor& f = m.layout.factors[*m.rotor_index];
        const SpaceLayout rl({f});
        const Operator lr = angular_momentum_op(rl, 0, m.hbar);
        return Operator(rl, Matrix(lr.data * lr.data / (2.0 * m.inertia)));
    }();
    const bool has_fluid = m.layout.factors.size() > 1;
    const bool has_book = [&] {
        for (const auto& ch : m.channels)
            if (ch.bookkeeping_h) return true;
        return false;
    }();

    RunResult out{TimeSeriesTable{}, {}, rho0, json::object()};
    const double nan = std::numeric_limits<double>::quiet_NaN();

    Observer observer = [&](double t, const Matrix& data) {
        const DensityMatrix rho(m.layout, data);
        std::array<double, 15> row;
        row.fill(nan);
        row[0] = t;
        row[1] = expectation_real(rho, obs.l_op);
        row[2] = expectation_real(rho, l2_op);
        row[3] = expectation_real(rho, obs.kin_rate_obs);
        row[4] = expectation_real(rho, obs.intr_obs);
        row[5] = row[1] / m.inertia * expectation_real(rho, obs.net_drive_obs);
        row[6] = ergotropy(partial_trace(rho, *m.rotor_index), ekin_rotor).ergotropy;
        // row[7] (ergotropy_rate) is post-processed below
        if (obs.has_load) row[8] = expectation_real(rho, obs.w_out_obs);
        if (has_book) {
            row[9] = expectation_real(rho, obs.q_hot_obs);
            row[10] = expectation_real(rho, obs.q_cold_obs);
        }
        if (has_fluid) row[11] = expectation_real(rho, obs.excitation_obs);
        auto [lo, hi] = edge_population(m.layout, *m.rotor_index, data);
        row[12] = lo;
        row[13] = hi;
        row[14] = std::abs(data.trace().real() - 1.0) + std::abs(data.trace().imag());
        out.table.rows.push_back(row);
    };

    const EvolutionResult res = integrate(m, rho0, s.integrator, observer);
    out.diagnostics = res.diagnostics;
    out.final_state = res.final_state;

    // ergotropy rate from the recorded series (uniform grids only)
    const size_t n = out.table.rows.size();
    if (n >= 8) {
        bool uniform = true;
        const double h = out.table.rows[1][0] - out.table.rows[0][0];
        for (size_t i = 2; i < n && uniform; ++i)
            uniform = std::abs((out.table.rows[i][0] - out.table.rows[i - 1][0]) - h) <
                      1e-9 * std::max(1.0, std::abs(h));
        if (uniform && h > 0.0) {
            std::vector<double> erg(n);
            double lo = out.table.rows[0][6], hi = lo;
            for (size_t i = 0; i < n; ++i) {
                erg[i] = out.table.rows[i][6];
                lo = std::min(lo, erg[i]);
                hi = std::max(hi, erg[i]);
            }
            const double alpha = 1e-3 * std::max(hi - lo, 1e-12);
            const std::vector<double> rate = tv_derivative(erg, h, alpha);
            for (size_t i = 0; i < n; ++i) out.table.rows[i][7] = rate[i];
        }
    }

    out.summary = {
        {"samples", n},
        {"steps", out.diagnostics.steps},
        {"max_trace_err", out.diagnostics.max_trace_err},
        {"max_edge_pop", out.diagnostics.max_edge_pop},
        {"edge_warned", out.diagnostics.edge_warned},
        {"final_t", out.table.rows.empty() ? 0.0 : out.table.rows.back()[0]},
        {"final_L_mean", out.table.rows.empty() ? 0.0 : out.table.rows.back()[1]},
        {"final_ergotropy", out.table.rows.empty() ? 0.0 : out.table.rows.back()[6]},
    };
    return out;
}

// ---------------------------------------------------------------------
// steady state summary

struct SteadySummary {
    DensityMatrix state;
    json summary;
};

inline SteadySummary run_steady(const Scenario& s)
{
    if (s.drive_omega)
        throw config_error("steady runs autonomous models; use the driven command");
    const ModelSpec m = build_model(s);
    const DensityMatrix rho0 = initial_state(s, m);

    SteadyStateResult res =
        (s.steady.method == SteadyConfig::Method::Direct)
            ? steady_state_direct(m, rho0, s.steady.tol)
            : steady_state(m, rho0, s.steady.tol, s.steady.t_max, s.integrator);

    const Operator L = angular_momentum_op(m.layout, *m.rotor_index, m.hbar);
    const Operator L2(m.layout, Matrix(L.data * L.data));
    const double l_mean = expectation_real(res.state, L);
    const double l2_mean = expectation_real(res.state, L2);
    const HeatFlows hf = heat_flows(m, res.state);
    const double w_int = intrinsic_power(m, res.state);
    auto [edge_lo, edge_hi] = edge_population(m.layout, *m.rotor_index, res.state.data);

    json summary = {
        {"converged", res.converged},
        {"residual", res.residual},
        {"steps", res.steps},
        {"elapsed_model_time", res.elapsed_model_time},
        {"L_mean", l_mean},
        {"L2_mean", l2_mean},
        {"E_kin_mean", l2_mean / (2.0 * m.inertia)},
        {"W_int_rate", w_int},
        {"Q_hot_rate", hf.q_hot},
        {"Q_cold_rate", hf.q_cold},
        {"edge_lo", edge_lo},
        {"edge_hi", edge_hi},
        {"trace", res.state.trace_real()},
    };
    if (s.load) {
        summary["W_out_rate"] = hf.w_out;
        summary["eta_in_kappa_over_omega0"] = hf.efficiency;
    }
    return {res.state, std::move(summary)};
}

// ---------------------------------------------------------------------
// driven run

struct DrivenRunResult {
    DrivenEnergetics energetics;
    std::vector<double> excitation;
    std::vector<double> trace_err;
    json summary;
};

inline DrivenRunResult run_driven(const Scenario& s)
{
    if (!s.drive_omega) throw config_error("driven command requires a drive block");
    const ModelSpec m = build_model(s);
    const DensityMatrix rho0 = initial_state(s, m);

    IntegratorConfig cfg = s.integrator;
    const double cycle = 2.0 * M_PI / *s.drive_omega;
    if (cfg.dt <= 0.0) cfg.dt = cycle / 2000.0;

    EvolutionResult res;
    {
        IntegratorConfig c2 = cfg;
        c2.record_states = true;
        res = integrate(m, rho0, c2);
    }
    DrivenRunResult out;
    out.energetics = driven_work_heat(m, res.times, res.states);
    Matrix exc = Matrix::Zero(m.layout.dim, m.layout.dim);
    for (size_t i = 0; i < m.layout.factors.size(); ++i) exc += number_op(m.layout, i).data;
    const Operator exc_op(m.layout, std::move(exc));
    for (size_t i = 0; i < res.states.size(); ++i) {
        out.excitation.push_back(expectation_real(res.states[i], exc_op));
        out.trace_err.push_back(std::abs(res.states[i].trace_real() - 1.0));
    }

    // stationary per-cycle work: trailing full cycle of the run
    double work_last_cycle = std::numeric_limits<double>::quiet_NaN();
    const auto& t = out.energetics.times;
    const auto& w = out.energetics.work;
    if (t.back() >= cycle) {
        const double t_lo = t.back() - cycle;
        size_t i_lo = 0;
        for (size_t i = 0; i < t.size(); ++i)
            if (t[i] <= t_lo) i_lo = i;
        work_last_cycle = w.back() - w[i_lo];
    }
    out.summary = {
        {"omega", *s.drive_omega},
        {"cycle_period", cycle},
        {"cycles", t.back() / cycle},
        {"work_total", w.back()},
        {"heat_total", out.energetics.heat.back()},
        {"work_last_cycle", work_last_cycle},
        {"cycle_defect", out.energetics.cycle_defect},
        {"steps", res.diagnostics.steps},
    };
    if (s.kind == ModelKind::Piston)
        out.summary["ideal_cycle_work"] = ideal_cycle_work(s.piston);
    return out;
}

inline void write_driven_csv(const DrivenRunResult& r, const std::string& path)
{
    std::ofstream os(path);
    if (!os) throw format_error("cannot open '" + path + "' for writing");
    os << "t,W_cum,Q_cum,W_rate,Q_rate,excitation,trace_err\n";
    for (size_t i = 0; i < r.energetics.times.size(); ++i) {
        os << detail::fmt17(r.energetics.times[i]) << ',' << detail::fmt17(r.energetics.work[i])
           << ',' << detail::fmt17(r.energetics.heat[i]) << ','
           << detail::fmt17(r.energetics.work_rate[i]) << ','
           << detail::fmt17(r.energetics.heat_rate[i]) << ',' << detail::fmt17(r.excitation[i])
           << ',' << detail::fmt17(r.trace_err[i]) << "\n";
    }
}

// ---------------------------------------------------------------------
// sweep: one steady-state (or driven-cycle) summary row per value

struct SweepRow {
    double value = 0.0;
    bool converged = false;
    double w_out = std::numeric_limits<double>::quiet_NaN();
    double w_int = std::numeric_limits<double>::quiet_NaN();
    double eta = std::numeric_limits<double>::quiet_NaN();
    double l_mean = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

inline SweepRow sweep_point(const json& base, const std::string& param, double value)
{
    SweepRow row;
    row.value = value;
    try {
        json j = base;
        j.erase("sweep");
        apply_override(j, param + "=" + detail::fmt17(value));
        const Scenario s = parse_scenario_json(j);
        if (s.drive_omega) {
            // stationary cycle average after a settling run
            Scenario sd = s;
            const double cycle = 2.0 * M_PI / *s.drive_omega;
            const double kappa = (s.kind == ModelKind::Mill) ? s.mill.kappa : s.piston.kappa;
            const double settle = 8.0 / kappa;
            const double n_cycles = std::max(4.0, std::ceil(settle / cycle) + 2.0);
            sd.integrator.t_end = n_cycles * cycle;
            sd.integrator.record_every = 5;
            const DrivenRunResult r = run_driven(sd);
            row.converged = true;
            row.w_out = r.summary["work_last_cycle"].get<double>() / cycle;
        } else {
            const SteadySummary sum = run_steady(s);
            row.converged = sum.summary["converged"].get<bool>();
            row.residual = sum.summary["residual"].get<double>();
            row.l_mean = sum.summary["L_mean"].get<double>();
            row.w_int = sum.summary["W_int_rate"].get<double>();
            if (sum.summary.contains("W_out_rate")) {
                row.w_out = sum.summary["W_out_rate"].get<double>();
                row.eta = sum.summary["eta_in_kappa_over_omega0"].get<double>();
            }
        }
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

inline std::vector<SweepRow> run_sweep(const Scenario& s, int workers)
{
    if (!s.sweep) throw config_error("sweep command requires a sweep block");
    if (workers < 1) throw config_error("worker count must be >= 1");
    const size_t n = s.sweep->values.size();
    std::vector<SweepRow> rows(n);
    std::atomic<size_t> next{0};
    auto worker = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= n) return;
            rows[i] = sweep_point(s.raw, s.sweep->param, s.sweep->values[i]);
        }
    };
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    return rows;
}

inline void write_sweep_csv(const std::string& param, const std::vector<SweepRow>& rows,
                            const std::string& path)
{
    std::ofstream os(path);
    if (!os) throw format_error("cannot open '" + path + "' for writing");
    os << "param,value,W_out_rate,W_int_rate,eta,L_mean,residual,converged,error\n";
    for (const auto& r : rows) {
        std::string err = r.error;
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        os << param << ',' << detail::fmt17(r.value) << ',' << detail::fmt17(r.w_out) << ','
           << detail::fmt17(r.w_int) << ',' << detail::fmt17(r.eta) << ','
           << detail::fmt17(r.l_mean) << ',' << detail::fmt17(r.residual) << ','
           << (r.converged ? "true" : "false") << ',' << err << "\n";
    }
}

} // namespace rotoreng
