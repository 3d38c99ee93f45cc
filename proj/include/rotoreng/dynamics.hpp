#pragma once

// Time evolution and steady states.
//
// Fixed-step RK4 is the default integrator (bitwise-reproducible runs);
// an embedded Dormand-Prince RK45 is available opt-in. No trace
// renormalization and no positivity clipping anywhere: deviations are
// surfaced through diagnostics and hard errors instead of being hidden.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "rotoreng/engines.hpp"

namespace rotoreng {

enum class IntegratorMethod { RK4Fixed, RK45Adaptive };

struct IntegratorConfig {
    IntegratorMethod method = IntegratorMethod::RK4Fixed;
    double dt = 0.0;           // 0 -> default_timestep(model)
    double t_end = 1.0;
    int record_every = 1;      // sample stride in accepted steps
    double rtol = 1e-8;        // RK45 only
    double atol = 1e-10;       // RK45 only
    double dt_initial = 0.0;   // RK45 only, 0 -> default_timestep(model)
    double edge_warn = 1e-4;
    double edge_abort = 1e-2;
    bool record_states = false;
};

struct EvolutionDiagnostics {
    double max_trace_err = 0.0;
    double max_herm_defect = 0.0;
    double max_edge_pop = 0.0;
    double max_cutoff_pop = 0.0;  // oscillator truncation monitor
    bool edge_warned = false;
    long steps = 0;
    long rejected_steps = 0;  // RK45
};

struct EvolutionResult {
    std::vector<double> times;
    std::vector<DensityMatrix> states;  // filled only if record_states
    DensityMatrix final_state;
    EvolutionDiagnostics diagnostics;
};

// Population in the outermost rotor momentum levels.
inline std::pair<double, double> edge_population(const SpaceLayout& layout, size_t rotor_index,
                                                 const Matrix& rho)
{
    const Factor& f = layout.factors.at(rotor_index);
    if (f.kind != FactorKind::Rotor) throw layout_error("edge_population: factor is not a rotor");
    const int lead = layout.leading_dim(rotor_index);
    const int trail = layout.trailing_dim(rotor_index);
    double lo = 0.0, hi = 0.0;
    for (int a = 0; a < lead; ++a)
        for (int b = 0; b < trail; ++b) {
            const int base = a * f.dim() * trail + b;
            lo += rho(base, base).real();
            const int top = base + (f.dim() - 1) * trail;
            hi += rho(top, top).real();
        }
    return {lo, hi};
}

// Population in the top oscillator level (0 when no oscillator factor).
inline double cutoff_population(const SpaceLayout& layout, const Matrix& rho)
{
    double worst = 0.0;
    for (size_t i = 0; i < layout.factors.size(); ++i) {
        const Factor& f = layout.factors[i];
        if (f.kind != FactorKind::Oscillator) continue;
        const int lead = layout.leading_dim(i);
        const int trail = layout.trailing_dim(i);
        double pop = 0.0;
        for (int a = 0; a < lead; ++a)
            for (int b = 0; b < trail; ++b)
                pop += rho(a * f.dim() * trail + b + (f.dim() - 1) * trail,
                           a * f.dim() * trail + b + (f.dim() - 1) * trail)
                           .real();
        worst = std::max(worst, pop);
    }
    return worst;
}

// Fastest rate in the problem; the default step resolves it 20x.
inline double default_timestep(const ModelSpec& m)
{
    double w_max = 0.0;
    if (m.rotor_index) {
        const Factor& f = m.layout.factors[*m.rotor_index];
        const double l2 = std::max(double(f.l_min) * f.l_min, double(f.l_max) * f.l_max);
        w_max = std::max(w_max, m.hbar * l2 / (2.0 * m.inertia));
    }
    for (const auto& ch : m.channels)
        for (const auto& wl : ch.ops) w_max = std::max(w_max, wl.weight);
    if (m.mill_params) w_max = std::max(w_max, m.mill_params->G);
    if (m.piston_params) w_max = std::max(w_max, m.piston_params->g);
    if (m.drive) w_max = std::max(w_max, m.drive->omega);
    if (w_max <= 0.0) w_max = 1.0;
    return 0.05 / w_max;
}

using Observer = std::function<void(double t, const Matrix& rho)>;

namespace detail {

struct StepChecker {
    const ModelSpec& m;
    const IntegratorConfig& cfg;
    EvolutionDiagnostics& diag;

    void operator()(double t, const Matrix& rho)
    {
        if (!rho.allFinite())
            throw blowup_error("state became non-finite at t = " + std::to_string(t));
        const double tr_err = std::abs(rho.trace().real() - 1.0) + std::abs(rho.trace().imag());
        diag.max_trace_err = std::max(diag.max_trace_err, tr_err);
        if (tr_err > 1e-3)
            throw blowup_error("trace drifted by " + std::to_string(tr_err) + " at t = " +
                               std::to_string(t));
        const double herm = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
        diag.max_herm_defect = std::max(diag.max_herm_defect, herm);
        if (m.rotor_index) {
            auto [lo, hi] = edge_population(m.layout, *m.rotor_index, rho);
            const double edge = std::max(lo, hi);
            diag.max_edge_pop = std::max(diag.max_edge_pop, edge);
            if (edge > cfg.edge_abort)
                throw truncation_error("rotor edge population " + std::to_string(edge) +
                                       " exceeds abort threshold at t = " + std::to_string(t));
            if (edge > cfg.edge_warn) diag.edge_warned = true;
        }
        const double cut = cutoff_population(m.layout, rho);
        diag.max_cutoff_pop = std::max(diag.max_cutoff_pop, cut);
        if (cut > cfg.edge_abort)
            throw truncation_error("oscillator cutoff population " + std::to_string(cut) +
                                   " exceeds abort threshold at t = " + std::to_string(t));
    }
};

} // namespace detail

inline EvolutionResult integrate(const ModelSpec& m, const DensityMatrix& rho0,
                                 const IntegratorConfig& cfg, const Observer& observer = nullptr)
{
    if (rho0.layout.dim != m.layout.dim)
        throw layout_error("integrate: initial state does not match model layout");
    if (cfg.t_end <= 0.0) throw config_error("integrate: t_end must be positive");
    if (cfg.record_every < 1) throw config_error("integrate: record_every must be >= 1");
    m.finalize();

    EvolutionResult res;
    res.final_state = rho0;
    detail::StepChecker check{m, cfg, res.diagnostics};

    const int dim = m.layout.dim;
    Matrix rho = rho0.data;
    Matrix k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim), tmp(dim, dim),
        scratch(dim, dim);

    auto record = [&](double t) {
        check(t, rho);
        res.times.push_back(t);
        if (cfg.record_states) res.states.emplace_back(m.layout, rho);
        if (observer) observer(t, rho);
    };

    if (cfg.method == IntegratorMethod::RK4Fixed) {
        const double dt_req = cfg.dt > 0.0 ? cfg.dt : default_timestep(m);
        const long n_steps = std::max<long>(1, std::lround(cfg.t_end / dt_req));
        const double dt = cfg.t_end / double(n_steps);

        record(0.0);
        for (long s = 0; s < n_steps; ++s) {
            const double t = s * dt;
            liouvillian_apply_into(m, rho, t, k1, scratch);
            tmp = rho + (0.5 * dt) * k1;
            liouvillian_apply_into(m, tmp, t + 0.5 * dt, k2, scratch);
            tmp = rho + (0.5 * dt) * k2;
            liouvillian_apply_into(m, tmp, t + 0.5 * dt, k3, scratch);
            tmp = rho + dt * k3;
            liouvillian_apply_into(m, tmp, t + dt, k4, scratch);
            rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            ++res.diagnostics.steps;
            if ((s + 1) % cfg.record_every == 0 || s + 1 == n_steps) record((s + 1) * dt);
        }
    } else {
        // Dormand-Prince 5(4)
        static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
        static const double a21 = 1.0 / 5;
        static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
        static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
        static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
        static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
        static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
        static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

        Matrix k5(dim, dim), k6(dim, dim), k7(dim, dim), rho_new(dim, dim);
        double t = 0.0;
        double h = cfg.dt_initial > 0.0 ? cfg.dt_initial : default_timestep(m);
        long accepted_since_record = 0;

        record(0.0);
        while (t < cfg.t_end) {
            h = std::min(h, cfg.t_end - t);
            liouvillian_apply_into(m, rho, t, k1, scratch);
            tmp = rho + h * a21 * k1;
            liouvillian_apply_into(m, tmp, t + c2 * h, k2, scratch);
            tmp = rho + h * (a31 * k1 + a32 * k2);
            liouvillian_apply_into(m, tmp, t + c3 * h, k3, scratch);
            tmp = rho + h * (a41 * k1 + a42 * k2 + a43 * k3);
            liouvillian_apply_into(m, tmp, t + c4 * h, k4, scratch);
            tmp = rho + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
            liouvillian_apply_into(m, tmp, t + c5 * h, k5, scratch);
            tmp = rho + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
            liouvillian_apply_into(m, tmp, t + h, k6, scratch);
            rho_new = rho + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            liouvillian_apply_into(m, rho_new, t + h, k7, scratch);

            tmp = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double scale = cfg.atol + cfg.rtol * std::max(rho.norm(), rho_new.norm());
            const double err = tmp.norm() / scale;

            if (err <= 1.0 || h <= 1e-14 * cfg.t_end) {
                t += h;
                rho.swap(rho_new);
                ++res.diagnostics.steps;
                ++accepted_since_record;
                if (accepted_since_record >= cfg.record_every || t >= cfg.t_end) {
                    record(t);
                    accepted_since_record = 0;
                }
            } else {
                ++res.diagnostics.rejected_steps;
            }
            const double fac =
                std::clamp(0.9 * std::pow(std::max(err, 1e-12), -0.2), 0.2, 5.0);
            h *= fac;
            if (res.diagnostics.steps + res.diagnostics.rejected_steps > 100000000L)
                throw nonconvergence_error("adaptive integrator exceeded step budget");
        }
    }

    res.final_state = DensityMatrix(m.layout, std::move(rho));
    return res;
}

// ---------------------------------------------------------------------
// Steady states

struct SteadyStateResult {
    DensityMatrix state;
    bool converged = false;
    double residual = 0.0;  // ||L rho||_F / ||rho||_F
    double elapsed_model_time = 0.0;
    long steps = 0;
};

// Long-time relaxation with a residual-based stopping rule: every 100
// steps evaluate ||L rho||_F; declare convergence after 10 consecutive
// checks below tol * ||rho||_F.
inline SteadyStateResult steady_state(const ModelSpec& m, const DensityMatrix& rho0, double tol,
                                      double t_max, const IntegratorConfig& cfg_in = {})
{
    if (tol <= 0.0) throw config_error("steady_state: tol must be positive");
    if (t_max <= 0.0) throw config_error("steady_state: t_max must be positive");
    m.finalize();

    IntegratorConfig cfg = cfg_in;
    const double dt = cfg.dt > 0.0 ? cfg.dt : default_timestep(m);
    const int check_interval = 100;
    const int needed = 10;

    const int dim = m.layout.dim;
    Matrix rho = rho0.data;
    Matrix k1(dim, dim), k2(dim, dim), k3(dim, dim), k4(dim, dim), tmp(dim, dim),
        scratch(dim, dim);

    SteadyStateResult res{DensityMatrix(m.layout, rho), false, 0.0, 0.0, 0};
    EvolutionDiagnostics diag;
    detail::StepChecker check{m, cfg, diag};

    double t = 0.0;
    int streak = 0;
    while (t < t_max) {
        for (int s = 0; s < check_interval && t < t_max; ++s) {
            liouvillian_apply_into(m, rho, t, k1, scratch);
            tmp = rho + (0.5 * dt) * k1;
            liouvillian_apply_into(m, tmp, t + 0.5 * dt, k2, scratch);
            tmp = rho + (0.5 * dt) * k2;
            liouvillian_apply_into(m, tmp, t + 0.5 * dt, k3, scratch);
            tmp = rho + dt * k3;
            liouvillian_apply_into(m, tmp, t + dt, k4, scratch);
            rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += dt;
            ++res.steps;
        }
        check(t, rho);
        liouvillian_apply_into(m, rho, t, k1, scratch);
        res.residual = k1.norm() / rho.norm();
        streak = (res.residual < tol) ? streak + 1 : 0;
        if (streak >= needed) {
            res.converged = true;
            break;
        }
    }
    res.elapsed_model_time = t;
    res.state = DensityMatrix(m.layout, std::move(rho));
    if (!res.converged)
        throw nonconvergence_error("steady_state: residual " + std::to_string(res.residual) +
                                   " after t = " + std::to_string(t));
    return res;
}

namespace detail {

// Structural reachability of density-matrix entries under the generator,
// starting from the support of rho0. Offsets act as (i,j) <- (i+di, j+dj).
inline std::vector<char> support_mask(const ModelSpec& m, const Matrix& rho0)
{
    const int dim = m.layout.dim;
    m.finalize();
    if (m.drive) throw config_error("steady_state_direct: driven models not supported");

    std::vector<std::pair<int, int>> moves;
    for (const auto& band : m.cache.drift.bands) {
        moves.emplace_back(band.offset, 0);
        moves.emplace_back(0, band.offset);
    }
    for (const auto& lop : m.cache.lindblad)
        for (const auto& ba : lop.a.bands)
            for (const auto& bb : lop.a.bands) moves.emplace_back(ba.offset, bb.offset);
    std::sort(moves.begin(), moves.end());
    moves.erase(std::unique(moves.begin(), moves.end()), moves.end());

    std::vector<char> mask(size_t(dim) * dim, 0);
    std::vector<std::pair<int, int>> queue;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            if (rho0(i, j) != cplx(0.0, 0.0)) {
                mask[size_t(i) * dim + j] = 1;
                queue.emplace_back(i, j);
            }
    // forward closure: a source entry (i, j) feeds (i - di, j - dj)
    while (!queue.empty()) {
        const auto [si, sj] = queue.back();
        queue.pop_back();
        for (const auto& [di, dj] : moves) {
            const int i = si - di, j = sj - dj;
            if (i < 0 || i >= dim || j < 0 || j >= dim) continue;
            if (!mask[size_t(i) * dim + j]) {
                mask[size_t(i) * dim + j] = 1;
                queue.emplace_back(i, j);
            }
        }
    }
    return mask;
}

} // namespace detail

// Direct steady state: solve L rho = 0 restricted to the entries
// structurally reachable from rho0's support, with the trace condition
// replacing one redundant row. Exact (up to the sparse LU) and immune to
// the slow-relaxation problem of weakly damped engines.
inline SteadyStateResult steady_state_direct(const ModelSpec& m, const DensityMatrix& rho0,
                                             double tol = 1e-10)
{
    const int dim = m.layout.dim;
    m.finalize();

    const std::vector<char> mask = detail::support_mask(m, rho0.data);
    std::vector<int> index(size_t(dim) * dim, -1);
    std::vector<std::pair<int, int>> entries;
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j)
            if (mask[size_t(i) * dim + j]) {
                index[size_t(i) * dim + j] = int(entries.size());
                entries.emplace_back(i, j);
            }
    const int n = int(entries.size());
    if (n == 0) throw state_error("steady_state_direct: initial state has empty support");

    // trace row replaces the equation for the first diagonal entry
    int trace_row = -1;
    for (int d = 0; d < dim && trace_row < 0; ++d)
        if (index[size_t(d) * dim + d] >= 0) trace_row = index[size_t(d) * dim + d];
    if (trace_row < 0) throw state_error("steady_state_direct: no diagonal entry in support");

    std::vector<Eigen::Triplet<cplx>> trip;
    trip.reserve(size_t(n) * 16);
    auto add = [&](int row, int i, int j, cplx v) {
        const int col = index[size_t(i) * dim + j];
        if (col >= 0 && v != cplx(0.0, 0.0)) trip.emplace_back(row, col, v);
    };

    for (int r = 0; r < n; ++r) {
        if (r == trace_row) continue;
        const auto [i, j] = entries[r];
        // (K rho)_{ij}
        for (const auto& band : m.cache.drift.bands) {
            const int k = i + band.offset;
            if (k < 0 || k >= dim) continue;
            const int row_lo = std::max(0, -band.offset);
            add(r, k, j, band.coeff(i - row_lo));
        }
        // (rho K^dag)_{ij}: K^dag_{kj} = conj(K_{jk})
        for (const auto& band : m.cache.drift.bands) {
            const int k = j + band.offset;
            if (k < 0 || k >= dim) continue;
            const int row_lo = std::max(0, -band.offset);
            add(r, i, k, std::conj(band.coeff(j - row_lo)));
        }
        // sum w (A rho A^dag)_{ij} = sum w A_{ik} rho_{kl} conj(A_{jl})
        for (const auto& lop : m.cache.lindblad)
            for (const auto& ba : lop.a.bands) {
                const int k = i + ba.offset;
                if (k < 0 || k >= dim) continue;
                const int lo_a = std::max(0, -ba.offset);
                const cplx va = ba.coeff(i - lo_a);
                for (const auto& bb : lop.a.bands) {
                    const int l = j + bb.offset;
                    if (l < 0 || l >= dim) continue;
                    const int lo_b = std::max(0, -bb.offset);
                    add(r, k, l, lop.weight * va * std::conj(bb.coeff(j - lo_b)));
                }
            }
    }
    for (int d = 0; d < dim; ++d) add(trace_row, d, d, cplx(1.0, 0.0));

    Eigen::SparseMatrix<cplx> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    A.makeCompressed();

    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(n);
    rhs(trace_row) = 1.0;

    Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success)
        throw nonconvergence_error("steady_state_direct: sparse factorization failed");
    const Eigen::VectorXcd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite())
        throw nonconvergence_error("steady_state_direct: solve failed");

    Matrix rho = Matrix::Zero(dim, dim);
    for (int r = 0; r < n; ++r) rho(entries[r].first, entries[r].second) = x(r);
    rho = 0.5 * (rho + rho.adjoint().eval());  // hermitize roundoff

    SteadyStateResult res{DensityMatrix(m.layout, rho), false, 0.0, 0.0, 0};
    Matrix out(dim, dim), scratch(dim, dim);
    liouvillian_apply_into(m, res.state.data, 0.0, out, scratch);
    res.residual = out.norm() / rho.norm();
    res.converged = res.residual < tol;
    if (!res.converged)
        throw nonconvergence_error("steady_state_direct: residual " +
                                   std::to_string(res.residual) + " above tolerance");
    return res;
}

} // namespace rotoreng
