// Acceptance gate: one pass/fail line per criterion, non-zero exit on any
// failure. Numbers quoted inline are the analytic targets each check is
// gated against; tolerances are fixed and must not be loosened.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rotoreng/dynamics.hpp"
#include "rotoreng/engines.hpp"
#include "rotoreng/metrics.hpp"

using namespace rotoreng;

namespace {

int g_failures = 0;

void require(bool ok, const std::string& msg)
{
    if (!ok) throw std::runtime_error(msg);
}

void criterion(int idx, const std::string& label, const std::function<std::string()>& body)
{
    std::string detail;
    bool ok = true;
    try {
        detail = body();
    } catch (const std::exception& e) {
        ok = false;
        detail = e.what();
    }
    std::printf("criterion %2d: %s  %-38s %s\n", idx, ok ? "PASS" : "FAIL", label.c_str(),
                detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...)
{
    char buf[256];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof(buf), f, ap);
    va_end(ap);
    return buf;
}

// single-fluid model with hand-weighted thermal rates (no rotor, H = 0)
ModelSpec frozen_fluid(double w_hot, double n_hot, double w_cold, double n_cold)
{
    ModelSpec m;
    m.layout = SpaceLayout({Factor::qubit()});
    m.hamiltonian = Operator(m.layout, Matrix::Zero(2, 2));
    m.h_int = m.hamiltonian;
    m.torque = m.hamiltonian;
    const Operator low = qubit_lowering_op(m.layout, 0);
    ThermalChannel hot;
    hot.bath = Bath::Hot;
    hot.ops.push_back({w_hot * (n_hot + 1.0), low, nullptr});
    hot.ops.push_back({w_hot * n_hot, low.adjoint(), nullptr});
    m.channels.push_back(std::move(hot));
    ThermalChannel cold;
    cold.bath = Bath::Cold;
    cold.ops.push_back({w_cold * (n_cold + 1.0), low, nullptr});
    cold.ops.push_back({w_cold * n_cold, low.adjoint(), nullptr});
    m.channels.push_back(std::move(cold));
    return m;
}

double fluid_steady_excitation(const ModelSpec& m)
{
    Matrix mixed = Matrix::Identity(m.layout.dim, m.layout.dim);
    mixed /= double(m.layout.dim);
    IntegratorConfig cfg;
    cfg.dt = 0.01;
    const SteadyStateResult ss =
        steady_state(m, DensityMatrix(m.layout, mixed), 1e-12, 500.0, cfg);
    require(ss.converged, "fluid relaxation did not converge");
    return expectation_real(ss.state, number_op(m.layout, 0));
}

// cumulative work over the trailing full cycle of a driven trajectory
double last_cycle_work(const DrivenEnergetics& e, double cycle)
{
    const double t_lo = e.times.back() - cycle;
    size_t i_lo = 0;
    for (size_t i = 0; i < e.times.size(); ++i)
        if (e.times[i] <= t_lo) i_lo = i;
    return e.work.back() - e.work[i_lo];
}

DrivenEnergetics drive_cycles(const PistonParams& p, double omega, double n_cycles,
                              int steps_per_cycle = 2000)
{
    const ModelSpec m = driven_model(build_piston(p), omega);
    const double cycle = 2.0 * M_PI / omega;
    IntegratorConfig cfg;
    cfg.dt = cycle / steps_per_cycle;
    cfg.t_end = n_cycles * cycle;
    cfg.record_every = 5;
    cfg.record_states = true;
    const EvolutionResult res = integrate(m, default_initial_state(m), cfg);
    return driven_work_heat(m, res.times, res.states);
}

} // namespace

int main()
{
    const double xi_ref = 2.0 / 3.0;  // kick rate at kappa=50, G=10, baths (0,1)

    criterion(1, "thermal channel gibbs fixed point", [&] {
        const ModelSpec m = frozen_fluid(1.0, 1.0, 0.0, 0.0);
        const double exc = fluid_steady_excitation(m);
        require(std::abs(exc - 1.0 / 3.0) < 1e-8, fmt("excitation %.12f != 1/3", exc));
        return fmt("n_bar=1 qubit excitation %.10f (target 1/3 within 1e-8)", exc);
    });

    criterion(2, "frozen-angle fluid excitation", [&] {
        const double phis[] = {0.0, M_PI / 2.0, M_PI, 1.5 * M_PI};
        const double pairs[][2] = {{0.0, 1.0}, {1.0, 2.0}};  // (n_cold, n_hot)
        double worst = 0.0;
        for (const auto& nc_nh : pairs)
            for (double phi : phis) {
                const double fh = 0.5 * (1.0 + std::sin(phi));
                const double fc = 0.5 * (1.0 - std::sin(phi));
                const ModelSpec m =
                    frozen_fluid(3.0 * fh * fh, nc_nh[1], 3.0 * fc * fc, nc_nh[0]);
                const double exc = fluid_steady_excitation(m);
                const double up = nc_nh[1] * fh * fh + nc_nh[0] * fc * fc;
                const double n_eff = up / (fh * fh + fc * fc);
                const double expect = n_eff / (2.0 * n_eff + 1.0);
                worst = std::max(worst, std::abs(exc - expect));
                require(std::abs(exc - expect) < 1e-6,
                        fmt("phi=%.3f baths (%g,%g): %.9f != %.9f", phi, nc_nh[0], nc_nh[1],
                            exc, expect));
                // the quadrature helper must agree with the same closed form
                PistonParams pp;
                pp.n_cold = nc_nh[0];
                pp.n_hot = nc_nh[1];
                require(std::abs(excitation_profile(pp, phi) - expect) < 1e-12,
                        "profile helper disagrees with the closed form");
            }
        return fmt("8 angle/bath points, worst |error| %.2e (gate 1e-6)", worst);
    });

    criterion(3, "reduced mill momentum drift and spread", [&] {
        MillParams p;
        p.G = 10.0;
        p.kappa = 50.0;
        p.n_hot = 1.0;
        p.n_cold = 0.0;
        p.l_min = -20;
        p.l_max = 40;
        const ModelSpec m = build_effective_mill(p);
        const Operator L = angular_momentum_op(m.layout, 0, 1.0);
        const Operator L2(m.layout, Matrix(L.data * L.data));

        IntegratorConfig cfg;
        cfg.dt = 0.005;
        cfg.t_end = 5.0;
        cfg.record_every = 1 << 20;
        const EvolutionResult res = integrate(m, default_initial_state(m), cfg);
        const double l_mean = expectation_real(res.final_state, L);
        const double var =
            expectation_real(res.final_state, L2) - l_mean * l_mean;
        const double drift = l_mean / 5.0;       // started from |l=0>
        const double spread = var / 5.0;
        require(std::abs(drift - xi_ref) < 0.01 * xi_ref,
                fmt("d<L>/dt %.6f vs %.6f (1%%)", drift, xi_ref));
        require(std::abs(spread - xi_ref) < 0.02 * xi_ref,
                fmt("dVar/dt %.6f vs %.6f (2%%)", spread, xi_ref));
        return fmt("d<L>/dt %.5f, dVarL/dt %.5f (target %.5f)", drift, spread, xi_ref);
    });

    criterion(4, "full mill matches the reduced drift", [&] {
        MillParams p;
        p.G = 10.0;
        p.kappa = 50.0;
        p.n_hot = 1.0;
        p.n_cold = 0.0;
        p.l_min = -20;
        p.l_max = 60;
        const ModelSpec m = build_mill(p);
        const Operator L = angular_momentum_op(m.layout, 0, 1.0);
        IntegratorConfig cfg;
        cfg.dt = 0.002;
        cfg.t_end = 5.0;
        cfg.record_every = 1 << 20;
        const DensityMatrix rho0 = default_initial_state(m);
        const double l0 = expectation_real(rho0, L);
        const EvolutionResult res = integrate(m, rho0, cfg);
        const double drift = (expectation_real(res.final_state, L) - l0) / 5.0;
        require(std::abs(drift - xi_ref) < 0.15 * xi_ref,
                fmt("early drift %.5f vs %.5f (15%%)", drift, xi_ref));
        return fmt("tripartite d<L>/dt %.5f vs reduced %.5f (gate 15%%)", drift, xi_ref);
    });

    criterion(5, "coupling-matching coefficient", [&] {
        MillParams mill;
        mill.kappa = 50.0;
        mill.n_hot = 1.0;
        mill.n_cold = 0.0;
        PistonParams piston;
        piston.g = 30.0;
        piston.kappa = 50.0;
        piston.n_hot = 1.0;
        piston.n_cold = 0.0;
        const PredictorSet ps = predictors(mill, piston, std::nullopt);
        const double ratio = ps.g_match / std::sqrt(piston.g * piston.kappa);
        require(std::abs(ratio - 0.534) < 0.005, fmt("G/sqrt(g kappa) = %.5f", ratio));
        return fmt("G/sqrt(g kappa) = %.5f (target 0.534 +- 0.005)", ratio);
    });

    criterion(6, "oscillator coupling match", [&] {
        MillParams mill;
        mill.n_hot = 1.0;
        mill.n_cold = 0.0;
        PistonParams piston;
        piston.n_hot = 1.0;
        piston.n_cold = 0.0;
        const PredictorSet ps = predictors(mill, piston, std::nullopt);
        require(ps.g_osc_match == 3.0, fmt("g_osc_match = %.17g", ps.g_osc_match));
        return fmt("g_osc_match(n_hot=1) = %g (exactly 3)", ps.g_osc_match);
    });

    criterion(7, "load-only equipartition", [&] {
        ModelSpec m = build_free_rotor({-40, 40, 1.0, 1.0});
        m.channels.push_back(build_load_channel({0.1, 10.0}, m.layout, 0));
        const SteadyStateResult ss = steady_state_direct(m, default_initial_state(m));
        require(ss.converged, "direct solve residual too large");
        const Operator L = angular_momentum_op(m.layout, 0, 1.0);
        const double e_kin =
            expectation_real(ss.state, Operator(m.layout, Matrix(L.data * L.data))) / 2.0;
        require(e_kin > 4.5 && e_kin < 5.5, fmt("<L^2/2I> = %.5f", e_kin));
        return fmt("<L^2/2I> = %.5f at k_B T_R = 10 (gate [4.5, 5.5])", e_kin);
    });

    criterion(8, "loaded reduced mill steady momentum", [&] {
        MillParams p;
        p.G = 10.0;
        p.kappa = 50.0;
        p.n_hot = 1.0;
        p.n_cold = 0.0;
        p.l_min = -20;
        p.l_max = 2020;  // window centered on the predicted <L> = 1000
        ModelSpec m = build_effective_mill(p);
        const double gamma = 1e-3 * xi_ref;
        m.channels.push_back(build_load_channel({gamma, 10.0}, m.layout, 0));
        const SteadyStateResult ss = steady_state_direct(m, default_initial_state(m));
        require(ss.converged, "direct solve residual too large");
        const double l_mean =
            expectation_real(ss.state, angular_momentum_op(m.layout, 0, 1.0));
        const double target = xi_ref * (p.n_hot - p.n_cold) / gamma;  // = 1000
        require(std::abs(l_mean - target) < 0.05 * target,
                fmt("<L>_ss %.3f vs %.3f", l_mean, target));
        return fmt("<L>_ss = %.3f vs predicted %.1f (gate 5%%)", l_mean, target);
    });

    criterion(9, "driven first law", [&] {
        PistonParams p;
        p.g = 30.0;
        p.kappa = 50.0;
        p.n_hot = 1.0;
        p.n_cold = 0.0;
        const DrivenEnergetics e = drive_cycles(p, 25.0, 3.0);  // omega = kappa / 2
        require(e.cycle_defect < 1e-6, fmt("|Q - W - dE| = %.3e", e.cycle_defect));
        return fmt("per-cycle |Q - W - dE| = %.2e (gate 1e-6)", e.cycle_defect);
    });

    criterion(10, "quasistatic work plateau", [&] {
        PistonParams p;
        p.g = 30.0;
        p.kappa = 50.0;
        p.n_hot = 1.0;
        p.n_cold = 0.0;
        const double ideal = ideal_cycle_work(p);
        const double w_slow =
            last_cycle_work(drive_cycles(p, 0.05 * p.kappa, 3.0), 2.0 * M_PI / (0.05 * p.kappa));
        const double w_fast =
            last_cycle_work(drive_cycles(p, 5.0 * p.kappa, 12.0), 2.0 * M_PI / (5.0 * p.kappa));
        require(std::abs(w_slow - ideal) < 0.10 * std::abs(ideal),
                fmt("slow cycle %.5f vs ideal %.5f", w_slow, ideal));
        const double s = ideal > 0.0 ? 1.0 : -1.0;
        require(s * w_fast < s * w_slow,
                fmt("fast cycle %.5f not smaller than slow %.5f", w_fast, w_slow));
        return fmt("w(0.05k) %.4f vs ideal %.4f; w(5k) %.4f smaller", w_slow, ideal, w_fast);
    });

    criterion(11, "ergotropy suite", [&] {
        // gibbs state stores no extractable work
        {
            const SpaceLayout ql({Factor::qubit()});
            const Operator h(ql, [] {
                Matrix h0 = Matrix::Zero(2, 2);
                h0(1, 1) = 1.0;
                return h0;
            }());
            const DensityMatrix gibbs(ql, gibbs_block(Factor::qubit(), 0.4));
            require(std::abs(ergotropy(gibbs, h).ergotropy) < 1e-10, "gibbs not passive");
        }
        // pure momentum eigenstate: everything above the ground level is extractable
        {
            const SpaceLayout rl({Factor::rotor(-3, 3)});
            const Operator L = angular_momentum_op(rl, 0, 1.0);
            const Operator ek(rl, Matrix(L.data * L.data / 2.0));
            Matrix proj = Matrix::Zero(7, 7);
            proj(5, 5) = 1.0;  // l = +2
            const double erg = ergotropy(DensityMatrix(rl, proj), ek).ergotropy;
            require(std::abs(erg - 2.0) < 1e-12, fmt("pure-state ergotropy %.15f", erg));
        }

        // spin-up run: bound asserted at every sample, rate agreement reported
        PistonParams p;
        p.g = 30.0;
        p.kappa = 10.0;
        p.n_hot = 1.0;
        p.n_cold = 0.0;
        p.l_min = -30;
        p.l_max = 90;
        const ModelSpec m = build_piston(p);
        const WorkObservers obs = WorkObservers::build(m);
        const Factor rotor = m.layout.factors[0];
        const SpaceLayout rl({rotor});
        const Operator lr = angular_momentum_op(rl, 0, 1.0);
        const Operator ek_rotor(rl, Matrix(lr.data * lr.data / 2.0));

        std::vector<double> ts, ls, ergs, wnets;
        Observer watch = [&](double t, const Matrix& data) {
            const DensityMatrix rho(m.layout, data);
            const double l_mean = expectation_real(rho, obs.l_op);
            const double erg = ergotropy(partial_trace(rho, 0), ek_rotor).ergotropy;
            const double bound = ergotropy_boost_bound(l_mean, 1.0, 1.0);
            require(erg >= bound - 1e-9 * std::max(1.0, bound),
                    fmt("t=%.3f: ergotropy %.6f below bound %.6f", t, erg, bound));
            ts.push_back(t);
            ls.push_back(l_mean);
            ergs.push_back(erg);
            wnets.push_back(l_mean * expectation_real(rho, obs.net_drive_obs));
        };
        IntegratorConfig cfg;
        cfg.dt = 5e-4;
        cfg.t_end = 9.0;
        cfg.record_every = 50;
        integrate(m, default_initial_state(m), cfg, watch);

        // ergotropy-rate vs net work rate near integer <L> (reported)
        const double h = ts[1] - ts[0];
        const std::vector<double> erg_rate = [&] {
            double lo = ergs[0], hi = ergs[0];
            for (double e : ergs) {
                lo = std::min(lo, e);
                hi = std::max(hi, e);
            }
            return tv_derivative(ergs, h, 1e-3 * (hi - lo));
        }();
        double num = 0.0, den = 0.0;
        size_t hits = 0;
        for (size_t i = 5; i + 5 < ts.size(); ++i) {
            if (std::abs(ls[i] - std::round(ls[i])) > 0.05) continue;
            num += (wnets[i] - erg_rate[i]) * (wnets[i] - erg_rate[i]);
            den += wnets[i] * wnets[i];
            ++hits;
        }
        const double rms = den > 0.0 ? std::sqrt(num / den) : 0.0;
        return fmt("bound held at %zu samples; rate agreement %.1f%% RMS at %zu integer-<L> "
                   "samples (15%% expected)",
                   ts.size(), 100.0 * rms, hits);
    });

    criterion(12, "interior power maximum, monotone efficiency", [&] {
        std::vector<double> gammas;
        for (int i = 0; i < 8; ++i)
            gammas.push_back(1e-3 * std::pow(1e4, i / 7.0));  // [1e-4, 1] x kappa, kappa = 10

        PistonParams pp;
        pp.g = 30.0;
        pp.kappa = 10.0;
        pp.n_hot = 1.0;
        pp.n_cold = 0.0;
        pp.l_min = -30;
        pp.l_max = 90;
        std::vector<double> w_out;
        for (double g : gammas) {
            ModelSpec m = build_piston(pp);
            m.channels.push_back(build_load_channel({g, 10.0}, m.layout, 0));
            const SteadyStateResult ss = steady_state_direct(m, default_initial_state(m));
            require(ss.converged, fmt("piston gamma=%.4g: solve failed", g));
            w_out.push_back(heat_flows(m, ss.state).w_out);
        }
        size_t best = 0;
        for (size_t i = 1; i < w_out.size(); ++i)
            if (w_out[i] > w_out[best]) best = i;
        require(best > 0 && best + 1 < w_out.size(),
                fmt("piston max at endpoint index %zu", best));

        MillParams mp;
        mp.G = 1.3;
        mp.kappa = 10.0;
        mp.n_hot = 1.0;
        mp.n_cold = 0.0;
        mp.omega0 = 10.0;
        mp.l_min = -30;
        mp.l_max = 90;
        std::vector<double> eta;
        for (double g : gammas) {
            ModelSpec m = build_mill(mp);
            m.channels.push_back(build_load_channel({g, 10.0}, m.layout, 0));
            const SteadyStateResult ss = steady_state_direct(m, default_initial_state(m));
            require(ss.converged, fmt("mill gamma=%.4g: solve failed", g));
            eta.push_back(heat_flows(m, ss.state).efficiency);
        }
        for (size_t i = 0; i + 1 < eta.size(); ++i)
            require(eta[i] > eta[i + 1],
                    fmt("eta not monotone: eta(%.4g)=%.5g <= eta(%.4g)=%.5g", gammas[i],
                        eta[i], gammas[i + 1], eta[i + 1]));
        return fmt("piston peak W_out %.4f at gamma %.4g (interior); mill eta %.4g -> %.4g "
                   "rising as gamma falls",
                   w_out[best], gammas[best], eta.back(), eta.front());
    });

    criterion(13, "generator duality and invariants", [&] {
        std::mt19937 rng(42);
        auto uni = [&](double lo, double hi) {
            return std::uniform_real_distribution<double>(lo, hi)(rng);
        };
        double worst = 0.0;
        for (int inst = 0; inst < 50; ++inst) {
            ModelSpec m;
            if (inst % 2 == 0) {
                MillParams p;
                p.G = uni(0.5, 3.0);
                p.kappa = uni(0.5, 4.0);
                p.n_hot = uni(0.0, 2.0);
                p.n_cold = uni(0.0, 2.0);
                p.delta = uni(-1.0, 1.0);
                p.l_min = -3;
                p.l_max = 3;
                m = build_mill(p);
            } else {
                PistonParams p;
                p.g = uni(0.5, 3.0);
                p.kappa = uni(0.5, 4.0);
                p.n_hot = uni(0.0, 2.0);
                p.n_cold = uni(0.0, 2.0);
                p.fluid = (inst % 4 == 1) ? Factor::qubit() : Factor::oscillator(4);
                p.l_min = -3;
                p.l_max = 3;
                m = build_piston(p);
            }
            if (inst % 3 == 0)
                m.channels.push_back(
                    build_load_channel({uni(0.01, 0.5), uni(1.0, 8.0)}, m.layout, 0));

            const int d = m.layout.dim;
            Matrix v = Matrix::Random(d, d);
            Matrix rho_m = v * v.adjoint();
            rho_m /= rho_m.trace();
            const DensityMatrix rho(m.layout, rho_m);
            const Matrix lr = liouvillian_apply(m, rho);

            const double tr = std::abs(lr.trace());
            const double herm = (lr - Matrix(lr.adjoint())).cwiseAbs().maxCoeff();
            Matrix w = Matrix::Random(d, d);
            const Operator x(m.layout, Matrix(w + w.adjoint()));
            const double lhs = (x.data.adjoint() * lr).trace().real();
            const double rhs =
                (adjoint_generator_apply(m, x).data.adjoint() * rho.data).trace().real();
            const double dual = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
            worst = std::max({worst, tr, herm, dual});
            require(tr < 1e-10, fmt("instance %d: trace %.2e", inst, tr));
            require(herm < 1e-10, fmt("instance %d: hermiticity %.2e", inst, herm));
            require(dual < 1e-10, fmt("instance %d: duality %.2e", inst, dual));
        }
        return fmt("50 instances, worst defect %.2e (gate 1e-10)", worst);
    });

    criterion(14, "fixed-step integrator order", [&] {
        MillParams p;
        p.G = 3.0;
        p.kappa = 4.0;
        p.n_hot = 1.0;
        p.n_cold = 0.2;
        p.l_min = -4;
        p.l_max = 4;
        const ModelSpec m = build_mill(p);
        const DensityMatrix rho0 = default_initial_state(m);
        auto run = [&](double dt) {
            IntegratorConfig cfg;
            cfg.dt = dt;
            cfg.t_end = 0.5;
            cfg.record_every = 1 << 20;
            return integrate(m, rho0, cfg).final_state.data;
        };
        const Matrix fine = run(1.25e-4);
        const double ratio = (run(2e-3) - fine).norm() / (run(1e-3) - fine).norm();
        require(ratio > 12.0 && ratio < 20.0, fmt("richardson ratio %.3f", ratio));
        return fmt("richardson ratio %.2f (gate 16 +- 4)", ratio);
    });

    criterion(15, "regularized derivative recovery", [&] {
        const int n = 400;
        const double h = 4.0 * M_PI / n;
        std::mt19937 rng(12345);
        std::normal_distribution<double> noise(0.0, 0.01);
        std::vector<double> f(n);
        for (int i = 0; i < n; ++i) f[i] = std::sin(i * h) + noise(rng);
        const std::vector<double> d = tv_derivative(f, h, 1e-3);
        double sq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double err = d[i] - std::cos(i * h);
            sq += err * err;
        }
        const double rmse = std::sqrt(sq / n);
        require(rmse < 0.05, fmt("rmse %.5f", rmse));
        return fmt("noisy-cosine slope rmse %.4f (gate 0.05)", rmse);
    });

    if (g_failures > 0) {
        std::printf("%d criterion(s) FAILED\n", g_failures);
        return 1;
    }
    std::printf("all 15 criteria passed\n");
    return 0;
}
