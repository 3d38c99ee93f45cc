#pragma once

// Work, heat and ergotropy bookkeeping, closed-form predictors, and the
// total-variation-regularized numerical derivative used for rate columns.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "rotoreng/dynamics.hpp"
#include "rotoreng/engines.hpp"

namespace rotoreng {

// d<L^2/2I>/dt under the full generator.
inline double kinetic_power(const ModelSpec& m, const DensityMatrix& rho, double t = 0.0)
{
    if (!m.rotor_index) throw config_error("kinetic_power requires a rotor");
    const Operator L = angular_momentum_op(m.layout, *m.rotor_index, m.hbar);
    const Matrix e_kin = L.data * L.data / (2.0 * m.inertia);
    const Matrix drho = liouvillian_apply(m, rho, t);
    return (e_kin.transpose().cwiseProduct(drho)).sum().real();
}

// <{L, F}>/2I: the mean mechanical power transferred by the torque.
inline double intrinsic_power(const ModelSpec& m, const DensityMatrix& rho, double t = 0.0)
{
    if (!m.rotor_index) throw config_error("intrinsic_power requires a rotor");
    const Operator L = angular_momentum_op(m.layout, *m.rotor_index, m.hbar);
    const Matrix f = m.drive ? m.drive->torque_of_angle(m.drive->omega * t) : m.torque.data;
    const Matrix anti = L.data * f + f * L.data;
    return expectation_real(rho, Operator(m.layout, anti)) / (2.0 * m.inertia);
}

// (<L>/I) * <F + (L_H + L_C)^dag L>: power at the mean angular velocity.
inline double net_kinetic_power(const ModelSpec& m, const DensityMatrix& rho, double t = 0.0)
{
    if (!m.rotor_index) throw config_error("net_kinetic_power requires a rotor");
    const Operator L = angular_momentum_op(m.layout, *m.rotor_index, m.hbar);
    Matrix drive = m.torque.data;
    for (const auto& ch : m.channels)
        if (ch.bath != Bath::Load) drive += adjoint_channel_apply(ch, L).data;
    const double l_mean = expectation_real(rho, L);
    return (l_mean / m.inertia) * expectation_real(rho, Operator(m.layout, drive));
}

struct PassiveDecomposition {
    std::vector<double> p;    // state eigenvalues, descending
    std::vector<double> eps;  // energy eigenvalues, ascending
    double current_energy = 0.0;
    double passive_energy = 0.0;
    double ergotropy = 0.0;
};

// Maximal work unitarily extractable from rho with respect to h.
inline PassiveDecomposition ergotropy(const DensityMatrix& rho, const Operator& h)
{
    if (rho.data.rows() != h.data.rows())
        throw layout_error("ergotropy: state and Hamiltonian dimensions differ");
    if (rho.hermiticity_defect() > 1e-8) throw state_error("ergotropy: state is not Hermitian");
    if (!h.is_hermitian(1e-10)) throw state_error("ergotropy: Hamiltonian is not Hermitian");

    Eigen::SelfAdjointEigenSolver<Matrix> es_rho(rho.data);
    Eigen::SelfAdjointEigenSolver<Matrix> es_h(h.data);
    if (es_rho.info() != Eigen::Success || es_h.info() != Eigen::Success)
        throw state_error("ergotropy: eigendecomposition failed");

    const int n = int(rho.data.rows());
    if (es_rho.eigenvalues().minCoeff() < -1e-8)
        throw state_error("ergotropy: state has a negative eigenvalue beyond tolerance");

    PassiveDecomposition out;
    // solver returns ascending; stable reversal keeps original order within ties
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return es_rho.eigenvalues()(a) > es_rho.eigenvalues()(b);
    });
    out.p.reserve(n);
    for (int k : idx) out.p.push_back(std::max(0.0, es_rho.eigenvalues()(k)));
    out.eps.assign(es_h.eigenvalues().data(), es_h.eigenvalues().data() + n);

    out.current_energy = expectation_real(rho, h);
    out.passive_energy = 0.0;
    for (int k = 0; k < n; ++k) out.passive_energy += out.p[k] * out.eps[k];
    out.ergotropy = out.current_energy - out.passive_energy;
    return out;
}

// Upper bound on the kinetic-energy gain from the optimal momentum kick
// exp(-i k phi): max_k (hbar k <L> - hbar^2 k^2 / 2) / I over integer k.
inline double ergotropy_boost_bound(double l_mean, double inertia, double hbar = 1.0)
{
    const double k_star = l_mean / hbar;
    double best = 0.0;
    for (double k : {std::floor(k_star), std::ceil(k_star)})
        best = std::max(best, (hbar * k * l_mean - 0.5 * hbar * hbar * k * k) / inertia);
    return best;
}

// -tr{ (L^2/2I + H_int) L_R rho }: power delivered to the load channel.
// Evaluated two ways: through the load dissipator directly, and through
// the explicit expanded form; they must agree to 1e-8 relative.
inline double output_power(const ModelSpec& m, const ThermalChannel& load,
                           const DensityMatrix& rho)
{
    if (!m.rotor_index) throw config_error("output_power requires a rotor");
    if (load.bath != Bath::Load) throw config_error("output_power: channel is not a load");

    const Operator L = angular_momentum_op(m.layout, *m.rotor_index, m.hbar);
    Matrix h_mech = L.data * L.data / (2.0 * m.inertia) + m.h_int.data;
    const Operator x(m.layout, h_mech);
    return -expectation_real(rho, adjoint_channel_apply(load, x));
}

// Same quantity from the printed expanded expression, given the load params.
inline double output_power_explicit(const ModelSpec& m, const LoadParams& p,
                                    const DensityMatrix& rho)
{
    if (!m.rotor_index) throw config_error("output_power requires a rotor");
    const Operator L = angular_momentum_op(m.layout, *m.rotor_index, m.hbar);
    const double l2 = expectation_real(rho, Operator(m.layout, Matrix(L.data * L.data)));
    const double hint = expectation_real(rho, m.h_int);
    const double kbt = p.T_R;
    const double corr = (m.hbar * m.hbar / (16.0 * m.inertia * kbt)) *
                        (l2 / m.inertia - hint);
    return p.gamma * (l2 / m.inertia - kbt - corr);
}

struct HeatFlows {
    double q_hot = 0.0;   // tr{H0 L_H rho}
    double q_cold = 0.0;
    double w_out = 0.0;   // 0 when no load channel present
    double efficiency = 0.0;  // (W_out / Q_hot) * (omega0 / kappa), NaN without load
};

inline HeatFlows heat_flows(const ModelSpec& m, const DensityMatrix& rho)
{
    HeatFlows out;
    out.efficiency = std::numeric_limits<double>::quiet_NaN();
    const ThermalChannel* load = nullptr;
    for (const auto& ch : m.channels) {
        if (ch.bath == Bath::Load) {
            load = &ch;
            continue;
        }
        if (!ch.bookkeeping_h) continue;
        const double q = expectation_real(rho, adjoint_channel_apply(ch, *ch.bookkeeping_h));
        if (ch.bath == Bath::Hot) out.q_hot += q;
        if (ch.bath == Bath::Cold) out.q_cold += q;
    }
    if (load) {
        out.w_out = output_power(m, *load, rho);
        if (out.q_hot != 0.0 && m.kappa > 0.0 && m.omega0 > 0.0)
            out.efficiency = (out.w_out / out.q_hot) * (m.omega0 / m.kappa);
    }
    return out;
}

// ---------------------------------------------------------------------
// Driven-mode work and heat accumulation along a stored trajectory.

struct DrivenEnergetics {
    std::vector<double> times;
    std::vector<double> work;        // W(t) = int omega <F> dt'
    std::vector<double> heat;        // Q(t) = int tr[rho_dot H] dt'
    std::vector<double> work_rate;
    std::vector<double> heat_rate;
    double cycle_defect = 0.0;       // |Q - W - dE| over the last full cycle
};

inline DrivenEnergetics driven_work_heat(const ModelSpec& m, const std::vector<double>& times,
                                         const std::vector<DensityMatrix>& states)
{
    if (!m.drive) throw config_error("driven_work_heat requires a driven model");
    if (times.size() != states.size() || times.size() < 2)
        throw config_error("driven_work_heat: need a sampled trajectory");
    const double omega = m.drive->omega;
    const double cycle = 2.0 * M_PI / omega;
    // resolution precondition: at least 200 samples per drive cycle
    const double dt_mean = (times.back() - times.front()) / double(times.size() - 1);
    if (dt_mean > cycle / 200.0)
        throw config_error("driven_work_heat: trajectory undersamples the drive cycle");

    DrivenEnergetics out;
    out.times = times;
    const size_t n = times.size();
    out.work_rate.resize(n);
    out.heat_rate.resize(n);
    Matrix drho(m.layout.dim, m.layout.dim), scratch(m.layout.dim, m.layout.dim);
    for (size_t i = 0; i < n; ++i) {
        const double t = times[i];
        const Matrix f = m.drive->torque_of_angle(omega * t);
        out.work_rate[i] = omega * expectation_real(states[i], Operator(m.layout, f));
        liouvillian_apply_into(m, states[i].data, t, drho, scratch);
        const Matrix h = hamiltonian_at(m, t);
        out.heat_rate[i] = (h.transpose().cwiseProduct(drho)).sum().real();
    }
    out.work.resize(n, 0.0);
    out.heat.resize(n, 0.0);
    for (size_t i = 1; i < n; ++i) {
        const double h = times[i] - times[i - 1];
        out.work[i] = out.work[i - 1] + 0.5 * h * (out.work_rate[i] + out.work_rate[i - 1]);
        out.heat[i] = out.heat[i - 1] + 0.5 * h * (out.heat_rate[i] + out.heat_rate[i - 1]);
    }

    // first-law defect over the trailing full cycle
    const double t_hi = times.back();
    const double t_lo = t_hi - cycle;
    if (t_lo >= times.front()) {
        size_t i_lo = 0;
        for (size_t i = 0; i < n; ++i)
            if (times[i] <= t_lo) i_lo = i;
        const Matrix h_lo = hamiltonian_at(m, times[i_lo]);
        const Matrix h_hi = hamiltonian_at(m, t_hi);
        const double de = expectation_real(states.back(), Operator(m.layout, h_hi)) -
                          expectation_real(states[i_lo], Operator(m.layout, h_lo));
        const double dq = out.heat.back() - out.heat[i_lo];
        const double dw = out.work.back() - out.work[i_lo];
        out.cycle_defect = std::abs(dq - dw - de);
    }
    return out;
}

// ---------------------------------------------------------------------
// Frozen-angle excitation profile and closed-form predictors.

// Steady excitation of the piston fluid at frozen angle phi.
inline double excitation_profile(const PistonParams& p, double phi)
{
    const double fh = 0.5 * (1.0 + std::sin(phi));
    const double fc = 0.5 * (1.0 - std::sin(phi));
    const double up = p.n_hot * fh * fh + p.n_cold * fc * fc;
    const double down = (p.n_hot + 1.0) * fh * fh + (p.n_cold + 1.0) * fc * fc;
    const double n_eff = up / (down - up);  // down - up = fh^2 + fc^2 > 0
    if (p.fluid.kind == FactorKind::Oscillator) return n_eff;
    return n_eff / (2.0 * n_eff + 1.0);  // qubit: p = n/(2n+1)
}

// integral of p(phi) sin(phi) over one turn, divided by 2 pi
// (the mean torque shape factor); composite Simpson, N = 1024.
inline double piston_torque_shape(const PistonParams& p)
{
    const int n = 1024;
    const double h = 2.0 * M_PI / n;
    double s = 0.0;
    auto f = [&](double phi) { return excitation_profile(p, phi) * std::sin(phi); };
    for (int i = 0; i < n; i += 2) s += f(i * h) + 4.0 * f((i + 1) * h) + f((i + 2) * h);
    return s * h / 3.0;
}

// Ideal quasistatic work per cycle: hbar g * int p(phi) sin(phi) dphi.
inline double ideal_cycle_work(const PistonParams& p)
{
    return p.hbar * p.g * piston_torque_shape(p);
}

struct PredictorSet {
    double xi = 0.0;              // reduced-mill kick rate
    double gain_up = 0.0;         // xi n_H (n_C + 1)
    double gain_down = 0.0;       // xi n_C (n_H + 1)
    double l_drift_rate = 0.0;    // hbar (gain_up - gain_down)
    double g_osc_match = 0.0;     // oscillator coupling matching a qubit piston
    double g_match = 0.0;         // mill G matching a given piston, 0 if n/a
    double l_ss = 0.0;            // loaded-mill steady momentum, 0 without load
    double var_l_ss = 0.0;        // loaded-mill steady momentum variance
};

inline PredictorSet predictors(const MillParams& mill, const std::optional<PistonParams>& piston,
                               const std::optional<LoadParams>& load)
{
    PredictorSet out;
    out.xi = mill_kick_rate(mill);
    out.gain_up = out.xi * mill.n_hot * (mill.n_cold + 1.0);
    out.gain_down = out.xi * mill.n_cold * (mill.n_hot + 1.0);
    out.l_drift_rate = mill.hbar * (out.gain_up - out.gain_down);

    if (piston) {
        out.g_osc_match = 2.0 * piston->n_hot + 1.0;
        if (mill.n_hot == mill.n_cold)
            throw config_error("predictors: G_match is undefined at n_hot = n_cold");
        const double shape = piston_torque_shape(*piston);  // int p sin dphi
        const double val = mill.kappa * (mill.n_hot + mill.n_cold + 1.0) *
                           (2.0 * mill.n_hot + 1.0) * (2.0 * mill.n_cold + 1.0) *
                           (piston->g / (4.0 * M_PI)) * shape / (mill.n_hot - mill.n_cold);
        if (val < 0.0)
            throw config_error("predictors: G_match has no real solution for these parameters");
        out.g_match = std::sqrt(val);
    }
    if (load) {
        if (load->gamma <= 0.0) throw config_error("predictors: steady state needs gamma > 0");
        out.l_ss = mill.hbar * out.xi * (mill.n_hot - mill.n_cold) / load->gamma;
        out.var_l_ss = mill.hbar * mill.hbar * out.xi *
                           (2.0 * mill.n_hot * mill.n_cold + mill.n_hot + mill.n_cold) /
                           (2.0 * load->gamma) +
                       mill.inertia * load->T_R;
    }
    return out;
}

// ---------------------------------------------------------------------
// Precomputed Heisenberg-picture observables for fast trajectory columns.

struct WorkObservers {
    Operator e_kin;           // L^2 / 2I
    Operator l_op;
    Operator kin_rate_obs;    // adjoint generator applied to e_kin
    Operator intr_obs;        // {L, F}/2I
    Operator net_drive_obs;   // F + (L_H + L_C)^dag L
    Operator w_out_obs;       // -L_load^dag (L^2/2I + H_int), zero if no load
    Operator q_hot_obs;       // L_H^dag H0_H
    Operator q_cold_obs;
    Operator excitation_obs;  // total fluid excitation
    bool has_load = false;

    static WorkObservers build(const ModelSpec& m)
    {
        if (!m.rotor_index) throw config_error("WorkObservers require a rotor");
        if (m.drive) throw config_error("WorkObservers are for autonomous models");
        WorkObservers o;
        const Operator L = angular_momentum_op(m.layout, *m.rotor_index, m.hbar);
        o.l_op = L;
        o.e_kin = Operator(m.layout, Matrix(L.data * L.data / (2.0 * m.inertia)));
        o.kin_rate_obs = adjoint_generator_apply(m, o.e_kin);
        o.intr_obs = Operator(
            m.layout, Matrix((L.data * m.torque.data + m.torque.data * L.data) /
                             (2.0 * m.inertia)));

        Matrix drive = m.torque.data;
        Matrix qh = Matrix::Zero(m.layout.dim, m.layout.dim);
        Matrix qc = qh, wout = qh, exc = qh;
        for (const auto& ch : m.channels) {
            if (ch.bath == Bath::Load) {
                const Operator x(m.layout, Matrix(o.e_kin.data + m.h_int.data));
                wout = -adjoint_channel_apply(ch, x).data;
                o.has_load = true;
                continue;
            }
            drive += adjoint_channel_apply(ch, L).data;
            if (ch.bookkeeping_h) {
                const Matrix q = adjoint_channel_apply(ch, *ch.bookkeeping_h).data;
                if (ch.bath == Bath::Hot) qh += q;
                else qc += q;
            }
        }
        for (size_t i = 0; i < m.layout.factors.size(); ++i)
            if (m.layout.factors[i].kind != FactorKind::Rotor)
                exc += number_op(m.layout, i).data;

        o.net_drive_obs = Operator(m.layout, std::move(drive));
        o.w_out_obs = Operator(m.layout, std::move(wout));
        o.q_hot_obs = Operator(m.layout, std::move(qh));
        o.q_cold_obs = Operator(m.layout, std::move(qc));
        o.excitation_obs = Operator(m.layout, std::move(exc));
        return o;
    }
};

// ---------------------------------------------------------------------
// Total-variation-regularized derivative (Rudin-Osher-Fatemi style,
// lagged-diffusivity fixed point). Returns u with
//   u ~ argmin  alpha sum |u_{i+1} - u_i|
//             + 1/2 sum_i h ((antideriv u)_i - (f_i - f_0))^2 .
inline std::vector<double> tv_derivative(const std::vector<double>& f, double h, double alpha)
{
    const int n = int(f.size());
    if (n < 3) throw config_error("tv_derivative: need at least 3 samples");
    if (h <= 0.0) throw config_error("tv_derivative: step must be positive");
    if (alpha < 0.0) throw config_error("tv_derivative: alpha must be >= 0");

    using Vec = Eigen::VectorXd;
    using Mat = Eigen::MatrixXd;

    // trapezoid antiderivative matrix: (A u)_0 = 0,
    // (A u)_i = h (u_0/2 + u_1 + ... + u_{i-1} + u_i/2)
    Mat A = Mat::Zero(n, n);
    for (int i = 1; i < n; ++i) {
        A(i, 0) = 0.5 * h;
        for (int j = 1; j < i; ++j) A(i, j) = h;
        A(i, i) = 0.5 * h;
    }
    Vec g(n);
    for (int i = 0; i < n; ++i) g(i) = f[i] - f[0];

    const Mat AtA = h * (A.transpose() * A);
    const Vec Atg = h * (A.transpose() * g);

    // initial guess: centered finite differences
    Vec u(n);
    for (int i = 1; i + 1 < n; ++i) u(i) = (f[i + 1] - f[i - 1]) / (2.0 * h);
    u(0) = (f[1] - f[0]) / h;
    u(n - 1) = (f[n - 1] - f[n - 2]) / h;

    const double eps = 1e-8;
    for (int it = 0; it < 100; ++it) {
        Mat lhs = AtA;
        lhs.diagonal().array() += 1e-12;
        // alpha D^T W D, W_i = 1 / sqrt((Du)_i^2 + eps)
        for (int i = 0; i + 1 < n; ++i) {
            const double d = u(i + 1) - u(i);
            const double w = alpha / std::sqrt(d * d + eps);
            lhs(i, i) += w;
            lhs(i + 1, i + 1) += w;
            lhs(i, i + 1) -= w;
            lhs(i + 1, i) -= w;
        }
        const Vec u_new = lhs.ldlt().solve(Atg);
        const double rel = (u_new - u).norm() / std::max(1e-300, u_new.norm());
        u = u_new;
        if (rel < 1e-6) break;
    }
    return std::vector<double>(u.data(), u.data() + n);
}

} // namespace rotoreng
