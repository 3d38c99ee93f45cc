#pragma once

// Engine model assembly: quantum mill, quantum piston, the reduced
// (rotor-only) mill, the dissipative load channel, and matrix-free
// application of the resulting Liouvillian and its adjoint.
//
// All Hamiltonians are written in the frame rotating at the working-fluid
// carrier frequency; the carrier omega0 enters only the heat bookkeeping.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rotoreng/banded.hpp"
#include "rotoreng/qspace.hpp"

namespace rotoreng {

enum class Bath { Hot, Cold, Load };

enum class ModelKind { Mill, Piston, EffectiveMill, FreeRotor };

struct WeightedLindblad {
    double weight = 0.0;                      // rate in front of D[op]
    Operator op;
    std::function<double(double)> angle_mod;  // driven mode: op scaled by f(omega t)
};

struct ThermalChannel {
    Bath bath = Bath::Hot;
    std::vector<WeightedLindblad> ops;        // as printed in the model
    std::optional<Operator> bookkeeping_h;    // H0 piece for heat accounting
    // Optional algebraically equivalent set used in the hot path (the load
    // channel stores a single-shift-direction decomposition here).
    std::vector<WeightedLindblad> apply_ops;

    const std::vector<WeightedLindblad>& effective_ops() const
    {
        return apply_ops.empty() ? ops : apply_ops;
    }
};

struct MillParams {
    double G = 1.0;
    double kappa = 1.0;
    double n_hot = 1.0;
    double n_cold = 0.0;
    double delta = 0.0;   // omega_H - omega_C
    double omega0 = 0.0;  // carrier frequency, bookkeeping only
    int l_min = -10;
    int l_max = 10;
    double inertia = 1.0;
    double hbar = 1.0;
};

struct PistonParams {
    double g = 1.0;
    double kappa = 1.0;
    double n_hot = 1.0;
    double n_cold = 0.0;
    Factor fluid = Factor::qubit();  // Qubit or Oscillator(n_max)
    double omega0 = 0.0;
    int l_min = -10;
    int l_max = 10;
    double inertia = 1.0;
    double hbar = 1.0;
};

struct LoadParams {
    double gamma = 0.0;
    double T_R = 1.0;  // k_B T_R in energy units
};

struct FreeRotorParams {
    int l_min = -10;
    int l_max = 10;
    double inertia = 1.0;
    double hbar = 1.0;
};

struct Drive {
    double omega = 0.0;
    std::function<Matrix(double)> h_int_of_angle;   // coherent part at angle
    std::function<Matrix(double)> torque_of_angle;  // F(angle)
};

struct ModelSpec {
    SpaceLayout layout;
    ModelKind kind = ModelKind::FreeRotor;
    Operator hamiltonian;  // full autonomous coherent part
    Operator h_int;        // interaction piece alone
    Operator torque;       // F(phi), zero operator when no torque
    std::vector<ThermalChannel> channels;
    std::optional<Drive> drive;

    std::optional<size_t> rotor_index;
    std::optional<size_t> fluid_index;      // piston working mode
    std::optional<size_t> hot_qubit_index;  // mill
    std::optional<size_t> cold_qubit_index;

    double hbar = 1.0;
    double inertia = 1.0;
    double kappa = 0.0;
    double omega0 = 0.0;

    std::optional<MillParams> mill_params;
    std::optional<PistonParams> piston_params;

    // -- application cache (banded fast path for autonomous models) -----
    struct LindbladApply {
        double weight;
        BandedOp a;
        BandedOp a_adj;
    };
    struct ApplyCache {
        BandedOp drift;      // -(i/hbar) H - 1/2 sum w A^dag A
        BandedOp drift_adj;
        std::vector<LindbladApply> lindblad;
        bool built = false;
    };
    mutable ApplyCache cache;

    void finalize() const
    {
        if (cache.built) return;
        if (drive) {
            cache.built = true;  // driven models use the dense path
            return;
        }
        BandedOp k = BandedOp::from_dense(Matrix(cplx(0.0, -1.0 / hbar) * hamiltonian.data));
        for (const auto& ch : channels)
            for (const auto& wl : ch.effective_ops()) {
                if (wl.weight == 0.0) continue;
                BandedOp a = BandedOp::from_dense(wl.op.data);
                BandedOp aa = banded::multiply(a.adjoint(), a);
                banded::axpy(cplx(-0.5 * wl.weight, 0.0), aa, k);
                cache.lindblad.push_back({wl.weight, a, a.adjoint()});
            }
        cache.drift = k;
        cache.drift_adj = k.adjoint();
        cache.built = true;
    }
};

// ---------------------------------------------------------------------
// Builders

namespace detail {

inline void check_rotor_window(int l_min, int l_max)
{
    if (l_max - l_min < 2)
        throw config_error("rotor window [" + std::to_string(l_min) + ", " +
                           std::to_string(l_max) + "] is too small (need l_max - l_min >= 2)");
}

inline ThermalChannel thermal_local_channel(Bath bath, const Operator& lower, double kappa,
                                            double n_bar, std::optional<Operator> bookkeeping)
{
    // Gibbs-fixed-point pairing: emission (lowering) carries kappa(n+1),
    // absorption (raising) carries kappa*n.
    ThermalChannel ch;
    ch.bath = bath;
    ch.ops.push_back({kappa * (n_bar + 1.0), lower, nullptr});
    ch.ops.push_back({kappa * n_bar, lower.adjoint(), nullptr});
    ch.bookkeeping_h = std::move(bookkeeping);
    return ch;
}

} // namespace detail

inline ModelSpec build_mill(const MillParams& p)
{
    if (p.G <= 0.0 || p.kappa <= 0.0) throw config_error("mill needs G > 0 and kappa > 0");
    if (p.n_hot < 0.0 || p.n_cold < 0.0) throw config_error("bath occupations must be >= 0");
    detail::check_rotor_window(p.l_min, p.l_max);

    ModelSpec m;
    m.kind = ModelKind::Mill;
    m.layout = SpaceLayout({Factor::rotor(p.l_min, p.l_max), Factor::qubit(), Factor::qubit()});
    m.rotor_index = 0;
    m.hot_qubit_index = 1;
    m.cold_qubit_index = 2;
    m.hbar = p.hbar;
    m.inertia = p.inertia;
    m.kappa = p.kappa;
    m.omega0 = p.omega0;
    m.mill_params = p;

    const Operator L = angular_momentum_op(m.layout, 0, p.hbar);
    const Operator sm_h = qubit_lowering_op(m.layout, 1);
    const Operator sm_c = qubit_lowering_op(m.layout, 2);
    const Operator up = shift_op(m.layout, 0, +1);

    Matrix exch = sm_h.data * sm_c.adjoint().data * up.data;  // sigma-_H sigma+_C e^{i phi}
    m.h_int = Operator(m.layout, p.hbar * p.G * (exch + exch.adjoint().eval()));
    Matrix h = L.data * L.data / (2.0 * p.inertia) + m.h_int.data;
    h += p.hbar * p.delta * number_op(m.layout, 1).data;
    m.hamiltonian = Operator(m.layout, std::move(h));
    m.torque = Operator(m.layout,
                        cplx(0.0, -1.0) * p.hbar * p.G * (exch - exch.adjoint().eval()));

    m.channels.push_back(detail::thermal_local_channel(
        Bath::Hot, sm_h, p.kappa, p.n_hot,
        Operator(m.layout, p.hbar * p.omega0 * number_op(m.layout, 1).data)));
    m.channels.push_back(detail::thermal_local_channel(
        Bath::Cold, sm_c, p.kappa, p.n_cold,
        Operator(m.layout, p.hbar * p.omega0 * number_op(m.layout, 2).data)));
    return m;
}

inline Operator piston_coupling_fn(const SpaceLayout& layout, size_t rotor_index, Bath bath)
{
    // f_H = (1 + sin phi)/2, f_C = (1 - sin phi)/2
    const double sgn = (bath == Bath::Hot) ? 1.0 : -1.0;
    return angle_poly_op(layout, rotor_index,
                         {{0, 0.5}, {1, cplx(0.0, -0.25 * sgn)}, {-1, cplx(0.0, 0.25 * sgn)}});
}

inline ModelSpec build_piston(const PistonParams& p)
{
    if (p.g <= 0.0 || p.kappa <= 0.0) throw config_error("piston needs g > 0 and kappa > 0");
    if (p.n_hot < 0.0 || p.n_cold < 0.0) throw config_error("bath occupations must be >= 0");
    if (p.fluid.kind == FactorKind::Rotor) throw config_error("piston fluid must be qubit or oscillator");
    detail::check_rotor_window(p.l_min, p.l_max);

    ModelSpec m;
    m.kind = ModelKind::Piston;
    m.layout = SpaceLayout({Factor::rotor(p.l_min, p.l_max), p.fluid});
    m.rotor_index = 0;
    m.fluid_index = 1;
    m.hbar = p.hbar;
    m.inertia = p.inertia;
    m.kappa = p.kappa;
    m.omega0 = p.omega0;
    m.piston_params = p;

    const Operator L = angular_momentum_op(m.layout, 0, p.hbar);
    const Operator n = number_op(m.layout, 1);
    const Operator lower = (p.fluid.kind == FactorKind::Qubit)
                               ? qubit_lowering_op(m.layout, 1)
                               : oscillator_lowering_op(m.layout, 1);

    m.h_int = Operator(m.layout, p.hbar * p.g * (n.data * cos_phi_op(m.layout, 0).data));
    m.hamiltonian = Operator(m.layout, L.data * L.data / (2.0 * p.inertia) + m.h_int.data);
    m.torque = Operator(m.layout, p.hbar * p.g * (n.data * sin_phi_op(m.layout, 0).data));

    const Operator book(m.layout, p.hbar * p.omega0 * n.data);
    for (Bath bath : {Bath::Hot, Bath::Cold}) {
        const double n_bar = (bath == Bath::Hot) ? p.n_hot : p.n_cold;
        const Operator f = piston_coupling_fn(m.layout, 0, bath);
        ThermalChannel ch;
        ch.bath = bath;
        ch.ops.push_back({p.kappa * (n_bar + 1.0), Operator(m.layout, lower.data * f.data), nullptr});
        ch.ops.push_back({p.kappa * n_bar, Operator(m.layout, lower.adjoint().data * f.data), nullptr});
        ch.bookkeeping_h = book;
        m.channels.push_back(std::move(ch));
    }
    return m;
}

// Kick rate of the reduced mill model.
inline double mill_kick_rate(const MillParams& p)
{
    return 2.0 * p.G * p.G /
           (p.kappa * (p.n_hot + p.n_cold + 1.0) * (2.0 * p.n_hot + 1.0) * (2.0 * p.n_cold + 1.0));
}

inline ModelSpec build_effective_mill(const MillParams& p)
{
    if (p.G <= 0.0 || p.kappa <= 0.0) throw config_error("mill needs G > 0 and kappa > 0");
    if (p.delta != 0.0)
        throw config_error("the reduced mill model is only derived at resonance (delta = 0)");
    detail::check_rotor_window(p.l_min, p.l_max);

    ModelSpec m;
    m.kind = ModelKind::EffectiveMill;
    m.layout = SpaceLayout({Factor::rotor(p.l_min, p.l_max)});
    m.rotor_index = 0;
    m.hbar = p.hbar;
    m.inertia = p.inertia;
    m.kappa = p.kappa;
    m.omega0 = p.omega0;
    m.mill_params = p;

    const Operator L = angular_momentum_op(m.layout, 0, p.hbar);
    m.hamiltonian = Operator(m.layout, Matrix(L.data * L.data / (2.0 * p.inertia)));
    m.h_int = Operator(m.layout, Matrix::Zero(m.layout.dim, m.layout.dim));
    m.torque = m.h_int;

    const double xi = mill_kick_rate(p);
    ThermalChannel up;
    up.bath = Bath::Hot;
    up.ops.push_back({xi * p.n_hot * (p.n_cold + 1.0), shift_op(m.layout, 0, +1), nullptr});
    m.channels.push_back(std::move(up));
    ThermalChannel down;
    down.bath = Bath::Cold;
    down.ops.push_back({xi * p.n_cold * (p.n_hot + 1.0), shift_op(m.layout, 0, -1), nullptr});
    m.channels.push_back(std::move(down));
    return m;
}

inline ModelSpec build_free_rotor(const FreeRotorParams& p)
{
    detail::check_rotor_window(p.l_min, p.l_max);
    ModelSpec m;
    m.kind = ModelKind::FreeRotor;
    m.layout = SpaceLayout({Factor::rotor(p.l_min, p.l_max)});
    m.rotor_index = 0;
    m.hbar = p.hbar;
    m.inertia = p.inertia;
    const Operator L = angular_momentum_op(m.layout, 0, p.hbar);
    m.hamiltonian = Operator(m.layout, Matrix(L.data * L.data / (2.0 * p.inertia)));
    m.h_int = Operator(m.layout, Matrix::Zero(m.layout.dim, m.layout.dim));
    m.torque = m.h_int;
    return m;
}

// Damping-diffusion load on the rotor (rotor analog of Caldeira-Leggett).
//
// The printed dissipators are D[A1], D[A2] with
//   A1 = cos(phi) - i hbar sin(phi) L / (4 k_B T_R I),
//   A2 = sin(phi) + i hbar cos(phi) L / (4 k_B T_R I),
// both at weight w = 2 k_B T_R I gamma / hbar^2. With
//   B+ = (1/2) e^{+i phi} (1 - c L),  B- = (1/2) e^{-i phi} (1 + c L),
//   c  = hbar / (4 k_B T_R I),
// one has A1 = B+ + B-, A2 = i (B- - B+), and the cross terms cancel:
//   w (D[A1] + D[A2]) = 2w (D[B+] + D[B-]).
// The single-shift-direction B form is stored as the application set; it
// keeps momentum-diagonal states exactly diagonal during evolution.
inline ThermalChannel build_load_channel(const LoadParams& p, const SpaceLayout& layout,
                                         size_t rotor_index, double hbar = 1.0,
                                         double inertia = 1.0)
{
    if (p.T_R <= 0.0) throw config_error("load temperature must be positive");
    if (p.gamma < 0.0) throw config_error("load damping rate must be >= 0");

    ThermalChannel ch;
    ch.bath = Bath::Load;
    const double w = 2.0 * p.T_R * inertia * p.gamma / (hbar * hbar);
    const double c = hbar / (4.0 * p.T_R * inertia);

    const Matrix L = angular_momentum_op(layout, rotor_index, hbar).data;
    const Matrix cosp = cos_phi_op(layout, rotor_index).data;
    const Matrix sinp = sin_phi_op(layout, rotor_index).data;
    const Matrix id = Matrix::Identity(layout.dim, layout.dim);

    ch.ops.push_back({w, Operator(layout, cosp - cplx(0, 1) * c * (sinp * L)), nullptr});
    ch.ops.push_back({w, Operator(layout, sinp + cplx(0, 1) * c * (cosp * L)), nullptr});

    const Matrix up = shift_op(layout, rotor_index, +1).data;
    const Matrix down = shift_op(layout, rotor_index, -1).data;
    ch.apply_ops.push_back({2.0 * w, Operator(layout, Matrix(0.5 * up * (id - c * L))), nullptr});
    ch.apply_ops.push_back({2.0 * w, Operator(layout, Matrix(0.5 * down * (id + c * L))), nullptr});
    return ch;
}

// ---------------------------------------------------------------------
// Driven (non-autonomous) counterparts: the rotor is replaced by an ideal
// clock, phi -> omega t, L -> I omega.

inline ModelSpec driven_model(const ModelSpec& m, double omega)
{
    if (m.drive) throw config_error("model is already externally driven");

    ModelSpec d;
    d.hbar = m.hbar;
    d.inertia = m.inertia;
    d.kappa = m.kappa;
    d.omega0 = m.omega0;
    d.kind = m.kind;

    if (m.kind == ModelKind::Mill) {
        const MillParams p = *m.mill_params;
        d.mill_params = p;
        d.layout = SpaceLayout({Factor::qubit(), Factor::qubit()});
        d.hot_qubit_index = 0;
        d.cold_qubit_index = 1;
        const Matrix exch =
            (qubit_lowering_op(d.layout, 0).data * qubit_lowering_op(d.layout, 1).adjoint().data)
                .eval();
        const Matrix h0 = p.hbar * p.delta * number_op(d.layout, 0).data;
        Drive dr;
        dr.omega = omega;
        dr.h_int_of_angle = [p, exch, h0](double angle) {
            const cplx ph = std::exp(cplx(0.0, angle));
            return Matrix(h0 + p.hbar * p.G * (ph * exch + std::conj(ph) * exch.adjoint()));
        };
        dr.torque_of_angle = [p, exch](double angle) {
            const cplx ph = std::exp(cplx(0.0, angle));
            return Matrix(cplx(0.0, -1.0) * p.hbar * p.G *
                          (ph * exch - std::conj(ph) * exch.adjoint()));
        };
        d.drive = std::move(dr);
        d.hamiltonian = Operator(d.layout, h0);
        d.h_int = Operator(d.layout, Matrix::Zero(4, 4));
        d.torque = Operator(d.layout, Matrix::Zero(4, 4));
        d.channels.push_back(detail::thermal_local_channel(
            Bath::Hot, qubit_lowering_op(d.layout, 0), p.kappa, p.n_hot,
            Operator(d.layout, p.hbar * p.omega0 * number_op(d.layout, 0).data)));
        d.channels.push_back(detail::thermal_local_channel(
            Bath::Cold, qubit_lowering_op(d.layout, 1), p.kappa, p.n_cold,
            Operator(d.layout, p.hbar * p.omega0 * number_op(d.layout, 1).data)));
        return d;
    }

    if (m.kind == ModelKind::Piston) {
        const PistonParams p = *m.piston_params;
        d.piston_params = p;
        d.layout = SpaceLayout({p.fluid});
        d.fluid_index = 0;
        const Matrix n = number_op(d.layout, 0).data;
        const Operator lower = (p.fluid.kind == FactorKind::Qubit)
                                   ? qubit_lowering_op(d.layout, 0)
                                   : oscillator_lowering_op(d.layout, 0);
        Drive dr;
        dr.omega = omega;
        dr.h_int_of_angle = [p, n](double angle) {
            return Matrix(p.hbar * p.g * std::cos(angle) * n);
        };
        dr.torque_of_angle = [p, n](double angle) {
            return Matrix(p.hbar * p.g * std::sin(angle) * n);
        };
        d.drive = std::move(dr);
        d.hamiltonian = Operator(d.layout, Matrix::Zero(d.layout.dim, d.layout.dim));
        d.h_int = d.hamiltonian;
        d.torque = d.hamiltonian;

        const Operator book(d.layout, p.hbar * p.omega0 * n);
        for (Bath bath : {Bath::Hot, Bath::Cold}) {
            const double n_bar = (bath == Bath::Hot) ? p.n_hot : p.n_cold;
            const double sgn = (bath == Bath::Hot) ? 1.0 : -1.0;
            auto f = [sgn](double angle) { return 0.5 * (1.0 + sgn * std::sin(angle)); };
            ThermalChannel ch;
            ch.bath = bath;
            ch.ops.push_back({p.kappa * (n_bar + 1.0), lower, f});
            ch.ops.push_back({p.kappa * n_bar, lower.adjoint(), f});
            ch.bookkeeping_h = book;
            d.channels.push_back(std::move(ch));
        }
        return d;
    }

    throw config_error("only the mill and piston models have a driven counterpart");
}

// Coherent Hamiltonian at time t (autonomous models ignore t).
inline Matrix hamiltonian_at(const ModelSpec& m, double t)
{
    if (!m.drive) return m.hamiltonian.data;
    return m.drive->h_int_of_angle(m.drive->omega * t);
}

// ---------------------------------------------------------------------
// Liouvillian application

// out = -(i/hbar)[H(t), rho] + sum_channels sum_ops w (A rho A^dag - 1/2 {A^dag A, rho})
// Matrix-free in the sense that no dim^2 x dim^2 object is ever formed.
inline void liouvillian_apply_into(const ModelSpec& m, const Matrix& rho, double t, Matrix& out,
                                   Matrix& scratch)
{
    if (rho.rows() != m.layout.dim || rho.cols() != m.layout.dim)
        throw layout_error("liouvillian_apply: state does not match model layout");

    if (!m.drive) {
        m.finalize();
        out.setZero();
        banded::add_AX(cplx(1, 0), m.cache.drift, rho, out);
        banded::add_XA(cplx(1, 0), m.cache.drift_adj, rho, out);
        for (const auto& lop : m.cache.lindblad) {
            scratch.setZero();
            banded::add_AX(cplx(1, 0), lop.a, rho, scratch);
            banded::add_XA(cplx(lop.weight, 0), lop.a_adj, scratch, out);
        }
        return;
    }

    // Driven models are small (fluid only); use plain dense arithmetic.
    const Matrix h = hamiltonian_at(m, t);
    out = cplx(0.0, -1.0 / m.hbar) * (h * rho - rho * h);
    const double angle = m.drive->omega * t;
    for (const auto& ch : m.channels)
        for (const auto& wl : ch.effective_ops()) {
            double w = wl.weight;
            if (wl.angle_mod) {
                const double f = wl.angle_mod(angle);
                w *= f * f;
            }
            if (w == 0.0) continue;
            const Matrix& a = wl.op.data;
            scratch.noalias() = a * rho;
            out.noalias() += w * (scratch * a.adjoint());
            scratch.noalias() = a.adjoint() * (a * rho);
            out.noalias() -= 0.5 * w * scratch;
            scratch.noalias() = (rho * a.adjoint()) * a;
            out.noalias() -= 0.5 * w * scratch;
        }
}

inline Matrix liouvillian_apply(const ModelSpec& m, const DensityMatrix& rho, double t = 0.0)
{
    Matrix out(m.layout.dim, m.layout.dim), scratch(m.layout.dim, m.layout.dim);
    liouvillian_apply_into(m, rho.data, t, out, scratch);
    return out;
}

// Heisenberg-picture channel action: sum w (A^dag X A - 1/2 {A^dag A, X}).
inline Operator adjoint_channel_apply(const ThermalChannel& ch, const Operator& x,
                                      double angle = 0.0)
{
    Matrix out = Matrix::Zero(x.data.rows(), x.data.cols());
    for (const auto& wl : ch.ops) {
        double w = wl.weight;
        if (wl.angle_mod) {
            const double f = wl.angle_mod(angle);
            w *= f * f;
        }
        if (w == 0.0) continue;
        const Matrix& a = wl.op.data;
        const Matrix aa = a.adjoint() * a;
        out += w * (a.adjoint() * x.data * a - 0.5 * (aa * x.data + x.data * aa));
    }
    return Operator(x.layout, std::move(out));
}

// Full adjoint generator on an observable: (i/hbar)[H, X] + sum channels.
inline Operator adjoint_generator_apply(const ModelSpec& m, const Operator& x, double t = 0.0)
{
    const Matrix h = hamiltonian_at(m, t);
    Matrix out = cplx(0.0, 1.0 / m.hbar) * (h * x.data - x.data * h);
    const double angle = m.drive ? m.drive->omega * t : 0.0;
    for (const auto& ch : m.channels)
        out += adjoint_channel_apply(ch, x, angle).data;
    return Operator(x.layout, std::move(out));
}

// Default initial state: rotor ground state |l=0> tensored with the
// working fluid in thermal equilibrium with its own bath.
inline DensityMatrix default_initial_state(const ModelSpec& m)
{
    std::vector<Matrix> blocks;
    for (size_t i = 0; i < m.layout.factors.size(); ++i) {
        const Factor& f = m.layout.factors[i];
        if (f.kind == FactorKind::Rotor) {
            Matrix b = Matrix::Zero(f.dim(), f.dim());
            b(-f.l_min, -f.l_min) = 1.0;  // |l=0>
            blocks.push_back(std::move(b));
        } else {
            double n_bar = 0.0;
            if (m.kind == ModelKind::Mill) {
                n_bar = (i == *m.hot_qubit_index) ? m.mill_params->n_hot : m.mill_params->n_cold;
            } else if (m.kind == ModelKind::Piston) {
                // angle-conditioned equilibrium at the starting angle phi = 0
                const double nh = m.piston_params->n_hot, nc = m.piston_params->n_cold;
                n_bar = (nh + nc) / 2.0;  // f_H(0) = f_C(0) = 1/2
            }
            blocks.push_back(gibbs_block(f, n_bar));
        }
    }
    Matrix rho = blocks[0];
    for (size_t i = 1; i < blocks.size(); ++i) {
        Matrix next(rho.rows() * blocks[i].rows(), rho.cols() * blocks[i].cols());
        for (int r = 0; r < rho.rows(); ++r)
            for (int c = 0; c < rho.cols(); ++c)
                next.block(r * blocks[i].rows(), c * blocks[i].cols(), blocks[i].rows(),
                           blocks[i].cols()) = rho(r, c) * blocks[i];
        rho = std::move(next);
    }
    return DensityMatrix(m.layout, std::move(rho));
}

} // namespace rotoreng
