#pragma once

// Operator algebra on truncated rotor / qubit / oscillator Hilbert spaces.
//
// Composite basis ordering is row-major over the factors in declaration
// order; the rotor basis is ordered by ascending angular momentum index.
// Angle shift operators annihilate the edge states of the truncation
// window instead of wrapping around.

#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "rotoreng/errors.hpp"

namespace rotoreng {

using cplx = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

enum class FactorKind { Rotor, Qubit, Oscillator };

struct Factor {
    FactorKind kind;
    int l_min = 0;  // rotor only
    int l_max = 0;  // rotor only
    int n_max = 0;  // oscillator only

    static Factor rotor(int l_min, int l_max)
    {
        if (l_min > 0 || l_max < 0)
            throw config_error("rotor range [" + std::to_string(l_min) + ", " +
                               std::to_string(l_max) + "] must contain l = 0");
        return Factor{FactorKind::Rotor, l_min, l_max, 0};
    }
    static Factor qubit() { return Factor{FactorKind::Qubit, 0, 0, 0}; }
    static Factor oscillator(int n_max)
    {
        if (n_max < 1) throw config_error("oscillator cutoff must be >= 1");
        return Factor{FactorKind::Oscillator, 0, 0, n_max};
    }

    int dim() const
    {
        switch (kind) {
            case FactorKind::Rotor: return l_max - l_min + 1;
            case FactorKind::Qubit: return 2;
            case FactorKind::Oscillator: return n_max + 1;
        }
        return 0;
    }

    bool operator==(const Factor& o) const
    {
        return kind == o.kind && l_min == o.l_min && l_max == o.l_max && n_max == o.n_max;
    }
};

struct SpaceLayout {
    std::vector<Factor> factors;
    int dim = 1;

    SpaceLayout() = default;
    explicit SpaceLayout(std::vector<Factor> fs) : factors(std::move(fs))
    {
        if (factors.empty()) throw layout_error("layout needs at least one factor");
        dim = 1;
        for (const auto& f : factors) dim *= f.dim();
    }

    const Factor& factor(size_t idx) const
    {
        if (idx >= factors.size())
            throw layout_error("factor index " + std::to_string(idx) + " out of range");
        return factors[idx];
    }

    // Dimension of everything declared after factor idx (stride of that
    // factor's index in the composite row-major ordering).
    int trailing_dim(size_t idx) const
    {
        int d = 1;
        for (size_t k = idx + 1; k < factors.size(); ++k) d *= factors[k].dim();
        return d;
    }
    int leading_dim(size_t idx) const
    {
        int d = 1;
        for (size_t k = 0; k < idx; ++k) d *= factors[k].dim();
        return d;
    }

    bool operator==(const SpaceLayout& o) const
    {
        return dim == o.dim && factors == o.factors;
    }
};

struct Operator {
    SpaceLayout layout;
    Matrix data;

    Operator() = default;
    Operator(SpaceLayout l, Matrix d) : layout(std::move(l)), data(std::move(d))
    {
        if (data.rows() != layout.dim || data.cols() != layout.dim)
            throw layout_error("operator data shape does not match layout dimension");
    }

    Operator adjoint() const { return Operator(layout, data.adjoint()); }

    bool is_hermitian(double rel_tol = 1e-12) const
    {
        double n = data.norm();
        if (n == 0.0) return true;
        return (data - data.adjoint()).norm() <= rel_tol * n;
    }
};

struct DensityMatrix {
    SpaceLayout layout;
    Matrix data;

    DensityMatrix() = default;
    DensityMatrix(SpaceLayout l, Matrix d) : layout(std::move(l)), data(std::move(d))
    {
        if (data.rows() != layout.dim || data.cols() != layout.dim)
            throw layout_error("density matrix shape does not match layout dimension");
    }

    double trace_real() const { return data.trace().real(); }

    double hermiticity_defect() const
    {
        double n = data.norm();
        if (n == 0.0) return 0.0;
        return (data - data.adjoint()).norm() / n;
    }

    // Smallest eigenvalue; intended for on-demand positivity checks only.
    double min_eigenvalue() const
    {
        Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (data + data.adjoint()),
                                                 Eigen::EigenvaluesOnly);
        return es.eigenvalues().minCoeff();
    }

    void validate(double herm_tol = 1e-10, double trace_tol = 1e-8) const
    {
        if (hermiticity_defect() > herm_tol)
            throw state_error("density matrix is not Hermitian to tolerance");
        if (std::abs(trace_real() - 1.0) > trace_tol)
            throw state_error("density matrix trace deviates from 1");
    }
};

namespace detail {

// C = A placed on factor idx, identity on all other factors, under the
// row-major composite ordering: C = I_lead (x) A (x) I_trail.
inline Matrix embed_matrix(const SpaceLayout& layout, size_t idx, const Matrix& a)
{
    const int d = layout.factor(idx).dim();
    if (a.rows() != d || a.cols() != d)
        throw layout_error("embedded block has wrong dimension for its factor");
    const int lead = layout.leading_dim(idx);
    const int trail = layout.trailing_dim(idx);
    Matrix out = Matrix::Zero(layout.dim, layout.dim);
    for (int L = 0; L < lead; ++L)
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) {
                const cplx v = a(r, c);
                if (v == cplx(0.0, 0.0)) continue;
                const int row0 = (L * d + r) * trail;
                const int col0 = (L * d + c) * trail;
                for (int t = 0; t < trail; ++t) out(row0 + t, col0 + t) = v;
            }
    return out;
}

} // namespace detail

// Single-factor operator embedded with identities on all other factors.
inline Operator embed(const SpaceLayout& layout, size_t factor_index, const Matrix& block)
{
    return Operator(layout, detail::embed_matrix(layout, factor_index, block));
}

inline Operator identity_op(const SpaceLayout& layout)
{
    return Operator(layout, Matrix::Identity(layout.dim, layout.dim));
}

// L = sum_l hbar*l |l><l| on the addressed rotor factor.
inline Operator angular_momentum_op(const SpaceLayout& layout, size_t rotor_index,
                                    double hbar = 1.0)
{
    const Factor& f = layout.factor(rotor_index);
    if (f.kind != FactorKind::Rotor)
        throw layout_error("factor " + std::to_string(rotor_index) + " is not a rotor");
    const int d = f.dim();
    Matrix a = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) a(i, i) = hbar * (f.l_min + i);
    return embed(layout, rotor_index, a);
}

// e^{ik phi}: |l> -> |l+k>, hard truncation at the window edges.
inline Operator shift_op(const SpaceLayout& layout, size_t rotor_index, int k)
{
    const Factor& f = layout.factor(rotor_index);
    if (f.kind != FactorKind::Rotor)
        throw layout_error("factor " + std::to_string(rotor_index) + " is not a rotor");
    const int d = f.dim();
    if (std::abs(k) >= d)
        throw config_error("shift order " + std::to_string(k) + " exceeds the rotor window");
    Matrix a = Matrix::Zero(d, d);
    for (int i = 0; i < d; ++i) {
        const int j = i + k; // target level index
        if (j >= 0 && j < d) a(j, i) = 1.0;
    }
    return embed(layout, rotor_index, a);
}

// Trigonometric polynomial sum_k c_k e^{ik phi} on the rotor factor.
inline Operator angle_poly_op(const SpaceLayout& layout, size_t rotor_index,
                              const std::map<int, cplx>& coeffs)
{
    Matrix acc = Matrix::Zero(layout.dim, layout.dim);
    for (const auto& [k, c] : coeffs) {
        if (c == cplx(0.0, 0.0)) continue;
        acc += c * shift_op(layout, rotor_index, k).data;
    }
    return Operator(layout, std::move(acc));
}

inline Operator cos_phi_op(const SpaceLayout& layout, size_t rotor_index)
{
    return angle_poly_op(layout, rotor_index, {{1, 0.5}, {-1, 0.5}});
}

inline Operator sin_phi_op(const SpaceLayout& layout, size_t rotor_index)
{
    return angle_poly_op(layout, rotor_index, {{1, cplx(0, -0.5)}, {-1, cplx(0, 0.5)}});
}

// Qubit basis order (ground, excited); sigma^+ sigma^- projects onto the
// excited state.
inline Operator qubit_lowering_op(const SpaceLayout& layout, size_t qubit_index)
{
    const Factor& f = layout.factor(qubit_index);
    if (f.kind != FactorKind::Qubit)
        throw layout_error("factor " + std::to_string(qubit_index) + " is not a qubit");
    Matrix a = Matrix::Zero(2, 2);
    a(0, 1) = 1.0;
    return embed(layout, qubit_index, a);
}

inline Operator oscillator_lowering_op(const SpaceLayout& layout, size_t osc_index)
{
    const Factor& f = layout.factor(osc_index);
    if (f.kind != FactorKind::Oscillator)
        throw layout_error("factor " + std::to_string(osc_index) + " is not an oscillator");
    const int d = f.dim();
    Matrix a = Matrix::Zero(d, d);
    for (int n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(double(n));
    return embed(layout, osc_index, a);
}

// Number operator of the working-fluid factor: sigma^+ sigma^- or a^dag a.
inline Operator number_op(const SpaceLayout& layout, size_t factor_index)
{
    const Factor& f = layout.factor(factor_index);
    Matrix b;
    if (f.kind == FactorKind::Qubit) {
        b = Matrix::Zero(2, 2);
        b(1, 1) = 1.0;
    } else if (f.kind == FactorKind::Oscillator) {
        const int d = f.dim();
        b = Matrix::Zero(d, d);
        for (int n = 0; n < d; ++n) b(n, n) = double(n);
    } else {
        throw layout_error("number operator needs a qubit or oscillator factor");
    }
    return embed(layout, factor_index, b);
}

// Reduced state on the kept factor.
inline DensityMatrix partial_trace(const DensityMatrix& rho, size_t keep)
{
    const SpaceLayout& layout = rho.layout;
    const Factor& f = layout.factor(keep);
    const int d = f.dim();
    const int lead = layout.leading_dim(keep);
    const int trail = layout.trailing_dim(keep);
    Matrix out = Matrix::Zero(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) {
            cplx acc(0.0, 0.0);
            for (int L = 0; L < lead; ++L)
                for (int t = 0; t < trail; ++t)
                    acc += rho.data((L * d + r) * trail + t, (L * d + c) * trail + t);
            out(r, c) = acc;
        }
    return DensityMatrix(SpaceLayout({f}), std::move(out));
}

inline cplx expectation(const DensityMatrix& rho, const Operator& op)
{
    if (!(rho.layout == op.layout)) throw layout_error("expectation: layout mismatch");
    return (rho.data * op.data).trace();
}

inline double expectation_real(const DensityMatrix& rho, const Operator& op)
{
    return expectation(rho, op).real();
}

// Thermal two-level / truncated-oscillator state at mean bath occupation
// n_bar (Boltzmann weights of the number operator).
inline Matrix gibbs_block(const Factor& f, double n_bar)
{
    const int d = f.dim();
    Matrix g = Matrix::Zero(d, d);
    if (n_bar <= 0.0) {
        g(0, 0) = 1.0;
        return g;
    }
    const double x = n_bar / (n_bar + 1.0); // e^{-hbar w / kT}
    double z = 0.0;
    for (int n = 0; n < d; ++n) z += std::pow(x, n);
    for (int n = 0; n < d; ++n) g(n, n) = std::pow(x, n) / z;
    return g;
}

} // namespace rotoreng
