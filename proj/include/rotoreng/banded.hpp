#pragma once

// Banded operator kernels for the master-equation hot path.
//
// Every operator appearing in the engine models is a sum of a few fixed
// offsets of the main diagonal (shift operators times diagonal
// coefficients survive all the products taken here). Keeping them in that
// form makes one Liouvillian application a handful of O(dim^2) diagonal
// stencils instead of dim^3 dense products, and it preserves structural
// zeros exactly: matrix elements outside the reachable coherence sectors
// stay bit-exact zero under evolution.

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "rotoreng/qspace.hpp"

namespace rotoreng {

struct BandedOp {
    struct Band {
        int offset;    // entries A(i, i + offset)
        Vector coeff;  // coeff(i - i0) with i0 = max(0, -offset)
    };
    int dim = 0;
    std::vector<Band> bands;

    static BandedOp from_dense(const Matrix& a)
    {
        BandedOp op;
        op.dim = int(a.rows());
        const int n = op.dim;
        for (int off = -(n - 1); off <= n - 1; ++off) {
            const int i0 = std::max(0, -off);
            const int len = n - std::abs(off);
            bool any = false;
            Vector d(len);
            for (int i = 0; i < len; ++i) {
                d(i) = a(i0 + i, i0 + i + off);
                if (d(i) != cplx(0.0, 0.0)) any = true;
            }
            if (any) op.bands.push_back({off, std::move(d)});
        }
        return op;
    }

    Matrix to_dense() const
    {
        Matrix a = Matrix::Zero(dim, dim);
        for (const auto& b : bands) {
            const int i0 = std::max(0, -b.offset);
            for (int i = 0; i < b.coeff.size(); ++i) a(i0 + i, i0 + i + b.offset) = b.coeff(i);
        }
        return a;
    }

    BandedOp adjoint() const
    {
        BandedOp op;
        op.dim = dim;
        for (const auto& b : bands) {
            // A^dag(i, i - offset) = conj(A(i - offset... )) : same coeff
            // vector, conjugated, at the mirrored offset.
            op.bands.push_back({-b.offset, b.coeff.conjugate()});
        }
        return op;
    }

    size_t nnz() const
    {
        size_t n = 0;
        for (const auto& b : bands) n += size_t(b.coeff.size());
        return n;
    }
};

namespace banded {

// Y += s * A * X
inline void add_AX(cplx s, const BandedOp& a, const Matrix& x, Matrix& y)
{
    const int n = a.dim;
    const int m = int(x.cols());
    for (const auto& b : a.bands) {
        const int i0 = std::max(0, -b.offset);
        const int len = int(b.coeff.size());
        if (len <= 0) continue;
        if (s == cplx(1.0, 0.0)) {
            auto d = b.coeff.array();
            for (int c = 0; c < m; ++c)
                y.col(c).segment(i0, len).array() +=
                    d * x.col(c).segment(i0 + b.offset, len).array();
        } else {
            Vector d = s * b.coeff;
            auto da = d.array();
            for (int c = 0; c < m; ++c)
                y.col(c).segment(i0, len).array() +=
                    da * x.col(c).segment(i0 + b.offset, len).array();
        }
    }
}

// Y += s * X * A
inline void add_XA(cplx s, const BandedOp& a, const Matrix& x, Matrix& y)
{
    const int n = a.dim;
    for (const auto& b : a.bands) {
        const int i0 = std::max(0, -b.offset);
        const int len = int(b.coeff.size());
        for (int i = 0; i < len; ++i) {
            const cplx v = s * b.coeff(i);
            if (v == cplx(0.0, 0.0)) continue;
            y.col(i0 + i + b.offset) += v * x.col(i0 + i);
        }
    }
    (void)n;
}

// Y += s * A * X * A^dag  (uses scratch T = A*X)
inline void add_AXAdag(cplx s, const BandedOp& a, const Matrix& x, Matrix& y, Matrix& scratch)
{
    scratch.setZero();
    add_AX(cplx(1.0, 0.0), a, x, scratch);
    add_XA(s, a.adjoint(), scratch, y);
}

// C = A * B as banded operators (exact band arithmetic).
inline BandedOp multiply(const BandedOp& a, const BandedOp& b)
{
    const int n = a.dim;
    // accumulate into dense diagonals keyed by offset
    std::vector<Vector> acc(2 * n - 1);
    std::vector<bool> used(2 * n - 1, false);
    for (const auto& ba : a.bands)
        for (const auto& bb : b.bands) {
            const int off = ba.offset + bb.offset;
            if (off <= -n || off >= n) continue;
            const int idx = off + n - 1;
            if (!used[idx]) {
                acc[idx] = Vector::Zero(n - std::abs(off));
                used[idx] = true;
            }
            // (AB)(i, i+off) += A(i, i+ka) * B(i+ka, i+off)
            const int i0 = std::max(0, -off);
            const int i1 = std::min(n, n - off);
            for (int i = i0; i < i1; ++i) {
                const int k = i + ba.offset; // intermediate index
                if (k < 0 || k >= n) continue;
                // A(i, k) valid iff band ba covers row i
                const int a0 = std::max(0, -ba.offset);
                if (i < a0 || i - a0 >= ba.coeff.size()) continue;
                const int b0 = std::max(0, -bb.offset);
                if (k < b0 || k - b0 >= bb.coeff.size()) continue;
                acc[idx](i - i0) += ba.coeff(i - a0) * bb.coeff(k - b0);
            }
        }
    BandedOp out;
    out.dim = n;
    for (int off = -(n - 1); off <= n - 1; ++off) {
        const int idx = off + n - 1;
        if (!used[idx]) continue;
        bool any = false;
        for (int i = 0; i < acc[idx].size(); ++i)
            if (acc[idx](i) != cplx(0.0, 0.0)) { any = true; break; }
        if (any) out.bands.push_back({off, std::move(acc[idx])});
    }
    return out;
}

// C = C + s * A
inline void axpy(cplx s, const BandedOp& a, BandedOp& c)
{
    for (const auto& ba : a.bands) {
        bool found = false;
        for (auto& bc : c.bands)
            if (bc.offset == ba.offset) {
                bc.coeff += s * ba.coeff;
                found = true;
                break;
            }
        if (!found) c.bands.push_back({ba.offset, s * ba.coeff});
    }
}

} // namespace banded

} // namespace rotoreng
