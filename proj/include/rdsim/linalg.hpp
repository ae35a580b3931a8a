#pragma once

// Dense complex linear algebra over small tensor-product Hilbert spaces.
// Storage is row-major std::vector<std::complex<double>>; the intended scale
// is dimension <= 2^12, so everything is dense and single-allocation.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rdsim/tolerances.hpp"

namespace rdsim {

using cplx = std::complex<double>;

inline constexpr std::size_t kMaxDenseDim = 4096;  // 2^12

// ---------------------------------------------------------------------------
// StateVector: amplitudes over an explicit tensor factorization.

struct StateVector {
    std::vector<cplx> amp;
    std::vector<std::size_t> dims;  // product of entries equals amp.size()

    StateVector() = default;

    explicit StateVector(std::vector<std::size_t> factor_dims)
        : amp(checked_product(factor_dims)), dims(std::move(factor_dims)) {}

    StateVector(std::vector<cplx> amplitudes, std::vector<std::size_t> factor_dims)
        : amp(std::move(amplitudes)), dims(std::move(factor_dims)) {
        if (checked_product(dims) != amp.size())
            throw std::invalid_argument("StateVector: dims product does not match amplitude count");
    }

    std::size_t size() const { return amp.size(); }

    double norm_sq() const {
        double s = 0.0;
        for (const cplx& c : amp) s += std::norm(c);
        return s;
    }

    double norm() const { return std::sqrt(norm_sq()); }

    void normalize() {
        const double n = norm();
        if (n == 0.0) throw std::invalid_argument("StateVector: cannot normalize zero vector");
        for (cplx& c : amp) c /= n;
    }

    static std::size_t checked_product(const std::vector<std::size_t>& ds) {
        if (ds.empty()) throw std::invalid_argument("StateVector: empty factorization");
        std::size_t p = 1;
        for (std::size_t d : ds) {
            if (d == 0) throw std::invalid_argument("StateVector: zero factor dimension");
            p *= d;
        }
        return p;
    }
};

// Basis state |index> of an n-dimensional single factor.
inline StateVector basis_state(std::size_t n, std::size_t index) {
    if (index >= n) throw std::invalid_argument("basis_state: index out of range");
    StateVector s({n});
    s.amp[index] = 1.0;
    return s;
}

// ---------------------------------------------------------------------------
// OperatorMatrix: dense complex square matrix with optional validated flags.

struct OperatorMatrix {
    std::size_t dim = 0;
    std::vector<cplx> a;  // row-major, a[i*dim + j]
    bool hermitian = false;
    bool unitary = false;

    OperatorMatrix() = default;
    explicit OperatorMatrix(std::size_t n) : dim(n), a(n * n) {
        if (n == 0) throw std::invalid_argument("OperatorMatrix: zero dimension");
    }

    cplx& at(std::size_t i, std::size_t j) { return a[i * dim + j]; }
    const cplx& at(std::size_t i, std::size_t j) const { return a[i * dim + j]; }

    static OperatorMatrix identity(std::size_t n) {
        OperatorMatrix m(n);
        for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
        m.hermitian = true;
        m.unitary = true;
        return m;
    }

    static OperatorMatrix zero(std::size_t n) { return OperatorMatrix(n); }
};

inline OperatorMatrix dagger(const OperatorMatrix& m) {
    OperatorMatrix r(m.dim);
    for (std::size_t i = 0; i < m.dim; ++i)
        for (std::size_t j = 0; j < m.dim; ++j) r.at(j, i) = std::conj(m.at(i, j));
    r.hermitian = m.hermitian;
    r.unitary = m.unitary;
    return r;
}

inline double max_abs(const OperatorMatrix& m) {
    double v = 0.0;
    for (const cplx& c : m.a) v = std::max(v, std::abs(c));
    return v;
}

inline double max_abs_diff(const OperatorMatrix& x, const OperatorMatrix& y) {
    if (x.dim != y.dim) throw std::invalid_argument("max_abs_diff: dimension mismatch");
    double v = 0.0;
    for (std::size_t k = 0; k < x.a.size(); ++k) v = std::max(v, std::abs(x.a[k] - y.a[k]));
    return v;
}

// C = A * B, cache-friendly i-k-j loop over contiguous rows.
inline OperatorMatrix matmul(const OperatorMatrix& x, const OperatorMatrix& y) {
    if (x.dim != y.dim) throw std::invalid_argument("matmul: dimension mismatch");
    const std::size_t n = x.dim;
    OperatorMatrix c(n);
    for (std::size_t i = 0; i < n; ++i) {
        const cplx* xi = &x.a[i * n];
        cplx* ci = &c.a[i * n];
        for (std::size_t k = 0; k < n; ++k) {
            const cplx f = xi[k];
            if (f == cplx(0.0, 0.0)) continue;
            const cplx* yk = &y.a[k * n];
            for (std::size_t j = 0; j < n; ++j) ci[j] += f * yk[j];
        }
    }
    return c;
}

inline OperatorMatrix operator+(const OperatorMatrix& x, const OperatorMatrix& y) {
    if (x.dim != y.dim) throw std::invalid_argument("operator+: dimension mismatch");
    OperatorMatrix r(x.dim);
    for (std::size_t k = 0; k < x.a.size(); ++k) r.a[k] = x.a[k] + y.a[k];
    return r;
}

inline OperatorMatrix operator-(const OperatorMatrix& x, const OperatorMatrix& y) {
    if (x.dim != y.dim) throw std::invalid_argument("operator-: dimension mismatch");
    OperatorMatrix r(x.dim);
    for (std::size_t k = 0; k < x.a.size(); ++k) r.a[k] = x.a[k] - y.a[k];
    return r;
}

inline OperatorMatrix operator*(cplx s, const OperatorMatrix& m) {
    OperatorMatrix r(m.dim);
    for (std::size_t k = 0; k < m.a.size(); ++k) r.a[k] = s * m.a[k];
    return r;
}

// Flag validation: a set flag must actually hold of the entries, otherwise
// the matrix is rejected.
inline void validate_flags(const OperatorMatrix& m) {
    if (m.hermitian) {
        double dev = 0.0;
        for (std::size_t i = 0; i < m.dim; ++i)
            for (std::size_t j = 0; j < m.dim; ++j)
                dev = std::max(dev, std::abs(m.at(i, j) - std::conj(m.at(j, i))));
        if (dev >= tol::hermitian_flag)
            throw std::invalid_argument("OperatorMatrix: hermitian flag set but ||A-A^dagger|| = " +
                                        std::to_string(dev));
    }
    if (m.unitary) {
        const OperatorMatrix p = matmul(dagger(m), m);
        double dev = 0.0;
        for (std::size_t i = 0; i < m.dim; ++i)
            for (std::size_t j = 0; j < m.dim; ++j)
                dev = std::max(dev, std::abs(p.at(i, j) - (i == j ? 1.0 : 0.0)));
        if (dev >= tol::unitary_flag)
            throw std::invalid_argument("OperatorMatrix: unitary flag set but ||A^dagger A - I|| = " +
                                        std::to_string(dev));
    }
}

// Pauli matrices.
inline OperatorMatrix sigma_x() {
    OperatorMatrix m(2);
    m.at(0, 1) = 1.0;
    m.at(1, 0) = 1.0;
    m.hermitian = true;
    m.unitary = true;
    return m;
}

inline OperatorMatrix sigma_y() {
    OperatorMatrix m(2);
    m.at(0, 1) = cplx(0.0, -1.0);
    m.at(1, 0) = cplx(0.0, 1.0);
    m.hermitian = true;
    m.unitary = true;
    return m;
}

inline OperatorMatrix sigma_z() {
    OperatorMatrix m(2);
    m.at(0, 0) = 1.0;
    m.at(1, 1) = -1.0;
    m.hermitian = true;
    m.unitary = true;
    return m;
}

// ---------------------------------------------------------------------------
// Tensor product: entry (i*nb + k, j*nb + l) = a[i,j] * b[k,l].

inline OperatorMatrix tensor_product(const OperatorMatrix& x, const OperatorMatrix& y) {
    const std::size_t na = x.dim, nb = y.dim, n = na * nb;
    if (n > kMaxDenseDim * kMaxDenseDim)
        throw std::invalid_argument("tensor_product: dimension cap exceeded");
    OperatorMatrix r(n);
    for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < na; ++j) {
            const cplx f = x.at(i, j);
            if (f == cplx(0.0, 0.0)) continue;
            for (std::size_t k = 0; k < nb; ++k)
                for (std::size_t l = 0; l < nb; ++l)
                    r.at(i * nb + k, j * nb + l) = f * y.at(k, l);
        }
    r.hermitian = x.hermitian && y.hermitian;
    r.unitary = x.unitary && y.unitary;
    return r;
}

// ---------------------------------------------------------------------------
// apply / inner

inline StateVector apply(const OperatorMatrix& op, const StateVector& s) {
    if (op.dim != s.size()) throw std::invalid_argument("apply: dimension mismatch");
    StateVector r(s.dims);
    for (std::size_t i = 0; i < op.dim; ++i) {
        cplx acc(0.0, 0.0);
        const cplx* row = &op.a[i * op.dim];
        for (std::size_t j = 0; j < op.dim; ++j) acc += row[j] * s.amp[j];
        r.amp[i] = acc;
    }
    return r;
}

inline cplx inner(const StateVector& x, const StateVector& y) {
    if (x.size() != y.size()) throw std::invalid_argument("inner: dimension mismatch");
    cplx acc(0.0, 0.0);
    for (std::size_t k = 0; k < x.size(); ++k) acc += std::conj(x.amp[k]) * y.amp[k];
    return acc;
}

// Max-entry magnitude of AB - BA.
inline double commutator_norm(const OperatorMatrix& x, const OperatorMatrix& y) {
    if (x.dim != y.dim) throw std::invalid_argument("commutator_norm: dimension mismatch");
    return max_abs_diff(matmul(x, y), matmul(y, x));
}

// ---------------------------------------------------------------------------
// Hermitian eigensystem, cyclic Jacobi with complex rotations.
//
// Output order is ascending by eigenvalue. Each eigenvector column is gauged
// so its largest-magnitude component (first index on ties) is real positive,
// which pins the result for golden tests.

struct Eigensystem {
    std::vector<double> values;         // ascending
    std::vector<StateVector> vectors;   // orthonormal, vectors[k] pairs with values[k]
};

namespace detail {

inline void jacobi_hermitian(std::vector<cplx>& m, std::vector<cplx>& v, std::size_t n) {
    // v starts as identity and accumulates rotations; m converges to diagonal.
    auto off_norm = [&]() {
        double s = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) s += std::norm(m[p * n + q]);
        return std::sqrt(s);
    };
    double scale = 0.0;
    for (const cplx& c : m) scale = std::max(scale, std::abs(c));
    if (scale == 0.0) return;
    const double stop = 1e-15 * scale * static_cast<double>(n);

    for (int sweep = 0; sweep < 60; ++sweep) {
        if (off_norm() <= stop) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const cplx apq = m[p * n + q];
                const double mag = std::abs(apq);
                if (mag <= 1e-300) continue;
                const double app = m[p * n + p].real();
                const double aqq = m[q * n + q].real();
                const cplx phi = apq / mag;
                const double zeta = (aqq - app) / (2.0 * mag);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cplx s_phi = s * phi;
                const cplx s_phi_conj = s * std::conj(phi);
                // Rows: m <- G^dagger m.
                for (std::size_t j = 0; j < n; ++j) {
                    const cplx mp = m[p * n + j];
                    const cplx mq = m[q * n + j];
                    m[p * n + j] = c * mp - s_phi * mq;
                    m[q * n + j] = s_phi_conj * mp + c * mq;
                }
                // Columns: m <- m G, and accumulate v <- v G.
                for (std::size_t i = 0; i < n; ++i) {
                    const cplx mp = m[i * n + p];
                    const cplx mq = m[i * n + q];
                    m[i * n + p] = c * mp - s_phi_conj * mq;
                    m[i * n + q] = s_phi * mp + c * mq;
                    const cplx vp = v[i * n + p];
                    const cplx vq = v[i * n + q];
                    v[i * n + p] = c * vp - s_phi_conj * vq;
                    v[i * n + q] = s_phi * vp + c * vq;
                }
                // Re-symmetrize the touched block against rounding drift.
                m[p * n + p] = cplx(m[p * n + p].real(), 0.0);
                m[q * n + q] = cplx(m[q * n + q].real(), 0.0);
                m[q * n + p] = std::conj(m[p * n + q]);
            }
        }
    }
}

}  // namespace detail

inline Eigensystem hermitian_eigensystem(const OperatorMatrix& h) {
    const std::size_t n = h.dim;
    {
        double dev = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                dev = std::max(dev, std::abs(h.at(i, j) - std::conj(h.at(j, i))));
        const double scale = std::max(1.0, max_abs(h));
        if (dev > tol::hermitian_flag * scale)
            throw std::invalid_argument("hermitian_eigensystem: input not Hermitian, deviation = " +
                                        std::to_string(dev));
    }
    std::vector<cplx> m = h.a;
    std::vector<cplx> v(n * n);
    for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
    detail::jacobi_hermitian(m, v, n);

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return m[a * n + a].real() < m[b * n + b].real();
    });

    Eigensystem es;
    es.values.reserve(n);
    es.vectors.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t col = order[k];
        es.values.push_back(m[col * n + col].real());
        StateVector vec({n});
        for (std::size_t i = 0; i < n; ++i) vec.amp[i] = v[i * n + col];
        // Phase gauge: largest-magnitude component real positive, first index on ties.
        std::size_t imax = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = std::abs(vec.amp[i]);
            if (a > best) {
                best = a;
                imax = i;
            }
        }
        if (best > 0.0) {
            const cplx g = std::conj(vec.amp[imax]) / best;
            for (cplx& c : vec.amp) c *= g;
        }
        es.vectors.push_back(std::move(vec));
    }
    return es;
}

// ---------------------------------------------------------------------------
// Matrix exponential.
//
// (Anti-)Hermitian generators go through the eigensystem, which keeps the
// result unitary (orthogonal similarity of an exact diagonal exponential).
// Everything else uses scaling-and-squaring with a degree-13 Pade approximant.

namespace detail {

inline void lu_solve_inplace(std::vector<cplx>& a, std::vector<cplx>& b, std::size_t n) {
    // Solves A X = B with partial pivoting; A is n x n, B is n x n, both row-major.
    std::vector<std::size_t> piv(n);
    std::iota(piv.begin(), piv.end(), 0);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t pivot = k;
        double best = std::abs(a[k * n + k]);
        for (std::size_t i = k + 1; i < n; ++i) {
            const double cand = std::abs(a[i * n + k]);
            if (cand > best) {
                best = cand;
                pivot = i;
            }
        }
        if (best == 0.0) throw std::invalid_argument("lu_solve: singular matrix");
        if (pivot != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[k * n + j], a[pivot * n + j]);
            for (std::size_t j = 0; j < n; ++j) std::swap(b[k * n + j], b[pivot * n + j]);
        }
        const cplx akk = a[k * n + k];
        for (std::size_t i = k + 1; i < n; ++i) {
            const cplx f = a[i * n + k] / akk;
            if (f == cplx(0.0, 0.0)) continue;
            a[i * n + k] = f;
            for (std::size_t j = k + 1; j < n; ++j) a[i * n + j] -= f * a[k * n + j];
            for (std::size_t j = 0; j < n; ++j) b[i * n + j] -= f * b[k * n + j];
        }
    }
    for (std::size_t kk = n; kk-- > 0;) {
        const cplx akk = a[kk * n + kk];
        for (std::size_t j = 0; j < n; ++j) {
            cplx acc = b[kk * n + j];
            for (std::size_t i = kk + 1; i < n; ++i) acc -= a[kk * n + i] * b[i * n + j];
            b[kk * n + j] = acc / akk;
        }
    }
}

inline OperatorMatrix expm_pade13(const OperatorMatrix& input) {
    static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                               1187353796428800.0,  129060195264000.0,   10559470521600.0,
                               670442572800.0,      33522128640.0,       1323241920.0,
                               40840800.0,          960960.0,            16380.0,
                               182.0,               1.0};
    const std::size_t n = input.dim;
    double norm1 = 0.0;  // max column sum
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += std::abs(input.at(i, j));
        norm1 = std::max(norm1, s);
    }
    int squarings = 0;
    OperatorMatrix a = input;
    const double theta13 = 5.371920351148152;
    if (norm1 > theta13) {
        squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
        const double f = std::ldexp(1.0, -squarings);
        for (cplx& c : a.a) c *= f;
    }
    const OperatorMatrix id = OperatorMatrix::identity(n);
    const OperatorMatrix a2 = matmul(a, a);
    const OperatorMatrix a4 = matmul(a2, a2);
    const OperatorMatrix a6 = matmul(a2, a4);
    OperatorMatrix u = matmul(a6, b[13] * a6 + b[11] * a4 + b[9] * a2);
    u = u + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * id;
    u = matmul(a, u);
    OperatorMatrix v = matmul(a6, b[12] * a6 + b[10] * a4 + b[8] * a2);
    v = v + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * id;
    std::vector<cplx> lhs = (v - u).a;
    std::vector<cplx> rhs = (v + u).a;
    lu_solve_inplace(lhs, rhs, n);
    OperatorMatrix r(n);
    r.a = std::move(rhs);
    for (int s = 0; s < squarings; ++s) r = matmul(r, r);
    return r;
}

}  // namespace detail

inline OperatorMatrix matrix_exponential(const OperatorMatrix& m) {
    for (const cplx& c : m.a)
        if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
            throw std::invalid_argument("matrix_exponential: non-finite entry");
    const std::size_t n = m.dim;
    const double scale = std::max(1.0, max_abs(m));
    double anti_dev = 0.0, herm_dev = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            anti_dev = std::max(anti_dev, std::abs(m.at(i, j) + std::conj(m.at(j, i))));
            herm_dev = std::max(herm_dev, std::abs(m.at(i, j) - std::conj(m.at(j, i))));
        }
    if (anti_dev <= tol::hermitian_flag * scale) {
        // m = iH with H Hermitian: exp(m) = V diag(exp(i lambda)) V^dagger.
        OperatorMatrix h(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) h.at(i, j) = cplx(0.0, -1.0) * m.at(i, j);
        const Eigensystem es = hermitian_eigensystem(h);
        OperatorMatrix r(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                cplx acc(0.0, 0.0);
                for (std::size_t k = 0; k < n; ++k) {
                    const cplx ph = std::polar(1.0, es.values[k]);
                    acc += es.vectors[k].amp[i] * ph * std::conj(es.vectors[k].amp[j]);
                }
                r.at(i, j) = acc;
            }
        r.unitary = true;
        return r;
    }
    if (herm_dev <= tol::hermitian_flag * scale) {
        const Eigensystem es = hermitian_eigensystem(m);
        OperatorMatrix r(n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                cplx acc(0.0, 0.0);
                for (std::size_t k = 0; k < n; ++k)
                    acc += es.vectors[k].amp[i] * std::exp(es.values[k]) *
                           std::conj(es.vectors[k].amp[j]);
                r.at(i, j) = acc;
            }
        r.hermitian = true;
        return r;
    }
    return detail::expm_pade13(m);
}

}  // namespace rdsim
