#pragma once

// Small dense linear algebra for the observer design: chain matrices,
// companion polynomials, Routh-Hurwitz, Lyapunov equation, Jacobi eigenvalues.
// Sizes in scope are n <= ~20, so everything is plain O(n^3)-or-worse code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hgo/error.hpp"

namespace hgo {

/// Row-major dense real matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
        : rows_(rows), cols_(cols), data_(std::move(entries)) {
        if (data_.size() != rows_ * cols_) throw LinalgError("matrix entry count does not match its shape");
        for (double v : data_)
            if (!std::isfinite(v)) throw LinalgError("matrix entries must be finite");
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        std::size_t r = rows.size();
        std::size_t c = r ? rows.begin()->size() : 0;
        std::vector<double> entries;
        entries.reserve(r * c);
        for (const auto& row : rows) {
            if (row.size() != c) throw LinalgError("ragged matrix rows");
            entries.insert(entries.end(), row.begin(), row.end());
        }
        return Matrix(r, c, std::move(entries));
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> d) {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    bool square() const { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> data() const { return data_; }

    Matrix transpose() const {
        Matrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::fabs(v));
        return m;
    }

    friend Matrix operator*(const Matrix& a, const Matrix& b) {
        if (a.cols_ != b.rows_) throw LinalgError("matrix product shape mismatch");
        Matrix r(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                double aik = a(i, k);
                for (std::size_t j = 0; j < b.cols_; ++j) r(i, j) += aik * b(k, j);
            }
        return r;
    }

    friend Matrix operator+(Matrix a, const Matrix& b) {
        a.require_same_shape(b);
        for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] += b.data_[i];
        return a;
    }

    friend Matrix operator-(Matrix a, const Matrix& b) {
        a.require_same_shape(b);
        for (std::size_t i = 0; i < a.data_.size(); ++i) a.data_[i] -= b.data_[i];
        return a;
    }

    friend Matrix operator*(double s, Matrix a) {
        for (double& v : a.data_) v *= s;
        return a;
    }

    std::vector<double> apply(std::span<const double> x) const {
        if (x.size() != cols_) throw LinalgError("matrix-vector shape mismatch");
        std::vector<double> y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) y[i] += (*this)(i, j) * x[j];
        return y;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;

    void require_same_shape(const Matrix& b) const {
        if (rows_ != b.rows_ || cols_ != b.cols_) throw LinalgError("matrix shape mismatch");
    }
};

inline double euclidean_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

struct ChainMatrices {
    Matrix A; ///< n x n shift: ones on the superdiagonal
    Matrix C; ///< 1 x n: [1 0 ... 0]
};

inline ChainMatrices chain_matrices(std::size_t n) {
    if (n == 0) throw LinalgError("chain dimension must be at least 1");
    ChainMatrices m{Matrix(n, n), Matrix(1, n)};
    for (std::size_t i = 0; i + 1 < n; ++i) m.A(i, i + 1) = 1.0;
    m.C(0, 0) = 1.0;
    return m;
}

/// A_L = A + L C for the chain pair; L enters the first column.
inline Matrix observer_error_matrix(std::span<const double> gain) {
    auto [A, C] = chain_matrices(gain.size());
    for (std::size_t i = 0; i < gain.size(); ++i) A(i, 0) += gain[i];
    return A;
}

/// Monic coefficients of det(sI - A - L C) = s^n - l1 s^{n-1} - ... - ln.
inline std::vector<double> companion_char_poly(std::span<const double> gain) {
    std::vector<double> poly;
    poly.reserve(gain.size() + 1);
    poly.push_back(1.0);
    for (double l : gain) poly.push_back(-l);
    return poly;
}

/// Routh-Hurwitz test on a monic polynomial [1, c1, ..., cn].
///
/// A zero or negative first-column entry classifies the polynomial as not
/// Hurwitz; boundary cases (imaginary-axis roots) are therefore rejected.
inline bool is_hurwitz(std::span<const double> poly) {
    if (poly.empty() || poly.front() != 1.0) throw LinalgError("is_hurwitz expects a monic polynomial");
    const std::size_t degree = poly.size() - 1;
    if (degree == 0) return true;

    const std::size_t width = degree / 2 + 1;
    std::vector<double> prev(width, 0.0), curr(width, 0.0);
    for (std::size_t j = 0; 2 * j <= degree; ++j) prev[j] = poly[2 * j];
    for (std::size_t j = 0; 2 * j + 1 <= degree; ++j) curr[j] = poly[2 * j + 1];

    for (std::size_t row = 1; row <= degree; ++row) {
        if (!(curr[0] > 0.0)) return false;
        if (row == degree) break;
        std::vector<double> next(width, 0.0);
        for (std::size_t j = 0; j + 1 < width; ++j)
            next[j] = (curr[0] * prev[j + 1] - prev[0] * curr[j + 1]) / curr[0];
        prev = std::move(curr);
        curr = std::move(next);
    }
    return true;
}

/// Gain whose companion polynomial equals `desired` = [1, c1, ..., cn].
inline std::vector<double> place_poles(std::span<const double> desired) {
    if (desired.empty() || desired.front() != 1.0) throw LinalgError("place_poles expects a monic polynomial");
    std::vector<double> gain;
    gain.reserve(desired.size() - 1);
    for (std::size_t i = 1; i < desired.size(); ++i) gain.push_back(-desired[i]);
    return gain;
}

namespace detail {

/// Gaussian elimination with partial pivoting; `k` is row-major N x N.
inline std::vector<double> solve_dense(std::vector<double> k, std::vector<double> rhs) {
    const std::size_t n = rhs.size();
    double scale = 0.0;
    for (double v : k) scale = std::max(scale, std::fabs(v));
    if (scale == 0.0) throw LinalgError("singular linear system");

    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(k[r * n + col]) > std::fabs(k[pivot * n + col])) pivot = r;
        if (std::fabs(k[pivot * n + col]) <= 1e-13 * scale) throw LinalgError("singular linear system");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(k[col * n + j], k[pivot * n + j]);
            std::swap(rhs[col], rhs[pivot]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            double factor = k[r * n + col] / k[col * n + col];
            if (factor == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) k[r * n + j] -= factor * k[col * n + j];
            rhs[r] -= factor * rhs[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= k[i * n + j] * x[j];
        x[i] = s / k[i * n + i];
    }
    return x;
}

} // namespace detail

/// Symmetric eigenvalues by cyclic Jacobi rotations, ascending.
///
/// Stops once the off-diagonal Frobenius norm is below 1e-13 (relative to
/// the matrix norm when that exceeds one), or after 100 sweeps.
inline std::vector<double> symmetric_eigenvalues(const Matrix& p) {
    if (!p.square()) throw LinalgError("eigenvalues require a square matrix");
    const std::size_t n = p.rows();
    const double sym_tol = 1e-10 * std::max(1.0, p.max_abs());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::fabs(p(i, j) - p(j, i)) > sym_tol) throw LinalgError("matrix is not symmetric");

    Matrix a = p;
    double frob = 0.0;
    for (double v : a.data()) frob += v * v;
    const double tol = 1e-13 * std::max(1.0, std::sqrt(frob));

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
        for (std::size_t pi = 0; pi + 1 < n; ++pi) {
            for (std::size_t q = pi + 1; q < n; ++q) {
                double apq = a(pi, q);
                if (apq == 0.0) continue;
                double theta = (a(q, q) - a(pi, pi)) / (2.0 * apq);
                double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    double akp = a(k, pi), akq = a(k, q);
                    a(k, pi) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    double apk = a(pi, k), aqk = a(q, k);
                    a(pi, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }

    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

/// Which Lyapunov equation to solve for A_L.
enum class LyapunovConvention {
    AsWritten,  ///< A_L^T P + P A_L = -I
    Transposed, ///< A_L P + P A_L^T = -I
};

struct LyapunovSolution {
    Matrix P;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    LyapunovConvention convention = LyapunovConvention::AsWritten;
    double residual = 0.0; ///< max-norm of the chosen equation's residual
};

/// Residual of the chosen Lyapunov equation, (lhs + I).
inline Matrix lyapunov_residual(const Matrix& a_l, const Matrix& p, LyapunovConvention convention) {
    Matrix lhs = convention == LyapunovConvention::AsWritten ? a_l.transpose() * p + p * a_l
                                                             : a_l * p + p * a_l.transpose();
    return lhs + Matrix::identity(a_l.rows());
}

/// Solves the Lyapunov equation over the n(n+1)/2 symmetric unknowns.
///
/// Throws LinalgError when the vectorized system is singular (A_L has
/// eigenvalues summing to zero) or when the solution is not positive definite.
inline LyapunovSolution solve_lyapunov(const Matrix& a_l,
                                       LyapunovConvention convention = LyapunovConvention::AsWritten) {
    if (!a_l.square() || a_l.rows() == 0) throw LinalgError("Lyapunov solve requires a square matrix");
    const std::size_t n = a_l.rows();
    // Both conventions reduce to B^T P + P B = -I.
    const Matrix b = convention == LyapunovConvention::AsWritten ? a_l : a_l.transpose();

    auto index = [n](std::size_t i, std::size_t j) {
        if (i > j) std::swap(i, j);
        return i * n - i * (i - 1) / 2 + (j - i);
    };
    const std::size_t unknowns = n * (n + 1) / 2;

    std::vector<double> k(unknowns * unknowns, 0.0), rhs(unknowns, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = r; c < n; ++c) {
            std::size_t eq = index(r, c);
            // (B^T P)_rc = sum_k B_kr P_kc ; (P B)_rc = sum_k P_rk B_kc
            for (std::size_t kk = 0; kk < n; ++kk) {
                k[eq * unknowns + index(kk, c)] += b(kk, r);
                k[eq * unknowns + index(r, kk)] += b(kk, c);
            }
            rhs[eq] = r == c ? -1.0 : 0.0;
        }
    }

    std::vector<double> x;
    try {
        x = detail::solve_dense(k, rhs);
        // One refinement step against the vectorized system.
        std::vector<double> r(unknowns);
        for (std::size_t i = 0; i < unknowns; ++i) {
            double s = rhs[i];
            for (std::size_t j = 0; j < unknowns; ++j) s -= k[i * unknowns + j] * x[j];
            r[i] = s;
        }
        auto dx = detail::solve_dense(k, r);
        for (std::size_t i = 0; i < unknowns; ++i) x[i] += dx[i];
    } catch (const LinalgError&) {
        throw LinalgError("singular Lyapunov system: A_L is not Hurwitz");
    }

    LyapunovSolution sol;
    sol.convention = convention;
    sol.P = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) sol.P(i, j) = x[index(i, j)];
    auto eig = symmetric_eigenvalues(sol.P);
    sol.lambda_min = eig.front();
    sol.lambda_max = eig.back();
    sol.residual = lyapunov_residual(a_l, sol.P, convention).max_abs();
    if (!(sol.lambda_min > 0.0)) throw LinalgError("Lyapunov solution is not positive definite: A_L is not Hurwitz");
    return sol;
}

/// D(eps) = diag(1, eps, ..., eps^{n-1}).
inline Matrix scaling_matrix(std::size_t n, double eps) {
    if (!(eps > 0.0)) throw LinalgError("scaling parameter eps must be positive");
    Matrix d(n, n);
    double v = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
        d(i, i) = v;
        v *= eps;
    }
    return d;
}

/// Spectral norm of D(eps)^{-1}, i.e. max(1, eps^{-(n-1)}).
inline double inverse_scaling_norm(std::size_t n, double eps) {
    return std::max(1.0, std::pow(eps, -static_cast<double>(n - 1)));
}

/// Spectral norm of D(eps), i.e. max(1, eps^{n-1}).
inline double scaling_norm(std::size_t n, double eps) {
    return std::max(1.0, std::pow(eps, static_cast<double>(n - 1)));
}

} // namespace hgo
