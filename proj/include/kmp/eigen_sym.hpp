#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "kmp/tensor.hpp"

namespace kmp {

// Eigenvalues ascending; eigenvectors(:, k) is the unit eigenvector for
// eigenvalues[k].
struct EigenDecomposition {
    std::vector<double> eigenvalues;
    Tensor eigenvectors;
};

namespace detail {

inline double pythag(double a, double b) {
    const double aa = std::abs(a), ab = std::abs(b);
    if (aa > ab) {
        const double r = ab / aa;
        return aa * std::sqrt(1.0 + r * r);
    }
    if (ab == 0.0) return 0.0;
    const double r = aa / ab;
    return ab * std::sqrt(1.0 + r * r);
}

// Householder reduction of a symmetric matrix to tridiagonal form.
// On exit `a` holds the accumulated orthogonal transform Q, `d` the
// diagonal and `e` the subdiagonal (e[0] unused).
inline void tred2(Tensor& a, std::vector<double>& d, std::vector<double>& e) {
    const int n = a.rows;
    for (int i = n - 1; i >= 1; --i) {
        const int l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (int k = 0; k <= l; ++k) scale += std::abs(a(i, k));
            if (scale == 0.0) {
                e[i] = a(i, l);
            } else {
                for (int k = 0; k <= l; ++k) {
                    a(i, k) /= scale;
                    h += a(i, k) * a(i, k);
                }
                double f = a(i, l);
                double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                a(i, l) = f - g;
                f = 0.0;
                for (int j = 0; j <= l; ++j) {
                    a(j, i) = a(i, j) / h;
                    g = 0.0;
                    for (int k = 0; k <= j; ++k) g += a(j, k) * a(i, k);
                    for (int k = j + 1; k <= l; ++k) g += a(k, j) * a(i, k);
                    e[j] = g / h;
                    f += e[j] * a(i, j);
                }
                const double hh = f / (h + h);
                for (int j = 0; j <= l; ++j) {
                    f = a(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (int k = 0; k <= j; ++k) a(j, k) -= f * e[k] + g * a(i, k);
                }
            }
        } else {
            e[i] = a(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (int i = 0; i < n; ++i) {
        const int l = i - 1;
        if (d[i] != 0.0) {
            for (int j = 0; j <= l; ++j) {
                double g = 0.0;
                for (int k = 0; k <= l; ++k) g += a(i, k) * a(k, j);
                for (int k = 0; k <= l; ++k) a(k, j) -= g * a(k, i);
            }
        }
        d[i] = a(i, i);
        a(i, i) = 1.0;
        for (int j = 0; j <= l; ++j) a(j, i) = a(i, j) = 0.0;
    }
}

// Implicit-shift QL on the tridiagonal (d, e), accumulating rotations
// into z. Eigenvectors end up as columns of z.
inline void tql2(std::vector<double>& d, std::vector<double>& e, Tensor& z, int iter_cap) {
    const int n = static_cast<int>(d.size());
    for (int i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (int l = 0; l < n; ++l) {
        int iter = 0;
        int m;
        do {
            for (m = l; m < n - 1; ++m) {
                const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
                if (std::abs(e[m]) + dd == dd) break;
            }
            if (m != l) {
                if (iter++ == iter_cap)
                    throw numeric_error("eigendecompose: QL failed to converge after " +
                                        std::to_string(iter_cap) + " iterations at index " +
                                        std::to_string(l) + " (off-diagonal residual " +
                                        std::to_string(std::abs(e[l])) + ")");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = pythag(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                int i;
                for (i = m - 1; i >= l; --i) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    e[i + 1] = r = pythag(f, g);
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    d[i + 1] = g + (p = s * r);
                    g = c * r - b;
                    for (int k = 0; k < n; ++k) {
                        f = z(k, i + 1);
                        z(k, i + 1) = s * z(k, i) + c * f;
                        z(k, i) = c * z(k, i) - s * f;
                    }
                }
                if (r == 0.0 && i >= l) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }
}

}  // namespace detail

// Dense symmetric eigendecomposition (tridiagonalization + implicit QL).
// Input asymmetry above `asym_tol` is rejected.
inline EigenDecomposition eigendecompose(const Tensor& sym, double asym_tol = 1e-9, int iter_cap = 60) {
    if (sym.rows != sym.cols) throw shape_error("eigendecompose: matrix is " + sym.shape_str());
    const int n = sym.rows;
    if (n == 0) throw contract_error("eigendecompose: empty matrix");
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (std::abs(sym(i, j) - sym(j, i)) > asym_tol)
                throw contract_error("eigendecompose: input not symmetric at (" + std::to_string(i) + "," +
                                     std::to_string(j) + "), asymmetry " +
                                     std::to_string(std::abs(sym(i, j) - sym(j, i))));

    Tensor work = sym;
    std::vector<double> d(n, 0.0), e(n, 0.0);
    detail::tred2(work, d, e);
    detail::tql2(d, e, work, iter_cap);

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return d[a] < d[b]; });

    EigenDecomposition out;
    out.eigenvalues.resize(n);
    out.eigenvectors = Tensor(n, n);
    for (int k = 0; k < n; ++k) {
        out.eigenvalues[k] = d[order[k]];
        for (int i = 0; i < n; ++i) out.eigenvectors(i, k) = work(i, order[k]);
    }
    return out;
}

// max_k |A v_k - lambda_k v_k|_2, a direct certificate for the solve
inline double eigen_residual(const Tensor& sym, const EigenDecomposition& dec) {
    const int n = sym.rows;
    double worst = 0.0;
    for (int k = 0; k < n; ++k) {
        double norm2 = 0.0;
        for (int i = 0; i < n; ++i) {
            double r = -dec.eigenvalues[k] * dec.eigenvectors(i, k);
            for (int j = 0; j < n; ++j) r += sym(i, j) * dec.eigenvectors(j, k);
            norm2 += r * r;
        }
        worst = std::max(worst, std::sqrt(norm2));
    }
    return worst;
}

}  // namespace kmp
