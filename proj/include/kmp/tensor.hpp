#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "kmp/common.hpp"

namespace kmp {

// Dense row-major real matrix. Plain value type; autodiff bookkeeping
// lives in Tape, not here.
struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, fill) {}
    Tensor(int r, int c, std::vector<double> values) : rows(r), cols(c), v(std::move(values)) {
        if (v.size() != static_cast<std::size_t>(r) * c)
            throw shape_error("Tensor: value count " + std::to_string(v.size()) + " does not match " +
                              std::to_string(r) + "x" + std::to_string(c));
    }

    double& operator()(int i, int j) { return v[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return v[static_cast<std::size_t>(i) * cols + j]; }

    std::size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
    std::string shape_str() const { return std::to_string(rows) + "x" + std::to_string(cols); }

    static Tensor identity(int n) {
        Tensor t(n, n);
        for (int i = 0; i < n; ++i) t(i, i) = 1.0;
        return t;
    }

    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
        const int r = static_cast<int>(rows_init.size());
        const int c = r > 0 ? static_cast<int>(rows_init.begin()->size()) : 0;
        Tensor t(r, c);
        int i = 0;
        for (const auto& row : rows_init) {
            if (static_cast<int>(row.size()) != c) throw shape_error("Tensor::from_rows: ragged rows");
            int j = 0;
            for (double x : row) t(i, j++) = x;
            ++i;
        }
        return t;
    }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    double max_abs() const {
        double m = 0.0;
        for (double x : v) m = std::max(m, std::abs(x));
        return m;
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw shape_error(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// ----------------------------- matmul kernels -----------------------------
// ikj loop order keeps the inner loop contiguous in both B and C.

inline Tensor matmul_raw(const Tensor& a, const Tensor& b) {
    if (a.cols != b.rows)
        throw shape_error("matmul: inner dims differ, " + a.shape_str() + " vs " + b.shape_str());
    Tensor c(a.rows, b.cols);
    const int n = a.rows, k = a.cols, m = b.cols;
    for (int i = 0; i < n; ++i) {
        const double* ar = &a.v[static_cast<std::size_t>(i) * k];
        double* cr = &c.v[static_cast<std::size_t>(i) * m];
        for (int p = 0; p < k; ++p) {
            const double aip = ar[p];
            if (aip == 0.0) continue;
            const double* br = &b.v[static_cast<std::size_t>(p) * m];
            for (int j = 0; j < m; ++j) cr[j] += aip * br[j];
        }
    }
    return c;
}

// a * b^T without materializing the transpose
inline Tensor matmul_nt_raw(const Tensor& a, const Tensor& b) {
    if (a.cols != b.cols)
        throw shape_error("matmul_nt: inner dims differ, " + a.shape_str() + " vs " + b.shape_str());
    Tensor c(a.rows, b.rows);
    const int n = a.rows, k = a.cols, m = b.rows;
    for (int i = 0; i < n; ++i) {
        const double* ar = &a.v[static_cast<std::size_t>(i) * k];
        for (int j = 0; j < m; ++j) {
            const double* br = &b.v[static_cast<std::size_t>(j) * k];
            double s = 0.0;
            for (int p = 0; p < k; ++p) s += ar[p] * br[p];
            c(i, j) = s;
        }
    }
    return c;
}

// a^T * b without materializing the transpose
inline Tensor matmul_tn_raw(const Tensor& a, const Tensor& b) {
    if (a.rows != b.rows)
        throw shape_error("matmul_tn: inner dims differ, " + a.shape_str() + " vs " + b.shape_str());
    Tensor c(a.cols, b.cols);
    const int n = a.cols, k = a.rows, m = b.cols;
    for (int p = 0; p < k; ++p) {
        const double* ar = &a.v[static_cast<std::size_t>(p) * n];
        const double* br = &b.v[static_cast<std::size_t>(p) * m];
        for (int i = 0; i < n; ++i) {
            const double aip = ar[i];
            if (aip == 0.0) continue;
            double* cr = &c.v[static_cast<std::size_t>(i) * m];
            for (int j = 0; j < m; ++j) cr[j] += aip * br[j];
        }
    }
    return c;
}

inline Tensor transpose_raw(const Tensor& a) {
    Tensor t(a.cols, a.rows);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

inline Tensor random_normal(int r, int c, Rng& rng, double stddev = 1.0) {
    Tensor t(r, c);
    for (double& x : t.v) x = rng.normal() * stddev;
    return t;
}

inline Tensor random_uniform(int r, int c, Rng& rng, double lo = 0.0, double hi = 1.0) {
    Tensor t(r, c);
    for (double& x : t.v) x = rng.uniform(lo, hi);
    return t;
}

inline std::vector<int> argmax_rows(const Tensor& t) {
    std::vector<int> out(t.rows, 0);
    for (int i = 0; i < t.rows; ++i) {
        int best = 0;
        for (int j = 1; j < t.cols; ++j)
            if (t(i, j) > t(i, best)) best = j;
        out[i] = best;
    }
    return out;
}

}  // namespace kmp
