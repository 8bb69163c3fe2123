#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "kmp/autodiff.hpp"
#include "kmp/binary_io.hpp"
#include "kmp/eigen_sym.hpp"
#include "kmp/graph.hpp"

namespace kmp {

// The k smallest non-trivial Laplacian eigenvectors, sign-fixed for
// deterministic runs. Computed once per graph before training.
struct PositionalEncoding {
    int k = 0;
    Tensor vectors;  // n x k
    std::vector<double> eigenvalues;
    std::vector<std::uint8_t> sign_flipped;  // per column, record of the sign fix
};

constexpr double kTrivialEigTol = 1e-10;

// Laplacian variant for PE computation: isolated nodes get a self-loop so
// the matrix stays defined. Each such node contributes one extra zero
// eigenvalue, which select_pe skips as trivial anyway.
inline Tensor laplacian_for_pe(const Graph& g) {
    bool any_isolated = false;
    for (int i = 0; i < g.n && !any_isolated; ++i) any_isolated = g.isolated(i);
    if (!any_isolated) return normalized_laplacian(g);

    Tensor lap = Tensor::identity(g.n);
    for (int i = 0; i < g.n; ++i) {
        if (g.isolated(i)) {
            lap(i, i) = 0.0;  // self-loop: 1 - 1/1
            continue;
        }
        const double di = 1.0 / std::sqrt(static_cast<double>(g.degree(i)));
        for (int p = g.offsets[i]; p < g.offsets[i + 1]; ++p) {
            const int j = g.neighbors[p];
            lap(i, j) -= di / std::sqrt(static_cast<double>(g.degree(j)));
        }
    }
    return lap;
}

// Pick the k smallest eigenvectors above the triviality threshold (one
// zero eigenvalue per connected component is skipped). Sign convention:
// the largest-magnitude entry of each column is made positive, first
// occurrence winning ties, so runs are platform-deterministic.
inline PositionalEncoding select_pe(const EigenDecomposition& dec, int k,
                                    double trivial_tol = kTrivialEigTol) {
    const int n = dec.eigenvectors.rows;
    if (k < 1) throw contract_error("select_pe: k must be >= 1");
    int first = 0;
    while (first < n && dec.eigenvalues[first] <= trivial_tol) ++first;
    if (first + k > n)
        throw contract_error("select_pe: requested k=" + std::to_string(k) + " but only " +
                             std::to_string(n - first) + " non-trivial eigenvalues available");

    PositionalEncoding pe;
    pe.k = k;
    pe.vectors = Tensor(n, k);
    pe.eigenvalues.resize(k);
    pe.sign_flipped.resize(k, 0);
    for (int c = 0; c < k; ++c) {
        const int src = first + c;
        pe.eigenvalues[c] = dec.eigenvalues[src];
        int arg = 0;
        double best = std::abs(dec.eigenvectors(0, src));
        for (int i = 1; i < n; ++i) {
            const double a = std::abs(dec.eigenvectors(i, src));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        const double sign = dec.eigenvectors(arg, src) < 0.0 ? -1.0 : 1.0;
        pe.sign_flipped[c] = sign < 0.0 ? 1 : 0;
        for (int i = 0; i < n; ++i) pe.vectors(i, c) = sign * dec.eigenvectors(i, src);
    }
    return pe;
}

inline PositionalEncoding compute_pe(const Graph& g, int k) {
    return select_pe(eigendecompose(laplacian_for_pe(g)), k);
}

enum class PeMode { off, concat, mul };

inline const char* pe_mode_name(PeMode m) {
    switch (m) {
        case PeMode::off: return "off";
        case PeMode::concat: return "concat";
        case PeMode::mul: return "mul";
    }
    return "?";
}

// Embed PE rows into feature space and fuse with the node features:
// x_pos = pe * K0 + b0 (same width d as the features), then either
// concatenation (m x 2d) or an elementwise product (m x d). K0 and b0
// are trainable and must be registered on the same tape.
inline Var fuse_pe(Tape& t, Var features, Var pe_rows, Var k0, Var b0, PeMode mode) {
    if (mode == PeMode::off) return features;
    const Tensor& f = t.val(features);
    const Tensor& k0v = t.val(k0);
    if (t.val(pe_rows).cols != k0v.rows)
        throw shape_error("fuse_pe: pe width " + std::to_string(t.val(pe_rows).cols) +
                          " vs K0 rows " + std::to_string(k0v.rows));
    if (k0v.cols != f.cols)
        throw shape_error("fuse_pe: embedded PE width " + std::to_string(k0v.cols) +
                          " must equal feature width " + std::to_string(f.cols));
    Var x_pos = t.add_rowvec(t.matmul(pe_rows, k0), b0);
    return mode == PeMode::concat ? t.concat_cols(features, x_pos) : t.mul(features, x_pos);
}

// ----------------------------- PE cache -----------------------------

inline constexpr char kPeCacheMagic[8] = {'K', 'M', 'P', 'P', 'E', 'C', 'A', '1'};

inline void save_pe_cache(const std::string& path, const PositionalEncoding& pe) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open PE cache for writing: " + path);
    write_magic(os, kPeCacheMagic);
    write_i64(os, pe.vectors.rows);
    write_i64(os, pe.k);
    for (double ev : pe.eigenvalues) write_f64(os, ev);
    for (double x : pe.vectors.v) write_f64(os, x);
    if (!os) throw io_error("write failed: " + path);
}

inline PositionalEncoding load_pe_cache(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open PE cache: " + path);
    expect_magic(is, kPeCacheMagic, path);
    const std::int64_t n = read_i64(is, "pe n");
    const std::int64_t k = read_i64(is, "pe k");
    if (n < 1 || k < 1 || k > n) throw io_error(path + ": corrupt PE header n=" + std::to_string(n) +
                                                " k=" + std::to_string(k));
    PositionalEncoding pe;
    pe.k = static_cast<int>(k);
    pe.eigenvalues.resize(pe.k);
    for (double& ev : pe.eigenvalues) ev = read_f64(is, "pe eigenvalue");
    pe.vectors = Tensor(static_cast<int>(n), pe.k);
    for (double& x : pe.vectors.v) x = read_f64(is, "pe vectors");
    pe.sign_flipped.assign(pe.k, 0);
    return pe;
}

}  // namespace kmp
