#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "kmp/autodiff.hpp"
#include "kmp/graph.hpp"
#include "kmp/tensor.hpp"

namespace kmp {

enum class KernelKind { sigmoid, randomized, polynomial, gaussian, reverse };

inline const char* kernel_kind_name(KernelKind k) {
    switch (k) {
        case KernelKind::sigmoid: return "sigmoid";
        case KernelKind::randomized: return "randomized";
        case KernelKind::polynomial: return "polynomial";
        case KernelKind::gaussian: return "gaussian";
        case KernelKind::reverse: return "reverse";
    }
    return "?";
}

inline KernelKind kernel_kind_from(const std::string& s) {
    if (s == "sigmoid") return KernelKind::sigmoid;
    if (s == "randomized") return KernelKind::randomized;
    if (s == "polynomial") return KernelKind::polynomial;
    if (s == "gaussian") return KernelKind::gaussian;
    if (s == "reverse") return KernelKind::reverse;
    throw config_error("unknown kernel '" + s + "' (expected sigmoid|randomized|polynomial|gaussian|reverse)");
}

enum class SigmaKind { sigmoid, relu, tanh };

// One of the four heat-kernel functions, or the trainable reverse kernel.
// Randomized draws (xi, M) are fixed once per run; sigmoid's affine
// projection (a, b) and the reverse kernel's W_k are trainable.
struct KernelSpec {
    KernelKind kind = KernelKind::gaussian;

    Tensor sig_a{1, 1, {1.0}};  // f_proj scale
    Tensor sig_b{1, 1, {0.0}};  // f_proj shift

    int rand_t = 8;
    std::vector<double> xi;
    std::vector<Tensor> rand_m;  // t matrices, h x h

    double poly_c = 1.0;
    int poly_d = 2;

    double gauss_T = 1.0;

    Tensor reverse_w;  // h x h, trainable
    SigmaKind sigma = SigmaKind::sigmoid;

    static KernelSpec gaussian(double T = 1.0) {
        if (T <= 0.0) throw config_error("gaussian kernel: T must be > 0");
        KernelSpec s;
        s.kind = KernelKind::gaussian;
        s.gauss_T = T;
        return s;
    }

    static KernelSpec polynomial(double c = 1.0, int d = 2) {
        if (d < 1) throw config_error("polynomial kernel: d must be >= 1");
        KernelSpec s;
        s.kind = KernelKind::polynomial;
        s.poly_c = c;
        s.poly_d = d;
        return s;
    }

    static KernelSpec sigmoid(double a = 1.0, double b = 0.0) {
        KernelSpec s;
        s.kind = KernelKind::sigmoid;
        s.sig_a.v[0] = a;
        s.sig_b.v[0] = b;
        return s;
    }

    static KernelSpec randomized(int t, int h, Rng& rng) {
        if (t < 1) throw config_error("randomized kernel: t must be >= 1");
        KernelSpec s;
        s.kind = KernelKind::randomized;
        s.rand_t = t;
        s.xi.resize(t);
        for (double& x : s.xi) x = rng.normal();
        s.rand_m.reserve(t);
        for (int r = 0; r < t; ++r) s.rand_m.push_back(random_normal(h, h, rng));
        return s;
    }

    static KernelSpec reverse(int h, Rng& rng, SigmaKind sigma = SigmaKind::sigmoid) {
        KernelSpec s;
        s.kind = KernelKind::reverse;
        s.sigma = sigma;
        const double sc = 1.0 / std::sqrt(static_cast<double>(h));
        s.reverse_w = random_normal(h, h, rng, sc);
        return s;
    }

    std::vector<Tensor*> trainable() {
        switch (kind) {
            case KernelKind::sigmoid: return {&sig_a, &sig_b};
            case KernelKind::reverse: return {&reverse_w};
            default: return {};
        }
    }
};

namespace detail {

inline double sigma_apply(SigmaKind k, double x) {
    switch (k) {
        case SigmaKind::sigmoid: return 1.0 / (1.0 + std::exp(-x));
        case SigmaKind::relu: return x > 0.0 ? x : 0.0;
        case SigmaKind::tanh: return std::tanh(x);
    }
    return 0.0;
}

inline Var sigma_apply_t(Tape& t, SigmaKind k, Var x) {
    switch (k) {
        case SigmaKind::sigmoid: return t.sigmoid_(x);
        case SigmaKind::relu: return t.relu(x);
        case SigmaKind::tanh: return t.tanh_(x);
    }
    throw contract_error("sigma_apply_t: bad sigma kind");
}

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace detail

// f_k = sigma(W_k h_a)^T sigma(W_k h_b)
inline double reverse_kernel_eval(const Tensor& w_k, const Tensor& h_a, const Tensor& h_b,
                                  SigmaKind sigma = SigmaKind::sigmoid) {
    if (h_a.rows != 1 || h_b.rows != 1 || h_a.cols != h_b.cols)
        throw shape_error("reverse_kernel_eval: expected equal-width row vectors");
    const int h = h_a.cols;
    if (w_k.rows != h || w_k.cols != h)
        throw shape_error("reverse_kernel_eval: W_k is " + w_k.shape_str() + " for h=" + std::to_string(h));
    double acc = 0.0;
    for (int i = 0; i < h; ++i) {
        const double* wr = &w_k.v[static_cast<std::size_t>(i) * h];
        const double pa = detail::sigma_apply(sigma, detail::dot(wr, h_a.v.data(), h));
        const double pb = detail::sigma_apply(sigma, detail::dot(wr, h_b.v.data(), h));
        acc += pa * pb;
    }
    return acc;
}

// Scalar kernel value for one pair of hidden vectors (1 x h rows).
inline double kernel_eval(const KernelSpec& spec, const Tensor& h_a, const Tensor& h_b) {
    if (h_a.rows != 1 || h_b.rows != 1 || h_a.cols != h_b.cols)
        throw shape_error("kernel_eval: expected equal-width row vectors, got " + h_a.shape_str() +
                          " and " + h_b.shape_str());
    const int h = h_a.cols;
    switch (spec.kind) {
        case KernelKind::sigmoid: {
            const double z = spec.sig_a.v[0] * detail::dot(h_a.v.data(), h_b.v.data(), h) + spec.sig_b.v[0];
            return 1.0 / (1.0 + std::exp(-z));
        }
        case KernelKind::polynomial:
            return std::pow(detail::dot(h_a.v.data(), h_b.v.data(), h) + spec.poly_c, spec.poly_d);
        case KernelKind::gaussian: {
            double d2 = 0.0;
            for (int i = 0; i < h; ++i) {
                const double d = h_a.v[i] - h_b.v[i];
                d2 += d * d;
            }
            return std::exp(-d2 / (4.0 * spec.gauss_T));
        }
        case KernelKind::randomized: {
            if (static_cast<int>(spec.rand_m.size()) != spec.rand_t)
                throw contract_error("kernel_eval: randomized kernel not initialized");
            double acc = 0.0;
            for (int r = 0; r < spec.rand_t; ++r) {
                const Tensor& m = spec.rand_m[r];
                if (m.rows != h || m.cols != h)
                    throw shape_error("kernel_eval: randomized matrix is " + m.shape_str() +
                                      " for h=" + std::to_string(h));
                double term = 0.0;
                for (int i = 0; i < h; ++i) {
                    const double* mr = &m.v[static_cast<std::size_t>(i) * h];
                    const double pa = detail::sigma_apply(spec.sigma, detail::dot(mr, h_a.v.data(), h));
                    const double pb = detail::sigma_apply(spec.sigma, detail::dot(mr, h_b.v.data(), h));
                    term += pa * pb;
                }
                acc += std::exp(spec.xi[r]) * term;
            }
            return acc / spec.rand_t;
        }
        case KernelKind::reverse:
            return reverse_kernel_eval(spec.reverse_w, h_a, h_b, spec.sigma);
    }
    throw contract_error("kernel_eval: bad kernel kind");
}

// Trainable kernel parameters bound onto a tape. For teacher-side mapping
// matrices the hidden rows are constant leaves but these parameters still
// receive gradient (they are shared between the two sides).
struct TapedKernel {
    Var sig_a, sig_b, reverse_w;

    static TapedKernel bind(Tape& t, const KernelSpec& spec, bool trainable = true) {
        TapedKernel k;
        if (spec.kind == KernelKind::sigmoid) {
            k.sig_a = t.leaf(spec.sig_a, trainable);
            k.sig_b = t.leaf(spec.sig_b, trainable);
        } else if (spec.kind == KernelKind::reverse) {
            k.reverse_w = t.leaf(spec.reverse_w, trainable);
        }
        return k;
    }
};

// Gram matrix Mat[i][j] = f_k(h_i, h_j) over the m matched rows of
// `hidden`, built from batched tape ops so gradient flows to the rows
// (and to trainable kernel parameters).
inline Var mapping_matrix(Tape& t, const KernelSpec& spec, const TapedKernel& tk, Var hidden) {
    const Tensor& hv = t.val(hidden);
    if (hv.rows < 2) throw contract_error("mapping_matrix: need m >= 2 matched rows, got " +
                                          std::to_string(hv.rows));
    switch (spec.kind) {
        case KernelKind::gaussian:
            return t.exp_(t.scale(t.pairwise_sqdist(hidden), -1.0 / (4.0 * spec.gauss_T)));
        case KernelKind::polynomial:
            return t.pow_int(t.add_const(t.matmul_nt(hidden, hidden), spec.poly_c), spec.poly_d);
        case KernelKind::sigmoid:
            return t.sigmoid_(t.add_scalar_var(t.mul_scalar(t.matmul_nt(hidden, hidden), tk.sig_a), tk.sig_b));
        case KernelKind::randomized: {
            Var acc;
            for (int r = 0; r < spec.rand_t; ++r) {
                Var m_r = t.leaf(spec.rand_m[r], false);
                Var proj = detail::sigma_apply_t(t, spec.sigma, t.matmul_nt(hidden, m_r));
                Var term = t.scale(t.matmul_nt(proj, proj), std::exp(spec.xi[r]) / spec.rand_t);
                acc = r == 0 ? term : t.add(acc, term);
            }
            return acc;
        }
        case KernelKind::reverse: {
            Var proj = detail::sigma_apply_t(t, spec.sigma, t.matmul_nt(hidden, tk.reverse_w));
            return t.matmul_nt(proj, proj);
        }
    }
    throw contract_error("mapping_matrix: bad kernel kind");
}

// Squared Frobenius distance between the two mapping matrices, normalized
// by m^2 so the loss scale is independent of the matched-node count.
inline Var mapping_distance(Tape& t, Var mat_s, Var mat_t) {
    const Tensor& a = t.val(mat_s);
    const Tensor& b = t.val(mat_t);
    check_same_shape(a, b, "mapping_distance");
    const double m2 = static_cast<double>(a.rows) * a.rows;
    return t.scale(t.sum(t.square(t.sub(mat_s, mat_t))), 1.0 / m2);
}

// Reconstruction loss for the reverse kernel (two-step optimization):
// L_re = |sigma(H W_k^T) D - X0|_F^2 / (m d), with D a trainable linear
// decoder from kernel space back to the input features.
inline Var reconstruction_loss(Tape& t, Var reverse_w, Var decoder, Var h_last, Var x0,
                               SigmaKind sigma = SigmaKind::sigmoid) {
    const Tensor& hv = t.val(h_last);
    const Tensor& xv = t.val(x0);
    if (hv.rows != xv.rows)
        throw shape_error("reconstruction_loss: row mismatch " + hv.shape_str() + " vs " + xv.shape_str());
    const Tensor& dv = t.val(decoder);
    if (dv.rows != hv.cols || dv.cols != xv.cols)
        throw shape_error("reconstruction_loss: decoder is " + dv.shape_str() + ", need " +
                          std::to_string(hv.cols) + "x" + std::to_string(xv.cols));
    Var proj = detail::sigma_apply_t(t, sigma, t.matmul_nt(h_last, reverse_w));
    Var recon = t.matmul(proj, decoder);
    const double scale = 1.0 / (static_cast<double>(xv.rows) * xv.cols);
    return t.scale(t.sum(t.square(t.sub(recon, x0))), scale);
}

// Diagnostic single smoothing step from the heat-kernel propagation view:
// H'_a = sum over neighbors b of f_k(h_a, h_b) H_b / degree_b. Test-only;
// the training objective goes through mapping matrices instead.
inline Tensor nhk_propagate(const Graph& g, const KernelSpec& spec, const Tensor& hidden) {
    if (hidden.rows != g.n)
        throw shape_error("nhk_propagate: hidden rows " + std::to_string(hidden.rows) + " vs n=" +
                          std::to_string(g.n));
    Tensor out(g.n, hidden.cols);
    Tensor row_a(1, hidden.cols), row_b(1, hidden.cols);
    for (int a = 0; a < g.n; ++a) {
        for (int j = 0; j < hidden.cols; ++j) row_a(0, j) = hidden(a, j);
        for (int p = g.offsets[a]; p < g.offsets[a + 1]; ++p) {
            const int b = g.neighbors[p];
            for (int j = 0; j < hidden.cols; ++j) row_b(0, j) = hidden(b, j);
            const double w = kernel_eval(spec, row_a, row_b) / g.degree(b);
            for (int j = 0; j < hidden.cols; ++j) out(a, j) += w * hidden(b, j);
        }
    }
    return out;
}

}  // namespace kmp
