#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "kmp/common.hpp"
#include "kmp/sparse.hpp"
#include "kmp/tensor.hpp"

namespace kmp {

// Handle into a Tape. Valid only for the tape that produced it.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

// Running statistics for one batch-norm layer. Owned by the model,
// updated by Tape::batchnorm in train mode.
struct BatchNormState {
    Tensor running_mean;  // 1 x c
    Tensor running_var;   // 1 x c
    double momentum = 0.1;
    double eps = 1e-5;
    bool initialized = false;

    void ensure(int c) {
        if (!initialized) {
            running_mean = Tensor(1, c, 0.0);
            running_var = Tensor(1, c, 1.0);
            initialized = true;
        }
    }
};

// Reverse-mode tape over dense tensors. Build a fresh tape per training
// step: register parameter leaves, compose the loss, call backward, read
// gradients out, then drop the tape.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    const Tensor& val(Var x) const { return node(x).value; }
    const Tensor& grad(Var x) const {
        const Node& n = node(x);
        if (!n.requires_grad) throw contract_error("Tape::grad: node does not track gradients");
        return n.grad;
    }
    bool requires_grad(Var x) const { return node(x).requires_grad; }

    double scalar(Var x) const {
        const Tensor& t = val(x);
        if (t.rows != 1 || t.cols != 1) throw contract_error("Tape::scalar: value is " + t.shape_str());
        return t.v[0];
    }

    Var leaf(Tensor value, bool requires_grad = false) {
        return push(std::move(value), requires_grad, {});
    }

    // ----------------------------- arithmetic -----------------------------

    Var add(Var a, Var b) {
        check_same_shape(val(a), val(b), "add");
        Tensor y = val(a);
        const Tensor& bv = val(b);
        for (std::size_t i = 0; i < y.size(); ++i) y.v[i] += bv.v[i];
        return binary(std::move(y), a, b, [](Tape& t, Var a, Var b, const Tensor& dy) {
            t.accum(a, dy);
            t.accum(b, dy);
        });
    }

    Var sub(Var a, Var b) {
        check_same_shape(val(a), val(b), "sub");
        Tensor y = val(a);
        const Tensor& bv = val(b);
        for (std::size_t i = 0; i < y.size(); ++i) y.v[i] -= bv.v[i];
        return binary(std::move(y), a, b, [](Tape& t, Var a, Var b, const Tensor& dy) {
            t.accum(a, dy);
            t.accum_scaled(b, dy, -1.0);
        });
    }

    Var mul(Var a, Var b) {
        check_same_shape(val(a), val(b), "mul");
        Tensor y = val(a);
        const Tensor& bv = val(b);
        for (std::size_t i = 0; i < y.size(); ++i) y.v[i] *= bv.v[i];
        return binary(std::move(y), a, b, [](Tape& t, Var a, Var b, const Tensor& dy) {
            if (t.requires_grad(a)) {
                Tensor da = dy;
                const Tensor& bv = t.val(b);
                for (std::size_t i = 0; i < da.size(); ++i) da.v[i] *= bv.v[i];
                t.accum(a, da);
            }
            if (t.requires_grad(b)) {
                Tensor db = dy;
                const Tensor& av = t.val(a);
                for (std::size_t i = 0; i < db.size(); ++i) db.v[i] *= av.v[i];
                t.accum(b, db);
            }
        });
    }

    // y[i,j] = a[i,j] + r[0,j]
    Var add_rowvec(Var a, Var r) {
        const Tensor& av = val(a);
        const Tensor& rv = val(r);
        if (rv.rows != 1 || rv.cols != av.cols)
            throw shape_error("add_rowvec: " + av.shape_str() + " vs " + rv.shape_str());
        Tensor y = av;
        for (int i = 0; i < y.rows; ++i)
            for (int j = 0; j < y.cols; ++j) y(i, j) += rv(0, j);
        return binary(std::move(y), a, r, [](Tape& t, Var a, Var r, const Tensor& dy) {
            t.accum(a, dy);
            if (t.requires_grad(r)) {
                Tensor dr(1, dy.cols);
                for (int i = 0; i < dy.rows; ++i)
                    for (int j = 0; j < dy.cols; ++j) dr(0, j) += dy(i, j);
                t.accum(r, dr);
            }
        });
    }

    // y[i,j] = a[i,j] + c[i,0]
    Var add_colvec(Var a, Var c) {
        const Tensor& av = val(a);
        const Tensor& cv = val(c);
        if (cv.cols != 1 || cv.rows != av.rows)
            throw shape_error("add_colvec: " + av.shape_str() + " vs " + cv.shape_str());
        Tensor y = av;
        for (int i = 0; i < y.rows; ++i)
            for (int j = 0; j < y.cols; ++j) y(i, j) += cv(i, 0);
        return binary(std::move(y), a, c, [](Tape& t, Var a, Var c, const Tensor& dy) {
            t.accum(a, dy);
            if (t.requires_grad(c)) {
                Tensor dc(dy.rows, 1);
                for (int i = 0; i < dy.rows; ++i)
                    for (int j = 0; j < dy.cols; ++j) dc(i, 0) += dy(i, j);
                t.accum(c, dc);
            }
        });
    }

    // y = a * s with s a 1x1 variable (trainable scalar broadcast)
    Var mul_scalar(Var a, Var s) {
        const Tensor& sv = val(s);
        if (sv.rows != 1 || sv.cols != 1) throw shape_error("mul_scalar: scalar operand is " + sv.shape_str());
        Tensor y = val(a);
        for (double& x : y.v) x *= sv.v[0];
        return binary(std::move(y), a, s, [](Tape& t, Var a, Var s, const Tensor& dy) {
            if (t.requires_grad(a)) t.accum_scaled(a, dy, t.val(s).v[0]);
            if (t.requires_grad(s)) {
                const Tensor& av = t.val(a);
                double g = 0.0;
                for (std::size_t i = 0; i < dy.size(); ++i) g += dy.v[i] * av.v[i];
                t.accum(s, Tensor(1, 1, {g}));
            }
        });
    }

    // y = a + s with s a 1x1 variable
    Var add_scalar_var(Var a, Var s) {
        const Tensor& sv = val(s);
        if (sv.rows != 1 || sv.cols != 1)
            throw shape_error("add_scalar_var: scalar operand is " + sv.shape_str());
        Tensor y = val(a);
        for (double& x : y.v) x += sv.v[0];
        return binary(std::move(y), a, s, [](Tape& t, Var a, Var s, const Tensor& dy) {
            t.accum(a, dy);
            if (t.requires_grad(s)) {
                double g = 0.0;
                for (double x : dy.v) g += x;
                t.accum(s, Tensor(1, 1, {g}));
            }
        });
    }

    Var scale(Var a, double k) {
        Tensor y = val(a);
        for (double& x : y.v) x *= k;
        return unary(std::move(y), a, [k](Tape& t, Var a, Var, const Tensor& dy) {
            t.accum_scaled(a, dy, k);
        });
    }

    Var add_const(Var a, double k) {
        Tensor y = val(a);
        for (double& x : y.v) x += k;
        return unary(std::move(y), a, [](Tape& t, Var a, Var, const Tensor& dy) { t.accum(a, dy); });
    }

    // ----------------------------- linear algebra -----------------------------

    Var matmul(Var a, Var b) {
        Tensor y = matmul_raw(val(a), val(b));
        return binary(std::move(y), a, b, [](Tape& t, Var a, Var b, const Tensor& dy) {
            if (t.requires_grad(a)) t.accum(a, matmul_nt_raw(dy, t.val(b)));
            if (t.requires_grad(b)) t.accum(b, matmul_tn_raw(t.val(a), dy));
        });
    }

    // y = a * b^T
    Var matmul_nt(Var a, Var b) {
        Tensor y = matmul_nt_raw(val(a), val(b));
        return binary(std::move(y), a, b, [](Tape& t, Var a, Var b, const Tensor& dy) {
            if (t.requires_grad(a)) t.accum(a, matmul_raw(dy, t.val(b)));
            if (t.requires_grad(b)) t.accum(b, matmul_tn_raw(dy, t.val(a)));
        });
    }

    Var transpose(Var a) {
        Tensor y = transpose_raw(val(a));
        return unary(std::move(y), a, [](Tape& t, Var a, Var, const Tensor& dy) {
            if (t.requires_grad(a)) t.accum(a, transpose_raw(dy));
        });
    }

    // y = S * a, S constant
    Var spmm(std::shared_ptr<const SparseMatrix> s, Var a) {
        Tensor y = s->apply(val(a));
        auto st = std::make_shared<SparseMatrix>(s->transposed());
        return unary(std::move(y), a, [st](Tape& t, Var a, Var, const Tensor& dy) {
            if (t.requires_grad(a)) t.accum(a, st->apply(dy));
        });
    }

    // ----------------------------- elementwise -----------------------------

    Var relu(Var a) {
        Tensor y = val(a);
        for (double& x : y.v) x = x > 0.0 ? x : 0.0;
        return unary(std::move(y), a, [](Tape& t, Var a, Var self, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            Tensor da = dy;
            const Tensor& av = t.val(a);
            for (std::size_t i = 0; i < da.size(); ++i)
                if (av.v[i] <= 0.0) da.v[i] = 0.0;
            t.accum(a, da);
            (void)self;
        });
    }

    Var tanh_(Var a) {
        Tensor y = val(a);
        for (double& x : y.v) x = std::tanh(x);
        return unary(std::move(y), a, [](Tape& t, Var a, Var self, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            Tensor da = dy;
            const Tensor& yv = t.val(self);
            for (std::size_t i = 0; i < da.size(); ++i) da.v[i] *= 1.0 - yv.v[i] * yv.v[i];
            t.accum(a, da);
        });
    }

    Var sigmoid_(Var a) {
        Tensor y = val(a);
        for (double& x : y.v) x = 1.0 / (1.0 + std::exp(-x));
        return unary(std::move(y), a, [](Tape& t, Var a, Var self, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            Tensor da = dy;
            const Tensor& yv = t.val(self);
            for (std::size_t i = 0; i < da.size(); ++i) da.v[i] *= yv.v[i] * (1.0 - yv.v[i]);
            t.accum(a, da);
        });
    }

    Var exp_(Var a) {
        Tensor y = val(a);
        for (double& x : y.v) x = std::exp(x);
        return unary(std::move(y), a, [](Tape& t, Var a, Var self, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            Tensor da = dy;
            const Tensor& yv = t.val(self);
            for (std::size_t i = 0; i < da.size(); ++i) da.v[i] *= yv.v[i];
            t.accum(a, da);
        });
    }

    // caller guarantees strictly positive input
    Var log_(Var a) {
        Tensor y = val(a);
        for (double& x : y.v) x = std::log(x);
        return unary(std::move(y), a, [](Tape& t, Var a, Var, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            Tensor da = dy;
            const Tensor& av = t.val(a);
            for (std::size_t i = 0; i < da.size(); ++i) da.v[i] /= av.v[i];
            t.accum(a, da);
        });
    }

    Var square(Var a) {
        Tensor y = val(a);
        for (double& x : y.v) x *= x;
        return unary(std::move(y), a, [](Tape& t, Var a, Var, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            Tensor da = dy;
            const Tensor& av = t.val(a);
            for (std::size_t i = 0; i < da.size(); ++i) da.v[i] *= 2.0 * av.v[i];
            t.accum(a, da);
        });
    }

    Var pow_int(Var a, int d) {
        if (d < 1) throw contract_error("pow_int: exponent must be >= 1");
        Tensor y = val(a);
        for (double& x : y.v) x = std::pow(x, d);
        return unary(std::move(y), a, [d](Tape& t, Var a, Var, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            Tensor da = dy;
            const Tensor& av = t.val(a);
            for (std::size_t i = 0; i < da.size(); ++i) da.v[i] *= d * std::pow(av.v[i], d - 1);
            t.accum(a, da);
        });
    }

    // ----------------------------- softmax family -----------------------------

    Var row_softmax(Var a) {
        Tensor y = val(a);
        softmax_rows_inplace(y);
        return unary(std::move(y), a, [](Tape& t, Var a, Var self, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            const Tensor& yv = t.val(self);
            Tensor da(dy.rows, dy.cols);
            for (int i = 0; i < dy.rows; ++i) {
                double dot = 0.0;
                for (int j = 0; j < dy.cols; ++j) dot += dy(i, j) * yv(i, j);
                for (int j = 0; j < dy.cols; ++j) da(i, j) = yv(i, j) * (dy(i, j) - dot);
            }
            t.accum(a, da);
        });
    }

    Var log_row_softmax(Var a) {
        const Tensor& av = val(a);
        Tensor y(av.rows, av.cols);
        for (int i = 0; i < av.rows; ++i) {
            double mx = av(i, 0);
            for (int j = 1; j < av.cols; ++j) mx = std::max(mx, av(i, j));
            double s = 0.0;
            for (int j = 0; j < av.cols; ++j) s += std::exp(av(i, j) - mx);
            const double lse = mx + std::log(s);
            for (int j = 0; j < av.cols; ++j) y(i, j) = av(i, j) - lse;
        }
        return unary(std::move(y), a, [](Tape& t, Var a, Var self, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            const Tensor& yv = t.val(self);
            Tensor da(dy.rows, dy.cols);
            for (int i = 0; i < dy.rows; ++i) {
                double rowsum = 0.0;
                for (int j = 0; j < dy.cols; ++j) rowsum += dy(i, j);
                for (int j = 0; j < dy.cols; ++j) da(i, j) = dy(i, j) - std::exp(yv(i, j)) * rowsum;
            }
            t.accum(a, da);
        });
    }

    // ----------------------------- reductions -----------------------------

    Var sum(Var a) {
        double s = 0.0;
        for (double x : val(a).v) s += x;
        return unary(Tensor(1, 1, {s}), a, [](Tape& t, Var a, Var, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            Tensor da(t.val(a).rows, t.val(a).cols, dy.v[0]);
            t.accum(a, da);
        });
    }

    Var mean(Var a) {
        const std::size_t n = val(a).size();
        if (n == 0) throw contract_error("mean: empty tensor");
        double s = 0.0;
        for (double x : val(a).v) s += x;
        return unary(Tensor(1, 1, {s / static_cast<double>(n)}), a,
                     [n](Tape& t, Var a, Var, const Tensor& dy) {
                         if (!t.requires_grad(a)) return;
                         Tensor da(t.val(a).rows, t.val(a).cols, dy.v[0] / static_cast<double>(n));
                         t.accum(a, da);
                     });
    }

    Var rowsum(Var a) {
        const Tensor& av = val(a);
        Tensor y(av.rows, 1);
        for (int i = 0; i < av.rows; ++i)
            for (int j = 0; j < av.cols; ++j) y(i, 0) += av(i, j);
        return unary(std::move(y), a, [](Tape& t, Var a, Var, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            const Tensor& av = t.val(a);
            Tensor da(av.rows, av.cols);
            for (int i = 0; i < av.rows; ++i)
                for (int j = 0; j < av.cols; ++j) da(i, j) = dy(i, 0);
            t.accum(a, da);
        });
    }

    // D[i][j] = |h_i - h_j|^2 over rows of h. Evaluated so the result is
    // bitwise symmetric with an exactly zero diagonal.
    Var pairwise_sqdist(Var h) {
        const Tensor& hv = val(h);
        const int m = hv.rows, c = hv.cols;
        Tensor y(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = i + 1; j < m; ++j) {
                double d2 = 0.0;
                for (int k = 0; k < c; ++k) {
                    const double d = hv(i, k) - hv(j, k);
                    d2 += d * d;
                }
                y(i, j) = y(j, i) = d2;
            }
        return unary(std::move(y), h, [](Tape& t, Var h, Var self, const Tensor& dy) {
            if (!t.requires_grad(h)) return;
            const Tensor& hv = t.val(h);
            const int m = hv.rows, c = hv.cols;
            Tensor dh(m, c);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    if (i == j) continue;
                    const double w = dy(i, j) + dy(j, i);
                    if (w == 0.0) continue;
                    for (int k = 0; k < c; ++k) dh(i, k) += 2.0 * w * (hv(i, k) - hv(j, k));
                }
            t.accum(h, dh);
            (void)self;
        });
    }

    // ----------------------------- structure -----------------------------

    Var concat_cols(Var a, Var b) {
        const Tensor& av = val(a);
        const Tensor& bv = val(b);
        if (av.rows != bv.rows)
            throw shape_error("concat_cols: row mismatch " + av.shape_str() + " vs " + bv.shape_str());
        Tensor y(av.rows, av.cols + bv.cols);
        for (int i = 0; i < av.rows; ++i) {
            for (int j = 0; j < av.cols; ++j) y(i, j) = av(i, j);
            for (int j = 0; j < bv.cols; ++j) y(i, av.cols + j) = bv(i, j);
        }
        return binary(std::move(y), a, b, [](Tape& t, Var a, Var b, const Tensor& dy) {
            const int ac = t.val(a).cols;
            if (t.requires_grad(a)) {
                Tensor da(dy.rows, ac);
                for (int i = 0; i < dy.rows; ++i)
                    for (int j = 0; j < ac; ++j) da(i, j) = dy(i, j);
                t.accum(a, da);
            }
            if (t.requires_grad(b)) {
                const int bc = t.val(b).cols;
                Tensor db(dy.rows, bc);
                for (int i = 0; i < dy.rows; ++i)
                    for (int j = 0; j < bc; ++j) db(i, j) = dy(i, ac + j);
                t.accum(b, db);
            }
        });
    }

    Var gather_rows(Var a, std::vector<int> ids) {
        const Tensor& av = val(a);
        Tensor y(static_cast<int>(ids.size()), av.cols);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (ids[i] < 0 || ids[i] >= av.rows) throw contract_error("gather_rows: id out of range");
            for (int j = 0; j < av.cols; ++j) y(static_cast<int>(i), j) = av(ids[i], j);
        }
        auto ids_ptr = std::make_shared<std::vector<int>>(std::move(ids));
        return unary(std::move(y), a, [ids_ptr](Tape& t, Var a, Var, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            const Tensor& av = t.val(a);
            Tensor da(av.rows, av.cols);
            for (std::size_t i = 0; i < ids_ptr->size(); ++i)
                for (int j = 0; j < av.cols; ++j) da((*ids_ptr)[i], j) += dy(static_cast<int>(i), j);
            t.accum(a, da);
        });
    }

    // Inverted dropout: scales kept entries by 1/keep at train time so
    // eval mode is the identity.
    Var dropout(Var a, double rate, Rng& rng, bool train) {
        if (rate < 0.0 || rate >= 1.0) throw contract_error("dropout: rate must be in [0,1)");
        if (!train || rate == 0.0) {
            return unary(Tensor(val(a)), a, [](Tape& t, Var a, Var, const Tensor& dy) { t.accum(a, dy); });
        }
        const double keep = 1.0 - rate;
        Tensor y = val(a);
        auto mask = std::make_shared<std::vector<double>>(y.size());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double m = rng.uniform01() < keep ? 1.0 / keep : 0.0;
            (*mask)[i] = m;
            y.v[i] *= m;
        }
        return unary(std::move(y), a, [mask](Tape& t, Var a, Var, const Tensor& dy) {
            if (!t.requires_grad(a)) return;
            Tensor da = dy;
            for (std::size_t i = 0; i < da.size(); ++i) da.v[i] *= (*mask)[i];
            t.accum(a, da);
        });
    }

    // Batch normalization over the row (node) dimension, one statistic per
    // column. Train mode uses batch statistics and updates the running ones.
    Var batchnorm(Var x, Var gamma, Var beta, BatchNormState& state, bool train) {
        const Tensor& xv = val(x);
        const int m = xv.rows, c = xv.cols;
        if (m < 1) throw contract_error("batchnorm: empty batch");
        const Tensor& gv = val(gamma);
        const Tensor& bv = val(beta);
        if (gv.rows != 1 || gv.cols != c || bv.rows != 1 || bv.cols != c)
            throw shape_error("batchnorm: affine params must be 1x" + std::to_string(c));
        state.ensure(c);

        auto mean_used = std::make_shared<Tensor>(1, c);
        auto invstd = std::make_shared<Tensor>(1, c);
        if (train) {
            for (int j = 0; j < c; ++j) {
                double mu = 0.0;
                for (int i = 0; i < m; ++i) mu += xv(i, j);
                mu /= m;
                double var = 0.0;
                for (int i = 0; i < m; ++i) {
                    const double d = xv(i, j) - mu;
                    var += d * d;
                }
                var /= m;
                (*mean_used)(0, j) = mu;
                (*invstd)(0, j) = 1.0 / std::sqrt(var + state.eps);
                state.running_mean(0, j) =
                    (1.0 - state.momentum) * state.running_mean(0, j) + state.momentum * mu;
                state.running_var(0, j) =
                    (1.0 - state.momentum) * state.running_var(0, j) + state.momentum * var;
            }
        } else {
            for (int j = 0; j < c; ++j) {
                (*mean_used)(0, j) = state.running_mean(0, j);
                (*invstd)(0, j) = 1.0 / std::sqrt(state.running_var(0, j) + state.eps);
            }
        }

        auto xhat = std::make_shared<Tensor>(m, c);
        Tensor y(m, c);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < c; ++j) {
                const double h = (xv(i, j) - (*mean_used)(0, j)) * (*invstd)(0, j);
                (*xhat)(i, j) = h;
                y(i, j) = gv(0, j) * h + bv(0, j);
            }

        Var out = push(std::move(y), requires_grad(x) || requires_grad(gamma) || requires_grad(beta),
                       [x, gamma, beta, xhat, invstd, train, m](Tape& t, Var self) {
                           const Tensor& dy = t.node(self).grad;
                           const Tensor& gv = t.val(gamma);
                           const int c = dy.cols;
                           if (t.requires_grad(gamma)) {
                               Tensor dg(1, c);
                               for (int i = 0; i < m; ++i)
                                   for (int j = 0; j < c; ++j) dg(0, j) += dy(i, j) * (*xhat)(i, j);
                               t.accum(gamma, dg);
                           }
                           if (t.requires_grad(beta)) {
                               Tensor db(1, c);
                               for (int i = 0; i < m; ++i)
                                   for (int j = 0; j < c; ++j) db(0, j) += dy(i, j);
                               t.accum(beta, db);
                           }
                           if (!t.requires_grad(x)) return;
                           Tensor dx(m, c);
                           if (train) {
                               for (int j = 0; j < c; ++j) {
                                   double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                                   for (int i = 0; i < m; ++i) {
                                       const double dxh = dy(i, j) * gv(0, j);
                                       sum_dxhat += dxh;
                                       sum_dxhat_xhat += dxh * (*xhat)(i, j);
                                   }
                                   for (int i = 0; i < m; ++i) {
                                       const double dxh = dy(i, j) * gv(0, j);
                                       dx(i, j) = ((*invstd)(0, j) / m) *
                                                  (m * dxh - sum_dxhat - (*xhat)(i, j) * sum_dxhat_xhat);
                                   }
                               }
                           } else {
                               for (int i = 0; i < m; ++i)
                                   for (int j = 0; j < c; ++j)
                                       dx(i, j) = dy(i, j) * gv(0, j) * (*invstd)(0, j);
                           }
                           t.accum(x, dx);
                       });
        return out;
    }

    // Mean negative log-likelihood over rows: labels[i] indexes into row i
    // of log-probabilities.
    Var nll_rows(Var logp, std::vector<int> labels) {
        const Tensor& lp = val(logp);
        if (static_cast<int>(labels.size()) != lp.rows)
            throw shape_error("nll_rows: " + std::to_string(labels.size()) + " labels for " +
                              lp.shape_str() + " log-probs");
        if (lp.rows == 0) throw contract_error("nll_rows: empty batch");
        double s = 0.0;
        for (int i = 0; i < lp.rows; ++i) {
            if (labels[i] < 0 || labels[i] >= lp.cols) throw contract_error("nll_rows: label out of range");
            s -= lp(i, labels[i]);
        }
        const int m = lp.rows;
        auto lab = std::make_shared<std::vector<int>>(std::move(labels));
        return unary(Tensor(1, 1, {s / m}), logp, [lab, m](Tape& t, Var logp, Var, const Tensor& dy) {
            if (!t.requires_grad(logp)) return;
            const Tensor& lp = t.val(logp);
            Tensor da(lp.rows, lp.cols);
            for (int i = 0; i < m; ++i) da(i, (*lab)[i]) = -dy.v[0] / m;
            t.accum(logp, da);
        });
    }

    // ----------------------------- backward -----------------------------

    void backward(Var loss) {
        const Tensor& lv = val(loss);
        if (lv.rows != 1 || lv.cols != 1)
            throw contract_error("backward: loss must be scalar, got " + lv.shape_str());
        Node& ln = nodes_[loss.id];
        if (!ln.requires_grad)
            throw contract_error("backward: loss does not depend on any gradient-tracked leaf");
        ln.grad.v[0] = 1.0;
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (n.requires_grad && n.back) n.back(*this, Var{i});
        }
    }

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        Tensor grad;
        bool requires_grad = false;
        std::function<void(Tape&, Var)> back;
    };

    std::vector<Node> nodes_;

    const Node& node(Var x) const {
        if (!x.valid() || x.id >= static_cast<int>(nodes_.size()))
            throw contract_error("Tape: invalid Var handle");
        return nodes_[x.id];
    }
    Node& node(Var x) { return const_cast<Node&>(static_cast<const Tape*>(this)->node(x)); }

    Var push(Tensor value, bool requires_grad, std::function<void(Tape&, Var)> back) {
        Node n;
        if (requires_grad) n.grad = Tensor(value.rows, value.cols);
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.back = std::move(back);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    template <class F>
    Var unary(Tensor y, Var a, F&& f) {
        const bool rg = requires_grad(a);
        if (!rg) return push(std::move(y), false, {});
        return push(std::move(y), true, [a, f = std::forward<F>(f)](Tape& t, Var self) {
            f(t, a, self, t.node(self).grad);
        });
    }

    template <class F>
    Var binary(Tensor y, Var a, Var b, F&& f) {
        const bool rg = requires_grad(a) || requires_grad(b);
        if (!rg) return push(std::move(y), false, {});
        return push(std::move(y), true, [a, b, f = std::forward<F>(f)](Tape& t, Var self) {
            f(t, a, b, t.node(self).grad);
        });
    }

    void accum(Var x, const Tensor& d) {
        Node& n = node(x);
        if (!n.requires_grad) return;
        check_same_shape(n.grad, d, "grad accumulate");
        for (std::size_t i = 0; i < d.size(); ++i) n.grad.v[i] += d.v[i];
    }

    void accum_scaled(Var x, const Tensor& d, double k) {
        Node& n = node(x);
        if (!n.requires_grad) return;
        check_same_shape(n.grad, d, "grad accumulate");
        for (std::size_t i = 0; i < d.size(); ++i) n.grad.v[i] += k * d.v[i];
    }

    static void softmax_rows_inplace(Tensor& t) {
        for (int i = 0; i < t.rows; ++i) {
            double mx = t(i, 0);
            for (int j = 1; j < t.cols; ++j) mx = std::max(mx, t(i, j));
            double s = 0.0;
            for (int j = 0; j < t.cols; ++j) {
                t(i, j) = std::exp(t(i, j) - mx);
                s += t(i, j);
            }
            for (int j = 0; j < t.cols; ++j) t(i, j) /= s;
        }
    }
};

}  // namespace kmp
