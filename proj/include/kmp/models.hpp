#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "kmp/adam.hpp"
#include "kmp/autodiff.hpp"
#include "kmp/graph.hpp"

namespace kmp {

enum class ModelKind { gcn, sage, mlp };
enum class NormKind { none, batch };

inline const char* model_kind_name(ModelKind k) {
    switch (k) {
        case ModelKind::gcn: return "gcn";
        case ModelKind::sage: return "sage";
        case ModelKind::mlp: return "mlp";
    }
    return "?";
}

inline ModelKind model_kind_from(const std::string& s) {
    if (s == "gcn") return ModelKind::gcn;
    if (s == "sage") return ModelKind::sage;
    if (s == "mlp") return ModelKind::mlp;
    throw config_error("unknown model kind '" + s + "' (expected gcn|sage|mlp)");
}

// Layered weight/bias collection for one model, including batch-norm
// affine parameters and running statistics. Hidden dims are uniform.
struct ModelParams {
    ModelKind kind = ModelKind::mlp;
    NormKind norm = NormKind::none;
    double dropout = 0.0;
    int in_dim = 0, hidden_dim = 0, out_dim = 0, num_layers = 0;

    std::vector<Tensor> W;        // gcn/mlp weight; sage self weight
    std::vector<Tensor> W_neigh;  // sage only
    std::vector<Tensor> b;
    std::vector<Tensor> bn_gamma, bn_beta;  // one per hidden layer when norm == batch
    std::vector<BatchNormState> bn_state;

    int layer_in(int l) const { return l == 0 ? in_dim : hidden_dim; }
    int layer_out(int l) const { return l == num_layers - 1 ? out_dim : hidden_dim; }

    static ModelParams init(ModelKind kind, int in_dim, int hidden_dim, int out_dim, int num_layers,
                            double dropout, NormKind norm, Rng& rng) {
        if (num_layers < 1) throw contract_error("ModelParams::init: need at least one layer");
        ModelParams p;
        p.kind = kind;
        p.norm = norm;
        p.dropout = dropout;
        p.in_dim = in_dim;
        p.hidden_dim = hidden_dim;
        p.out_dim = out_dim;
        p.num_layers = num_layers;
        for (int l = 0; l < num_layers; ++l) {
            const int fi = p.layer_in(l), fo = p.layer_out(l);
            const double s = std::sqrt(6.0 / (fi + fo));  // Glorot uniform
            p.W.push_back(random_uniform(fi, fo, rng, -s, s));
            if (kind == ModelKind::sage) p.W_neigh.push_back(random_uniform(fi, fo, rng, -s, s));
            p.b.emplace_back(1, fo);
            if (norm == NormKind::batch && l < num_layers - 1) {
                p.bn_gamma.emplace_back(1, fo, 1.0);
                p.bn_beta.emplace_back(1, fo, 0.0);
                p.bn_state.emplace_back();
            }
        }
        return p;
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        for (auto& t : W) out.push_back(&t);
        for (auto& t : W_neigh) out.push_back(&t);
        for (auto& t : b) out.push_back(&t);
        for (auto& t : bn_gamma) out.push_back(&t);
        for (auto& t : bn_beta) out.push_back(&t);
        return out;
    }
    std::vector<const Tensor*> parameters() const {
        std::vector<const Tensor*> out;
        for (auto& t : W) out.push_back(&t);
        for (auto& t : W_neigh) out.push_back(&t);
        for (auto& t : b) out.push_back(&t);
        for (auto& t : bn_gamma) out.push_back(&t);
        for (auto& t : bn_beta) out.push_back(&t);
        return out;
    }

    // order-sensitive digest of all trainable values; used to assert the
    // teacher stays frozen through stage II
    double checksum() const {
        double acc = 0.0;
        std::uint64_t mix = 0x9e3779b97f4a7c15ULL;
        for (const Tensor* t : parameters())
            for (double x : t->v) {
                mix = splitmix64(mix);
                acc += x * (1.0 + static_cast<double>(mix >> 40) * 1e-9);
            }
        return acc;
    }
};

// Per-layer hidden outputs (post-activation, before the final linear
// layer) plus logits. Plain values, detached from any tape.
struct ForwardTrace {
    Tensor logits;
    std::vector<Tensor> hidden;
};

// Same shape as ForwardTrace but on a tape.
struct ForwardVars {
    Var logits;
    std::vector<Var> hidden;
};

// Parameter leaves registered on a tape, in ModelParams::parameters() order.
struct TapedParams {
    std::vector<Var> W, W_neigh, b, bn_gamma, bn_beta;

    static TapedParams bind(Tape& t, const ModelParams& p, bool trainable = true) {
        TapedParams v;
        for (const auto& w : p.W) v.W.push_back(t.leaf(w, trainable));
        for (const auto& w : p.W_neigh) v.W_neigh.push_back(t.leaf(w, trainable));
        for (const auto& w : p.b) v.b.push_back(t.leaf(w, trainable));
        for (const auto& w : p.bn_gamma) v.bn_gamma.push_back(t.leaf(w, trainable));
        for (const auto& w : p.bn_beta) v.bn_beta.push_back(t.leaf(w, trainable));
        return v;
    }

    std::vector<Var> all() const {
        std::vector<Var> out;
        out.insert(out.end(), W.begin(), W.end());
        out.insert(out.end(), W_neigh.begin(), W_neigh.end());
        out.insert(out.end(), b.begin(), b.end());
        out.insert(out.end(), bn_gamma.begin(), bn_gamma.end());
        out.insert(out.end(), bn_beta.begin(), bn_beta.end());
        return out;
    }
};

// Shared layer stack. Per layer: dropout on the input, the kind-specific
// linear map, batch norm on hidden layers if configured, ReLU on hidden
// layers, final layer linear. `prop` is the propagation operator (Â for
// GCN, D^{-1}A for SAGE) and must be null for MLP — the MLP path never
// touches graph structure.
inline ForwardVars model_forward(Tape& t, ModelParams& p, const TapedParams& v,
                                 std::shared_ptr<const SparseMatrix> prop, Var x, bool train,
                                 Rng* dropout_rng) {
    if (p.kind == ModelKind::mlp) {
        if (prop) throw contract_error("model_forward: MLP takes no propagation operator");
    } else if (!prop) {
        throw contract_error("model_forward: GNN forward needs a propagation operator");
    }
    if (train && p.dropout > 0.0 && !dropout_rng)
        throw contract_error("model_forward: train mode with dropout needs an rng");

    ForwardVars out;
    Var h = x;
    for (int l = 0; l < p.num_layers; ++l) {
        if (train && p.dropout > 0.0) h = t.dropout(h, p.dropout, *dropout_rng, true);
        Var z;
        switch (p.kind) {
            case ModelKind::mlp:
                z = t.matmul(h, v.W[l]);
                break;
            case ModelKind::gcn:
                z = t.spmm(prop, t.matmul(h, v.W[l]));
                break;
            case ModelKind::sage: {
                Var self_part = t.matmul(h, v.W[l]);
                Var neigh_part = t.matmul(t.spmm(prop, h), v.W_neigh[l]);
                z = t.add(self_part, neigh_part);
                break;
            }
        }
        z = t.add_rowvec(z, v.b[l]);
        if (l < p.num_layers - 1) {
            if (p.norm == NormKind::batch) z = t.batchnorm(z, v.bn_gamma[l], v.bn_beta[l], p.bn_state[l], train);
            h = t.relu(z);
            out.hidden.push_back(h);
        } else {
            h = z;
        }
    }
    out.logits = h;
    return out;
}

// Eval-mode forward on plain tensors: dropout off, batch norm uses the
// running statistics, nothing recorded. Used for the frozen teacher and
// for validation/test scoring.
inline ForwardTrace forward_eval(const ModelParams& p, const SparseMatrix* prop, const Tensor& x) {
    if (p.kind == ModelKind::mlp) {
        if (prop) throw contract_error("forward_eval: MLP takes no propagation operator");
    } else if (!prop) {
        throw contract_error("forward_eval: GNN forward needs a propagation operator");
    }
    ForwardTrace out;
    Tensor h = x;
    for (int l = 0; l < p.num_layers; ++l) {
        Tensor z;
        switch (p.kind) {
            case ModelKind::mlp:
                z = matmul_raw(h, p.W[l]);
                break;
            case ModelKind::gcn:
                z = prop->apply(matmul_raw(h, p.W[l]));
                break;
            case ModelKind::sage: {
                z = matmul_raw(h, p.W[l]);
                const Tensor neigh = matmul_raw(prop->apply(h), p.W_neigh[l]);
                for (std::size_t i = 0; i < z.size(); ++i) z.v[i] += neigh.v[i];
                break;
            }
        }
        for (int i = 0; i < z.rows; ++i)
            for (int j = 0; j < z.cols; ++j) z(i, j) += p.b[l](0, j);
        if (l < p.num_layers - 1) {
            if (p.norm == NormKind::batch) {
                const BatchNormState& st = p.bn_state[l];
                if (!st.initialized) throw contract_error("forward_eval: batch norm never trained");
                for (int i = 0; i < z.rows; ++i)
                    for (int j = 0; j < z.cols; ++j) {
                        const double inv = 1.0 / std::sqrt(st.running_var(0, j) + st.eps);
                        z(i, j) = p.bn_gamma[l](0, j) * (z(i, j) - st.running_mean(0, j)) * inv +
                                  p.bn_beta[l](0, j);
                    }
            }
            for (double& val : z.v) val = val > 0.0 ? val : 0.0;
            out.hidden.push_back(z);
            h = std::move(z);
        } else {
            h = std::move(z);
        }
    }
    out.logits = std::move(h);
    return out;
}

}  // namespace kmp
