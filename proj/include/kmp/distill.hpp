#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kmp/adam.hpp"
#include "kmp/autodiff.hpp"
#include "kmp/graph.hpp"
#include "kmp/kernels.hpp"
#include "kmp/models.hpp"
#include "kmp/pe.hpp"

namespace kmp {

// ----------------------------- losses -----------------------------

// Mean over rows of sum_i p_i log(p_i / q_i), p the teacher rows. q is
// clamped at 1e-12 before the log.
inline double kl_divergence(const Tensor& p, const Tensor& q) {
    check_same_shape(p, q, "kl_divergence");
    if (p.rows == 0) throw contract_error("kl_divergence: empty input");
    double acc = 0.0;
    for (int i = 0; i < p.rows; ++i)
        for (int j = 0; j < p.cols; ++j) {
            const double pi = p(i, j);
            const double qi = q(i, j);
            if (pi < 0.0 || qi < 0.0) throw contract_error("kl_divergence: negative probability entry");
            if (pi > 0.0) acc += pi * std::log(pi / std::max(qi, 1e-12));
        }
    return acc / p.rows;
}

// Teacher probability rows at temperature tau.
inline Tensor soft_targets(const Tensor& logits, double tau) {
    if (tau <= 0.0) throw contract_error("soft_targets: temperature must be > 0");
    Tensor p(logits.rows, logits.cols);
    for (int i = 0; i < logits.rows; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < logits.cols; ++j) mx = std::max(mx, logits(i, j) / tau);
        double s = 0.0;
        for (int j = 0; j < logits.cols; ++j) {
            p(i, j) = std::exp(logits(i, j) / tau - mx);
            s += p(i, j);
        }
        for (int j = 0; j < logits.cols; ++j) p(i, j) /= s;
    }
    return p;
}

// KL(P || softmax(logits / tau)) on the tape, P constant, mean over rows.
// Includes the constant entropy term so the value is a true KL (zero iff
// the distributions agree).
inline Var kl_soft_loss(Tape& t, Var student_logits, const Tensor& p_rows, double tau) {
    const Tensor& lv = t.val(student_logits);
    check_same_shape(lv, p_rows, "kl_soft_loss");
    Var logq = t.log_row_softmax(t.scale(student_logits, 1.0 / tau));
    Var p = t.leaf(p_rows, false);
    Var cross = t.mean(t.rowsum(t.mul(p, logq)));  // (1/m) sum p log q
    double entropy = 0.0;                          // (1/m) sum p log p
    for (int i = 0; i < p_rows.rows; ++i)
        for (int j = 0; j < p_rows.cols; ++j)
            if (p_rows(i, j) > 0.0) entropy += p_rows(i, j) * std::log(p_rows(i, j));
    entropy /= p_rows.rows;
    return t.add_const(t.scale(cross, -1.0), entropy);
}

// L_out = theta * L_truth + (1 - theta) * L_soft. The soft term is scaled
// by tau^2 so its gradient magnitude stays temperature-invariant. Either
// term is dropped when its node set is empty; an empty labeled set with
// theta > 0 is a contract violation.
inline Var output_loss(Tape& t, Var batch_logits, const std::vector<int>& labeled_pos,
                       const std::vector<int>& labeled_classes, const std::vector<int>& soft_pos,
                       const Tensor& soft_rows, double theta, double tau) {
    if (theta < 0.0 || theta > 1.0) throw contract_error("output_loss: theta outside [0,1]");
    if (labeled_pos.empty() && theta > 0.0)
        throw contract_error("output_loss: empty labeled set with theta > 0");
    std::optional<Var> loss;
    if (!labeled_pos.empty() && theta > 0.0) {
        Var lp = t.log_row_softmax(t.gather_rows(batch_logits, labeled_pos));
        loss = t.scale(t.nll_rows(lp, labeled_classes), theta);
    }
    if (!soft_pos.empty() && theta < 1.0) {
        Var kl = kl_soft_loss(t, t.gather_rows(batch_logits, soft_pos), soft_rows, tau);
        Var soft = t.scale(kl, (1.0 - theta) * tau * tau);
        loss = loss ? t.add(*loss, soft) : soft;
    }
    if (!loss) return t.leaf(Tensor(1, 1), true);  // both sets empty: zero loss
    return *loss;
}

// L_total = L_out + (gamma / K) * sum_l dis(Mat_s^l, Mat_t^l)
inline Var total_loss(Tape& t, Var out_loss, const std::vector<Var>& layer_distances, double gamma) {
    if (gamma < 0.0) throw contract_error("total_loss: gamma must be >= 0");
    if (gamma == 0.0 || layer_distances.empty()) return out_loss;
    Var acc = layer_distances[0];
    for (std::size_t l = 1; l < layer_distances.size(); ++l) acc = t.add(acc, layer_distances[l]);
    return t.add(out_loss, t.scale(acc, gamma / static_cast<double>(layer_distances.size())));
}

// ----------------------------- training scaffolding -----------------------------

struct EarlyStopper {
    int patience = 50;
    double best = -std::numeric_limits<double>::infinity();
    int best_epoch = -1;
    int since_best = 0;

    // returns true when `score` improves on the best seen so far
    bool observe(double score, int epoch) {
        if (score > best) {
            best = score;
            best_epoch = epoch;
            since_best = 0;
            return true;
        }
        ++since_best;
        return false;
    }
    bool should_stop() const { return since_best >= patience; }
};

struct TeacherConfig {
    ModelKind kind = ModelKind::gcn;
    int hidden_dim = 64;
    int num_layers = 2;
    double dropout = 0.8;
    double weight_decay = 1e-3;
    double lr = 0.01;
    NormKind norm = NormKind::batch;
    int max_epochs = 1000;
    int patience = 50;

    static TeacherConfig defaults(ModelKind kind) {
        TeacherConfig c;
        c.kind = kind;
        switch (kind) {
            case ModelKind::gcn:
                c.hidden_dim = 64;
                c.dropout = 0.8;
                c.weight_decay = 1e-3;
                break;
            case ModelKind::sage:
                c.hidden_dim = 128;
                c.dropout = 0.0;
                c.weight_decay = 5e-4;
                break;
            case ModelKind::mlp:
                c.hidden_dim = 64;
                c.dropout = 0.1;
                c.weight_decay = 5e-4;
                c.norm = NormKind::batch;
                break;
        }
        return c;
    }
};

struct StageResult {
    ModelParams model;
    double best_val_acc = 0.0;
    int epochs_run = 0;
    std::vector<double> epoch_losses;
};

inline std::shared_ptr<const SparseMatrix> propagation_for(ModelKind kind, const Graph& g) {
    switch (kind) {
        case ModelKind::gcn: return std::make_shared<const SparseMatrix>(gcn_norm(g));
        case ModelKind::sage: return std::make_shared<const SparseMatrix>(mean_norm(g));
        case ModelKind::mlp: return nullptr;
    }
    return nullptr;
}

inline double subset_accuracy(const Tensor& logits, const std::vector<int>& labels,
                              const std::vector<int>& ids) {
    if (ids.empty()) throw contract_error("subset_accuracy: empty id set");
    int correct = 0;
    for (int id : ids) {
        int best = 0;
        for (int j = 1; j < logits.cols; ++j)
            if (logits(id, j) > logits(id, best)) best = j;
        if (best == labels[id]) ++correct;
    }
    return static_cast<double>(correct) / ids.size();
}

// Stage I: supervised training with cross-entropy on the labeled nodes,
// early stopping on validation accuracy. Also used for the plain MLP
// baseline (kind == mlp ignores the graph structure).
inline StageResult stage1_pretrain(const Graph& g, const TeacherConfig& cfg, const SplitSpec& split,
                                   std::uint64_t seed) {
    Rng init_rng = Rng(seed).fork(0x1217);
    Rng drop_rng = Rng(seed).fork(0xd307);

    auto prop = propagation_for(cfg.kind, g);
    ModelParams params = ModelParams::init(cfg.kind, g.features.cols, cfg.hidden_dim, g.num_classes,
                                           cfg.num_layers, cfg.dropout, cfg.norm, init_rng);
    Adam opt(cfg.lr, cfg.weight_decay);

    std::vector<int> labeled_classes;
    labeled_classes.reserve(split.train_labeled.size());
    for (int id : split.train_labeled) {
        if (g.labels[id] == kUnlabeled) throw contract_error("stage1_pretrain: unlabeled train node");
        labeled_classes.push_back(g.labels[id]);
    }

    StageResult out;
    EarlyStopper stopper{cfg.patience};
    ModelParams best = params;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        Tape t;
        TapedParams tp = TapedParams::bind(t, params);
        Var x = t.leaf(g.features, false);
        ForwardVars fv = model_forward(t, params, tp, prop, x, true, &drop_rng);
        Var lp = t.log_row_softmax(t.gather_rows(fv.logits, split.train_labeled));
        Var loss = t.nll_rows(lp, labeled_classes);
        const double loss_val = t.scalar(loss);
        if (!std::isfinite(loss_val))
            throw numeric_error("stage1_pretrain: loss diverged (NaN/Inf) at epoch " +
                                std::to_string(epoch) + "; lr=" + std::to_string(cfg.lr));
        out.epoch_losses.push_back(loss_val);
        t.backward(loss);

        std::vector<Tensor*> ps = params.parameters();
        std::vector<const Tensor*> gs;
        gs.reserve(ps.size());
        for (Var v : tp.all()) gs.push_back(&t.grad(v));
        opt.step(ps, gs);

        const ForwardTrace ev = forward_eval(params, prop.get(), g.features);
        const double val_acc = subset_accuracy(ev.logits, g.labels, split.validation);
        if (stopper.observe(val_acc, epoch)) best = params;
        out.epochs_run = epoch + 1;
        if (stopper.should_stop()) break;
    }
    out.model = std::move(best);
    out.best_val_acc = stopper.best;
    return out;
}

// ----------------------------- stage II -----------------------------

struct DistillConfig {
    double gamma = 0.5;
    double theta = 0.4;
    double temperature = 1.0;

    KernelKind kernel = KernelKind::gaussian;
    double gauss_T = 1.0;
    double poly_c = 1.0;
    int poly_d = 2;
    int rand_t = 8;
    SigmaKind sigma = SigmaKind::sigmoid;

    PeMode pe = PeMode::off;
    int pe_k = 8;

    int layer_match = -1;  // -1: all shared hidden layers

    double lr = 1e-3;
    double weight_decay = 0.0;
    int max_epochs = 1000;
    int patience = 50;
    int batch_size = 512;

    int student_layers = 2;
    double student_dropout = 0.1;
    NormKind student_norm = NormKind::batch;

    std::uint64_t seed = 0;

    void validate() const {
        if (gamma < 0.0) throw config_error("distill: gamma must be >= 0");
        if (theta < 0.0 || theta > 1.0) throw config_error("distill: theta must be in [0,1]");
        if (temperature <= 0.0) throw config_error("distill: temperature must be > 0");
        if (batch_size < 1) throw config_error("distill: batch size must be >= 1");
        if (pe != PeMode::off && pe_k < 1) throw config_error("distill: pe_k must be >= 1");
    }
};

// Everything needed for graph-free inference: the trained MLP plus the PE
// embedding and kernel parameters that were learned with it.
struct StudentModel {
    ModelParams mlp;
    PeMode pe = PeMode::off;
    int pe_k = 0;
    Tensor k0, b0;     // PE embedding, when pe != off
    KernelSpec kernel;  // carries trained sigmoid (a,b) / reverse W_k
    Tensor decoder;     // reverse-kernel decoder

    // Fuse plain features with (optional) PE rows outside any tape.
    Tensor fuse_input(const Tensor& features, const PositionalEncoding* pe_data) const {
        if (pe == PeMode::off) return features;
        if (!pe_data) throw contract_error("StudentModel: PE-fused model needs positional encodings");
        if (pe_data->k != pe_k)
            throw shape_error("StudentModel: PE has k=" + std::to_string(pe_data->k) + ", trained with " +
                              std::to_string(pe_k));
        if (pe_data->vectors.rows != features.rows)
            throw shape_error("StudentModel: PE rows " + std::to_string(pe_data->vectors.rows) +
                              " vs feature rows " + std::to_string(features.rows));
        Tensor x_pos = matmul_raw(pe_data->vectors, k0);
        for (int i = 0; i < x_pos.rows; ++i)
            for (int j = 0; j < x_pos.cols; ++j) x_pos(i, j) += b0(0, j);
        if (pe == PeMode::mul) {
            Tensor out = features;
            for (std::size_t i = 0; i < out.size(); ++i) out.v[i] *= x_pos.v[i];
            return out;
        }
        Tensor out(features.rows, features.cols + x_pos.cols);
        for (int i = 0; i < features.rows; ++i) {
            for (int j = 0; j < features.cols; ++j) out(i, j) = features(i, j);
            for (int j = 0; j < x_pos.cols; ++j) out(i, features.cols + j) = x_pos(i, j);
        }
        return out;
    }
};

struct DistillResult {
    StudentModel student;
    double best_val_acc = 0.0;
    int epochs_run = 0;
    std::vector<double> epoch_losses;
};

namespace detail {

struct BatchSlices {
    std::vector<int> labeled_pos, labeled_classes;
    std::vector<int> soft_pos;
    Tensor soft_rows;
};

inline BatchSlices slice_batch(const std::vector<int>& batch, const std::vector<char>& is_labeled,
                               const std::vector<int>& labels, const Tensor& soft_all) {
    BatchSlices s;
    std::vector<int> soft_ids;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        if (is_labeled[batch[i]]) {
            s.labeled_pos.push_back(static_cast<int>(i));
            s.labeled_classes.push_back(labels[batch[i]]);
        } else {
            s.soft_pos.push_back(static_cast<int>(i));
            soft_ids.push_back(batch[i]);
        }
    }
    s.soft_rows = Tensor(static_cast<int>(soft_ids.size()), soft_all.cols);
    for (std::size_t i = 0; i < soft_ids.size(); ++i)
        for (int j = 0; j < soft_all.cols; ++j)
            s.soft_rows(static_cast<int>(i), j) = soft_all(soft_ids[i], j);
    return s;
}

inline Tensor take_rows(const Tensor& src, const std::vector<int>& ids) {
    Tensor out(static_cast<int>(ids.size()), src.cols);
    for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < src.cols; ++j) out(static_cast<int>(i), j) = src(ids[i], j);
    return out;
}

}  // namespace detail

// Stage II: multitask distillation. The frozen teacher provides soft
// targets and per-layer hidden outputs; the student minimizes
// L_out + (gamma/K) sum_l dis(Mat_s, Mat_t) over minibatches of the
// training pool. With kernel == reverse, every student step is followed
// by a kernel step on the reconstruction loss (two-step optimization).
inline DistillResult stage2_distill(const Graph& g, const ModelParams& teacher, const DistillConfig& cfg,
                                    const SplitSpec& split, const PositionalEncoding* pe_data) {
    cfg.validate();
    if (cfg.pe != PeMode::off && !pe_data)
        throw contract_error("stage2_distill: pe mode set but no positional encoding supplied");
    if (split.train_labeled.empty() && cfg.theta > 0.0)
        throw contract_error("stage2_distill: empty labeled set with theta > 0");

    Rng init_rng = Rng(cfg.seed).fork(0x51);
    Rng drop_rng = Rng(cfg.seed).fork(0xd2);
    Rng shuffle_rng = Rng(cfg.seed).fork(0x5f);
    Rng kernel_rng = Rng(cfg.seed).fork(0x4e);

    // teacher outputs, captured once: parameters and norm statistics are
    // frozen, so eval-mode outputs are identical every epoch
    auto teacher_prop = propagation_for(teacher.kind, g);
    const ForwardTrace teach = forward_eval(teacher, teacher_prop.get(), g.features);
    const Tensor soft_all = soft_targets(teach.logits, cfg.temperature);

    const int feat_dim = g.features.cols;
    const int input_dim = cfg.pe == PeMode::concat ? 2 * feat_dim : feat_dim;
    const int hidden_dim = teacher.hidden_dim;  // hidden dims must match for layer matching

    StudentModel student;
    student.pe = cfg.pe;
    student.pe_k = cfg.pe == PeMode::off ? 0 : cfg.pe_k;
    student.mlp = ModelParams::init(ModelKind::mlp, input_dim, hidden_dim, g.num_classes,
                                    cfg.student_layers, cfg.student_dropout, cfg.student_norm, init_rng);
    if (cfg.pe != PeMode::off) {
        const double s = std::sqrt(6.0 / (cfg.pe_k + feat_dim));
        student.k0 = random_uniform(cfg.pe_k, feat_dim, init_rng, -s, s);
        student.b0 = Tensor(1, feat_dim, cfg.pe == PeMode::mul ? 1.0 : 0.0);
    }

    const int shared_hidden = std::min(cfg.student_layers, teacher.num_layers) - 1;
    int match_layers = cfg.layer_match < 0 ? shared_hidden : std::min(cfg.layer_match, shared_hidden);
    if (cfg.gamma > 0.0 && match_layers > 0 && hidden_dim != teacher.hidden_dim)
        throw contract_error("stage2_distill: student/teacher hidden dims differ on matched layers");

    switch (cfg.kernel) {
        case KernelKind::gaussian: student.kernel = KernelSpec::gaussian(cfg.gauss_T); break;
        case KernelKind::polynomial: student.kernel = KernelSpec::polynomial(cfg.poly_c, cfg.poly_d); break;
        case KernelKind::sigmoid: student.kernel = KernelSpec::sigmoid(); break;
        case KernelKind::randomized:
            student.kernel = KernelSpec::randomized(cfg.rand_t, hidden_dim, kernel_rng);
            break;
        case KernelKind::reverse:
            student.kernel = KernelSpec::reverse(hidden_dim, kernel_rng, cfg.sigma);
            student.decoder = random_normal(hidden_dim, input_dim, kernel_rng,
                                            1.0 / std::sqrt(static_cast<double>(hidden_dim)));
            break;
    }
    student.kernel.sigma = cfg.sigma;

    std::vector<char> is_labeled(g.n, 0);
    for (int id : split.train_labeled) is_labeled[id] = 1;
    std::vector<int> pool = split.train_labeled;
    pool.insert(pool.end(), split.train_soft.begin(), split.train_soft.end());
    if (pool.empty()) throw contract_error("stage2_distill: empty training pool");

    Adam opt_student(cfg.lr, cfg.weight_decay);
    Adam opt_kernel(cfg.lr, 0.0);

    EarlyStopper stopper{cfg.patience};
    StudentModel best = student;
    DistillResult out;

    const Tensor val_feats = detail::take_rows(g.features, split.validation);
    std::vector<int> val_labels_local(split.validation.size());
    for (std::size_t i = 0; i < split.validation.size(); ++i)
        val_labels_local[i] = g.labels[split.validation[i]];

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_rng.shuffle(pool);
        double epoch_loss = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < pool.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(pool.size(), start + cfg.batch_size);
            std::vector<int> batch(pool.begin() + start, pool.begin() + end);

            Tape t;
            TapedParams tp = TapedParams::bind(t, student.mlp);
            // sigmoid's affine projection trains with the student on
            // L_total; the reverse kernel's W_k only moves in step (b)
            TapedKernel tk = TapedKernel::bind(t, student.kernel, cfg.kernel == KernelKind::sigmoid);
            Var x_feat = t.leaf(detail::take_rows(g.features, batch), false);
            Var x_in = x_feat;
            Var k0v, b0v;
            if (cfg.pe != PeMode::off) {
                Var pe_rows = t.leaf(detail::take_rows(pe_data->vectors, batch), false);
                k0v = t.leaf(student.k0, true);
                b0v = t.leaf(student.b0, true);
                x_in = fuse_pe(t, x_feat, pe_rows, k0v, b0v, cfg.pe);
            }
            ForwardVars fv = model_forward(t, student.mlp, tp, nullptr, x_in, true, &drop_rng);

            detail::BatchSlices sl = detail::slice_batch(batch, is_labeled, g.labels, soft_all);
            Var l_out = output_loss(t, fv.logits, sl.labeled_pos, sl.labeled_classes, sl.soft_pos,
                                    sl.soft_rows, cfg.theta, cfg.temperature);

            std::vector<Var> distances;
            if (cfg.gamma > 0.0 && batch.size() >= 2) {
                for (int l = 0; l < match_layers; ++l) {
                    Var h_teacher = t.leaf(detail::take_rows(teach.hidden[l], batch), false);
                    Var mat_s = mapping_matrix(t, student.kernel, tk, fv.hidden[l]);
                    Var mat_t = mapping_matrix(t, student.kernel, tk, h_teacher);
                    distances.push_back(mapping_distance(t, mat_s, mat_t));
                }
            }
            Var loss = total_loss(t, l_out, distances, cfg.gamma);
            const double loss_val = t.scalar(loss);
            if (!std::isfinite(loss_val))
                throw numeric_error("stage2_distill: loss diverged (NaN/Inf) at epoch " +
                                    std::to_string(epoch) + ", gamma=" + std::to_string(cfg.gamma));
            epoch_loss += loss_val;
            ++batches;
            t.backward(loss);

            std::vector<Tensor*> ps = student.mlp.parameters();
            std::vector<Var> vs = tp.all();
            if (cfg.pe != PeMode::off) {
                ps.push_back(&student.k0);
                ps.push_back(&student.b0);
                vs.push_back(k0v);
                vs.push_back(b0v);
            }
            if (cfg.kernel == KernelKind::sigmoid) {
                ps.push_back(&student.kernel.sig_a);
                ps.push_back(&student.kernel.sig_b);
                vs.push_back(tk.sig_a);
                vs.push_back(tk.sig_b);
            }
            std::vector<const Tensor*> gs;
            gs.reserve(vs.size());
            for (Var v : vs) gs.push_back(&t.grad(v));
            opt_student.step(ps, gs);

            if (cfg.kernel == KernelKind::reverse && cfg.gamma > 0.0 && !fv.hidden.empty()) {
                Tape t2;
                Var w_k = t2.leaf(student.kernel.reverse_w, true);
                Var dec = t2.leaf(student.decoder, true);
                Var h_last = t2.leaf(t.val(fv.hidden.back()), false);
                Var x0 = t2.leaf(t.val(x_in), false);
                Var l_re = reconstruction_loss(t2, w_k, dec, h_last, x0, cfg.sigma);
                t2.backward(l_re);
                std::vector<Tensor*> kps{&student.kernel.reverse_w, &student.decoder};
                std::vector<const Tensor*> kgs{&t2.grad(w_k), &t2.grad(dec)};
                opt_kernel.step(kps, kgs);
            }
        }
        out.epoch_losses.push_back(batches > 0 ? epoch_loss / batches : 0.0);

        // validation on plain rows; the MLP never touches the graph here
        Tensor val_in;
        if (cfg.pe != PeMode::off) {
            PositionalEncoding pe_val;
            pe_val.k = pe_data->k;
            pe_val.vectors = detail::take_rows(pe_data->vectors, split.validation);
            pe_val.eigenvalues = pe_data->eigenvalues;
            val_in = student.fuse_input(val_feats, &pe_val);
        } else {
            val_in = val_feats;
        }
        const ForwardTrace ev = forward_eval(student.mlp, nullptr, val_in);
        int correct = 0;
        for (std::size_t i = 0; i < val_labels_local.size(); ++i) {
            int bestc = 0;
            for (int j = 1; j < ev.logits.cols; ++j)
                if (ev.logits(static_cast<int>(i), j) > ev.logits(static_cast<int>(i), bestc)) bestc = j;
            if (bestc == val_labels_local[i]) ++correct;
        }
        const double val_acc = static_cast<double>(correct) / val_labels_local.size();
        if (stopper.observe(val_acc, epoch)) best = student;
        out.epochs_run = epoch + 1;
        if (stopper.should_stop()) break;
    }

    out.student = std::move(best);
    out.best_val_acc = stopper.best;
    return out;
}

// Stage III: graph-free inference. Takes features (and PE rows when the
// student was trained with fusion); never sees an adjacency structure.
inline std::vector<int> stage3_infer(const StudentModel& student, const Tensor& features,
                                     const PositionalEncoding* pe_data = nullptr) {
    const Tensor input = student.fuse_input(features, pe_data);
    if (input.cols != student.mlp.in_dim)
        throw shape_error("stage3_infer: input dim " + std::to_string(input.cols) + " vs trained " +
                          std::to_string(student.mlp.in_dim));
    const ForwardTrace tr = forward_eval(student.mlp, nullptr, input);
    return argmax_rows(tr.logits);
}

inline Tensor stage3_probabilities(const StudentModel& student, const Tensor& features,
                                   const PositionalEncoding* pe_data = nullptr) {
    const Tensor input = student.fuse_input(features, pe_data);
    const ForwardTrace tr = forward_eval(student.mlp, nullptr, input);
    return soft_targets(tr.logits, 1.0);
}

}  // namespace kmp
