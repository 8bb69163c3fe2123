#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kmp/data_io.hpp"
#include "kmp/distill.hpp"
#include "kmp/eval.hpp"
#include "kmp/graph.hpp"
#include "kmp/pe.hpp"

namespace kmp {

enum class Method { mlp, glnn, kmp, kmp_pe };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::mlp: return "mlp";
        case Method::glnn: return "glnn";
        case Method::kmp: return "kmp";
        case Method::kmp_pe: return "kmp+pe";
    }
    return "?";
}

inline Method method_from(const std::string& s) {
    if (s == "mlp") return Method::mlp;
    if (s == "glnn") return Method::glnn;
    if (s == "kmp") return Method::kmp;
    if (s == "kmp+pe" || s == "kmp_pe" || s == "kmppe") return Method::kmp_pe;
    throw config_error("unknown method '" + s + "' (expected mlp|glnn|kmp|kmp+pe)");
}

struct ExperimentSetup {
    SplitSpec::Mode setting = SplitSpec::Mode::transductive;
    ModelKind teacher_kind = ModelKind::gcn;
    TeacherConfig teacher_cfg = TeacherConfig::defaults(ModelKind::gcn);
    DistillConfig distill;
    double noise_fraction = 0.0;
    int labeled_per_class = 20;
    int validation_count = 30;
    double inductive_holdout = 0.2;
};

struct MethodOutcome {
    double test_acc = 0.0;
    double val_acc = 0.0;
    int epochs = 0;
    double seconds = 0.0;
};

// One (dataset, setup, seed) run. Computes the split, the inductive
// subgraph, the teacher, and positional encodings at most once each, so
// several methods can be scored against the same state.
class RunContext {
public:
    RunContext(const DatasetBundle& bundle, const ExperimentSetup& setup, std::uint64_t seed)
        : setup_(setup), seed_(seed) {
        graph_full_ = bundle.graph;  // private copy; features may be noised
        if (setup.noise_fraction > 0.0)
            graph_full_.features = add_feature_noise(graph_full_.features, setup.noise_fraction, seed);
        split_full_ = make_split(graph_full_, setup.setting, seed, setup.labeled_per_class,
                                 setup.validation_count, setup.inductive_holdout);
        if (setup.setting == SplitSpec::Mode::inductive) {
            sub_ = induced_subgraph(graph_full_, split_full_.observed);
            split_work_.mode = split_full_.mode;
            auto remap_ids = [&](const std::vector<int>& ids) {
                std::vector<int> out;
                out.reserve(ids.size());
                for (int id : ids) {
                    if (sub_->remap[id] < 0)
                        throw contract_error("RunContext: stage-II id refers to unobserved node");
                    out.push_back(sub_->remap[id]);
                }
                return out;
            };
            split_work_.train_labeled = remap_ids(split_full_.train_labeled);
            split_work_.train_soft = remap_ids(split_full_.train_soft);
            split_work_.validation = remap_ids(split_full_.validation);
        } else {
            split_work_ = split_full_;
        }
    }

    const Graph& work_graph() const { return sub_ ? sub_->graph : graph_full_; }
    const Graph& full_graph() const { return graph_full_; }
    const SplitSpec& split_full() const { return split_full_; }
    const SplitSpec& split_work() const { return split_work_; }

    // Original-graph ids whose features/structure are visible in stage II.
    std::vector<int> stage2_visible_ids() const {
        if (!sub_) {
            std::vector<int> all(graph_full_.n);
            for (int i = 0; i < graph_full_.n; ++i) all[i] = i;
            return all;
        }
        return sub_->original;
    }

    // Inductive invariant: no test (unobserved) node is visible to stage II.
    bool audit_clean() const {
        if (!sub_) return true;
        std::vector<char> visible(graph_full_.n, 0);
        for (int id : sub_->original) visible[id] = 1;
        for (int id : split_full_.test)
            if (visible[id]) return false;
        return static_cast<int>(sub_->original.size() + split_full_.test.size()) == graph_full_.n;
    }

    const StageResult& teacher() {
        if (!teacher_) {
            TeacherConfig cfg = setup_.teacher_cfg;
            cfg.kind = setup_.teacher_kind;
            teacher_ = stage1_pretrain(work_graph(), cfg, split_work_, seed_);
        }
        return *teacher_;
    }

    void set_teacher(ModelParams params, double val_acc) {
        StageResult r;
        r.model = std::move(params);
        r.best_val_acc = val_acc;
        teacher_ = std::move(r);
    }

    // PE over the stage-II graph (what the student trains against).
    const PositionalEncoding& pe_work(int k) {
        if (!pe_work_ || pe_work_->k != k) pe_work_ = compute_pe(work_graph(), k);
        return *pe_work_;
    }

    // Install a precomputed PE (cache hit); must match the work graph.
    void set_pe_work(PositionalEncoding pe) {
        if (pe.vectors.rows != work_graph().n)
            throw contract_error("set_pe_work: PE rows " + std::to_string(pe.vectors.rows) +
                                 " do not match graph n=" + std::to_string(work_graph().n));
        pe_work_ = std::move(pe);
    }

    // PE recomputed over the full graph for stage-III inference; in the
    // transductive setting this is the same decomposition.
    const PositionalEncoding& pe_full(int k) {
        if (!sub_) return pe_work(k);
        if (!pe_full_ || pe_full_->k != k) pe_full_ = compute_pe(graph_full_, k);
        return *pe_full_;
    }

    double teacher_test_accuracy() {
        const ModelParams& params = teacher().model;
        auto prop = propagation_for(params.kind, graph_full_);
        const ForwardTrace tr = forward_eval(params, prop.get(), graph_full_.features);
        return subset_accuracy(tr.logits, graph_full_.labels, split_full_.test);
    }

    MethodOutcome run_method(Method m) {
        const auto t0 = std::chrono::steady_clock::now();
        MethodOutcome out;
        if (m == Method::mlp) {
            TeacherConfig cfg = TeacherConfig::defaults(ModelKind::mlp);
            cfg.hidden_dim = setup_.teacher_cfg.hidden_dim;
            const StageResult r = stage1_pretrain(work_graph(), cfg, split_work_, seed_);
            out.val_acc = r.best_val_acc;
            out.epochs = r.epochs_run;
            const ForwardTrace tr = forward_eval(r.model, nullptr, graph_full_.features);
            out.test_acc = subset_accuracy(tr.logits, graph_full_.labels, split_full_.test);
        } else {
            out = run_distill_full(method_config(m)).outcome;
        }
        out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return out;
    }

    struct DistillRun {
        DistillResult result;
        MethodOutcome outcome;
    };

    // Distill with an explicit config (sweeps, kernel selection); reuses
    // the cached teacher and returns the trained student with its scores.
    DistillRun run_distill_full(const DistillConfig& cfg_in) {
        const auto t0 = std::chrono::steady_clock::now();
        DistillConfig cfg = cfg_in;
        cfg.seed = seed_;
        const PositionalEncoding* pe = nullptr;
        if (cfg.pe != PeMode::off) pe = &pe_work(cfg.pe_k);
        DistillRun run;
        run.result = stage2_distill(work_graph(), teacher().model, cfg, split_work_, pe);
        run.outcome.val_acc = run.result.best_val_acc;
        run.outcome.epochs = run.result.epochs_run;
        const PositionalEncoding* pe_inf = cfg.pe != PeMode::off ? &pe_full(cfg.pe_k) : nullptr;
        const std::vector<int> preds = stage3_infer(run.result.student, graph_full_.features, pe_inf);
        run.outcome.test_acc = accuracy(preds, graph_full_.labels, split_full_.test);
        run.outcome.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return run;
    }

    MethodOutcome run_distill(const DistillConfig& cfg_in) { return run_distill_full(cfg_in).outcome; }

    const DistillResult distill_raw(const DistillConfig& cfg_in) {
        DistillConfig cfg = cfg_in;
        cfg.seed = seed_;
        const PositionalEncoding* pe = nullptr;
        if (cfg.pe != PeMode::off) pe = &pe_work(cfg.pe_k);
        return stage2_distill(work_graph(), teacher().model, cfg, split_work_, pe);
    }

    // Apply the method's config overrides (glnn: gamma 0, no PE; kmp: no
    // PE; kmp+pe: concat fusion unless a mode was chosen explicitly).
    DistillConfig method_config(Method m) const {
        DistillConfig cfg = setup_.distill;
        switch (m) {
            case Method::glnn:
                cfg.gamma = 0.0;
                cfg.pe = PeMode::off;
                break;
            case Method::kmp:
                cfg.pe = PeMode::off;
                break;
            case Method::kmp_pe:
                if (cfg.pe == PeMode::off) cfg.pe = PeMode::concat;
                break;
            case Method::mlp:
                break;
        }
        return cfg;
    }

private:
    ExperimentSetup setup_;
    std::uint64_t seed_;
    Graph graph_full_;
    SplitSpec split_full_, split_work_;
    std::optional<InducedSubgraph> sub_;
    std::optional<StageResult> teacher_;
    std::optional<PositionalEncoding> pe_work_, pe_full_;
};

inline const char* setting_name(SplitSpec::Mode m) {
    return m == SplitSpec::Mode::transductive ? "trans" : "induc";
}

}  // namespace kmp
