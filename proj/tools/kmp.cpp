// Command-line driver for the three-stage distillation pipeline:
// pretrain (stage I), distill (stage II + III scoring), infer (stage III),
// sweep (noise robustness / gamma sensitivity), gen-sbm (synthetic data).

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "kmp/kmp.hpp"

namespace fs = std::filesystem;
using namespace kmp;

namespace {

// Flat key=value manifest, expanded into argv before parsing so explicit
// CLI flags always win. `key=true` expands to a bare flag.
std::vector<std::string> expand_manifest(const std::vector<std::string>& args) {
    std::string manifest_path;
    std::vector<std::string> out;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--manifest" && i + 1 < args.size()) {
            manifest_path = args[i + 1];
            ++i;
            continue;
        }
        out.push_back(args[i]);
    }
    if (manifest_path.empty()) return out;

    std::ifstream is(manifest_path);
    if (!is) throw io_error("cannot open manifest: " + manifest_path);
    std::set<std::string> present(out.begin(), out.end());
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = "--" + trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "--" || present.count(key)) continue;
        if (value == "true") {
            out.push_back(key);
        } else {
            out.push_back(key);
            out.push_back(value);
        }
    }
    return out;
}

std::string resolve_dataset_dir(const std::string& spec) {
    if (fs::exists(fs::path(spec) / "features.bin")) return spec;
    if (const char* root = std::getenv("KMP_DATA_ROOT")) {
        const fs::path candidate = fs::path(root) / spec;
        if (fs::exists(candidate / "features.bin")) return candidate.string();
    }
    throw io_error("dataset '" + spec + "' not found (tried as path and under $KMP_DATA_ROOT)");
}

std::vector<std::uint64_t> make_seed_list(int seeds, const std::string& seed_list) {
    std::vector<std::uint64_t> out;
    if (!seed_list.empty()) {
        std::istringstream ss(seed_list);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
    } else {
        for (int i = 0; i < seeds; ++i) out.push_back(static_cast<std::uint64_t>(i));
    }
    if (out.empty()) throw config_error("no seeds requested");
    return out;
}

void write_manifest(const fs::path& run_dir, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream os(run_dir / "manifest.txt", std::ios::trunc);
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
}

// (config, seed) pairs already present in the metrics file; used to make
// sweep reruns skip completed work
std::set<std::string> completed_keys(const fs::path& metrics) {
    std::set<std::string> done;
    std::ifstream is(metrics);
    if (!is) return done;
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        try {
            const RunRecord r = parse_metrics_row(line);
            done.insert(r.dataset + "|" + r.teacher + "|" + r.method + "|" + r.setting + "|" +
                        std::to_string(r.seed));
        } catch (const std::exception&) {
        }
    }
    return done;
}

std::string record_key(const RunRecord& r) {
    return r.dataset + "|" + r.teacher + "|" + r.method + "|" + r.setting + "|" + std::to_string(r.seed);
}

void run_parallel(int jobs, int total, const std::function<void(int)>& fn) {
    if (jobs <= 1) {
        for (int i = 0; i < total; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::mutex err_mutex;
    std::string first_error;
    auto worker = [&]() {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= total || failed.load()) return;
            try {
                fn(i);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(jobs, total); ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failed.load()) throw std::runtime_error(first_error);
}

struct CommonOpts {
    std::string dataset;
    std::string teacher = "gcn";
    std::string setting = "trans";
    std::string out_dir = "runs/out";
    int seeds = 10;
    std::string seed_list;
    double noise = 0.0;
    int jobs = 1;

    void add_to(CLI::App* cmd, bool with_teacher = true) {
        cmd->add_option("--dataset", dataset, "dataset directory or name under $KMP_DATA_ROOT")
            ->required();
        if (with_teacher)
            cmd->add_option("--teacher", teacher, "teacher model: gcn|sage")
                ->check(CLI::IsMember({"gcn", "sage"}));
        cmd->add_option("--setting", setting, "trans|induc")->check(CLI::IsMember({"trans", "induc"}));
        cmd->add_option("--out", out_dir, "run directory for checkpoints and metrics");
        cmd->add_option("--seeds", seeds, "number of seeds (0..N-1)");
        cmd->add_option("--seed-list", seed_list, "comma-separated explicit seeds");
        cmd->add_option("--noise", noise, "feature noise fraction in [0,1]");
        cmd->add_option("--jobs", jobs, "parallel (config, seed) workers");
    }

    SplitSpec::Mode mode() const {
        return setting == "induc" ? SplitSpec::Mode::inductive : SplitSpec::Mode::transductive;
    }
    std::string setting_tag() const {
        return noise > 0.0 ? setting + ";noise=" + std::to_string(noise) : setting;
    }
};

std::string teacher_ckpt_name(const std::string& kind, const std::string& setting, double noise,
                              std::uint64_t seed) {
    std::string tag = "teacher_" + kind + "_" + setting;
    if (noise > 0.0) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "_noise%02d", static_cast<int>(noise * 100 + 0.5));
        tag += buf;
    }
    return tag + "_seed" + std::to_string(seed) + ".ckpt";
}

ExperimentSetup setup_from(const CommonOpts& common, const DistillConfig& dcfg) {
    ExperimentSetup setup;
    setup.setting = common.mode();
    setup.teacher_kind = model_kind_from(common.teacher);
    setup.teacher_cfg = TeacherConfig::defaults(setup.teacher_kind);
    setup.distill = dcfg;
    setup.noise_fraction = common.noise;
    return setup;
}

// ----------------------------- pretrain -----------------------------

int cmd_pretrain(const CommonOpts& common, const TeacherConfig& overrides, bool has_hidden,
                 bool has_dropout, bool has_lr, bool has_wd) {
    const std::string dir = resolve_dataset_dir(common.dataset);
    const DatasetBundle bundle = load_dataset(dir);
    const auto seed_values = make_seed_list(common.seeds, common.seed_list);

    fs::create_directories(common.out_dir);
    const fs::path metrics = fs::path(common.out_dir) / "metrics.csv";
    write_manifest(common.out_dir, {{"command", "pretrain"},
                                    {"dataset", bundle.name},
                                    {"teacher", common.teacher},
                                    {"setting", common.setting},
                                    {"noise", std::to_string(common.noise)},
                                    {"seeds", std::to_string(seed_values.size())}});

    run_parallel(common.jobs, static_cast<int>(seed_values.size()), [&](int i) {
        const std::uint64_t seed = seed_values[i];
        ExperimentSetup setup = setup_from(common, DistillConfig{});
        if (has_hidden) setup.teacher_cfg.hidden_dim = overrides.hidden_dim;
        if (has_dropout) setup.teacher_cfg.dropout = overrides.dropout;
        if (has_lr) setup.teacher_cfg.lr = overrides.lr;
        if (has_wd) setup.teacher_cfg.weight_decay = overrides.weight_decay;
        setup.teacher_cfg.max_epochs = overrides.max_epochs;
        setup.teacher_cfg.patience = overrides.patience;

        const auto t0 = std::chrono::steady_clock::now();
        RunContext ctx(bundle, setup, seed);
        const StageResult& teacher = ctx.teacher();
        const double test_acc = ctx.teacher_test_accuracy();
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        const fs::path ckpt = fs::path(common.out_dir) /
                              teacher_ckpt_name(common.teacher, common.setting, common.noise, seed);
        save_model(ckpt.string(), teacher.model);

        RunRecord rec{bundle.name, common.teacher,          "teacher", common.setting_tag(), seed,
                      test_acc,    teacher.best_val_acc, teacher.epochs_run > 0 ? teacher.epochs_run : 0,
                      seconds};
        rec.epochs = teacher.epochs_run;
        append_line_locked(metrics.string(), metrics_row(rec), kMetricsHeader);
        std::cout << "teacher seed " << seed << ": test " << format_mean_std(test_acc, 0).substr(0, 5)
                  << "  val " << teacher.best_val_acc << "  epochs " << teacher.epochs_run << "\n";
    });
    std::cout << "wrote " << metrics << "\n";
    return 0;
}

// ----------------------------- distill -----------------------------

struct DistillOpts {
    std::string method = "kmp";
    std::string kernel = "gaussian";
    bool select_best_kernel = false;
    std::string pe = "";
    int pe_k = 8;
    double gamma = 0.5, theta = 0.4, temperature = 1.0;
    double lr = 1e-3, weight_decay = 0.0;
    double gauss_T = 1.0, poly_c = 1.0;
    int poly_d = 2, rand_t = 8;
    int max_epochs = 1000, patience = 50, batch_size = 512;
    std::string teacher_dir;

    DistillConfig to_config() const {
        DistillConfig c;
        c.gamma = gamma;
        c.theta = theta;
        c.temperature = temperature;
        c.kernel = kernel_kind_from(kernel);
        c.gauss_T = gauss_T;
        c.poly_c = poly_c;
        c.poly_d = poly_d;
        c.rand_t = rand_t;
        c.pe_k = pe_k;
        c.lr = lr;
        c.weight_decay = weight_decay;
        c.max_epochs = max_epochs;
        c.patience = patience;
        c.batch_size = batch_size;
        if (!pe.empty()) {
            if (pe == "off") c.pe = PeMode::off;
            else if (pe == "concat") c.pe = PeMode::concat;
            else if (pe == "mul") c.pe = PeMode::mul;
            else throw config_error("unknown pe mode '" + pe + "'");
        }
        return c;
    }
};

int cmd_distill(const CommonOpts& common, const DistillOpts& opts) {
    const std::string dir = resolve_dataset_dir(common.dataset);
    const DatasetBundle bundle = load_dataset(dir);
    const auto seed_values = make_seed_list(common.seeds, common.seed_list);
    const Method method = method_from(opts.method);
    const std::string teacher_dir = opts.teacher_dir.empty() ? common.out_dir : opts.teacher_dir;

    fs::create_directories(common.out_dir);
    const fs::path metrics = fs::path(common.out_dir) / "metrics.csv";
    write_manifest(common.out_dir, {{"command", "distill"},
                                    {"dataset", bundle.name},
                                    {"teacher", common.teacher},
                                    {"setting", common.setting},
                                    {"method", opts.method},
                                    {"kernel", opts.kernel},
                                    {"gamma", std::to_string(opts.gamma)},
                                    {"theta", std::to_string(opts.theta)},
                                    {"temperature", std::to_string(opts.temperature)},
                                    {"pe", opts.pe.empty() ? "default" : opts.pe},
                                    {"pe_k", std::to_string(opts.pe_k)}});

    std::mutex report_mutex;
    std::map<std::string, int> kernel_wins;

    // Transductive PE depends only on the graph, so one decomposition
    // serves every seed; persist it so reruns skip the eigensolve too.
    const DistillConfig base_cfg = opts.to_config();
    const bool wants_pe = method == Method::kmp_pe || base_cfg.pe != PeMode::off;
    std::optional<PositionalEncoding> shared_pe;
    if (wants_pe && common.mode() == SplitSpec::Mode::transductive && method != Method::mlp) {
        const fs::path cache = fs::path(common.out_dir) /
                               ("pe_" + bundle.name + "_k" + std::to_string(base_cfg.pe_k) + ".cache");
        if (fs::exists(cache)) {
            PositionalEncoding pe = load_pe_cache(cache.string());
            if (pe.vectors.rows == bundle.graph.n && pe.k == base_cfg.pe_k) {
                shared_pe = std::move(pe);
                std::cout << "PE cache hit: " << cache << " (eigendecomposition skipped)\n";
            }
        }
        if (!shared_pe) {
            shared_pe = compute_pe(bundle.graph, base_cfg.pe_k);
            save_pe_cache(cache.string(), *shared_pe);
            std::cout << "PE cache written: " << cache << "\n";
        }
    }

    run_parallel(common.jobs, static_cast<int>(seed_values.size()), [&](int i) {
        const std::uint64_t seed = seed_values[i];
        ExperimentSetup setup = setup_from(common, opts.to_config());
        RunContext ctx(bundle, setup, seed);
        if (shared_pe) ctx.set_pe_work(*shared_pe);

        const fs::path ckpt = fs::path(teacher_dir) /
                              teacher_ckpt_name(common.teacher, common.setting, common.noise, seed);
        if (method != Method::mlp) {
            if (!fs::exists(ckpt))
                throw io_error("missing teacher checkpoint " + ckpt.string() +
                               " (run `kmp pretrain` first or pass --teacher-dir)");
            ctx.set_teacher(load_model(ckpt.string()), 0.0);
        }

        std::string chosen_kernel = opts.kernel;
        MethodOutcome outcome;
        std::optional<StudentModel> trained;
        const auto t0 = std::chrono::steady_clock::now();
        if (method == Method::mlp) {
            outcome = ctx.run_method(method);
        } else if (opts.select_best_kernel && (method == Method::kmp || method == Method::kmp_pe)) {
            double best_val = -1.0;
            for (KernelKind k : {KernelKind::sigmoid, KernelKind::randomized, KernelKind::polynomial,
                                 KernelKind::gaussian}) {
                DistillConfig cfg = ctx.method_config(method);
                cfg.kernel = k;
                RunContext::DistillRun run = ctx.run_distill_full(cfg);
                if (run.outcome.val_acc > best_val) {
                    best_val = run.outcome.val_acc;
                    outcome = run.outcome;
                    trained = std::move(run.result.student);
                    chosen_kernel = kernel_kind_name(k);
                }
            }
        } else {
            RunContext::DistillRun run = ctx.run_distill_full(ctx.method_config(method));
            outcome = run.outcome;
            trained = std::move(run.result.student);
        }
        outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (trained) {
            const fs::path student_path = fs::path(common.out_dir) /
                                          ("student_" + opts.method + "_" + common.setting + "_seed" +
                                           std::to_string(seed) + ".ckpt");
            save_student(student_path.string(), *trained);
        }

        std::string setting_tag = common.setting_tag();
        if (method == Method::kmp || method == Method::kmp_pe)
            setting_tag += ";kernel=" + chosen_kernel;
        RunRecord rec{bundle.name, common.teacher, opts.method,      setting_tag, seed,
                      outcome.test_acc, outcome.val_acc, outcome.epochs, outcome.seconds};
        append_line_locked(metrics.string(), metrics_row(rec), kMetricsHeader);
        {
            std::lock_guard<std::mutex> lock(report_mutex);
            ++kernel_wins[chosen_kernel];
            std::cout << opts.method << " seed " << seed << ": test " << outcome.test_acc << "  val "
                      << outcome.val_acc << "  kernel " << chosen_kernel << "\n";
        }
    });

    if (opts.select_best_kernel) {
        std::ofstream os(fs::path(common.out_dir) / "kernel_report.txt", std::ios::trunc);
        os << "dataset: " << bundle.name << "\n";
        for (const auto& [k, wins] : kernel_wins) os << k << ": chosen for " << wins << " seed(s)\n";
    }
    std::cout << "wrote " << metrics << "\n";
    return 0;
}

// ----------------------------- sweep -----------------------------

int cmd_sweep(const CommonOpts& common, const DistillOpts& opts, const std::string& axis) {
    const std::string dir = resolve_dataset_dir(common.dataset);
    const DatasetBundle bundle = load_dataset(dir);
    const auto seed_values = make_seed_list(common.seeds, common.seed_list);

    fs::create_directories(common.out_dir);
    const fs::path metrics = fs::path(common.out_dir) / "metrics.csv";
    write_manifest(common.out_dir, {{"command", "sweep"},
                                    {"axis", axis},
                                    {"dataset", bundle.name},
                                    {"teacher", common.teacher},
                                    {"setting", common.setting},
                                    {"seeds", std::to_string(seed_values.size())}});

    struct Job {
        double x;
        Method method;
        std::uint64_t seed;
    };
    std::vector<Job> jobs_list;
    if (axis == "noise") {
        for (double frac : {0.1, 0.2, 0.3, 0.4, 0.5})
            for (Method m : {Method::glnn, Method::kmp})
                for (std::uint64_t s : seed_values) jobs_list.push_back({frac, m, s});
    } else if (axis == "gamma") {
        for (double gamma : {0.1, 0.3, 0.5, 0.7, 1.0, 3.0, 10.0, 30.0})
            for (std::uint64_t s : seed_values) jobs_list.push_back({gamma, Method::kmp, s});
    } else {
        throw config_error("unknown sweep axis '" + axis + "' (expected noise|gamma)");
    }

    const auto done = completed_keys(metrics);

    run_parallel(common.jobs, static_cast<int>(jobs_list.size()), [&](int i) {
        const Job& job = jobs_list[i];
        CommonOpts local = common;
        std::string setting_tag;
        DistillConfig dcfg = opts.to_config();
        dcfg.pe = PeMode::off;
        if (axis == "noise") {
            local.noise = job.x;
            setting_tag = common.setting + ";noise=" + std::to_string(job.x);
        } else {
            dcfg.gamma = job.x;
            setting_tag = common.setting + ";gamma=" + std::to_string(job.x);
        }
        RunRecord rec;
        rec.dataset = bundle.name;
        rec.teacher = common.teacher;
        rec.method = method_name(job.method);
        rec.setting = setting_tag;
        rec.seed = job.seed;
        if (done.count(record_key(rec))) return;  // resumable: already recorded

        ExperimentSetup setup = setup_from(local, dcfg);
        RunContext ctx(bundle, setup, job.seed);
        const MethodOutcome o = ctx.run_method(job.method);
        rec.test_acc = o.test_acc;
        rec.val_acc = o.val_acc;
        rec.epochs = o.epochs;
        rec.seconds = o.seconds;
        append_line_locked(metrics.string(), metrics_row(rec), kMetricsHeader);
        std::cout << axis << "=" << job.x << " " << rec.method << " seed " << job.seed << ": test "
                  << o.test_acc << "\n";
    });

    // aggregate into the sweep CSV (Fig 3 / Fig 4 shape)
    std::vector<RunRecord> records;
    {
        std::ifstream is(metrics);
        std::string line;
        std::getline(is, line);
        while (std::getline(is, line))
            if (!line.empty()) records.push_back(parse_metrics_row(line));
    }
    std::map<std::pair<double, std::string>, std::vector<double>> groups;
    const std::string prefix = axis == "noise" ? ";noise=" : ";gamma=";
    for (const RunRecord& r : records) {
        const auto at = r.setting.find(prefix);
        if (at == std::string::npos) continue;
        const double x = std::stod(r.setting.substr(at + prefix.size()));
        groups[{x, r.method}].push_back(r.test_acc);
    }
    std::vector<SweepPoint> points;
    for (const auto& [key, vals] : groups) {
        const Aggregate a = aggregate(vals);
        points.push_back({key.first, key.second, a.mean, a.stddev, a.n});
    }
    std::ofstream os(fs::path(common.out_dir) / ("sweep_" + axis + ".csv"), std::ios::trunc);
    os << emit_sweep_csv(axis, points);
    std::cout << "wrote sweep_" << axis << ".csv\n";
    return 0;
}

// ----------------------------- infer -----------------------------

int cmd_infer(const std::string& ckpt_path, const std::string& features_path,
              const std::string& dataset_dir, const std::string& pe_cache, const std::string& out_path) {
    const StudentModel student = load_student(ckpt_path);
    Tensor features;
    if (!features_path.empty()) {
        features = load_features(features_path);
    } else if (!dataset_dir.empty()) {
        features = load_dataset(resolve_dataset_dir(dataset_dir)).graph.features;
    } else {
        throw config_error("infer: need --features or --dataset");
    }

    PositionalEncoding pe;
    const PositionalEncoding* pe_ptr = nullptr;
    if (student.pe != PeMode::off) {
        if (!pe_cache.empty()) {
            pe = load_pe_cache(pe_cache);
        } else if (!dataset_dir.empty()) {
            pe = compute_pe(load_dataset(resolve_dataset_dir(dataset_dir)).graph, student.pe_k);
        } else {
            throw config_error("infer: PE-fused student needs --pe-cache or --dataset for the encoding");
        }
        pe_ptr = &pe;
    }

    const std::vector<int> preds = stage3_infer(student, features, pe_ptr);
    const Tensor probs = stage3_probabilities(student, features, pe_ptr);
    std::ofstream os(out_path, std::ios::trunc);
    if (!os) throw io_error("cannot open output: " + out_path);
    os << "# node_id\tpredicted_class\tmax_probability\n";
    for (std::size_t i = 0; i < preds.size(); ++i) {
        double mx = 0.0;
        for (int j = 0; j < probs.cols; ++j) mx = std::max(mx, probs(static_cast<int>(i), j));
        os << i << '\t' << preds[i] << '\t' << mx << '\n';
    }
    std::cout << "wrote " << out_path << " (" << preds.size() << " rows)\n";
    return 0;
}

// ----------------------------- gen-sbm -----------------------------

int cmd_gen_sbm(int blocks, int block_size, double p_in, double p_out, int fdim, double offset,
                std::uint64_t seed, const std::string& out_dir) {
    std::vector<int> sizes(blocks, block_size);
    DatasetBundle b = generate_sbm(sizes, p_in, p_out, fdim, seed, offset);
    b.name = "sbm" + std::to_string(blocks) + "x" + std::to_string(block_size);
    save_dataset(out_dir, b);
    std::cout << "wrote " << out_dir << ": n=" << b.graph.n << " edges=" << b.graph.num_undirected_edges()
              << " d=" << fdim << " classes=" << blocks << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"GNN-to-MLP multitask distillation experiments"};
    app.require_subcommand(1);

    // pretrain
    CommonOpts pre_common;
    TeacherConfig pre_teacher;
    auto* pre = app.add_subcommand("pretrain", "stage I: train teacher GNNs, save checkpoints");
    pre_common.add_to(pre);
    auto* opt_hidden = pre->add_option("--hidden", pre_teacher.hidden_dim, "teacher hidden dim");
    auto* opt_drop = pre->add_option("--dropout", pre_teacher.dropout, "teacher dropout");
    auto* opt_lr = pre->add_option("--lr", pre_teacher.lr, "teacher learning rate");
    auto* opt_wd = pre->add_option("--wd", pre_teacher.weight_decay, "teacher weight decay");
    pre->add_option("--epochs", pre_teacher.max_epochs, "max epochs");
    pre->add_option("--patience", pre_teacher.patience, "early-stop patience");
    

    // distill
    CommonOpts dis_common;
    DistillOpts dis_opts;
    auto* dis = app.add_subcommand("distill", "stage II: distill teacher into student MLP");
    dis_common.add_to(dis);
    dis->add_option("--method", dis_opts.method, "mlp|glnn|kmp|kmp+pe")
        ->check(CLI::IsMember({"mlp", "glnn", "kmp", "kmp+pe"}));
    dis->add_option("--kernel", dis_opts.kernel, "sigmoid|randomized|polynomial|gaussian|reverse")
        ->check(CLI::IsMember({"sigmoid", "randomized", "polynomial", "gaussian", "reverse"}));
    dis->add_flag("--select-best-kernel", dis_opts.select_best_kernel,
                  "run the four fixed kernels, keep the best by validation accuracy");
    dis->add_option("--gamma", dis_opts.gamma, "mapping-distance weight");
    dis->add_option("--theta", dis_opts.theta, "hard-label fraction of L_out");
    dis->add_option("--temperature", dis_opts.temperature, "soft-target temperature");
    dis->add_option("--pe", dis_opts.pe, "off|concat|mul");
    dis->add_option("--pe-k", dis_opts.pe_k, "number of Laplacian eigenvectors");
    dis->add_option("--lr", dis_opts.lr, "student learning rate");
    dis->add_option("--wd", dis_opts.weight_decay, "student weight decay");
    dis->add_option("--gauss-T", dis_opts.gauss_T, "gaussian kernel time constant");
    dis->add_option("--poly-c", dis_opts.poly_c, "polynomial kernel offset");
    dis->add_option("--poly-d", dis_opts.poly_d, "polynomial kernel degree");
    dis->add_option("--rand-t", dis_opts.rand_t, "randomized kernel sample count");
    dis->add_option("--epochs", dis_opts.max_epochs, "max epochs");
    dis->add_option("--patience", dis_opts.patience, "early-stop patience");
    dis->add_option("--batch-size", dis_opts.batch_size, "minibatch size");
    dis->add_option("--teacher-dir", dis_opts.teacher_dir, "directory holding teacher checkpoints");
    

    // sweep
    CommonOpts sw_common;
    DistillOpts sw_opts;
    std::string sw_axis = "noise";
    auto* sw = app.add_subcommand("sweep", "noise robustness or gamma sensitivity grid");
    sw_common.add_to(sw);
    sw->add_option("--axis", sw_axis, "noise|gamma")->check(CLI::IsMember({"noise", "gamma"}));
    sw->add_option("--kernel", sw_opts.kernel, "kernel for the kmp runs");
    sw->add_option("--gamma", sw_opts.gamma, "gamma for noise-sweep kmp runs");
    sw->add_option("--theta", sw_opts.theta, "hard-label fraction");
    sw->add_option("--temperature", sw_opts.temperature, "soft-target temperature");
    sw->add_option("--epochs", sw_opts.max_epochs, "max epochs");
    sw->add_option("--patience", sw_opts.patience, "early-stop patience");
    

    // infer
    std::string inf_ckpt, inf_features, inf_dataset, inf_pe_cache, inf_out = "predictions.tsv";
    auto* inf = app.add_subcommand("infer", "stage III: graph-free inference from a student checkpoint");
    inf->add_option("--checkpoint", inf_ckpt, "student checkpoint")->required();
    inf->add_option("--features", inf_features, "features.bin to classify");
    inf->add_option("--dataset", inf_dataset, "dataset dir (features + PE source)");
    inf->add_option("--pe-cache", inf_pe_cache, "precomputed PE cache file");
    inf->add_option("--out", inf_out, "output TSV path");

    // gen-sbm
    int gs_blocks = 4, gs_block_size = 75, gs_fdim = 32;
    double gs_pin = 0.2, gs_pout = 0.02, gs_offset = 1.0;
    std::uint64_t gs_seed = 1;
    std::string gs_out = "data/sbm";
    auto* gs = app.add_subcommand("gen-sbm", "generate a stochastic block model dataset");
    gs->add_option("--blocks", gs_blocks, "number of blocks (classes)");
    gs->add_option("--block-size", gs_block_size, "nodes per block");
    gs->add_option("--p-in", gs_pin, "intra-block edge probability");
    gs->add_option("--p-out", gs_pout, "inter-block edge probability");
    gs->add_option("--fdim", gs_fdim, "feature dimension");
    gs->add_option("--offset", gs_offset, "class feature mean offset");
    gs->add_option("--seed", gs_seed, "generator seed");
    gs->add_option("--out", gs_out, "output dataset directory");

    // consumed by expand_manifest before parsing; registered for --help only
    static std::string manifest_doc;
    for (auto* cmd : {pre, dis, sw})
        cmd->add_option("--manifest", manifest_doc,
                        "flat key=value manifest; explicit flags take precedence")
            ->type_name("FILE");

    try {
        std::vector<std::string> args(argv + 1, argv + argc);
        args = expand_manifest(args);
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (pre->parsed())
            return cmd_pretrain(pre_common, pre_teacher, opt_hidden->count() > 0, opt_drop->count() > 0,
                                opt_lr->count() > 0, opt_wd->count() > 0);
        if (dis->parsed()) return cmd_distill(dis_common, dis_opts);
        if (sw->parsed()) return cmd_sweep(sw_common, sw_opts, sw_axis);
        if (inf->parsed()) return cmd_infer(inf_ckpt, inf_features, inf_dataset, inf_pe_cache, inf_out);
        if (gs->parsed())
            return cmd_gen_sbm(gs_blocks, gs_block_size, gs_pin, gs_pout, gs_fdim, gs_offset, gs_seed,
                               gs_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
