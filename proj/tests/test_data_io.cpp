#include <catch2/catch_amalgamated.hpp>
#include <filesystem>
#include <fstream>
#include <thread>

#include "kmp/data_io.hpp"
#include "kmp/eval.hpp"
#include "fixtures.hpp"

using namespace kmp;
namespace fs = std::filesystem;

namespace {
struct TempDir {
    fs::path path;
    TempDir(const std::string& tag) : path(fs::temp_directory_path() / ("kmp_test_" + tag)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};
}  // namespace

TEST_CASE("minimal two-node bundle round-trips", "[dataio]") {
    TempDir tmp("roundtrip");
    DatasetBundle b;
    b.name = "mini";
    b.graph = fixtures::path2();
    b.class_names = {"left", "right"};
    save_dataset(tmp.path.string(), b);
    const DatasetBundle back = load_dataset(tmp.path.string());
    REQUIRE(back.name == "mini");
    REQUIRE(back.graph.n == 2);
    REQUIRE(back.graph.num_undirected_edges() == 1);
    REQUIRE(back.graph.features.v == b.graph.features.v);
    REQUIRE(back.graph.labels == b.graph.labels);
    REQUIRE(back.class_names == b.class_names);
}

TEST_CASE("the committed 12-node fixture matches the in-memory one", "[dataio]") {
    const DatasetBundle disk = load_dataset(std::string(KMP_TEST_DATA_DIR) + "/fixtures/tiny12");
    const DatasetBundle mem = fixtures::tiny12();
    REQUIRE(disk.graph.n == mem.graph.n);
    REQUIRE(disk.graph.neighbors == mem.graph.neighbors);
    REQUIRE(disk.graph.labels == mem.graph.labels);
    REQUIRE(disk.graph.features.v == mem.graph.features.v);
    REQUIRE(disk.graph.num_classes == 2);
}

TEST_CASE("corrupted feature header names the offset", "[dataio]") {
    TempDir tmp("corrupt");
    {
        std::ofstream os(tmp.path / "features.bin", std::ios::binary);
        os << "bad";
    }
    REQUIRE_THROWS_AS(load_features((tmp.path / "features.bin").string()), io_error);
    try {
        load_features((tmp.path / "features.bin").string());
    } catch (const io_error& e) {
        REQUIRE_THAT(e.what(), Catch::Matchers::ContainsSubstring("offset"));
    }
}

TEST_CASE("silently truncated feature files are rejected", "[dataio]") {
    TempDir tmp("truncated");
    const fs::path p = tmp.path / "features.bin";
    {
        std::ofstream os(p, std::ios::binary);
        write_u64(os, 10);
        write_u64(os, 4);
        for (int i = 0; i < 7; ++i) write_f64(os, 1.0);  // far fewer than 40 values
    }
    REQUIRE_THROWS_WITH(load_features(p.string()), Catch::Matchers::ContainsSubstring("does not match"));
}

TEST_CASE("label id beyond the class count is rejected", "[dataio]") {
    TempDir tmp("badlabel");
    DatasetBundle b;
    b.name = "mini";
    b.graph = fixtures::path2();
    save_dataset(tmp.path.string(), b);
    {
        std::ofstream os(tmp.path / "labels.tsv", std::ios::trunc);
        os << "0\t0\n1\t9\n";
    }
    REQUIRE_THROWS_AS(load_dataset(tmp.path.string()), io_error);
}

TEST_CASE("named benchmark with wrong shape is rejected", "[dataio]") {
    TempDir tmp("fakecora");
    DatasetBundle b;
    b.name = "cora";
    b.graph = fixtures::path2();
    save_dataset(tmp.path.string(), b);
    REQUIRE_THROWS_WITH(load_dataset(tmp.path.string()),
                        Catch::Matchers::ContainsSubstring("2708"));
}

TEST_CASE("SBM intra-block edge count sits within 3 sigma of expectation", "[dataio]") {
    const DatasetBundle b = generate_sbm({50, 50}, 0.2, 0.01, 4, 42);
    int intra = 0;
    for (int u = 0; u < b.graph.n; ++u)
        for (int p = b.graph.offsets[u]; p < b.graph.offsets[u + 1]; ++p) {
            const int v = b.graph.neighbors[p];
            if (u < v && b.graph.labels[u] == b.graph.labels[v]) ++intra;
        }
    // 2 blocks * C(50,2) * 0.2 = 490 expected
    const double mean = 2 * (50.0 * 49.0 / 2.0) * 0.2;
    const double sigma = std::sqrt(2 * (50.0 * 49.0 / 2.0) * 0.2 * 0.8);
    REQUIRE(std::abs(intra - mean) < 3.0 * sigma);
}

TEST_CASE("SBM labels match block sizes exactly and runs are deterministic", "[dataio]") {
    const DatasetBundle a = generate_sbm({30, 20, 10}, 0.3, 0.05, 4, 9);
    std::vector<int> counts(3, 0);
    for (int y : a.graph.labels) ++counts[y];
    REQUIRE(counts == std::vector<int>{30, 20, 10});
    const DatasetBundle b = generate_sbm({30, 20, 10}, 0.3, 0.05, 4, 9);
    REQUIRE(a.graph.neighbors == b.graph.neighbors);
    REQUIRE(a.graph.features.v == b.graph.features.v);
    const DatasetBundle c = generate_sbm({30, 20, 10}, 0.3, 0.05, 4, 10);
    REQUIRE(a.graph.neighbors != c.graph.neighbors);
}

TEST_CASE("empty SBM block is rejected", "[dataio]") {
    REQUIRE_THROWS_AS(generate_sbm({10, 0}, 0.2, 0.1, 4, 1), contract_error);
}

// ----------------------------- checkpoints -----------------------------

TEST_CASE("teacher checkpoints round-trip byte-exactly", "[dataio]") {
    TempDir tmp("ckpt");
    const DatasetBundle b = fixtures::sbm_small();
    const SplitSpec split = make_split(b.graph, SplitSpec::Mode::transductive, 1);
    TeacherConfig cfg = TeacherConfig::defaults(ModelKind::gcn);
    cfg.max_epochs = 15;
    const StageResult r = stage1_pretrain(b.graph, cfg, split, 3);

    const std::string path = (tmp.path / "teacher.ckpt").string();
    save_model(path, r.model);
    const ModelParams back = load_model(path);
    REQUIRE(back.checksum() == r.model.checksum());
    REQUIRE(back.kind == ModelKind::gcn);
    REQUIRE(back.bn_state.size() == r.model.bn_state.size());
    for (std::size_t l = 0; l < back.bn_state.size(); ++l) {
        REQUIRE(back.bn_state[l].running_mean.v == r.model.bn_state[l].running_mean.v);
        REQUIRE(back.bn_state[l].running_var.v == r.model.bn_state[l].running_var.v);
    }

    auto prop = propagation_for(ModelKind::gcn, b.graph);
    REQUIRE(forward_eval(back, prop.get(), b.graph.features).logits.v ==
            forward_eval(r.model, prop.get(), b.graph.features).logits.v);
}

TEST_CASE("student checkpoints preserve PE embedding and kernel parameters", "[dataio]") {
    TempDir tmp("student");
    const DatasetBundle b = fixtures::sbm_small();
    const SplitSpec split = make_split(b.graph, SplitSpec::Mode::transductive, 2);
    TeacherConfig tcfg = TeacherConfig::defaults(ModelKind::gcn);
    tcfg.max_epochs = 15;
    const StageResult teacher = stage1_pretrain(b.graph, tcfg, split, 3);
    const PositionalEncoding pe = compute_pe(b.graph, 4);

    DistillConfig cfg;
    cfg.seed = 5;
    cfg.pe = PeMode::concat;
    cfg.pe_k = 4;
    cfg.kernel = KernelKind::reverse;
    cfg.max_epochs = 6;
    const DistillResult r = stage2_distill(b.graph, teacher.model, cfg, split, &pe);

    const std::string path = (tmp.path / "student.ckpt").string();
    save_student(path, r.student);
    const StudentModel back = load_student(path);
    REQUIRE(back.pe == PeMode::concat);
    REQUIRE(back.k0.v == r.student.k0.v);
    REQUIRE(back.b0.v == r.student.b0.v);
    REQUIRE(back.kernel.kind == KernelKind::reverse);
    REQUIRE(back.kernel.reverse_w.v == r.student.kernel.reverse_w.v);
    REQUIRE(back.decoder.v == r.student.decoder.v);
    REQUIRE(stage3_infer(back, b.graph.features, &pe) == stage3_infer(r.student, b.graph.features, &pe));
}

TEST_CASE("checkpoints with the wrong magic are rejected", "[dataio]") {
    TempDir tmp("magic");
    const std::string path = (tmp.path / "bad.ckpt").string();
    {
        std::ofstream os(path, std::ios::binary);
        os << "WRONGMAGICxxxx";
    }
    REQUIRE_THROWS_AS(load_model(path), io_error);
    REQUIRE_THROWS_AS(load_student(path), io_error);
}

// ----------------------------- metrics -----------------------------

TEST_CASE("metrics append writes the header once and survives concurrency", "[dataio]") {
    TempDir tmp("metrics");
    const std::string path = (tmp.path / "metrics.csv").string();
    std::vector<std::thread> writers;
    for (int w = 0; w < 4; ++w)
        writers.emplace_back([&, w]() {
            for (int i = 0; i < 25; ++i) {
                RunRecord r{"sbm", "gcn", "kmp", "trans", static_cast<std::uint64_t>(w * 100 + i),
                            0.5,   0.6,   10,    0.1};
                append_line_locked(path, metrics_row(r), kMetricsHeader);
            }
        });
    for (auto& th : writers) th.join();

    std::ifstream is(path);
    std::string line;
    int lines = 0, headers = 0;
    while (std::getline(is, line)) {
        if (line == kMetricsHeader) ++headers;
        ++lines;
        if (lines > 1) REQUIRE_NOTHROW(parse_metrics_row(line));
    }
    REQUIRE(headers == 1);
    REQUIRE(lines == 1 + 4 * 25);
}
