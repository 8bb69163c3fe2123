#pragma once

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "kmp/binary_io.hpp"
#include "kmp/distill.hpp"
#include "kmp/graph.hpp"
#include "kmp/models.hpp"

namespace kmp {

struct DatasetBundle {
    std::string name;
    Graph graph;
    std::vector<std::string> class_names;
    std::string provenance;
};

namespace detail {

struct BenchmarkShape {
    int nodes, feature_dim, classes;
};

// Known benchmark shapes; a named bundle must match its row.
inline const std::map<std::string, BenchmarkShape>& benchmark_shapes() {
    static const std::map<std::string, BenchmarkShape> shapes = {
        {"cora", {2708, 1433, 7}},          {"citeseer", {3327, 3703, 6}},
        {"pubmed", {19717, 500, 3}},        {"amazon-photo", {7487, 745, 8}},
        {"amazon-computer", {13381, 767, 10}},
    };
    return shapes;
}

inline std::map<std::string, std::string> read_kv_file(const std::string& path) {
    std::map<std::string, std::string> kv;
    std::ifstream is(path);
    if (!is) return kv;
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r\"");
            const auto e = s.find_last_not_of(" \t\r\"");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

}  // namespace detail

// ----------------------------- feature matrix file -----------------------------
// Header: n, d as 64-bit little-endian counts; then n*d doubles row-major.

inline void save_features(const std::string& path, const Tensor& features) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open for writing: " + path);
    write_u64(os, static_cast<std::uint64_t>(features.rows));
    write_u64(os, static_cast<std::uint64_t>(features.cols));
    for (double x : features.v) write_f64(os, x);
    if (!os) throw io_error("write failed: " + path);
}

inline Tensor load_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open: " + path);
    const std::uint64_t n = read_u64(is, "features n (offset 0)");
    const std::uint64_t d = read_u64(is, "features d (offset 8)");
    if (n > (1u << 24) || d > (1u << 24))
        throw io_error(path + ": implausible header n=" + std::to_string(n) + " d=" + std::to_string(d));
    const std::uintmax_t expected = 16 + n * d * 8;
    const std::uintmax_t actual = std::filesystem::file_size(path);
    if (actual != expected)
        throw io_error(path + ": size " + std::to_string(actual) + " does not match header (expected " +
                       std::to_string(expected) + " bytes)");
    Tensor t(static_cast<int>(n), static_cast<int>(d));
    for (double& x : t.v) x = read_f64(is, "feature values");
    return t;
}

// ----------------------------- dataset bundle -----------------------------
// Directory layout: edges.tsv (u v per line), features.bin, labels.tsv
// (id class per line), optional meta.txt key=value.

inline DatasetBundle load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path root(dir);
    if (!fs::exists(root / "features.bin"))
        throw io_error(dir + ": not a dataset directory (missing features.bin)");

    DatasetBundle b;
    auto meta = detail::read_kv_file((root / "meta.txt").string());
    b.name = meta.count("name") ? meta["name"] : root.filename().string();
    b.provenance = meta.count("provenance") ? meta["provenance"] : "";

    Tensor features = load_features((root / "features.bin").string());
    const int n = features.rows;

    std::vector<int> labels(n, kUnlabeled);
    int max_label = -1;
    {
        std::ifstream is(root / "labels.tsv");
        if (!is) throw io_error(dir + ": missing labels.tsv");
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ss(line);
            long id, cls;
            if (!(ss >> id >> cls))
                throw io_error(dir + "/labels.tsv:" + std::to_string(lineno) + ": malformed line");
            if (id < 0 || id >= n)
                throw io_error(dir + "/labels.tsv:" + std::to_string(lineno) + ": node id " +
                               std::to_string(id) + " out of range for n=" + std::to_string(n));
            labels[id] = static_cast<int>(cls);
            max_label = std::max(max_label, static_cast<int>(cls));
        }
    }
    int num_classes = meta.count("classes") ? std::stoi(meta["classes"]) : max_label + 1;
    if (max_label >= num_classes)
        throw io_error(dir + ": label id " + std::to_string(max_label) + " >= class count " +
                       std::to_string(num_classes));
    if (meta.count("class_names")) {
        std::istringstream ss(meta["class_names"]);
        std::string item;
        while (std::getline(ss, item, ',')) b.class_names.push_back(item);
    }

    std::vector<Edge> edges;
    {
        std::ifstream is(root / "edges.tsv");
        if (!is) throw io_error(dir + ": missing edges.tsv");
        std::string line;
        int lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ss(line);
            long u, v;
            if (!(ss >> u >> v))
                throw io_error(dir + "/edges.tsv:" + std::to_string(lineno) + ": malformed line");
            edges.push_back({static_cast<int>(u), static_cast<int>(v)});
        }
    }

    b.graph = build_graph(edges, std::move(features), std::move(labels), num_classes);

    const auto& shapes = detail::benchmark_shapes();
    const auto it = shapes.find(b.name);
    if (it != shapes.end()) {
        if (b.graph.n != it->second.nodes || b.graph.features.cols != it->second.feature_dim ||
            b.graph.num_classes != it->second.classes)
            throw io_error(dir + ": bundle named '" + b.name + "' has shape (" + std::to_string(b.graph.n) +
                           ", " + std::to_string(b.graph.features.cols) + ", " +
                           std::to_string(b.graph.num_classes) + "), expected (" +
                           std::to_string(it->second.nodes) + ", " + std::to_string(it->second.feature_dim) +
                           ", " + std::to_string(it->second.classes) + ")");
    }
    return b;
}

inline void save_dataset(const std::string& dir, const DatasetBundle& b) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path root(dir);
    save_features((root / "features.bin").string(), b.graph.features);
    {
        std::ofstream os(root / "edges.tsv", std::ios::trunc);
        for (int i = 0; i < b.graph.n; ++i)
            for (int p = b.graph.offsets[i]; p < b.graph.offsets[i + 1]; ++p)
                if (i < b.graph.neighbors[p]) os << i << '\t' << b.graph.neighbors[p] << '\n';
        if (!os) throw io_error("write failed: " + (root / "edges.tsv").string());
    }
    {
        std::ofstream os(root / "labels.tsv", std::ios::trunc);
        for (int i = 0; i < b.graph.n; ++i)
            if (b.graph.labels[i] != kUnlabeled) os << i << '\t' << b.graph.labels[i] << '\n';
        if (!os) throw io_error("write failed: " + (root / "labels.tsv").string());
    }
    {
        std::ofstream os(root / "meta.txt", std::ios::trunc);
        os << "name = " << b.name << "\n";
        os << "classes = " << b.graph.num_classes << "\n";
        if (!b.class_names.empty()) {
            os << "class_names = ";
            for (std::size_t i = 0; i < b.class_names.size(); ++i)
                os << (i ? "," : "") << b.class_names[i];
            os << "\n";
        }
        if (!b.provenance.empty()) os << "provenance = " << b.provenance << "\n";
    }
}

// ----------------------------- synthetic graphs -----------------------------

// Stochastic block model with class-mean Gaussian features: block c has
// feature mean `feature_offset` in dimension (c mod d), sigma = 1.
inline DatasetBundle generate_sbm(const std::vector<int>& block_sizes, double p_in, double p_out,
                                  int feature_dim, std::uint64_t seed, double feature_offset = 1.0) {
    if (block_sizes.empty()) throw contract_error("generate_sbm: no blocks");
    for (int s : block_sizes)
        if (s < 1) throw contract_error("generate_sbm: empty block");
    if (p_in < p_out)
        throw contract_error("generate_sbm: p_in must be >= p_out for informative structure");

    Rng rng(splitmix64(seed) ^ 0x5b3aULL);
    int n = 0;
    for (int s : block_sizes) n += s;
    const int num_classes = static_cast<int>(block_sizes.size());

    std::vector<int> labels(n);
    {
        int at = 0;
        for (int c = 0; c < num_classes; ++c)
            for (int k = 0; k < block_sizes[c]; ++k) labels[at++] = c;
    }

    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double p = labels[i] == labels[j] ? p_in : p_out;
            if (rng.uniform01() < p) edges.push_back({i, j});
        }

    Tensor features(n, feature_dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < feature_dim; ++j) {
            const double mu = (labels[i] % feature_dim) == j ? feature_offset : 0.0;
            features(i, j) = mu + rng.normal();
        }

    DatasetBundle b;
    b.name = "sbm";
    b.provenance = "synthetic stochastic block model";
    b.graph = build_graph(edges, std::move(features), std::move(labels), num_classes);
    return b;
}

// ----------------------------- model checkpoints -----------------------------

inline constexpr char kModelMagic[8] = {'K', 'M', 'P', 'C', 'K', 'P', 'T', '1'};
inline constexpr char kStudentMagic[8] = {'K', 'M', 'P', 'S', 'T', 'U', 'D', '1'};

inline void write_model(std::ostream& os, const ModelParams& p) {
    write_i64(os, static_cast<int>(p.kind));
    write_i64(os, static_cast<int>(p.norm));
    write_f64(os, p.dropout);
    write_i64(os, p.in_dim);
    write_i64(os, p.hidden_dim);
    write_i64(os, p.out_dim);
    write_i64(os, p.num_layers);
    write_i64(os, static_cast<std::int64_t>(p.W.size()));
    for (const Tensor& t : p.W) write_tensor(os, t);
    write_i64(os, static_cast<std::int64_t>(p.W_neigh.size()));
    for (const Tensor& t : p.W_neigh) write_tensor(os, t);
    write_i64(os, static_cast<std::int64_t>(p.b.size()));
    for (const Tensor& t : p.b) write_tensor(os, t);
    write_i64(os, static_cast<std::int64_t>(p.bn_gamma.size()));
    for (std::size_t l = 0; l < p.bn_gamma.size(); ++l) {
        write_tensor(os, p.bn_gamma[l]);
        write_tensor(os, p.bn_beta[l]);
        write_i64(os, p.bn_state[l].initialized ? 1 : 0);
        if (p.bn_state[l].initialized) {
            write_tensor(os, p.bn_state[l].running_mean);
            write_tensor(os, p.bn_state[l].running_var);
        }
    }
}

inline ModelParams read_model(std::istream& is) {
    ModelParams p;
    p.kind = static_cast<ModelKind>(read_i64(is, "model kind"));
    p.norm = static_cast<NormKind>(read_i64(is, "norm kind"));
    p.dropout = read_f64(is, "dropout");
    p.in_dim = static_cast<int>(read_i64(is, "in_dim"));
    p.hidden_dim = static_cast<int>(read_i64(is, "hidden_dim"));
    p.out_dim = static_cast<int>(read_i64(is, "out_dim"));
    p.num_layers = static_cast<int>(read_i64(is, "num_layers"));
    const auto nw = read_i64(is, "W count");
    for (std::int64_t i = 0; i < nw; ++i) p.W.push_back(read_tensor(is, "W"));
    const auto nn = read_i64(is, "W_neigh count");
    for (std::int64_t i = 0; i < nn; ++i) p.W_neigh.push_back(read_tensor(is, "W_neigh"));
    const auto nb = read_i64(is, "b count");
    for (std::int64_t i = 0; i < nb; ++i) p.b.push_back(read_tensor(is, "b"));
    const auto ng = read_i64(is, "bn count");
    for (std::int64_t i = 0; i < ng; ++i) {
        p.bn_gamma.push_back(read_tensor(is, "bn_gamma"));
        p.bn_beta.push_back(read_tensor(is, "bn_beta"));
        BatchNormState st;
        if (read_i64(is, "bn initialized") != 0) {
            st.running_mean = read_tensor(is, "bn running_mean");
            st.running_var = read_tensor(is, "bn running_var");
            st.initialized = true;
        }
        p.bn_state.push_back(std::move(st));
    }
    return p;
}

inline void save_model(const std::string& path, const ModelParams& p) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open checkpoint for writing: " + path);
    write_magic(os, kModelMagic);
    write_model(os, p);
    if (!os) throw io_error("write failed: " + path);
}

inline ModelParams load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open checkpoint: " + path);
    expect_magic(is, kModelMagic, path);
    return read_model(is);
}

inline void save_student(const std::string& path, const StudentModel& s) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw io_error("cannot open checkpoint for writing: " + path);
    write_magic(os, kStudentMagic);
    write_model(os, s.mlp);
    write_i64(os, static_cast<int>(s.pe));
    write_i64(os, s.pe_k);
    if (s.pe != PeMode::off) {
        write_tensor(os, s.k0);
        write_tensor(os, s.b0);
    }
    write_i64(os, static_cast<int>(s.kernel.kind));
    write_i64(os, static_cast<int>(s.kernel.sigma));
    write_tensor(os, s.kernel.sig_a);
    write_tensor(os, s.kernel.sig_b);
    write_f64(os, s.kernel.gauss_T);
    write_f64(os, s.kernel.poly_c);
    write_i64(os, s.kernel.poly_d);
    const bool has_reverse = s.kernel.kind == KernelKind::reverse;
    write_i64(os, has_reverse ? 1 : 0);
    if (has_reverse) {
        write_tensor(os, s.kernel.reverse_w);
        write_tensor(os, s.decoder);
    }
    if (!os) throw io_error("write failed: " + path);
}

inline StudentModel load_student(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open checkpoint: " + path);
    expect_magic(is, kStudentMagic, path);
    StudentModel s;
    s.mlp = read_model(is);
    s.pe = static_cast<PeMode>(read_i64(is, "pe mode"));
    s.pe_k = static_cast<int>(read_i64(is, "pe k"));
    if (s.pe != PeMode::off) {
        s.k0 = read_tensor(is, "k0");
        s.b0 = read_tensor(is, "b0");
    }
    s.kernel.kind = static_cast<KernelKind>(read_i64(is, "kernel kind"));
    s.kernel.sigma = static_cast<SigmaKind>(read_i64(is, "sigma kind"));
    s.kernel.sig_a = read_tensor(is, "sig_a");
    s.kernel.sig_b = read_tensor(is, "sig_b");
    s.kernel.gauss_T = read_f64(is, "gauss_T");
    s.kernel.poly_c = read_f64(is, "poly_c");
    s.kernel.poly_d = static_cast<int>(read_i64(is, "poly_d"));
    if (read_i64(is, "has reverse") != 0) {
        s.kernel.reverse_w = read_tensor(is, "reverse_w");
        s.decoder = read_tensor(is, "decoder");
    }
    return s;
}

// ----------------------------- metrics -----------------------------

// Appends one line under an exclusive flock so concurrent sweep workers
// do not interleave partial rows.
inline void append_line_locked(const std::string& path, const std::string& line,
                               const std::string& header = "") {
    const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw io_error("cannot open metrics file: " + path);
    if (::flock(fd, LOCK_EX) != 0) {
        ::close(fd);
        throw io_error("cannot lock metrics file: " + path);
    }
    std::string payload;
    const off_t at = ::lseek(fd, 0, SEEK_END);
    if (at == 0 && !header.empty()) payload = header + "\n";
    payload += line + "\n";
    const ssize_t written = ::write(fd, payload.data(), payload.size());
    ::flock(fd, LOCK_UN);
    ::close(fd);
    if (written != static_cast<ssize_t>(payload.size())) throw io_error("short write to " + path);
}

}  // namespace kmp
