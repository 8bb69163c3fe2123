#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>
#include <vector>

#include "kmp/common.hpp"
#include "kmp/sparse.hpp"
#include "kmp/tensor.hpp"

namespace kmp {

constexpr int kUnlabeled = -1;

// Immutable sparse undirected graph with node features and labels.
// Adjacency stores no self-loops; normalizations add them as needed.
struct Graph {
    int n = 0;
    std::vector<int> offsets;    // n + 1
    std::vector<int> neighbors;  // symmetric, deduplicated
    Tensor features;             // n x d
    std::vector<int> labels;     // class id or kUnlabeled
    int num_classes = 0;

    int degree(int i) const { return offsets[i + 1] - offsets[i]; }
    bool isolated(int i) const { return degree(i) == 0; }
    int num_undirected_edges() const { return static_cast<int>(neighbors.size()) / 2; }

    std::pair<int, int> neighbor_range(int i) const { return {offsets[i], offsets[i + 1]}; }
};

struct Edge {
    int u;
    int v;
};

inline Graph build_graph(const std::vector<Edge>& edges, Tensor features, std::vector<int> labels,
                         int num_classes) {
    const int n = features.rows;
    if (static_cast<int>(labels.size()) != n)
        throw shape_error("build_graph: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(n) + " nodes");
    for (int y : labels)
        if (y != kUnlabeled && (y < 0 || y >= num_classes))
            throw contract_error("build_graph: label id out of range");

    std::vector<std::set<int>> adj(n);
    for (const Edge& e : edges) {
        if (e.u < 0 || e.u >= n || e.v < 0 || e.v >= n)
            throw contract_error("build_graph: edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                 ") out of range for n=" + std::to_string(n));
        if (e.u == e.v) continue;  // self-loops dropped
        adj[e.u].insert(e.v);
        adj[e.v].insert(e.u);
    }

    Graph g;
    g.n = n;
    g.features = std::move(features);
    g.labels = std::move(labels);
    g.num_classes = num_classes;
    g.offsets.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) g.offsets[i + 1] = g.offsets[i] + static_cast<int>(adj[i].size());
    g.neighbors.reserve(g.offsets[n]);
    for (int i = 0; i < n; ++i) g.neighbors.insert(g.neighbors.end(), adj[i].begin(), adj[i].end());
    return g;
}

// GCN propagation operator D̃^{-1/2}(A+I)D̃^{-1/2}, with the self-loop
// injected here. Symmetric by construction.
inline SparseMatrix gcn_norm(const Graph& g) {
    std::vector<double> dinv(g.n);
    for (int i = 0; i < g.n; ++i) dinv[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i)) + 1.0);

    SparseMatrix s;
    s.rows = s.cols = g.n;
    s.offsets.assign(g.n + 1, 0);
    for (int i = 0; i < g.n; ++i) s.offsets[i + 1] = s.offsets[i] + g.degree(i) + 1;
    s.indices.resize(s.offsets[g.n]);
    s.values.resize(s.offsets[g.n]);
    for (int i = 0; i < g.n; ++i) {
        int pos = s.offsets[i];
        bool self_emitted = false;
        auto emit_self = [&]() {
            s.indices[pos] = i;
            s.values[pos] = dinv[i] * dinv[i];
            ++pos;
            self_emitted = true;
        };
        for (int p = g.offsets[i]; p < g.offsets[i + 1]; ++p) {
            const int j = g.neighbors[p];
            if (!self_emitted && j > i) emit_self();
            s.indices[pos] = j;
            s.values[pos] = dinv[i] * dinv[j];
            ++pos;
        }
        if (!self_emitted) emit_self();
    }
    return s;
}

// Row-normalized adjacency D^{-1}A for mean-aggregator SAGE. Isolated
// nodes get an all-zero row (neighbor mean is the zero vector).
inline SparseMatrix mean_norm(const Graph& g) {
    SparseMatrix s;
    s.rows = s.cols = g.n;
    s.offsets = g.offsets;
    s.indices = g.neighbors;
    s.values.resize(g.neighbors.size());
    for (int i = 0; i < g.n; ++i) {
        const int d = g.degree(i);
        for (int p = g.offsets[i]; p < g.offsets[i + 1]; ++p) s.values[p] = 1.0 / d;
    }
    return s;
}

// Symmetric normalized Laplacian I - D^{-1/2} A D^{-1/2}, dense.
inline Tensor normalized_laplacian(const Graph& g) {
    for (int i = 0; i < g.n; ++i)
        if (g.isolated(i))
            throw contract_error("normalized_laplacian: node " + std::to_string(i) +
                                 " has degree 0 (degenerate degree)");
    Tensor lap = Tensor::identity(g.n);
    for (int i = 0; i < g.n; ++i) {
        const double di = 1.0 / std::sqrt(static_cast<double>(g.degree(i)));
        for (int p = g.offsets[i]; p < g.offsets[i + 1]; ++p) {
            const int j = g.neighbors[p];
            lap(i, j) -= di / std::sqrt(static_cast<double>(g.degree(j)));
        }
    }
    return lap;
}

// ----------------------------- splits -----------------------------

struct SplitSpec {
    enum class Mode { transductive, inductive };
    Mode mode = Mode::transductive;
    std::vector<int> train_labeled;
    std::vector<int> train_soft;
    std::vector<int> validation;
    std::vector<int> test;
    std::vector<int> observed;  // inductive only; empty means "all nodes"
};

// 20-labeled-per-class protocol. Transductive: every node outside the
// labeled and validation sets is a test node, and the same pool receives
// teacher soft targets during distillation (their features and structure
// are visible in this setting; only labels are held out). Inductive:
// a holdout fraction is removed entirely (test = unobserved) and the
// remaining observed nodes are split as above, so all four sets are
// pairwise disjoint.
inline SplitSpec make_split(const Graph& g, SplitSpec::Mode mode, std::uint64_t seed,
                            int labeled_per_class = 20, int validation_count = 30,
                            double inductive_holdout = 0.2) {
    Rng rng(splitmix64(seed) ^ 0x5eedc0deULL);
    SplitSpec s;
    s.mode = mode;

    std::vector<int> pool(g.n);
    for (int i = 0; i < g.n; ++i) pool[i] = i;

    std::vector<char> unobserved(g.n, 0);
    if (mode == SplitSpec::Mode::inductive) {
        std::vector<int> shuffled = pool;
        rng.shuffle(shuffled);
        const int holdout = std::max(1, static_cast<int>(std::floor(inductive_holdout * g.n)));
        s.test.assign(shuffled.begin(), shuffled.begin() + holdout);
        std::sort(s.test.begin(), s.test.end());
        for (int id : s.test) unobserved[id] = 1;
        for (int i = 0; i < g.n; ++i)
            if (!unobserved[i]) s.observed.push_back(i);
    }

    std::vector<std::vector<int>> by_class(g.num_classes);
    for (int i = 0; i < g.n; ++i)
        if (!unobserved[i] && g.labels[i] != kUnlabeled) by_class[g.labels[i]].push_back(i);

    std::vector<char> taken(g.n, 0);
    for (int c = 0; c < g.num_classes; ++c) {
        if (static_cast<int>(by_class[c].size()) < labeled_per_class)
            throw contract_error("make_split: class " + std::to_string(c) + " has only " +
                                 std::to_string(by_class[c].size()) + " labeled nodes, need " +
                                 std::to_string(labeled_per_class));
        rng.shuffle(by_class[c]);
        for (int k = 0; k < labeled_per_class; ++k) {
            s.train_labeled.push_back(by_class[c][k]);
            taken[by_class[c][k]] = 1;
        }
    }
    std::sort(s.train_labeled.begin(), s.train_labeled.end());

    std::vector<int> val_pool;
    for (int i = 0; i < g.n; ++i)
        if (!unobserved[i] && !taken[i]) val_pool.push_back(i);
    if (static_cast<int>(val_pool.size()) < validation_count)
        throw contract_error("make_split: not enough nodes for validation set");
    rng.shuffle(val_pool);
    s.validation.assign(val_pool.begin(), val_pool.begin() + validation_count);
    std::sort(s.validation.begin(), s.validation.end());
    for (int id : s.validation) taken[id] = 1;

    std::vector<int> rest;
    for (int i = 0; i < g.n; ++i)
        if (!unobserved[i] && !taken[i]) rest.push_back(i);

    if (mode == SplitSpec::Mode::transductive) {
        if (rest.empty())
            throw contract_error("make_split: no nodes left for the test set (graph too small for " +
                                 std::to_string(labeled_per_class) + "/class + " +
                                 std::to_string(validation_count) + " validation)");
        s.test = rest;
        s.train_soft = rest;
    } else {
        s.train_soft = rest;
    }
    return s;
}

// Subgraph on the observed nodes with a dense id remap. remap[old] = new
// id, or -1 when the node is outside the subgraph.
struct InducedSubgraph {
    Graph graph;
    std::vector<int> remap;     // size = original n
    std::vector<int> original;  // size = subgraph n
};

inline InducedSubgraph induced_subgraph(const Graph& g, const std::vector<int>& observed) {
    if (observed.empty()) throw contract_error("induced_subgraph: empty observed set");
    InducedSubgraph out;
    out.remap.assign(g.n, -1);
    out.original = observed;
    std::sort(out.original.begin(), out.original.end());
    for (std::size_t k = 0; k < out.original.size(); ++k) {
        const int id = out.original[k];
        if (id < 0 || id >= g.n) throw contract_error("induced_subgraph: id out of range");
        if (out.remap[id] != -1) throw contract_error("induced_subgraph: duplicate id");
        out.remap[id] = static_cast<int>(k);
    }

    const int m = static_cast<int>(out.original.size());
    Tensor feats(m, g.features.cols);
    std::vector<int> labels(m);
    for (int k = 0; k < m; ++k) {
        const int id = out.original[k];
        for (int j = 0; j < g.features.cols; ++j) feats(k, j) = g.features(id, j);
        labels[k] = g.labels[id];
    }

    std::vector<Edge> edges;
    for (int k = 0; k < m; ++k) {
        const int id = out.original[k];
        for (int p = g.offsets[id]; p < g.offsets[id + 1]; ++p) {
            const int j = g.neighbors[p];
            if (out.remap[j] != -1 && id < j) edges.push_back({k, out.remap[j]});
        }
    }
    out.graph = build_graph(edges, std::move(feats), std::move(labels), g.num_classes);
    return out;
}

// Convex noise blend X' = (1-p) X + p X_rand with X_rand uniform over each
// feature's observed range. p = 0 is the identity, p = 1 pure noise.
inline Tensor add_feature_noise(const Tensor& features, double fraction, std::uint64_t seed) {
    if (fraction < 0.0 || fraction > 1.0) throw contract_error("add_feature_noise: fraction outside [0,1]");
    if (fraction == 0.0) return features;
    Rng rng(splitmix64(seed) ^ 0x0115eULL);
    std::vector<double> lo(features.cols), span(features.cols);
    for (int j = 0; j < features.cols; ++j) {
        double mn = features(0, j), mx = features(0, j);
        for (int i = 1; i < features.rows; ++i) {
            mn = std::min(mn, features(i, j));
            mx = std::max(mx, features(i, j));
        }
        lo[j] = mn;
        span[j] = (mx > mn) ? (mx - mn) : 1.0;
    }
    Tensor out(features.rows, features.cols);
    for (int i = 0; i < features.rows; ++i)
        for (int j = 0; j < features.cols; ++j) {
            const double r = lo[j] + span[j] * rng.uniform01();
            out(i, j) = (1.0 - fraction) * features(i, j) + fraction * r;
        }
    return out;
}

}  // namespace kmp
