#pragma once

#include <vector>

#include "kmp/data_io.hpp"
#include "kmp/graph.hpp"

namespace fixtures {

inline kmp::Graph path2() {
    kmp::Tensor feats = kmp::Tensor::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    return kmp::build_graph({{0, 1}}, feats, {0, 1}, 2);
}

inline kmp::Graph triangle() {
    kmp::Tensor feats(3, 2, 1.0);
    return kmp::build_graph({{0, 1}, {1, 2}, {0, 2}}, feats, {0, 0, 1}, 2);
}

inline kmp::Graph cycle4() {
    kmp::Tensor feats(4, 2, 1.0);
    return kmp::build_graph({{0, 1}, {1, 2}, {2, 3}, {3, 0}}, feats, {0, 0, 1, 1}, 2);
}

inline kmp::Graph star(int leaves) {
    std::vector<kmp::Edge> edges;
    for (int i = 1; i <= leaves; ++i) edges.push_back({0, i});
    kmp::Rng rng(7);
    kmp::Tensor feats = kmp::random_uniform(leaves + 1, 3, rng, -1.0, 1.0);
    std::vector<int> labels(leaves + 1, 0);
    labels[0] = 1;
    return kmp::build_graph(edges, feats, labels, 2);
}

// two disjoint edges -> two connected components
inline kmp::Graph two_components() {
    kmp::Tensor feats(4, 2, 0.5);
    return kmp::build_graph({{0, 1}, {2, 3}}, feats, {0, 0, 1, 1}, 2);
}

inline kmp::Graph random_graph(int n, double p, std::uint64_t seed, int feat_dim = 3) {
    kmp::Rng rng(seed);
    std::vector<kmp::Edge> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.uniform01() < p) edges.push_back({i, j});
    kmp::Tensor feats = kmp::random_uniform(n, feat_dim, rng, -1.0, 1.0);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) labels[i] = static_cast<int>(rng.randint(2));
    return kmp::build_graph(edges, feats, labels, 2);
}

// Hand-made 12-node fixture: two 6-node communities bridged by one edge.
// Mirrors the on-disk bundle under data/fixtures/tiny12.
inline kmp::DatasetBundle tiny12() {
    const std::vector<kmp::Edge> edges = {
        {0, 1}, {0, 2}, {1, 2}, {1, 3}, {2, 4}, {3, 4}, {3, 5}, {4, 5},  // community A
        {6, 7}, {6, 8}, {7, 8}, {7, 9}, {8, 10}, {9, 10}, {9, 11}, {10, 11},  // community B
        {5, 6},  // bridge
    };
    kmp::Tensor feats(12, 4);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 4; ++j) {
            const int cls = i < 6 ? 0 : 1;
            feats(i, j) = 0.25 * ((i * 4 + j) % 7) - 0.75 + (j == cls ? 1.0 : 0.0);
        }
    std::vector<int> labels;
    for (int i = 0; i < 12; ++i) labels.push_back(i < 6 ? 0 : 1);
    kmp::DatasetBundle b;
    b.name = "tiny12";
    b.provenance = "hand-made two-community test fixture";
    b.graph = kmp::build_graph(edges, feats, labels, 2);
    return b;
}

// Small SBM bundle shared by the pipeline tests: 4 blocks, informative
// structure, moderately informative features.
inline kmp::DatasetBundle sbm_small(std::uint64_t seed = 11, double offset = 1.0) {
    return kmp::generate_sbm({60, 60, 60, 60}, 0.2, 0.02, 16, seed, offset);
}

}  // namespace fixtures
