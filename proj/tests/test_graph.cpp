#include <catch2/catch_amalgamated.hpp>
#include <set>

#include "kmp/eigen_sym.hpp"
#include "kmp/graph.hpp"
#include "fixtures.hpp"

using namespace kmp;

TEST_CASE("single edge gives degree one on both ends", "[graph]") {
    const Graph g = fixtures::path2();
    REQUIRE(g.degree(0) == 1);
    REQUIRE(g.degree(1) == 1);
    REQUIRE(g.num_undirected_edges() == 1);
}

TEST_CASE("duplicate and reversed edges collapse", "[graph]") {
    Tensor feats(2, 1, 0.0);
    const Graph g = build_graph({{0, 1}, {1, 0}, {0, 1}}, feats, {0, 1}, 2);
    REQUIRE(g.num_undirected_edges() == 1);
    REQUIRE(g.degree(0) == 1);
}

TEST_CASE("triangle has all degrees two", "[graph]") {
    const Graph g = fixtures::triangle();
    for (int i = 0; i < 3; ++i) REQUIRE(g.degree(i) == 2);
}

TEST_CASE("self-loops are dropped at construction", "[graph]") {
    Tensor feats(2, 1, 0.0);
    const Graph g = build_graph({{0, 0}, {0, 1}}, feats, {0, 1}, 2);
    REQUIRE(g.degree(0) == 1);
}

TEST_CASE("out-of-range edge id is rejected", "[graph]") {
    Tensor feats(2, 1, 0.0);
    REQUIRE_THROWS_AS(build_graph({{0, 5}}, feats, {0, 1}, 2), contract_error);
}

TEST_CASE("gcn_norm of an isolated node is the unit self-loop", "[graph]") {
    Tensor feats(1, 1, 0.0);
    const Graph g = build_graph({}, feats, {0}, 1);
    const Tensor d = gcn_norm(g).to_dense();
    REQUIRE(d(0, 0) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("gcn_norm of the 2-node path is the half matrix", "[graph]") {
    const Tensor d = gcn_norm(fixtures::path2()).to_dense();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) REQUIRE(d(i, j) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("gcn_norm is exactly symmetric", "[graph]") {
    const Graph g = fixtures::random_graph(20, 0.2, 42);
    const Tensor d = gcn_norm(g).to_dense();
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) REQUIRE(d(i, j) == d(j, i));
}

TEST_CASE("mean_norm rows sum to one except isolated nodes", "[graph]") {
    Tensor feats(4, 1, 0.0);
    const Graph g = build_graph({{0, 1}, {0, 2}}, feats, {0, 0, 1, 1}, 2);
    const Tensor d = mean_norm(g).to_dense();
    for (int i = 0; i < 3; ++i) {
        double s = 0.0;
        for (int j = 0; j < g.n; ++j) s += d(i, j);
        REQUIRE(s == Catch::Approx(1.0).margin(1e-12));
    }
    for (int j = 0; j < g.n; ++j) REQUIRE(d(3, j) == 0.0);
}

TEST_CASE("normalized laplacian of the 2-node path", "[graph]") {
    const Tensor lap = normalized_laplacian(fixtures::path2());
    REQUIRE(lap(0, 0) == Catch::Approx(1.0));
    REQUIRE(lap(0, 1) == Catch::Approx(-1.0));
    REQUIRE(lap(1, 0) == Catch::Approx(-1.0));
    REQUIRE(lap(1, 1) == Catch::Approx(1.0));

    const EigenDecomposition dec = eigendecompose(lap);
    REQUIRE(dec.eigenvalues[0] == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(dec.eigenvalues[1] == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("laplacian rejects isolated nodes", "[graph]") {
    Tensor feats(3, 1, 0.0);
    const Graph g = build_graph({{0, 1}}, feats, {0, 0, 1}, 2);
    REQUIRE_THROWS_AS(normalized_laplacian(g), contract_error);
}

TEST_CASE("laplacian kernel: sqrt-degree vector is in the null space", "[graph]") {
    const Graph g = fixtures::random_graph(15, 0.4, 7);
    const Tensor lap = normalized_laplacian(g);
    // v_i = sqrt(deg_i): Delta v = 0 for any graph
    for (int i = 0; i < g.n; ++i) {
        double acc = 0.0;
        for (int j = 0; j < g.n; ++j) acc += lap(i, j) * std::sqrt(static_cast<double>(g.degree(j)));
        REQUIRE(acc == Catch::Approx(0.0).margin(1e-9));
    }
}

TEST_CASE("laplacian is positive semidefinite with eigenvalues in [0,2]", "[graph]") {
    const Graph g = fixtures::random_graph(25, 0.25, 99);
    const EigenDecomposition dec = eigendecompose(normalized_laplacian(g));
    REQUIRE(dec.eigenvalues.front() >= -1e-9);
    REQUIRE(dec.eigenvalues.back() <= 2.0 + 1e-9);
}

TEST_CASE("connected graph has a simple zero eigenvalue", "[graph]") {
    const EigenDecomposition dec = eigendecompose(normalized_laplacian(fixtures::cycle4()));
    REQUIRE(dec.eigenvalues[0] == Catch::Approx(0.0).margin(1e-10));
    REQUIRE(dec.eigenvalues[1] > 1e-6);
}

// ----------------------------- splits -----------------------------

namespace {
DatasetBundle seven_class_bundle() {
    std::vector<int> sizes(7, 60);
    return generate_sbm(sizes, 0.1, 0.01, 8, 3);
}
}  // namespace

TEST_CASE("20-per-class labeling on a 7-class graph yields 140 train nodes", "[split]") {
    const DatasetBundle b = seven_class_bundle();
    const SplitSpec s = make_split(b.graph, SplitSpec::Mode::transductive, 1);
    REQUIRE(s.train_labeled.size() == 140);
    REQUIRE(s.validation.size() == 30);
    REQUIRE(s.test.size() == static_cast<std::size_t>(b.graph.n) - 140 - 30);
}

TEST_CASE("split id sets are disjoint where the setting requires it", "[split]") {
    const DatasetBundle b = seven_class_bundle();
    auto as_set = [](const std::vector<int>& v) { return std::set<int>(v.begin(), v.end()); };

    const SplitSpec st = make_split(b.graph, SplitSpec::Mode::transductive, 5);
    auto lab = as_set(st.train_labeled), val = as_set(st.validation);
    for (int id : st.train_labeled) REQUIRE(val.count(id) == 0);
    for (int id : st.validation) REQUIRE(lab.count(id) == 0);
    for (int id : st.train_soft) {
        REQUIRE(lab.count(id) == 0);
        REQUIRE(val.count(id) == 0);
    }

    const SplitSpec si = make_split(b.graph, SplitSpec::Mode::inductive, 5);
    auto test = as_set(si.test), obs = as_set(si.observed);
    for (int id : si.test) REQUIRE(obs.count(id) == 0);
    for (int id : si.train_labeled) REQUIRE(obs.count(id) == 1);
    for (int id : si.validation) REQUIRE(obs.count(id) == 1);
    for (int id : si.train_soft) {
        REQUIRE(test.count(id) == 0);
        REQUIRE(obs.count(id) == 1);
    }
}

TEST_CASE("identical seed gives identical split", "[split]") {
    const DatasetBundle b = seven_class_bundle();
    const SplitSpec a = make_split(b.graph, SplitSpec::Mode::inductive, 17);
    const SplitSpec c = make_split(b.graph, SplitSpec::Mode::inductive, 17);
    REQUIRE(a.train_labeled == c.train_labeled);
    REQUIRE(a.train_soft == c.train_soft);
    REQUIRE(a.validation == c.validation);
    REQUIRE(a.test == c.test);
    const SplitSpec d = make_split(b.graph, SplitSpec::Mode::inductive, 18);
    REQUIRE(a.test != d.test);
}

TEST_CASE("class smaller than the labeling quota is an error", "[split]") {
    const DatasetBundle b = generate_sbm({30, 5}, 0.2, 0.05, 4, 2);
    REQUIRE_THROWS_AS(make_split(b.graph, SplitSpec::Mode::transductive, 1), contract_error);
}

// ----------------------------- induced subgraph -----------------------------

TEST_CASE("subgraph on all nodes is the same graph", "[subgraph]") {
    const Graph g = fixtures::random_graph(12, 0.3, 8);
    std::vector<int> all(g.n);
    for (int i = 0; i < g.n; ++i) all[i] = i;
    const InducedSubgraph sub = induced_subgraph(g, all);
    REQUIRE(sub.graph.n == g.n);
    REQUIRE(sub.graph.neighbors == g.neighbors);
    REQUIRE(sub.graph.offsets == g.offsets);
}

TEST_CASE("triangle minus one node is a single edge", "[subgraph]") {
    const InducedSubgraph sub = induced_subgraph(fixtures::triangle(), {0, 1});
    REQUIRE(sub.graph.n == 2);
    REQUIRE(sub.graph.num_undirected_edges() == 1);
}

TEST_CASE("empty observed set is rejected", "[subgraph]") {
    REQUIRE_THROWS_AS(induced_subgraph(fixtures::triangle(), {}), contract_error);
}

TEST_CASE("subgraph degrees match a brute-force edge filter", "[subgraph]") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Graph g = fixtures::random_graph(10, 0.35, 100 + seed);
        Rng rng(seed);
        std::vector<int> observed;
        for (int i = 0; i < g.n; ++i)
            if (rng.uniform01() < 0.6) observed.push_back(i);
        if (observed.empty()) observed.push_back(0);

        const InducedSubgraph sub = induced_subgraph(g, observed);
        // brute force: count edges with both endpoints observed
        std::set<int> obs(observed.begin(), observed.end());
        int expect_edges = 0;
        for (int u = 0; u < g.n; ++u)
            for (int p = g.offsets[u]; p < g.offsets[u + 1]; ++p) {
                const int v = g.neighbors[p];
                if (u < v && obs.count(u) && obs.count(v)) ++expect_edges;
            }
        REQUIRE(sub.graph.num_undirected_edges() == expect_edges);
        for (std::size_t k = 0; k < observed.size(); ++k) {
            const int orig = sub.original[k];
            int expect_deg = 0;
            for (int p = g.offsets[orig]; p < g.offsets[orig + 1]; ++p)
                if (obs.count(g.neighbors[p])) ++expect_deg;
            REQUIRE(sub.graph.degree(static_cast<int>(k)) == expect_deg);
        }
        // remap is a bijection onto [0, |observed|)
        std::set<int> image;
        for (int id : observed) image.insert(sub.remap[id]);
        REQUIRE(image.size() == observed.size());
        REQUIRE(*image.begin() == 0);
        REQUIRE(*image.rbegin() == static_cast<int>(observed.size()) - 1);
    }
}

// ----------------------------- feature noise -----------------------------

TEST_CASE("zero noise fraction is the identity", "[noise]") {
    Rng rng(4);
    const Tensor x = random_uniform(10, 5, rng, -2.0, 3.0);
    const Tensor y = add_feature_noise(x, 0.0, 9);
    REQUIRE(y.v == x.v);
}

TEST_CASE("full noise decorrelates from the input", "[noise]") {
    Rng rng(6);
    const Tensor x = random_uniform(200, 5, rng, -1.0, 1.0);
    const Tensor y = add_feature_noise(x, 1.0, 31);
    // sample correlation over the first 1000 entries
    const int n = 1000;
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) {
        mx += x.v[i];
        my += y.v[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        sxy += (x.v[i] - mx) * (y.v[i] - my);
        sxx += (x.v[i] - mx) * (x.v[i] - mx);
        syy += (y.v[i] - my) * (y.v[i] - my);
    }
    const double r = sxy / std::sqrt(sxx * syy);
    REQUIRE(std::abs(r) < 0.1);
}

TEST_CASE("noise is deterministic per seed and stays in feature range", "[noise]") {
    Rng rng(8);
    const Tensor x = random_uniform(20, 3, rng, 0.0, 2.0);
    const Tensor a = add_feature_noise(x, 0.3, 77);
    const Tensor b = add_feature_noise(x, 0.3, 77);
    REQUIRE(a.v == b.v);
    const Tensor c = add_feature_noise(x, 0.3, 78);
    REQUIRE(a.v != c.v);
}
