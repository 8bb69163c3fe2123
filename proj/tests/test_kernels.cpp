#include <catch2/catch_amalgamated.hpp>

#include "kmp/adam.hpp"
#include "kmp/kernels.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace kmp;

namespace {
Tensor row(std::initializer_list<double> vals) { return Tensor(1, static_cast<int>(vals.size()), vals); }
}  // namespace

TEST_CASE("gaussian kernel of identical vectors is exactly 1", "[kernels]") {
    const KernelSpec spec = KernelSpec::gaussian(0.7);
    const Tensor h = row({0.3, -1.2, 0.5});
    REQUIRE(kernel_eval(spec, h, h) == 1.0);
}

TEST_CASE("gaussian kernel hand value", "[kernels]") {
    const KernelSpec spec = KernelSpec::gaussian(0.5);
    // |h_a - h_b|^2 = 2, T = 0.5 -> exp(-2/2) = e^-1
    REQUIRE(kernel_eval(spec, row({1, 0}), row({0, 1})) == Catch::Approx(0.3678794411714423).margin(1e-12));
}

TEST_CASE("polynomial kernel hand value", "[kernels]") {
    const KernelSpec spec = KernelSpec::polynomial(1.0, 2);
    REQUIRE(kernel_eval(spec, row({1, 1}), row({1, 1})) == Catch::Approx(9.0).margin(1e-12));
}

TEST_CASE("sigmoid kernel of orthogonal vectors is one half", "[kernels]") {
    const KernelSpec spec = KernelSpec::sigmoid(1.0, 0.0);
    REQUIRE(kernel_eval(spec, row({1, 0}), row({0, 1})) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("reverse kernel with zero weights gives h/4 under sigmoid", "[kernels]") {
    const int h = 6;
    const Tensor w(h, h, 0.0);
    Rng rng(2);
    const Tensor a = random_uniform(1, h, rng), b = random_uniform(1, h, rng);
    REQUIRE(reverse_kernel_eval(w, a, b) == Catch::Approx(h / 4.0).margin(1e-12));
}

TEST_CASE("reverse kernel is symmetric in its arguments", "[kernels]") {
    Rng rng(3);
    const Tensor w = random_normal(5, 5, rng);
    const Tensor a = random_uniform(1, 5, rng, -1.0, 1.0), b = random_uniform(1, 5, rng, -1.0, 1.0);
    REQUIRE(reverse_kernel_eval(w, a, b) == Catch::Approx(reverse_kernel_eval(w, b, a)).margin(1e-12));
}

TEST_CASE("randomized kernel concentrates as t grows", "[kernels]") {
    Rng data_rng(5);
    const Tensor a = random_uniform(1, 4, data_rng, -1.0, 1.0), b = random_uniform(1, 4, data_rng, -1.0, 1.0);
    auto spread = [&](int t) {
        std::vector<double> vals;
        for (std::uint64_t seed = 0; seed < 12; ++seed) {
            Rng rng(seed);
            vals.push_back(kernel_eval(KernelSpec::randomized(t, 4, rng), a, b));
        }
        double mean = 0;
        for (double v : vals) mean += v;
        mean /= vals.size();
        double var = 0;
        for (double v : vals) var += (v - mean) * (v - mean);
        return var / (vals.size() - 1);
    };
    REQUIRE(spread(64) < spread(4));
}

// ----------------------------- mapping matrices -----------------------------

namespace {
Var build_gram(Tape& t, const KernelSpec& spec, Var hidden) {
    TapedKernel tk = TapedKernel::bind(t, spec, false);
    return mapping_matrix(t, spec, tk, hidden);
}
}  // namespace

TEST_CASE("gaussian gram of identical rows is all ones", "[kernels]") {
    Tensor h(3, 4);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) h(i, j) = 0.2 * j;
    Tape t;
    const Tensor& mat = t.val(build_gram(t, KernelSpec::gaussian(1.0), t.leaf(h)));
    for (double v : mat.v) REQUIRE(v == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("batched gram matches the pairwise brute-force loop for every kernel", "[kernels]") {
    Rng rng(7);
    const Tensor h = random_uniform(5, 6, rng, -1.0, 1.0);
    Rng krng(8);
    const std::vector<KernelSpec> specs = {
        KernelSpec::gaussian(0.8), KernelSpec::polynomial(0.5, 3), KernelSpec::sigmoid(1.3, -0.2),
        KernelSpec::randomized(6, 6, krng), KernelSpec::reverse(6, krng)};
    for (const KernelSpec& spec : specs) {
        Tape t;
        const Tensor& mat = t.val(build_gram(t, spec, t.leaf(h)));
        const Tensor ref = oracle::gram_bruteforce(spec, h);
        INFO(kernel_kind_name(spec.kind));
        for (std::size_t i = 0; i < ref.size(); ++i)
            REQUIRE(mat.v[i] == Catch::Approx(ref.v[i]).margin(1e-10));
    }
}

TEST_CASE("gaussian and polynomial grams are exactly symmetric with unit gaussian diagonal",
          "[kernels]") {
    Rng rng(9);
    const Tensor h = random_uniform(6, 5, rng, -2.0, 2.0);
    for (const KernelSpec& spec : {KernelSpec::gaussian(1.5), KernelSpec::polynomial(1.0, 2)}) {
        Tape t;
        const Tensor& mat = t.val(build_gram(t, spec, t.leaf(h)));
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) REQUIRE(mat(i, j) == mat(j, i));
        if (spec.kind == KernelKind::gaussian) {
            for (int i = 0; i < 6; ++i) REQUIRE(mat(i, i) == 1.0);
            for (double v : mat.v) {
                REQUIRE(v > 0.0);
                REQUIRE(v <= 1.0);
            }
        }
    }
}

TEST_CASE("mapping matrix needs at least two rows", "[kernels]") {
    Tape t;
    Var h = t.leaf(Tensor(1, 4));
    REQUIRE_THROWS_AS(build_gram(t, KernelSpec::gaussian(1.0), h), contract_error);
}

TEST_CASE("mapping distance examples", "[kernels]") {
    Tape t;
    Var a = t.leaf(Tensor::from_rows({{1, 0}, {0, 1}}));
    Var b = t.leaf(Tensor(2, 2, 0.0));
    REQUIRE(t.scalar(mapping_distance(t, a, a)) == 0.0);
    REQUIRE(t.scalar(mapping_distance(t, a, b)) == Catch::Approx(0.5).margin(1e-12));  // 2 / m^2
}

TEST_CASE("mapping distance is nonnegative", "[kernels]") {
    Rng rng(11);
    Tape t;
    Var a = t.leaf(random_uniform(4, 4, rng, -1.0, 1.0));
    Var b = t.leaf(random_uniform(4, 4, rng, -1.0, 1.0));
    REQUIRE(t.scalar(mapping_distance(t, a, b)) >= 0.0);
}

TEST_CASE("mapping loss gradient w.r.t. student hidden matches finite differences", "[kernels]") {
    Rng rng(13);
    Tensor hs = random_uniform(3, 4, rng, -1.0, 1.0);
    const Tensor ht = random_uniform(3, 4, rng, -1.0, 1.0);
    for (KernelKind kind : {KernelKind::gaussian, KernelKind::polynomial, KernelKind::sigmoid}) {
        KernelSpec spec;
        switch (kind) {
            case KernelKind::gaussian: spec = KernelSpec::gaussian(0.9); break;
            case KernelKind::polynomial: spec = KernelSpec::polynomial(1.0, 2); break;
            default: spec = KernelSpec::sigmoid(0.7, 0.1); break;
        }
        auto loss_fn = [&]() {
            Tape t;
            Var hv = t.leaf(hs, true);
            Var mat_s = build_gram(t, spec, hv);
            Var mat_t = build_gram(t, spec, t.leaf(ht));
            return t.scalar(mapping_distance(t, mat_s, mat_t));
        };
        Tape t;
        Var hv = t.leaf(hs, true);
        Var mat_s = build_gram(t, spec, hv);
        Var mat_t = build_gram(t, spec, t.leaf(ht));
        t.backward(mapping_distance(t, mat_s, mat_t));
        INFO(kernel_kind_name(kind));
        REQUIRE(oracle::max_rel_error(t.grad(hv), oracle::fd_gradient(loss_fn, hs)) < 1e-4);
    }
}

TEST_CASE("teacher-side rows receive no gradient", "[kernels]") {
    Rng rng(15);
    Tensor hs = random_uniform(3, 4, rng, -1.0, 1.0);
    const Tensor ht = random_uniform(3, 4, rng, -1.0, 1.0);
    Tape t;
    Var hv = t.leaf(hs, true);
    Var teacher = t.leaf(ht, false);  // detached
    const KernelSpec spec = KernelSpec::gaussian(1.0);
    Var mat_s = build_gram(t, spec, hv);
    Var mat_t = build_gram(t, spec, teacher);
    t.backward(mapping_distance(t, mat_s, mat_t));
    REQUIRE_THROWS_AS(t.grad(teacher), contract_error);  // no buffer was ever tracked
    REQUIRE(t.grad(hv).max_abs() > 0.0);
}

TEST_CASE("reverse kernel gradient w.r.t. W_k matches finite differences", "[kernels]") {
    Rng rng(17);
    Tensor w = random_normal(4, 4, rng, 0.4);
    const Tensor h = random_uniform(3, 4, rng, -1.0, 1.0);
    KernelSpec spec = KernelSpec::reverse(4, rng);
    auto loss_fn = [&]() {
        Tape t;
        spec.reverse_w = w;
        TapedKernel tk = TapedKernel::bind(t, spec, true);
        Var mat = mapping_matrix(t, spec, tk, t.leaf(h));
        return t.scalar(t.mean(t.square(mat)));
    };
    Tape t;
    spec.reverse_w = w;
    TapedKernel tk = TapedKernel::bind(t, spec, true);
    Var mat = mapping_matrix(t, spec, tk, t.leaf(h));
    t.backward(t.mean(t.square(mat)));
    REQUIRE(oracle::max_rel_error(t.grad(tk.reverse_w), oracle::fd_gradient(loss_fn, w)) < 1e-4);
}

// ----------------------------- reconstruction loss -----------------------------

TEST_CASE("zero decoder makes the reconstruction loss the mean squared input", "[kernels]") {
    Rng rng(19);
    const Tensor h = random_uniform(4, 3, rng, -1.0, 1.0);
    const Tensor x0 = random_uniform(4, 5, rng, -1.0, 1.0);
    Tape t;
    Var w = t.leaf(random_normal(3, 3, rng), false);
    Var dec = t.leaf(Tensor(3, 5, 0.0), false);
    const double loss = t.scalar(reconstruction_loss(t, w, dec, t.leaf(h), t.leaf(x0)));
    double expect = 0.0;
    for (double v : x0.v) expect += v * v;
    expect /= x0.size();
    REQUIRE(loss == Catch::Approx(expect).margin(1e-12));
}

TEST_CASE("reconstruction loss is nonnegative and differentiable", "[kernels]") {
    Rng rng(21);
    Tensor w = random_normal(3, 3, rng, 0.5);
    Tensor dec = random_normal(3, 4, rng, 0.5);
    const Tensor h = random_uniform(5, 3, rng, -1.0, 1.0);
    const Tensor x0 = random_uniform(5, 4, rng, -1.0, 1.0);
    auto loss_fn = [&]() {
        Tape t;
        Var wv = t.leaf(w, true), dv = t.leaf(dec, true);
        return t.scalar(reconstruction_loss(t, wv, dv, t.leaf(h), t.leaf(x0)));
    };
    REQUIRE(loss_fn() >= 0.0);
    Tape t;
    Var wv = t.leaf(w, true), dv = t.leaf(dec, true);
    t.backward(reconstruction_loss(t, wv, dv, t.leaf(h), t.leaf(x0)));
    REQUIRE(oracle::max_rel_error(t.grad(wv), oracle::fd_gradient(loss_fn, w)) < 1e-4);
    REQUIRE(oracle::max_rel_error(t.grad(dv), oracle::fd_gradient(loss_fn, dec)) < 1e-4);
}

TEST_CASE("alternating optimization drives the reconstruction loss down", "[kernels]") {
    Rng rng(23);
    const Tensor h = random_uniform(8, 4, rng, -1.0, 1.0);
    const Tensor x0 = h;  // reconstruct the inputs from themselves
    Tensor w = random_normal(4, 4, rng, 0.5);
    Tensor dec = random_normal(4, 4, rng, 0.5);
    Adam opt(0.05, 0.0);
    std::vector<double> losses;
    for (int step = 0; step < 100; ++step) {
        Tape t;
        Var wv = t.leaf(w, true), dv = t.leaf(dec, true);
        Var loss = reconstruction_loss(t, wv, dv, t.leaf(h), t.leaf(x0));
        losses.push_back(t.scalar(loss));
        t.backward(loss);
        opt.step({&w, &dec}, {&t.grad(wv), &t.grad(dv)});
    }
    REQUIRE(losses.back() < 0.5 * losses.front());
    // close to monotone: tolerate occasional small upticks
    int upticks = 0;
    for (std::size_t i = 1; i < losses.size(); ++i)
        if (losses[i] > losses[i - 1] * 1.0001) ++upticks;
    REQUIRE(upticks <= 5);
}

// ----------------------------- diagnostic propagation -----------------------------

TEST_CASE("nhk_propagate matches a brute-force neighbor walk", "[kernels]") {
    const Graph g = fixtures::random_graph(8, 0.4, 25);
    Rng rng(26);
    const Tensor h = random_uniform(g.n, 3, rng, -1.0, 1.0);
    const KernelSpec spec = KernelSpec::gaussian(1.0);
    const Tensor out = nhk_propagate(g, spec, h);

    Tensor ra(1, 3), rb(1, 3);
    for (int a = 0; a < g.n; ++a) {
        Tensor expect(1, 3);
        for (int p = g.offsets[a]; p < g.offsets[a + 1]; ++p) {
            const int b = g.neighbors[p];
            for (int j = 0; j < 3; ++j) {
                ra(0, j) = h(a, j);
                rb(0, j) = h(b, j);
            }
            const double w = kernel_eval(spec, ra, rb) / g.degree(b);
            for (int j = 0; j < 3; ++j) expect(0, j) += w * h(b, j);
        }
        for (int j = 0; j < 3; ++j) REQUIRE(out(a, j) == Catch::Approx(expect(0, j)).margin(1e-12));
    }
}
