#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tailaug/core/gradcheck.hpp"
#include "tailaug/core/graph.hpp"
#include "tailaug/core/kernels.hpp"
#include "tailaug/core/optim.hpp"
#include "tailaug/core/rng.hpp"
#include "tailaug/nn/layers.hpp"
#include "tailaug/nn/transformer.hpp"

using namespace tailaug;

namespace {

Tensor random_tensor(int r, int c, Rng& rng) {
    Tensor t(r, c);
    for (double& v : t.data) v = rng.normal();
    return t;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (int i = 0; i < a.size(); ++i)
        if (a.data[i] != b.data[i]) return false;
    return true;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        int m = 3 + static_cast<int>(rng.randint(90));
        int k = 3 + static_cast<int>(rng.randint(90));
        int n = 3 + static_cast<int>(rng.randint(90));
        Tensor a = random_tensor(m, k, rng), b = random_tensor(k, n, rng);
        Tensor bt = random_tensor(n, k, rng), at = random_tensor(k, m, rng);

        Tensor c1(m, n), c2(m, n);
        kernels::serial::matmul_nn(a.ptr(), b.ptr(), c1.ptr(), m, k, n, false);
        kernels::par::matmul_nn(a.ptr(), b.ptr(), c2.ptr(), m, k, n, false);
        CHECK(bitwise_equal(c1, c2));

        kernels::serial::matmul_nt(a.ptr(), bt.ptr(), c1.ptr(), m, k, n, false);
        kernels::par::matmul_nt(a.ptr(), bt.ptr(), c2.ptr(), m, k, n, false);
        CHECK(bitwise_equal(c1, c2));

        kernels::serial::matmul_tn(at.ptr(), b.ptr(), c1.ptr(), m, k, n, false);
        kernels::par::matmul_tn(at.ptr(), b.ptr(), c2.ptr(), m, k, n, false);
        CHECK(bitwise_equal(c1, c2));

        Tensor x = random_tensor(m, n, rng), y = random_tensor(m, n, rng);
        Tensor o1(m, n), o2(m, n);
        kernels::serial::softmax_rows(x.ptr(), o1.ptr(), m, n);
        kernels::par::softmax_rows(x.ptr(), o2.ptr(), m, n);
        CHECK(bitwise_equal(o1, o2));
        kernels::serial::vtanh(x.ptr(), o1.ptr(), x.size());
        kernels::par::vtanh(x.ptr(), o2.ptr(), x.size());
        CHECK(bitwise_equal(o1, o2));
        kernels::serial::mul(x.ptr(), y.ptr(), o1.ptr(), x.size());
        kernels::par::mul(x.ptr(), y.ptr(), o2.ptr(), x.size());
        CHECK(bitwise_equal(o1, o2));
    }
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(3);
    Tensor x = random_tensor(7, 13, rng);
    Tensor y(7, 13);
    kernels::softmax_rows(x.ptr(), y.ptr(), 7, 13);
    for (int i = 0; i < 7; ++i) {
        double s = 0;
        for (int j = 0; j < 13; ++j) s += y.at(i, j);
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("gradcheck: elementary ops composed") {
    Rng rng(42);
    ParamSet ps;
    Param& A = ps.add("A", random_tensor(4, 5, rng));
    Param& B = ps.add("B", random_tensor(5, 3, rng));
    Param& v = ps.add("v", random_tensor(1, 3, rng));
    Param& c = ps.add("c", random_tensor(4, 1, rng));

    auto build = [&](Graph& g) {
        auto x = ops::matmul(g, g.param(A), g.param(B));
        x = ops::add_rowvec(g, x, g.param(v));
        x = ops::vtanh(g, x);
        x = ops::mul_colvec(g, x, g.param(c));
        auto s = ops::sigmoid(g, x);
        auto r = ops::relu(g, ops::add_scalar(g, x, 0.1));
        auto e = ops::vexp(g, ops::scale(g, x, 0.3));
        auto mixed = ops::mul(g, ops::add(g, s, r), e);
        auto sq = ops::vsqrt(g, ops::add_scalar(g, ops::mul(g, mixed, mixed), 1.0));
        return ops::mean_all(g, sq);
    };
    auto loss_fn = [&]() {
        Graph g;
        return build(g)->val.data[0];
    };
    auto grad_fn = [&]() {
        Graph g;
        g.backward(build(g));
    };
    auto res = gradcheck(ps, loss_fn, grad_fn, 10, 7);
    CHECK(res.pass_rate() >= 0.99);
}

TEST_CASE("gradcheck: softmax, log-softmax, gather and picks") {
    Rng rng(43);
    ParamSet ps;
    Param& A = ps.add("A", random_tensor(6, 9, rng));
    std::vector<int> picks = {0, 3, 8, 1, 2, 5};
    std::vector<int> gather = {2, 0, 5, 5};

    auto build = [&](Graph& g) {
        auto sm = ops::softmax_rows(g, g.param(A));
        auto lsm = ops::log_softmax_rows(g, g.param(A));
        auto picked = ops::pick_per_row(g, lsm, picks);
        auto gathered = ops::gather_rows(g, sm, gather);
        auto joined = ops::concat_cols(g, {ops::sum_cols(g, gathered), ops::gather_rows(g, picked, gather)});
        auto pooled = ops::sum_rows(g, joined);
        return ops::mean_all(g, ops::mul(g, pooled, pooled));
    };
    auto loss_fn = [&]() {
        Graph g;
        return build(g)->val.data[0];
    };
    auto grad_fn = [&]() {
        Graph g;
        g.backward(build(g));
    };
    auto res = gradcheck(ps, loss_fn, grad_fn, 25, 9);
    CHECK(res.pass_rate() >= 0.99);
}

TEST_CASE("gradcheck: layer norm, embeddings, slices and stacks") {
    Rng rng(44);
    ParamSet ps;
    Param& table = ps.add("table", random_tensor(11, 6, rng));
    Param& gain = ps.add("gain", random_tensor(1, 6, rng));
    Param& bias = ps.add("bias", random_tensor(1, 6, rng));
    std::vector<int> ids = {3, 1, 4, 1, 5, 9, 2, 6};

    auto build = [&](Graph& g) {
        auto e = ops::embed(g, table, ids);
        auto ln = ops::layer_norm(g, e, g.param(gain), g.param(bias));
        auto left = ops::slice_cols(g, ln, 0, 3);
        auto right = ops::slice_cols(g, ln, 3, 6);
        auto stacked = ops::stack_rows(g, {left, right});
        auto cos = ops::cosine_rows(g, stacked, ops::vtanh(g, stacked));
        return ops::mean_all(g, cos);
    };
    auto loss_fn = [&]() {
        Graph g;
        return build(g)->val.data[0];
    };
    auto grad_fn = [&]() {
        Graph g;
        g.backward(build(g));
    };
    auto res = gradcheck(ps, loss_fn, grad_fn, 30, 10);
    CHECK(res.pass_rate() >= 0.99);
}

TEST_CASE("gaussian KL: closed-form values and non-negativity") {
    Graph g;
    // mu=(1,0), logvar=0 against N(0,I) -> 0.5
    auto mu = g.constant(Tensor::row({1.0, 0.0}));
    auto lv = g.constant(Tensor::row({0.0, 0.0}));
    auto kl = ops::gaussian_kl_std_rows(g, mu, lv);
    CHECK(kl->val.data[0] == doctest::Approx(0.5).epsilon(1e-12));

    // q == prior -> exactly 0
    auto mu2 = g.constant(Tensor::row({0.3, -0.7, 2.0}));
    auto lv2 = g.constant(Tensor::row({0.1, -0.2, 0.4}));
    auto kl2 = ops::gaussian_kl_rows(g, mu2, lv2, mu2, lv2);
    CHECK(kl2->val.data[0] == 0.0);

    // random pairs are non-negative
    Rng rng(5);
    for (int t = 0; t < 20; ++t) {
        auto a = g.constant(random_tensor(1, 4, rng));
        auto b = g.constant(random_tensor(1, 4, rng));
        auto c = g.constant(random_tensor(1, 4, rng));
        auto d = g.constant(random_tensor(1, 4, rng));
        CHECK(ops::gaussian_kl_rows(g, a, b, c, d)->val.data[0] >= 0.0);
    }
}

TEST_CASE("gradcheck: gaussian KL and reparameterized sample path") {
    Rng rng(46);
    ParamSet ps;
    Param& mu = ps.add("mu", random_tensor(3, 4, rng));
    Param& lv = ps.add("lv", random_tensor(3, 4, rng));
    Param& pm = ps.add("pm", random_tensor(3, 4, rng));
    Param& pl = ps.add("pl", random_tensor(3, 4, rng));
    Tensor eps = random_tensor(3, 4, rng);  // frozen noise

    auto build = [&](Graph& g) {
        auto m = g.param(mu), l = g.param(lv);
        auto z = ops::add(g, m, ops::mul(g, ops::vexp(g, ops::scale(g, l, 0.5)), g.constant(eps)));
        auto kl = ops::gaussian_kl_rows(g, m, l, g.param(pm), g.param(pl));
        auto zsq = ops::sum_cols(g, ops::mul(g, z, z));
        return ops::mean_all(g, ops::add(g, kl, zsq));
    };
    auto loss_fn = [&]() {
        Graph g;
        return build(g)->val.data[0];
    };
    auto grad_fn = [&]() {
        Graph g;
        g.backward(build(g));
    };
    auto res = gradcheck(ps, loss_fn, grad_fn, 12, 11);
    CHECK(res.pass_rate() >= 0.99);
}

TEST_CASE("gradcheck: GRU and LSTM cells") {
    Rng rng(47);
    ParamSet ps;
    nn::GruCell gru(ps, "gru", 5, 4, rng);
    nn::LstmCell lstm(ps, "lstm", 5, 4, rng);
    Tensor x0 = random_tensor(2, 5, rng), x1 = random_tensor(2, 5, rng);

    auto build = [&](Graph& g) {
        auto h = g.constant(Tensor(2, 4));
        h = gru.step(g, g.constant(x0), h);
        h = gru.step(g, g.constant(x1), h);
        nn::LstmCell::State s{g.constant(Tensor(2, 4)), g.constant(Tensor(2, 4))};
        s = lstm.step(g, g.constant(x0), s);
        s = lstm.step(g, g.constant(x1), s);
        auto joined = ops::concat_cols(g, {h, s.h});
        return ops::mean_all(g, ops::mul(g, joined, joined));
    };
    auto loss_fn = [&]() {
        Graph g;
        return build(g)->val.data[0];
    };
    auto grad_fn = [&]() {
        Graph g;
        g.backward(build(g));
    };
    auto res = gradcheck(ps, loss_fn, grad_fn, 15, 13);
    CHECK(res.pass_rate() >= 0.99);
}

TEST_CASE("gradcheck: transformer stack with cross attention") {
    Rng rng(48);
    ParamSet ps;
    nn::TransformerStack enc(ps, "enc", 1, 8, 2, false, rng);
    nn::TransformerStack dec(ps, "dec", 1, 8, 2, true, rng);
    Tensor src = random_tensor(3, 8, rng), tgt = random_tensor(4, 8, rng);

    auto build = [&](Graph& g) {
        auto memory = enc(g, g.constant(src), nullptr, false);
        auto out = dec(g, g.constant(tgt), memory, true);
        return ops::mean_all(g, ops::mul(g, out, out));
    };
    auto loss_fn = [&]() {
        Graph g;
        return build(g)->val.data[0];
    };
    auto grad_fn = [&]() {
        Graph g;
        g.backward(build(g));
    };
    auto res = gradcheck(ps, loss_fn, grad_fn, 6, 14);
    CHECK(res.pass_rate() >= 0.99);
}

TEST_CASE("Adam minimizes a quadratic") {
    Rng rng(50);
    ParamSet ps;
    Param& w = ps.add("w", random_tensor(1, 8, rng));
    Tensor target = random_tensor(1, 8, rng);
    Adam opt(ps, 0.05);
    double first = 0, last = 0;
    for (int it = 0; it < 200; ++it) {
        Graph g;
        auto diff = ops::sub(g, g.param(w), g.constant(target));
        auto loss = ops::mean_all(g, ops::mul(g, diff, diff));
        if (it == 0) first = loss->val.data[0];
        last = loss->val.data[0];
        g.backward(loss);
        opt.step();
    }
    CHECK(last < first * 1e-3);
}

TEST_CASE("rng determinism and fork independence") {
    Rng a(123), b(123);
    for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());
    Rng base(9);
    Rng f1 = base.fork("x"), f2 = base.fork("y"), f3 = base.fork("x");
    CHECK(f1.next() == f3.next());
    CHECK(f1.next() != f2.next());
    // uniform01 in range, categorical respects support
    Rng r(77);
    for (int i = 0; i < 1000; ++i) {
        double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    std::vector<double> w = {0.0, 1.0, 0.0};
    for (int i = 0; i < 50; ++i) CHECK(r.categorical(w) == 1);
}
