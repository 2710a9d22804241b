#pragma once

#include <string>
#include <vector>

#include "tailaug/core/graph.hpp"
#include "tailaug/core/rng.hpp"

namespace tailaug::nn {

// x @ W + b
struct Linear {
    Param* W = nullptr;
    Param* b = nullptr;

    Linear() = default;
    Linear(ParamSet& ps, const std::string& name, int in, int out, Rng& rng) {
        W = &ps.add(name + ".W", Tensor::xavier(in, out, rng));
        b = &ps.add(name + ".b", Tensor(1, out));
    }

    NodeP operator()(Graph& g, NodeP x) const {
        return ops::add_rowvec(g, ops::matmul(g, x, g.param(*W)), g.param(*b));
    }
};

// Gated recurrent unit; step() maps (B x in, B x hidden) -> B x hidden.
struct GruCell {
    Param* Wx = nullptr;  // in x 3h, gate order [r | z | n]
    Param* Wh = nullptr;  // h x 3h
    Param* bx = nullptr;
    Param* bh = nullptr;  // separate hidden bias so the reset gate scales it
    int hidden = 0;

    GruCell() = default;
    GruCell(ParamSet& ps, const std::string& name, int in, int h, Rng& rng) : hidden(h) {
        Wx = &ps.add(name + ".Wx", Tensor::xavier(in, 3 * h, rng));
        Wh = &ps.add(name + ".Wh", Tensor::xavier(h, 3 * h, rng));
        bx = &ps.add(name + ".bx", Tensor(1, 3 * h));
        bh = &ps.add(name + ".bh", Tensor(1, 3 * h));
    }

    NodeP step(Graph& g, NodeP x, NodeP h) const {
        auto gx = ops::add_rowvec(g, ops::matmul(g, x, g.param(*Wx)), g.param(*bx));
        auto gh = ops::add_rowvec(g, ops::matmul(g, h, g.param(*Wh)), g.param(*bh));
        auto r = ops::sigmoid(g, ops::add(g, ops::slice_cols(g, gx, 0, hidden), ops::slice_cols(g, gh, 0, hidden)));
        auto z = ops::sigmoid(
            g, ops::add(g, ops::slice_cols(g, gx, hidden, 2 * hidden), ops::slice_cols(g, gh, hidden, 2 * hidden)));
        auto n = ops::vtanh(g, ops::add(g, ops::slice_cols(g, gx, 2 * hidden, 3 * hidden),
                                        ops::mul(g, r, ops::slice_cols(g, gh, 2 * hidden, 3 * hidden))));
        // h' = (1-z)*n + z*h
        auto one_minus_z = ops::add_scalar(g, ops::scale(g, z, -1.0), 1.0);
        return ops::add(g, ops::mul(g, one_minus_z, n), ops::mul(g, z, h));
    }
};

// LSTM cell, gate order [i | f | g | o].
struct LstmCell {
    Param* Wx = nullptr;
    Param* Wh = nullptr;
    Param* b = nullptr;
    int hidden = 0;

    LstmCell() = default;
    LstmCell(ParamSet& ps, const std::string& name, int in, int h, Rng& rng) : hidden(h) {
        Wx = &ps.add(name + ".Wx", Tensor::xavier(in, 4 * h, rng));
        Wh = &ps.add(name + ".Wh", Tensor::xavier(h, 4 * h, rng));
        Tensor bias(1, 4 * h);
        for (int j = h; j < 2 * h; ++j) bias.data[j] = 1.0;  // forget-gate bias
        b = &ps.add(name + ".b", std::move(bias));
    }

    struct State {
        NodeP h;
        NodeP c;
    };

    State step(Graph& g, NodeP x, State s) const {
        auto pre = ops::add_rowvec(
            g, ops::add(g, ops::matmul(g, x, g.param(*Wx)), ops::matmul(g, s.h, g.param(*Wh))), g.param(*b));
        auto i = ops::sigmoid(g, ops::slice_cols(g, pre, 0, hidden));
        auto f = ops::sigmoid(g, ops::slice_cols(g, pre, hidden, 2 * hidden));
        auto cand = ops::vtanh(g, ops::slice_cols(g, pre, 2 * hidden, 3 * hidden));
        auto o = ops::sigmoid(g, ops::slice_cols(g, pre, 3 * hidden, 4 * hidden));
        State out;
        out.c = ops::add(g, ops::mul(g, f, s.c), ops::mul(g, i, cand));
        out.h = ops::mul(g, o, ops::vtanh(g, out.c));
        return out;
    }
};

// Keeps the previous state where mask == 0 (padding positions).
inline NodeP masked_update(Graph& g, NodeP fresh, NodeP prev, NodeP mask_col) {
    auto kept = ops::mul_colvec(g, fresh, mask_col);
    auto inv = ops::add_scalar(g, ops::scale(g, mask_col, -1.0), 1.0);
    return ops::add(g, kept, ops::mul_colvec(g, prev, inv));
}

}  // namespace tailaug::nn
