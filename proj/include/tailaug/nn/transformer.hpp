#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "tailaug/core/graph.hpp"
#include "tailaug/nn/layers.hpp"

namespace tailaug::nn {

// Pre-LN transformer block with optional cross-attention. Sequences are
// processed one at a time (rows = positions), so no padding masks are
// needed; the causal flag adds the usual lower-triangular mask.
struct AttentionBlock {
    Param *Wq = nullptr, *Wk = nullptr, *Wv = nullptr, *Wo = nullptr;
    int heads = 0;
    int dim = 0;

    AttentionBlock() = default;
    AttentionBlock(ParamSet& ps, const std::string& name, int d, int h, Rng& rng) : heads(h), dim(d) {
        Wq = &ps.add(name + ".Wq", Tensor::xavier(d, d, rng));
        Wk = &ps.add(name + ".Wk", Tensor::xavier(d, d, rng));
        Wv = &ps.add(name + ".Wv", Tensor::xavier(d, d, rng));
        Wo = &ps.add(name + ".Wo", Tensor::xavier(d, d, rng));
    }

    NodeP operator()(Graph& g, NodeP q_in, NodeP kv_in, bool causal) const {
        auto Q = ops::matmul(g, q_in, g.param(*Wq));
        auto K = ops::matmul(g, kv_in, g.param(*Wk));
        auto V = ops::matmul(g, kv_in, g.param(*Wv));
        int dh = dim / heads;
        double inv_scale = 1.0 / std::sqrt(static_cast<double>(dh));
        NodeP mask;
        if (causal) {
            Tensor m(Q->val.rows, K->val.rows);
            for (int i = 0; i < m.rows; ++i)
                for (int j = i + 1; j < m.cols; ++j) m.at(i, j) = -1e9;
            mask = g.constant(std::move(m));
        }
        std::vector<NodeP> ctx;
        ctx.reserve(heads);
        for (int h = 0; h < heads; ++h) {
            auto Qh = ops::slice_cols(g, Q, h * dh, (h + 1) * dh);
            auto Kh = ops::slice_cols(g, K, h * dh, (h + 1) * dh);
            auto Vh = ops::slice_cols(g, V, h * dh, (h + 1) * dh);
            auto scores = ops::scale(g, ops::matmul_nt(g, Qh, Kh), inv_scale);
            if (mask) scores = ops::add(g, scores, mask);
            ctx.push_back(ops::matmul(g, ops::softmax_rows(g, scores), Vh));
        }
        return ops::matmul(g, ops::concat_cols(g, ctx), g.param(*Wo));
    }
};

struct TransformerLayer {
    AttentionBlock self_attn;
    AttentionBlock cross_attn;  // only populated for decoder layers
    Linear ff1, ff2;
    Param *ln1_g = nullptr, *ln1_b = nullptr;
    Param *ln2_g = nullptr, *ln2_b = nullptr;
    Param *ln3_g = nullptr, *ln3_b = nullptr;
    bool has_cross = false;

    TransformerLayer() = default;
    TransformerLayer(ParamSet& ps, const std::string& name, int d, int heads, bool cross, Rng& rng)
        : has_cross(cross) {
        self_attn = AttentionBlock(ps, name + ".self", d, heads, rng);
        if (cross) {
            cross_attn = AttentionBlock(ps, name + ".cross", d, heads, rng);
            ln3_g = &ps.add(name + ".ln3.g", Tensor(1, d, 1.0));
            ln3_b = &ps.add(name + ".ln3.b", Tensor(1, d));
        }
        ff1 = Linear(ps, name + ".ff1", d, 4 * d, rng);
        ff2 = Linear(ps, name + ".ff2", 4 * d, d, rng);
        ln1_g = &ps.add(name + ".ln1.g", Tensor(1, d, 1.0));
        ln1_b = &ps.add(name + ".ln1.b", Tensor(1, d));
        ln2_g = &ps.add(name + ".ln2.g", Tensor(1, d, 1.0));
        ln2_b = &ps.add(name + ".ln2.b", Tensor(1, d));
    }

    NodeP operator()(Graph& g, NodeP x, NodeP memory, bool causal) const {
        auto h = ops::layer_norm(g, x, g.param(*ln1_g), g.param(*ln1_b));
        x = ops::add(g, x, self_attn(g, h, h, causal));
        if (has_cross) {
            auto hc = ops::layer_norm(g, x, g.param(*ln3_g), g.param(*ln3_b));
            x = ops::add(g, x, cross_attn(g, hc, memory, false));
        }
        auto hf = ops::layer_norm(g, x, g.param(*ln2_g), g.param(*ln2_b));
        return ops::add(g, x, ff2(g, ops::relu(g, ff1(g, hf))));
    }
};

struct TransformerStack {
    std::vector<TransformerLayer> layers;
    Param *final_ln_g = nullptr, *final_ln_b = nullptr;

    TransformerStack() = default;
    TransformerStack(ParamSet& ps, const std::string& name, int n_layers, int d, int heads, bool cross, Rng& rng) {
        for (int i = 0; i < n_layers; ++i)
            layers.emplace_back(ps, name + ".l" + std::to_string(i), d, heads, cross, rng);
        final_ln_g = &ps.add(name + ".ln_f.g", Tensor(1, d, 1.0));
        final_ln_b = &ps.add(name + ".ln_f.b", Tensor(1, d));
    }

    NodeP operator()(Graph& g, NodeP x, NodeP memory, bool causal) const {
        for (const auto& layer : layers) x = layer(g, x, memory, causal);
        return ops::layer_norm(g, x, g.param(*final_ln_g), g.param(*final_ln_b));
    }
};

// Learned absolute position table sliced to the sequence length.
inline NodeP positional(Graph& g, Param& table, int len) {
    std::vector<int> idx(len);
    for (int i = 0; i < len; ++i) idx[i] = i;
    return ops::embed(g, table, idx);
}

}  // namespace tailaug::nn
