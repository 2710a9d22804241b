#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "tailaug/core/tensor.hpp"

namespace tailaug {

// Trainable tensor plus its gradient and Adam moment buffers.
struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor m;
    Tensor v;

    Param() = default;
    Param(std::string n, Tensor val)
        : name(std::move(n)),
          value(std::move(val)),
          grad(value.rows, value.cols),
          m(value.rows, value.cols),
          v(value.rows, value.cols) {}
};

// Named collection of parameters owned by a model. Order is insertion order
// and defines the checkpoint layout.
class ParamSet {
public:
    Param& add(const std::string& name, Tensor init);
    Param* find(const std::string& name);
    const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
    void zero_grad();
    size_t total_size() const;
    // deep copies of values only (for best-checkpoint bookkeeping)
    std::vector<Tensor> snapshot_values() const;
    void restore_values(const std::vector<Tensor>& snap);

private:
    std::vector<std::unique_ptr<Param>> params_;
};

struct Node;
using NodeP = std::shared_ptr<Node>;

struct Node {
    Tensor val;
    Tensor grad;                 // allocated lazily in backward
    bool needs_grad = false;
    Param* param = nullptr;      // set for parameter leaves
    std::vector<NodeP> inputs;
    std::function<void(Node&)> backprop;  // adds into inputs' grads

    Tensor& g() {
        if (grad.rows == 0) grad = Tensor(val.rows, val.cols);
        return grad;
    }
};

// Dynamic tape. Ops append nodes in evaluation order; backward() walks the
// tape in reverse. One Graph per training step; parameter gradients
// accumulate across graphs until the optimizer consumes them.
class Graph {
public:
    NodeP constant(Tensor t);
    NodeP leaf(Tensor t, bool needs_grad);
    NodeP param(Param& p);  // value is copied in; grads flow back to p.grad

    void backward(const NodeP& root);

    NodeP track(NodeP n) {
        tape_.push_back(n);
        return n;
    }

private:
    std::vector<NodeP> tape_;
};

namespace ops {

NodeP matmul(Graph& g, NodeP a, NodeP b);
NodeP matmul_nt(Graph& g, NodeP a, NodeP b);  // a @ b^T
NodeP add(Graph& g, NodeP a, NodeP b);
NodeP sub(Graph& g, NodeP a, NodeP b);
NodeP mul(Graph& g, NodeP a, NodeP b);
NodeP add_rowvec(Graph& g, NodeP a, NodeP v);   // v is 1 x cols, broadcast over rows
NodeP mul_colvec(Graph& g, NodeP a, NodeP c);   // c is rows x 1, broadcast over cols
NodeP scale(Graph& g, NodeP a, double s);
NodeP add_scalar(Graph& g, NodeP a, double s);
NodeP vtanh(Graph& g, NodeP a);
NodeP sigmoid(Graph& g, NodeP a);
NodeP relu(Graph& g, NodeP a);
NodeP vexp(Graph& g, NodeP a);
NodeP vlog(Graph& g, NodeP a);
NodeP vsqrt(Graph& g, NodeP a);
NodeP recip(Graph& g, NodeP a);
NodeP concat_cols(Graph& g, const std::vector<NodeP>& parts);
NodeP slice_cols(Graph& g, NodeP a, int c0, int c1);
NodeP stack_rows(Graph& g, const std::vector<NodeP>& parts);
NodeP gather_rows(Graph& g, NodeP a, std::vector<int> idx);
NodeP sum_all(Graph& g, NodeP a);
NodeP mean_all(Graph& g, NodeP a);
NodeP sum_cols(Graph& g, NodeP a);  // n x d -> n x 1
NodeP sum_rows(Graph& g, NodeP a);  // n x d -> 1 x d
NodeP softmax_rows(Graph& g, NodeP a);
NodeP log_softmax_rows(Graph& g, NodeP a);
NodeP pick_per_row(Graph& g, NodeP a, std::vector<int> idx);  // n x 1 of a[i, idx[i]]
NodeP layer_norm(Graph& g, NodeP x, NodeP gain, NodeP bias, double eps = 1e-5);

// rows of `table.value` selected by ids; backward scatter-adds into table.grad
NodeP embed(Graph& g, Param& table, const std::vector<int>& ids);

// rowwise cosine similarity of two n x d inputs -> n x 1 (composed helper)
NodeP cosine_rows(Graph& g, NodeP a, NodeP b, double eps = 1e-12);

// KL(N(mu1, exp(lv1)) || N(mu2, exp(lv2))) summed over dims, per row -> n x 1
NodeP gaussian_kl_rows(Graph& g, NodeP mu1, NodeP lv1, NodeP mu2, NodeP lv2);
// KL against the standard normal prior
NodeP gaussian_kl_std_rows(Graph& g, NodeP mu, NodeP lv);

}  // namespace ops

}  // namespace tailaug
