#include "tailaug/core/graph.hpp"

#include <algorithm>
#include <cmath>

#include "tailaug/core/errors.hpp"
#include "tailaug/core/kernels.hpp"

namespace tailaug {

Param& ParamSet::add(const std::string& name, Tensor init) {
    params_.push_back(std::make_unique<Param>(name, std::move(init)));
    return *params_.back();
}

Param* ParamSet::find(const std::string& name) {
    for (auto& p : params_)
        if (p->name == name) return p.get();
    return nullptr;
}

void ParamSet::zero_grad() {
    for (auto& p : params_) p->grad.zero();
}

size_t ParamSet::total_size() const {
    size_t n = 0;
    for (auto& p : params_) n += p->value.size();
    return n;
}

std::vector<Tensor> ParamSet::snapshot_values() const {
    std::vector<Tensor> snap;
    snap.reserve(params_.size());
    for (auto& p : params_) snap.push_back(p->value);
    return snap;
}

void ParamSet::restore_values(const std::vector<Tensor>& snap) {
    for (size_t i = 0; i < params_.size(); ++i) params_[i]->value = snap[i];
}

NodeP Graph::constant(Tensor t) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->needs_grad = false;
    return track(n);
}

NodeP Graph::leaf(Tensor t, bool needs_grad) {
    auto n = std::make_shared<Node>();
    n->val = std::move(t);
    n->needs_grad = needs_grad;
    return track(n);
}

NodeP Graph::param(Param& p) {
    auto n = std::make_shared<Node>();
    n->val = p.value;
    n->needs_grad = true;
    n->param = &p;
    return track(n);
}

void Graph::backward(const NodeP& root) {
    if (root->val.size() != 1) throw InputError("backward: root must be a scalar node");
    root->g().fill(1.0);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
        Node& n = **it;
        if (!n.needs_grad || n.grad.rows == 0) continue;
        if (n.backprop) n.backprop(n);
        if (n.param) {
            kernels::axpy(1.0, n.grad.ptr(), n.param->grad.ptr(), n.grad.size());
        }
    }
}

namespace ops {

namespace {

NodeP make(Graph& g, Tensor val, std::vector<NodeP> inputs, std::function<void(Node&)> back) {
    auto n = std::make_shared<Node>();
    n->val = std::move(val);
    n->inputs = std::move(inputs);
    for (auto& in : n->inputs)
        if (in->needs_grad) n->needs_grad = true;
    if (n->needs_grad) n->backprop = std::move(back);
    return g.track(n);
}

}  // namespace

NodeP matmul(Graph& g, NodeP a, NodeP b) {
    if (a->val.cols != b->val.rows) throw InputError("matmul: inner dims mismatch");
    Tensor out(a->val.rows, b->val.cols);
    kernels::matmul_nn(a->val.ptr(), b->val.ptr(), out.ptr(), a->val.rows, a->val.cols, b->val.cols, false);
    return make(g, std::move(out), {a, b}, [](Node& n) {
        Node& a = *n.inputs[0];
        Node& b = *n.inputs[1];
        if (a.needs_grad)
            kernels::matmul_nt(n.grad.ptr(), b.val.ptr(), a.g().ptr(), n.grad.rows, n.grad.cols, b.val.rows, true);
        if (b.needs_grad)
            kernels::matmul_tn(a.val.ptr(), n.grad.ptr(), b.g().ptr(), b.val.rows, a.val.rows, n.grad.cols, true);
    });
}

NodeP matmul_nt(Graph& g, NodeP a, NodeP b) {
    if (a->val.cols != b->val.cols) throw InputError("matmul_nt: inner dims mismatch");
    Tensor out(a->val.rows, b->val.rows);
    kernels::matmul_nt(a->val.ptr(), b->val.ptr(), out.ptr(), a->val.rows, a->val.cols, b->val.rows, false);
    return make(g, std::move(out), {a, b}, [](Node& n) {
        Node& a = *n.inputs[0];
        Node& b = *n.inputs[1];
        // C = A B^T: dA = G B ; dB = G^T A
        if (a.needs_grad)
            kernels::matmul_nn(n.grad.ptr(), b.val.ptr(), a.g().ptr(), n.grad.rows, n.grad.cols, b.val.cols, true);
        if (b.needs_grad)
            kernels::matmul_tn(n.grad.ptr(), a.val.ptr(), b.g().ptr(), n.grad.cols, n.grad.rows, a.val.cols, true);
    });
}

NodeP add(Graph& g, NodeP a, NodeP b) {
    if (!a->val.same_shape(b->val)) throw InputError("add: shape mismatch");
    Tensor out(a->val.rows, a->val.cols);
    kernels::add(a->val.ptr(), b->val.ptr(), out.ptr(), out.size());
    return make(g, std::move(out), {a, b}, [](Node& n) {
        for (int which = 0; which < 2; ++which) {
            Node& in = *n.inputs[which];
            if (in.needs_grad) kernels::axpy(1.0, n.grad.ptr(), in.g().ptr(), n.grad.size());
        }
    });
}

NodeP sub(Graph& g, NodeP a, NodeP b) {
    if (!a->val.same_shape(b->val)) throw InputError("sub: shape mismatch");
    Tensor out(a->val.rows, a->val.cols);
    kernels::sub(a->val.ptr(), b->val.ptr(), out.ptr(), out.size());
    return make(g, std::move(out), {a, b}, [](Node& n) {
        Node& a = *n.inputs[0];
        Node& b = *n.inputs[1];
        if (a.needs_grad) kernels::axpy(1.0, n.grad.ptr(), a.g().ptr(), n.grad.size());
        if (b.needs_grad) kernels::axpy(-1.0, n.grad.ptr(), b.g().ptr(), n.grad.size());
    });
}

NodeP mul(Graph& g, NodeP a, NodeP b) {
    if (!a->val.same_shape(b->val)) throw InputError("mul: shape mismatch");
    Tensor out(a->val.rows, a->val.cols);
    kernels::mul(a->val.ptr(), b->val.ptr(), out.ptr(), out.size());
    return make(g, std::move(out), {a, b}, [](Node& n) {
        Node& a = *n.inputs[0];
        Node& b = *n.inputs[1];
        if (a.needs_grad)
            for (int i = 0; i < n.grad.size(); ++i) a.g().data[i] += n.grad.data[i] * b.val.data[i];
        if (b.needs_grad)
            for (int i = 0; i < n.grad.size(); ++i) b.g().data[i] += n.grad.data[i] * a.val.data[i];
    });
}

NodeP add_rowvec(Graph& g, NodeP a, NodeP v) {
    if (v->val.rows != 1 || v->val.cols != a->val.cols) throw InputError("add_rowvec: bad vector shape");
    Tensor out = a->val;
    for (int i = 0; i < out.rows; ++i) kernels::add(out.row_ptr(i), v->val.ptr(), out.row_ptr(i), out.cols);
    return make(g, std::move(out), {a, v}, [](Node& n) {
        Node& a = *n.inputs[0];
        Node& v = *n.inputs[1];
        if (a.needs_grad) kernels::axpy(1.0, n.grad.ptr(), a.g().ptr(), n.grad.size());
        if (v.needs_grad) {
            Tensor& gv = v.g();
            for (int i = 0; i < n.grad.rows; ++i) kernels::add(gv.ptr(), n.grad.row_ptr(i), gv.ptr(), gv.cols);
        }
    });
}

NodeP mul_colvec(Graph& g, NodeP a, NodeP c) {
    if (c->val.cols != 1 || c->val.rows != a->val.rows) throw InputError("mul_colvec: bad column shape");
    Tensor out = a->val;
    for (int i = 0; i < out.rows; ++i) {
        double s = c->val.data[i];
        for (int j = 0; j < out.cols; ++j) out.row_ptr(i)[j] *= s;
    }
    return make(g, std::move(out), {a, c}, [](Node& n) {
        Node& a = *n.inputs[0];
        Node& c = *n.inputs[1];
        if (a.needs_grad) {
            Tensor& ga = a.g();
            for (int i = 0; i < n.grad.rows; ++i)
                kernels::axpy(c.val.data[i], n.grad.row_ptr(i), ga.row_ptr(i), n.grad.cols);
        }
        if (c.needs_grad) {
            Tensor& gc = c.g();
            for (int i = 0; i < n.grad.rows; ++i) {
                double s = 0.0;
                for (int j = 0; j < n.grad.cols; ++j) s += n.grad.row_ptr(i)[j] * a.val.row_ptr(i)[j];
                gc.data[i] += s;
            }
        }
    });
}

NodeP scale(Graph& g, NodeP a, double s) {
    Tensor out(a->val.rows, a->val.cols);
    kernels::scale(a->val.ptr(), s, out.ptr(), out.size());
    return make(g, std::move(out), {a}, [s](Node& n) {
        Node& a = *n.inputs[0];
        if (a.needs_grad) kernels::axpy(s, n.grad.ptr(), a.g().ptr(), n.grad.size());
    });
}

NodeP add_scalar(Graph& g, NodeP a, double s) {
    Tensor out = a->val;
    for (double& v : out.data) v += s;
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (a.needs_grad) kernels::axpy(1.0, n.grad.ptr(), a.g().ptr(), n.grad.size());
    });
}

NodeP vtanh(Graph& g, NodeP a) {
    Tensor out(a->val.rows, a->val.cols);
    kernels::vtanh(a->val.ptr(), out.ptr(), out.size());
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.grad.size(); ++i) {
            double y = n.val.data[i];
            ga.data[i] += n.grad.data[i] * (1.0 - y * y);
        }
    });
}

NodeP sigmoid(Graph& g, NodeP a) {
    Tensor out(a->val.rows, a->val.cols);
    kernels::vsigmoid(a->val.ptr(), out.ptr(), out.size());
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.grad.size(); ++i) {
            double y = n.val.data[i];
            ga.data[i] += n.grad.data[i] * y * (1.0 - y);
        }
    });
}

NodeP relu(Graph& g, NodeP a) {
    Tensor out(a->val.rows, a->val.cols);
    kernels::vrelu(a->val.ptr(), out.ptr(), out.size());
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.grad.size(); ++i)
            if (a.val.data[i] > 0.0) ga.data[i] += n.grad.data[i];
    });
}

NodeP vexp(Graph& g, NodeP a) {
    Tensor out(a->val.rows, a->val.cols);
    kernels::vexp(a->val.ptr(), out.ptr(), out.size());
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.grad.size(); ++i) ga.data[i] += n.grad.data[i] * n.val.data[i];
    });
}

NodeP vlog(Graph& g, NodeP a) {
    Tensor out(a->val.rows, a->val.cols);
    for (int i = 0; i < out.size(); ++i) out.data[i] = std::log(a->val.data[i]);
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.grad.size(); ++i) ga.data[i] += n.grad.data[i] / a.val.data[i];
    });
}

NodeP vsqrt(Graph& g, NodeP a) {
    Tensor out(a->val.rows, a->val.cols);
    for (int i = 0; i < out.size(); ++i) out.data[i] = std::sqrt(a->val.data[i]);
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.grad.size(); ++i) ga.data[i] += n.grad.data[i] * 0.5 / n.val.data[i];
    });
}

NodeP recip(Graph& g, NodeP a) {
    Tensor out(a->val.rows, a->val.cols);
    for (int i = 0; i < out.size(); ++i) out.data[i] = 1.0 / a->val.data[i];
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.grad.size(); ++i) {
            double y = n.val.data[i];
            ga.data[i] -= n.grad.data[i] * y * y;
        }
    });
}

NodeP concat_cols(Graph& g, const std::vector<NodeP>& parts) {
    if (parts.empty()) throw InputError("concat_cols: empty input");
    int rows = parts[0]->val.rows, cols = 0;
    for (auto& p : parts) {
        if (p->val.rows != rows) throw InputError("concat_cols: row mismatch");
        cols += p->val.cols;
    }
    Tensor out(rows, cols);
    int off = 0;
    for (auto& p : parts) {
        for (int i = 0; i < rows; ++i)
            std::copy(p->val.row_ptr(i), p->val.row_ptr(i) + p->val.cols, out.row_ptr(i) + off);
        off += p->val.cols;
    }
    return make(g, std::move(out), parts, [](Node& n) {
        int off = 0;
        for (auto& inp : n.inputs) {
            if (inp->needs_grad) {
                Tensor& gi = inp->g();
                for (int i = 0; i < n.grad.rows; ++i)
                    kernels::add(gi.row_ptr(i), n.grad.row_ptr(i) + off, gi.row_ptr(i), inp->val.cols);
            }
            off += inp->val.cols;
        }
    });
}

NodeP slice_cols(Graph& g, NodeP a, int c0, int c1) {
    if (c0 < 0 || c1 > a->val.cols || c0 >= c1) throw InputError("slice_cols: bad range");
    Tensor out(a->val.rows, c1 - c0);
    for (int i = 0; i < out.rows; ++i)
        std::copy(a->val.row_ptr(i) + c0, a->val.row_ptr(i) + c1, out.row_ptr(i));
    return make(g, std::move(out), {a}, [c0](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.grad.rows; ++i)
            kernels::add(ga.row_ptr(i) + c0, n.grad.row_ptr(i), ga.row_ptr(i) + c0, n.grad.cols);
    });
}

NodeP stack_rows(Graph& g, const std::vector<NodeP>& parts) {
    if (parts.empty()) throw InputError("stack_rows: empty input");
    int cols = parts[0]->val.cols, rows = 0;
    for (auto& p : parts) {
        if (p->val.cols != cols) throw InputError("stack_rows: col mismatch");
        rows += p->val.rows;
    }
    Tensor out(rows, cols);
    int r = 0;
    for (auto& p : parts) {
        std::copy(p->val.data.begin(), p->val.data.end(), out.row_ptr(r));
        r += p->val.rows;
    }
    return make(g, std::move(out), parts, [](Node& n) {
        int r = 0;
        for (auto& inp : n.inputs) {
            if (inp->needs_grad)
                kernels::add(inp->g().ptr(), n.grad.row_ptr(r), inp->g().ptr(), inp->val.size());
            r += inp->val.rows;
        }
    });
}

NodeP gather_rows(Graph& g, NodeP a, std::vector<int> idx) {
    Tensor out(static_cast<int>(idx.size()), a->val.cols);
    for (size_t i = 0; i < idx.size(); ++i)
        std::copy(a->val.row_ptr(idx[i]), a->val.row_ptr(idx[i]) + a->val.cols, out.row_ptr(static_cast<int>(i)));
    return make(g, std::move(out), {a}, [idx = std::move(idx)](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (size_t i = 0; i < idx.size(); ++i)
            kernels::add(ga.row_ptr(idx[i]), n.grad.row_ptr(static_cast<int>(i)), ga.row_ptr(idx[i]), n.grad.cols);
    });
}

NodeP sum_all(Graph& g, NodeP a) {
    Tensor out(1, 1);
    double s = 0.0;
    for (double v : a->val.data) s += v;
    out.data[0] = s;
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        double gv = n.grad.data[0];
        Tensor& ga = a.g();
        for (double& v : ga.data) v += gv;
    });
}

NodeP mean_all(Graph& g, NodeP a) { return scale(g, sum_all(g, a), 1.0 / a->val.size()); }

NodeP sum_cols(Graph& g, NodeP a) {
    Tensor out(a->val.rows, 1);
    for (int i = 0; i < a->val.rows; ++i) {
        double s = 0.0;
        const double* r = a->val.row_ptr(i);
        for (int j = 0; j < a->val.cols; ++j) s += r[j];
        out.data[i] = s;
    }
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < ga.rows; ++i) {
            double gv = n.grad.data[i];
            for (int j = 0; j < ga.cols; ++j) ga.row_ptr(i)[j] += gv;
        }
    });
}

NodeP sum_rows(Graph& g, NodeP a) {
    Tensor out(1, a->val.cols);
    for (int i = 0; i < a->val.rows; ++i) kernels::add(out.ptr(), a->val.row_ptr(i), out.ptr(), a->val.cols);
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < ga.rows; ++i) kernels::add(ga.row_ptr(i), n.grad.ptr(), ga.row_ptr(i), ga.cols);
    });
}

NodeP softmax_rows(Graph& g, NodeP a) {
    Tensor out(a->val.rows, a->val.cols);
    kernels::softmax_rows(a->val.ptr(), out.ptr(), out.rows, out.cols);
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.val.rows; ++i) {
            const double* y = n.val.row_ptr(i);
            const double* gr = n.grad.row_ptr(i);
            double dot = 0.0;
            for (int j = 0; j < n.val.cols; ++j) dot += gr[j] * y[j];
            double* gi = ga.row_ptr(i);
            for (int j = 0; j < n.val.cols; ++j) gi[j] += (gr[j] - dot) * y[j];
        }
    });
}

NodeP log_softmax_rows(Graph& g, NodeP a) {
    Tensor out(a->val.rows, a->val.cols);
    for (int i = 0; i < a->val.rows; ++i) {
        const double* r = a->val.row_ptr(i);
        double mx = r[0];
        for (int j = 1; j < a->val.cols; ++j) mx = std::max(mx, r[j]);
        double z = 0.0;
        for (int j = 0; j < a->val.cols; ++j) z += std::exp(r[j] - mx);
        double lz = mx + std::log(z);
        for (int j = 0; j < a->val.cols; ++j) out.row_ptr(i)[j] = r[j] - lz;
    }
    return make(g, std::move(out), {a}, [](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.val.rows; ++i) {
            const double* y = n.val.row_ptr(i);
            const double* gr = n.grad.row_ptr(i);
            double gsum = 0.0;
            for (int j = 0; j < n.val.cols; ++j) gsum += gr[j];
            double* gi = ga.row_ptr(i);
            for (int j = 0; j < n.val.cols; ++j) gi[j] += gr[j] - std::exp(y[j]) * gsum;
        }
    });
}

NodeP pick_per_row(Graph& g, NodeP a, std::vector<int> idx) {
    if (static_cast<int>(idx.size()) != a->val.rows) throw InputError("pick_per_row: index count mismatch");
    Tensor out(a->val.rows, 1);
    for (int i = 0; i < a->val.rows; ++i) out.data[i] = a->val.at(i, idx[i]);
    return make(g, std::move(out), {a}, [idx = std::move(idx)](Node& n) {
        Node& a = *n.inputs[0];
        if (!a.needs_grad) return;
        Tensor& ga = a.g();
        for (int i = 0; i < n.grad.rows; ++i) ga.at(i, idx[i]) += n.grad.data[i];
    });
}

NodeP layer_norm(Graph& g, NodeP x, NodeP gain, NodeP bias, double eps) {
    int rows = x->val.rows, cols = x->val.cols;
    if (gain->val.cols != cols || bias->val.cols != cols) throw InputError("layer_norm: param shape mismatch");
    Tensor out(rows, cols);
    Tensor xhat(rows, cols);
    Tensor inv_sigma(rows, 1);
    for (int i = 0; i < rows; ++i) {
        const double* r = x->val.row_ptr(i);
        double mean = 0.0;
        for (int j = 0; j < cols; ++j) mean += r[j];
        mean /= cols;
        double var = 0.0;
        for (int j = 0; j < cols; ++j) var += (r[j] - mean) * (r[j] - mean);
        var /= cols;
        double inv = 1.0 / std::sqrt(var + eps);
        inv_sigma.data[i] = inv;
        for (int j = 0; j < cols; ++j) {
            double xh = (r[j] - mean) * inv;
            xhat.row_ptr(i)[j] = xh;
            out.row_ptr(i)[j] = xh * gain->val.data[j] + bias->val.data[j];
        }
    }
    auto cache_xhat = std::make_shared<Tensor>(std::move(xhat));
    auto cache_inv = std::make_shared<Tensor>(std::move(inv_sigma));
    return make(g, std::move(out), {x, gain, bias}, [cache_xhat, cache_inv](Node& n) {
        Node& x = *n.inputs[0];
        Node& gain = *n.inputs[1];
        Node& bias = *n.inputs[2];
        int rows = n.val.rows, cols = n.val.cols;
        for (int i = 0; i < rows; ++i) {
            const double* gr = n.grad.row_ptr(i);
            const double* xh = cache_xhat->row_ptr(i);
            if (gain.needs_grad) {
                Tensor& gg = gain.g();
                for (int j = 0; j < cols; ++j) gg.data[j] += gr[j] * xh[j];
            }
            if (bias.needs_grad) {
                Tensor& gb = bias.g();
                for (int j = 0; j < cols; ++j) gb.data[j] += gr[j];
            }
            if (x.needs_grad) {
                double inv = cache_inv->data[i];
                double m1 = 0.0, m2 = 0.0;  // mean(g*gain), mean(g*gain*xhat)
                for (int j = 0; j < cols; ++j) {
                    double gg = gr[j] * gain.val.data[j];
                    m1 += gg;
                    m2 += gg * xh[j];
                }
                m1 /= cols;
                m2 /= cols;
                double* gx = x.g().row_ptr(i);
                for (int j = 0; j < cols; ++j) {
                    double gg = gr[j] * gain.val.data[j];
                    gx[j] += (gg - m1 - xh[j] * m2) * inv;
                }
            }
        }
    });
}

NodeP embed(Graph& g, Param& table, const std::vector<int>& ids) {
    int dim = table.value.cols;
    for (int id : ids)
        if (id < 0 || id >= table.value.rows) throw VocabError("embed: id out of range for table " + table.name);
    Tensor out(static_cast<int>(ids.size()), dim);
    for (size_t i = 0; i < ids.size(); ++i)
        std::copy(table.value.row_ptr(ids[i]), table.value.row_ptr(ids[i]) + dim, out.row_ptr(static_cast<int>(i)));
    auto n = std::make_shared<Node>();
    n->val = std::move(out);
    n->needs_grad = true;
    Param* tp = &table;
    auto ids_copy = ids;
    n->backprop = [tp, ids_copy](Node& n) {
        for (size_t i = 0; i < ids_copy.size(); ++i)
            kernels::add(tp->grad.row_ptr(ids_copy[i]), n.grad.row_ptr(static_cast<int>(i)),
                         tp->grad.row_ptr(ids_copy[i]), n.grad.cols);
    };
    return g.track(n);
}

NodeP cosine_rows(Graph& g, NodeP a, NodeP b, double eps) {
    auto dot = sum_cols(g, mul(g, a, b));
    auto na = vsqrt(g, add_scalar(g, sum_cols(g, mul(g, a, a)), eps));
    auto nb = vsqrt(g, add_scalar(g, sum_cols(g, mul(g, b, b)), eps));
    return mul(g, dot, recip(g, mul(g, na, nb)));
}

NodeP gaussian_kl_rows(Graph& g, NodeP mu1, NodeP lv1, NodeP mu2, NodeP lv2) {
    // 0.5 * sum( exp(lv1-lv2) + (mu1-mu2)^2 * exp(-lv2) + lv2 - lv1 - 1 )
    auto dlv = sub(g, lv1, lv2);
    auto term1 = vexp(g, dlv);
    auto dmu = sub(g, mu1, mu2);
    auto term2 = mul(g, mul(g, dmu, dmu), vexp(g, scale(g, lv2, -1.0)));
    auto inner = add_scalar(g, sub(g, add(g, term1, term2), dlv), -1.0);
    return scale(g, sum_cols(g, inner), 0.5);
}

NodeP gaussian_kl_std_rows(Graph& g, NodeP mu, NodeP lv) {
    // 0.5 * sum( exp(lv) + mu^2 - lv - 1 )
    auto inner = add_scalar(g, sub(g, add(g, vexp(g, lv), mul(g, mu, mu)), lv), -1.0);
    return scale(g, sum_cols(g, inner), 0.5);
}

}  // namespace ops

}  // namespace tailaug
