#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "meshnets/sparse.hpp"

namespace meshnets {

// Dense float64 tensor participating in a dynamically recorded reverse-mode
// graph. Tensor is a cheap handle; the node (value, grad, parents, backward
// closure) is shared. Graphs are rebuilt every forward pass; parameters are
// long-lived leaves.
class Tensor {
    struct Node {
        std::vector<std::size_t> shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backward;
    };

public:
    Tensor() : node_(std::make_shared<Node>()) {}

    static Tensor zeros(std::vector<std::size_t> shape) {
        Tensor t;
        t.node_->shape = std::move(shape);
        t.node_->value.assign(t.numel_from_shape(), 0.0);
        return t;
    }

    static Tensor from(std::vector<double> data, std::vector<std::size_t> shape) {
        Tensor t;
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(data);
        if (t.node_->value.size() != t.numel_from_shape())
            throw std::runtime_error("tensor data length does not match shape");
        return t;
    }

    static Tensor scalar(double v) { return from({v}, {1}); }

    const std::vector<std::size_t>& shape() const { return node_->shape; }
    std::size_t numel() const { return node_->value.size(); }
    std::size_t rows() const { return dim2().first; }
    std::size_t cols() const { return dim2().second; }

    std::vector<double>& data() { return node_->value; }
    const std::vector<double>& data() const { return node_->value; }
    double item() const {
        if (numel() != 1) throw std::runtime_error("item() on non-scalar tensor");
        return node_->value[0];
    }

    double operator()(std::size_t r, std::size_t c) const { return node_->value[r * cols() + c]; }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool b) {
        node_->requires_grad = b;
        if (b && node_->grad.size() != node_->value.size()) node_->grad.assign(node_->value.size(), 0.0);
        return *this;
    }

    std::vector<double>& grad() { return node_->grad; }
    const std::vector<double>& grad() const { return node_->grad; }

    void zero_grad() { std::fill(node_->grad.begin(), node_->grad.end(), 0.0); }

    // Reverse-mode sweep from a scalar output. Accumulates into the grad of
    // every reachable node with requires_grad set.
    void backward() const {
        if (numel() != 1) throw std::runtime_error("backward() requires a scalar output");
        std::vector<Node*> order;
        std::unordered_set<Node*> seen;
        std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
        seen.insert(node_.get());
        while (!stack.empty()) {
            auto& [n, next] = stack.back();
            if (next < n->parents.size()) {
                Node* p = n->parents[next++].get();
                if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
            } else {
                order.push_back(n);
                stack.pop_back();
            }
        }
        for (Node* n : order)
            if (n->grad.size() != n->value.size()) n->grad.assign(n->value.size(), 0.0);
        node_->grad[0] += 1.0;
        for (auto it = order.rbegin(); it != order.rend(); ++it)
            if ((*it)->backward) (*it)->backward(**it);
    }

    // --- graph construction helpers (used by the op functions below) ---

    static Tensor make_op(std::vector<std::size_t> shape, std::vector<double> value,
                          std::vector<Tensor> parents, std::function<void(Node&)> backward) {
        Tensor t;
        t.node_->shape = std::move(shape);
        t.node_->value = std::move(value);
        bool needs = false;
        for (const auto& p : parents) needs = needs || p.requires_grad();
        if (grad_enabled() && needs) {
            t.node_->requires_grad = true;
            t.node_->parents.reserve(parents.size());
            for (auto& p : parents) t.node_->parents.push_back(p.node_);
            t.node_->backward = std::move(backward);
        }
        return t;
    }

    static bool& grad_enabled() {
        thread_local bool enabled = true;
        return enabled;
    }

    using NodeT = Node;
    Node* node() const { return node_.get(); }

private:
    std::shared_ptr<Node> node_;

    std::size_t numel_from_shape() const {
        return std::accumulate(node_->shape.begin(), node_->shape.end(), std::size_t{1},
                               std::multiplies<>());
    }

    std::pair<std::size_t, std::size_t> dim2() const {
        if (node_->shape.size() == 1) return {1, node_->shape[0]};
        if (node_->shape.size() == 2) return {node_->shape[0], node_->shape[1]};
        throw std::runtime_error("expected rank-1 or rank-2 tensor");
    }
};

// Disables graph recording in scope (evaluation passes).
struct NoGradGuard {
    bool saved;
    NoGradGuard() : saved(Tensor::grad_enabled()) { Tensor::grad_enabled() = false; }
    ~NoGradGuard() { Tensor::grad_enabled() = saved; }
};

namespace ops {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) throw std::runtime_error(std::string(what) + ": shape mismatch");
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    auto *na = a.node(), *nb = b.node();
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [na, nb](Tensor::NodeT& n) {
        if (na->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) na->grad[i] += n.grad[i];
        if (nb->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) nb->grad[i] += n.grad[i];
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
    auto *na = a.node(), *nb = b.node();
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [na, nb](Tensor::NodeT& n) {
        if (na->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) na->grad[i] += n.grad[i];
        if (nb->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) nb->grad[i] -= n.grad[i];
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "mul");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
    auto *na = a.node(), *nb = b.node();
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [na, nb](Tensor::NodeT& n) {
        if (na->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) na->grad[i] += n.grad[i] * nb->value[i];
        if (nb->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) nb->grad[i] += n.grad[i] * na->value[i];
    });
}

inline Tensor scale(const Tensor& a, double c) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * a.data()[i];
    auto* na = a.node();
    return Tensor::make_op(a.shape(), std::move(out), {a}, [na, c](Tensor::NodeT& n) {
        if (na->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) na->grad[i] += c * n.grad[i];
    });
}

inline Tensor relu(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    auto* na = a.node();
    return Tensor::make_op(a.shape(), std::move(out), {a}, [na](Tensor::NodeT& n) {
        if (na->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i)
                if (na->value[i] > 0.0) na->grad[i] += n.grad[i];
    });
}

inline Tensor absolute(const Tensor& a) {
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(a.data()[i]);
    auto* na = a.node();
    return Tensor::make_op(a.shape(), std::move(out), {a}, [na](Tensor::NodeT& n) {
        if (na->requires_grad)
            for (std::size_t i = 0; i < n.grad.size(); ++i) {
                double s = na->value[i] > 0.0 ? 1.0 : (na->value[i] < 0.0 ? -1.0 : 0.0);
                na->grad[i] += s * n.grad[i];
            }
    });
}

// [m,k] x [k,n] -> [m,n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols(), k2 = b.rows(), n = b.cols();
    if (k != k2) throw std::runtime_error("matmul: inner dimensions disagree");
    std::vector<double> out(m * n, 0.0);
    {
        const double* pa = a.data().data();
        const double* pb = b.data().data();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) {
                double av = pa[i * k + t];
                if (av == 0.0) continue;
                const double* brow = pb + t * n;
                double* orow = out.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
    }
    auto *na = a.node(), *nb = b.node();
    return Tensor::make_op({m, n}, std::move(out), {a, b}, [na, nb, m, k, n](Tensor::NodeT& node) {
        const double* g = node.grad.data();
        if (na->requires_grad) {  // gA = g . B^T
            const double* pb = nb->value.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t t = 0; t < k; ++t) {
                    double acc = 0.0;
                    const double* grow = g + i * n;
                    const double* brow = pb + t * n;
                    for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
                    na->grad[i * k + t] += acc;
                }
        }
        if (nb->requires_grad) {  // gB = A^T . g
            const double* pa = na->value.data();
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t t = 0; t < k; ++t) {
                    double av = pa[i * k + t];
                    if (av == 0.0) continue;
                    const double* grow = g + i * n;
                    double* brow = nb->grad.data() + t * n;
                    for (std::size_t j = 0; j < n; ++j) brow[j] += av * grow[j];
                }
        }
    });
}

// [m,n] + [n] broadcast over rows
inline Tensor add_rows(const Tensor& a, const Tensor& bias) {
    const std::size_t m = a.rows(), n = a.cols();
    if (bias.numel() != n) throw std::runtime_error("add_rows: bias width mismatch");
    std::vector<double> out(a.data());
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bias.data()[j];
    auto *na = a.node(), *nb = bias.node();
    return Tensor::make_op(a.shape(), std::move(out), {a, bias}, [na, nb, m, n](Tensor::NodeT& node) {
        if (na->requires_grad)
            for (std::size_t i = 0; i < node.grad.size(); ++i) na->grad[i] += node.grad[i];
        if (nb->requires_grad)
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < n; ++j) nb->grad[j] += node.grad[i * n + j];
    });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw std::runtime_error("concat_cols: no inputs");
    const std::size_t m = parts[0].rows();
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rows() != m) throw std::runtime_error("concat_cols: row count mismatch");
        total += p.cols();
    }
    std::vector<double> out(m * total);
    std::size_t off = 0;
    for (const auto& p : parts) {
        const std::size_t w = p.cols();
        for (std::size_t i = 0; i < m; ++i)
            std::copy_n(p.data().begin() + i * w, w, out.begin() + i * total + off);
        off += w;
    }
    std::vector<std::size_t> widths;
    std::vector<Tensor::NodeT*> nodes;
    for (const auto& p : parts) {
        widths.push_back(p.cols());
        nodes.push_back(p.node());
    }
    return Tensor::make_op({m, total}, std::move(out), parts,
                           [m, total, widths, nodes](Tensor::NodeT& node) {
                               std::size_t off = 0;
                               for (std::size_t pi = 0; pi < nodes.size(); ++pi) {
                                   const std::size_t w = widths[pi];
                                   if (nodes[pi]->requires_grad)
                                       for (std::size_t i = 0; i < m; ++i)
                                           for (std::size_t j = 0; j < w; ++j)
                                               nodes[pi]->grad[i * w + j] +=
                                                   node.grad[i * total + off + j];
                                   off += w;
                               }
                           });
}

// Rows of `a` selected by index; negative indices produce zero rows and
// receive no gradient. Backward scatter-adds.
inline Tensor row_gather(const Tensor& a, const std::vector<int>& idx) {
    const std::size_t n = a.cols(), an = a.rows();
    std::vector<double> out(idx.size() * n, 0.0);
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0) continue;
        if (static_cast<std::size_t>(idx[r]) >= an)
            throw std::runtime_error("row_gather: index out of range");
        std::copy_n(a.data().begin() + static_cast<std::size_t>(idx[r]) * n, n,
                    out.begin() + r * n);
    }
    auto* na = a.node();
    return Tensor::make_op({idx.size(), n}, std::move(out), {a}, [na, idx, n](Tensor::NodeT& node) {
        if (!na->requires_grad) return;
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (idx[r] < 0) continue;
            double* dst = na->grad.data() + static_cast<std::size_t>(idx[r]) * n;
            const double* src = node.grad.data() + r * n;
            for (std::size_t j = 0; j < n; ++j) dst[j] += src[j];
        }
    });
}

// Elementwise maximum; ties route the gradient to `a`.
inline Tensor max2(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "max2");
    std::vector<double> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(a.data()[i], b.data()[i]);
    auto *na = a.node(), *nb = b.node();
    return Tensor::make_op(a.shape(), std::move(out), {a, b}, [na, nb](Tensor::NodeT& n) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) {
            if (na->value[i] >= nb->value[i]) {
                if (na->requires_grad) na->grad[i] += n.grad[i];
            } else if (nb->requires_grad) {
                nb->grad[i] += n.grad[i];
            }
        }
    });
}

// column-wise max over rows: [N,F] -> [1,F]; first maximal row wins
inline Tensor reduce_max_rows(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    if (m == 0) throw std::runtime_error("reduce_max_rows: empty input");
    std::vector<double> out(n);
    std::vector<std::size_t> arg(n, 0);
    for (std::size_t j = 0; j < n; ++j) out[j] = a.data()[j];
    for (std::size_t i = 1; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (a.data()[i * n + j] > out[j]) {
                out[j] = a.data()[i * n + j];
                arg[j] = i;
            }
    auto* na = a.node();
    return Tensor::make_op({1, n}, std::move(out), {a}, [na, arg, n](Tensor::NodeT& node) {
        if (!na->requires_grad) return;
        for (std::size_t j = 0; j < n; ++j) na->grad[arg[j] * n + j] += node.grad[j];
    });
}

inline Tensor reduce_mean_rows(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    if (m == 0) throw std::runtime_error("reduce_mean_rows: empty input");
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j] += a.data()[i * n + j];
    for (auto& v : out) v /= static_cast<double>(m);
    auto* na = a.node();
    return Tensor::make_op({1, n}, std::move(out), {a}, [na, m, n](Tensor::NodeT& node) {
        if (!na->requires_grad) return;
        const double inv = 1.0 / static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) na->grad[i * n + j] += inv * node.grad[j];
    });
}

inline Tensor reduce_sum_all(const Tensor& a) {
    double s = std::accumulate(a.data().begin(), a.data().end(), 0.0);
    auto* na = a.node();
    return Tensor::make_op({1}, {s}, {a}, [na](Tensor::NodeT& node) {
        if (!na->requires_grad) return;
        for (auto& g : na->grad) g += node.grad[0];
    });
}

// CSR constant matrix times dense tensor; gradient flows to the dense side only.
inline Tensor spmm(std::shared_ptr<const Csr> A, const Tensor& x) {
    if (A->cols != x.rows()) throw std::runtime_error("spmm: dimension mismatch");
    const std::size_t n = x.cols();
    std::vector<double> out = A->apply(x.data(), n);
    auto* nx = x.node();
    const std::size_t rows = A->rows;
    return Tensor::make_op({rows, n}, std::move(out), {x},
                           [nx, A = std::move(A), n](Tensor::NodeT& node) {
                               if (!nx->requires_grad) return;
                               for (std::size_t r = 0; r < A->rows; ++r) {
                                   const double* grow = node.grad.data() + r * n;
                                   for (std::size_t p = A->indptr[r]; p < A->indptr[r + 1]; ++p) {
                                       double* xrow = nx->grad.data() +
                                                      static_cast<std::size_t>(A->indices[p]) * n;
                                       const double w = A->values[p];
                                       for (std::size_t j = 0; j < n; ++j) xrow[j] += w * grow[j];
                                   }
                               }
                           });
}

inline Tensor spmm(const Csr& A, const Tensor& x) {
    return spmm(std::make_shared<const Csr>(A), x);
}

// Mean over the batch of -log softmax(logits)[label]; max-subtraction for
// numerical stability; analytic backward (softmax - onehot)/batch.
inline Tensor cross_entropy_softmax(const Tensor& logits, const std::vector<int>& labels) {
    const std::size_t b = logits.rows(), c = logits.cols();
    if (labels.size() != b) throw std::runtime_error("cross_entropy: batch size mismatch");
    for (int l : labels)
        if (l < 0 || static_cast<std::size_t>(l) >= c)
            throw std::runtime_error("cross_entropy: label out of range");
    std::vector<double> softmax(b * c);
    double loss = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double* row = logits.data().data() + i * c;
        double mx = *std::max_element(row, row + c);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        for (std::size_t j = 0; j < c; ++j) softmax[i * c + j] = std::exp(row[j] - mx) / z;
        loss += mx + std::log(z) - row[labels[i]];
    }
    loss /= static_cast<double>(b);
    auto* nl = logits.node();
    return Tensor::make_op({1}, {loss}, {logits},
                           [nl, softmax, labels, b, c](Tensor::NodeT& node) {
                               if (!nl->requires_grad) return;
                               const double g = node.grad[0] / static_cast<double>(b);
                               for (std::size_t i = 0; i < b; ++i)
                                   for (std::size_t j = 0; j < c; ++j) {
                                       double delta = (static_cast<std::size_t>(labels[i]) == j) ? 1.0 : 0.0;
                                       nl->grad[i * c + j] += g * (softmax[i * c + j] - delta);
                                   }
                           });
}

}  // namespace ops
}  // namespace meshnets
