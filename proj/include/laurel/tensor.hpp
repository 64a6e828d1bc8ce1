#pragma once

// Dense float64 tensors with a reverse-mode autodiff tape.
//
// Tensors are plain values (shape + flat row-major data). Gradient tracking
// is opt-in: a Tape activates itself for the current thread on construction,
// and operations record nodes only when an input is tracked. Summation order
// in matmul and reductions is fixed (ascending inner index) so repeated
// forward passes are bit-identical.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace laurel {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

class Tape;

struct Tensor {
    Shape shape;
    std::vector<double> data;
    int node = -1;  // handle into the active tape, -1 when detached

    Tensor() = default;
    Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != shape_numel(shape))
            throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape_str(shape));
    }

    static Tensor zeros(Shape s) {
        std::vector<double> d(shape_numel(s), 0.0);
        return Tensor(std::move(s), std::move(d));
    }
    static Tensor full(Shape s, double v) {
        std::vector<double> d(shape_numel(s), v);
        return Tensor(std::move(s), std::move(d));
    }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    std::size_t size() const { return data.size(); }
    bool tracked() const { return node >= 0; }

    std::size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    std::size_t cols() const { return shape.size() < 2 ? size() / rows() : shape[1]; }

    double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
};

// Reverse-mode tape. Nodes are appended in topological order; backward walks
// them in reverse, each node scattering its upstream gradient to its parents.
class Tape {
public:
    Tape() : prev_(active_slot()) { active_slot() = this; }
    ~Tape() { active_slot() = prev_; }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active() { return active_slot(); }

    // Registers a tracked leaf holding a copy of `value`.
    Tensor leaf(const Tensor& value) {
        Tensor t = value;
        t.node = add_node(t.size(), {});
        return t;
    }
    Tensor leaf(Shape shape, std::vector<double> data) {
        return leaf(Tensor(std::move(shape), std::move(data)));
    }

    int add_node(std::size_t size, std::function<void(Tape&, int)> back) {
        nodes_.push_back(NodeRec{size, std::move(back)});
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::size_t num_nodes() const { return nodes_.size(); }

    // Runs reverse accumulation from a scalar loss. Seed gradient is 1.0.
    void backward(const Tensor& loss) {
        if (loss.size() != 1)
            throw std::invalid_argument("backward requires a scalar loss, got shape " +
                                        shape_str(loss.shape));
        if (loss.node < 0 || loss.node >= static_cast<int>(nodes_.size()))
            throw std::invalid_argument("backward: loss is detached from the active tape");
        grads_.assign(nodes_.size(), {});
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            grads_[i].assign(nodes_[i].size, 0.0);
        grads_[loss.node][0] = 1.0;
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i)
            if (nodes_[i].back) nodes_[i].back(*this, i);
    }

    const std::vector<double>& grad(int node) const {
        if (node < 0 || node >= static_cast<int>(grads_.size()))
            throw std::invalid_argument("grad: node " + std::to_string(node) +
                                        " has no gradient (did backward run?)");
        return grads_[node];
    }
    const std::vector<double>& grad(const Tensor& t) const { return grad(t.node); }

    std::vector<double>& grad_mut(int node) { return grads_[node]; }

private:
    struct NodeRec {
        std::size_t size;
        std::function<void(Tape&, int)> back;
    };

    static Tape*& active_slot() {
        thread_local Tape* slot = nullptr;
        return slot;
    }

    Tape* prev_;
    std::vector<NodeRec> nodes_;
    std::vector<std::vector<double>> grads_;
};

namespace detail {

inline bool any_tracked(std::initializer_list<const Tensor*> ts) {
    if (!Tape::active()) return false;
    for (const Tensor* t : ts)
        if (t->tracked()) return true;
    return false;
}

inline void accum(Tape& tape, int node, const std::vector<double>& g) {
    if (node < 0) return;
    std::vector<double>& dst = tape.grad_mut(node);
    for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape)
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

inline void check_finite(const char* op, const Tensor& t) {
    for (double v : t.data)
        if (!std::isfinite(v))
            throw std::runtime_error(std::string(op) + ": non-finite value in output");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and structural operations
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("add", a, b);
    Tensor out(a.shape, a.data);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += b.data[i];
    if (detail::any_tracked({&a, &b})) {
        int pa = a.node, pb = b.node;
        out.node = Tape::active()->add_node(out.size(), [pa, pb](Tape& t, int self) {
            const std::vector<double>& g = t.grad(self);
            detail::accum(t, pa, g);
            detail::accum(t, pb, g);
        });
    }
    return out;
}

// a: [rows x d], bias: [d]; adds bias to every row.
inline Tensor add_bias_row(const Tensor& a, const Tensor& bias) {
    if (a.shape.size() != 2 || bias.shape.size() != 1 || a.shape[1] != bias.shape[0])
        throw std::invalid_argument("add_bias_row: shapes " + shape_str(a.shape) + " vs " +
                                    shape_str(bias.shape));
    const std::size_t rows = a.shape[0], d = a.shape[1];
    Tensor out(a.shape, a.data);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < d; ++c) out.data[r * d + c] += bias.data[c];
    if (detail::any_tracked({&a, &bias})) {
        int pa = a.node, pb = bias.node;
        out.node = Tape::active()->add_node(out.size(), [pa, pb, rows, d](Tape& t, int self) {
            const std::vector<double>& g = t.grad(self);
            detail::accum(t, pa, g);
            if (pb >= 0) {
                std::vector<double>& gb = t.grad_mut(pb);
                for (std::size_t r = 0; r < rows; ++r)
                    for (std::size_t c = 0; c < d; ++c) gb[c] += g[r * d + c];
            }
        });
    }
    return out;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor out(a.shape, a.data);
    for (double& v : out.data) v *= s;
    if (detail::any_tracked({&a})) {
        int pa = a.node;
        out.node = Tape::active()->add_node(out.size(), [pa, s](Tape& t, int self) {
            const std::vector<double>& g = t.grad(self);
            if (pa >= 0) {
                std::vector<double>& ga = t.grad_mut(pa);
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += s * g[i];
            }
        });
    }
    return out;
}

inline Tensor add_const(const Tensor& a, double c) {
    Tensor out(a.shape, a.data);
    for (double& v : out.data) v += c;
    if (detail::any_tracked({&a})) {
        int pa = a.node;
        out.node = Tape::active()->add_node(out.size(), [pa](Tape& t, int self) {
            detail::accum(t, pa, t.grad(self));
        });
    }
    return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::check_same_shape("mul", a, b);
    Tensor out(a.shape, a.data);
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= b.data[i];
    if (detail::any_tracked({&a, &b})) {
        int pa = a.node, pb = b.node;
        std::vector<double> av = a.data, bv = b.data;
        out.node = Tape::active()->add_node(
            out.size(), [pa, pb, av = std::move(av), bv = std::move(bv)](Tape& t, int self) {
                const std::vector<double>& g = t.grad(self);
                if (pa >= 0) {
                    std::vector<double>& ga = t.grad_mut(pa);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += bv[i] * g[i];
                }
                if (pb >= 0) {
                    std::vector<double>& gb = t.grad_mut(pb);
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += av[i] * g[i];
                }
            });
    }
    return out;
}

// Multiplies every element of `a` by a learned scalar (shape [1] tensor).
inline Tensor mul_scalar(const Tensor& a, const Tensor& s) {
    if (s.size() != 1)
        throw std::invalid_argument("mul_scalar: scalar operand has shape " + shape_str(s.shape));
    const double sv = s.data[0];
    Tensor out(a.shape, a.data);
    for (double& v : out.data) v *= sv;
    if (detail::any_tracked({&a, &s})) {
        int pa = a.node, ps = s.node;
        std::vector<double> av = a.data;
        out.node = Tape::active()->add_node(
            out.size(), [pa, ps, sv, av = std::move(av)](Tape& t, int self) {
                const std::vector<double>& g = t.grad(self);
                if (pa >= 0) {
                    std::vector<double>& ga = t.grad_mut(pa);
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += sv * g[i];
                }
                if (ps >= 0) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < g.size(); ++i) acc += av[i] * g[i];
                    t.grad_mut(ps)[0] += acc;
                }
            });
    }
    return out;
}

namespace detail {

// C[m x n] = A[m x k] * B[k x n], accumulating over k in ascending order.
// The i-k-j loop visits each (i, j) partial sum in the same k order as the
// naive j-inner triple loop, so results are bit-identical to it.
inline void matmul_raw(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                       std::size_t n) {
    std::fill(c, c + m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            const double* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x n] += A[m x k] * B[n x k]^T
inline void matmul_bt_acc(const double* a, const double* b, double* c, std::size_t m,
                          std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        double* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[k x n] += A[m x k]^T * B[m x n]
inline void matmul_at_acc(const double* a, const double* b, double* c, std::size_t m,
                          std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        const double* brow = b + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double av = arow[p];
            double* crow = c + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.shape.size() != 2 || b.shape.size() != 2 || a.shape[1] != b.shape[0])
        throw std::invalid_argument("matmul: incompatible shapes " + shape_str(a.shape) + " vs " +
                                    shape_str(b.shape));
    const std::size_t m = a.shape[0], k = a.shape[1], n = b.shape[1];
    Tensor out = Tensor::zeros({m, n});
    detail::matmul_raw(a.data.data(), b.data.data(), out.data.data(), m, k, n);
    if (detail::any_tracked({&a, &b})) {
        int pa = a.node, pb = b.node;
        std::vector<double> av = a.data, bv = b.data;
        out.node = Tape::active()->add_node(
            out.size(),
            [pa, pb, m, k, n, av = std::move(av), bv = std::move(bv)](Tape& t, int self) {
                const std::vector<double>& g = t.grad(self);
                if (pa >= 0)
                    detail::matmul_bt_acc(g.data(), bv.data(), t.grad_mut(pa).data(), m, n, k);
                if (pb >= 0)
                    detail::matmul_at_acc(av.data(), g.data(), t.grad_mut(pb).data(), m, k, n);
            });
    }
    return out;
}

inline Tensor transpose(const Tensor& a) {
    if (a.shape.size() != 2)
        throw std::invalid_argument("transpose: expected 2-d tensor, got " + shape_str(a.shape));
    const std::size_t m = a.shape[0], n = a.shape[1];
    Tensor out = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = a.data[i * n + j];
    if (detail::any_tracked({&a})) {
        int pa = a.node;
        out.node = Tape::active()->add_node(out.size(), [pa, m, n](Tape& t, int self) {
            const std::vector<double>& g = t.grad(self);
            if (pa >= 0) {
                std::vector<double>& ga = t.grad_mut(pa);
                for (std::size_t i = 0; i < m; ++i)
                    for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
            }
        });
    }
    return out;
}

inline Tensor relu(const Tensor& a) {
    Tensor out(a.shape, a.data);
    for (double& v : out.data) v = v > 0.0 ? v : 0.0;
    if (detail::any_tracked({&a})) {
        int pa = a.node;
        std::vector<double> av = a.data;
        // gradient at exactly 0 is defined as 0
        out.node =
            Tape::active()->add_node(out.size(), [pa, av = std::move(av)](Tape& t, int self) {
                const std::vector<double>& g = t.grad(self);
                if (pa >= 0) {
                    std::vector<double>& ga = t.grad_mut(pa);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        if (av[i] > 0.0) ga[i] += g[i];
                }
            });
    }
    return out;
}

inline Tensor sigmoid(const Tensor& a) {
    Tensor out(a.shape, a.data);
    for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    if (detail::any_tracked({&a})) {
        int pa = a.node;
        std::vector<double> sv = out.data;
        out.node =
            Tape::active()->add_node(out.size(), [pa, sv = std::move(sv)](Tape& t, int self) {
                const std::vector<double>& g = t.grad(self);
                if (pa >= 0) {
                    std::vector<double>& ga = t.grad_mut(pa);
                    for (std::size_t i = 0; i < g.size(); ++i)
                        ga[i] += sv[i] * (1.0 - sv[i]) * g[i];
                }
            });
    }
    return out;
}

// Softmax over the last axis; rows are all leading axes flattened.
inline Tensor softmax_lastaxis(const Tensor& a) {
    if (a.shape.empty())
        throw std::invalid_argument("softmax_lastaxis: empty shape");
    const std::size_t d = a.shape.back();
    const std::size_t rows = a.size() / d;
    Tensor out(a.shape, a.data);
    for (std::size_t r = 0; r < rows; ++r) {
        double* row = out.data.data() + r * d;
        double mx = row[0];
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            row[j] = std::exp(row[j] - mx);
            z += row[j];
        }
        for (std::size_t j = 0; j < d; ++j) row[j] /= z;
    }
    if (detail::any_tracked({&a})) {
        int pa = a.node;
        std::vector<double> sv = out.data;
        out.node = Tape::active()->add_node(
            out.size(), [pa, d, rows, sv = std::move(sv)](Tape& t, int self) {
                const std::vector<double>& g = t.grad(self);
                if (pa >= 0) {
                    std::vector<double>& ga = t.grad_mut(pa);
                    for (std::size_t r = 0; r < rows; ++r) {
                        const double* s = sv.data() + r * d;
                        const double* gr = g.data() + r * d;
                        double dot = 0.0;
                        for (std::size_t j = 0; j < d; ++j) dot += gr[j] * s[j];
                        for (std::size_t j = 0; j < d; ++j)
                            ga[r * d + j] += s[j] * (gr[j] - dot);
                    }
                }
            });
    }
    return out;
}

inline Tensor sum(const Tensor& a) {
    double acc = 0.0;
    for (double v : a.data) acc += v;
    Tensor out = Tensor::scalar(acc);
    if (detail::any_tracked({&a})) {
        int pa = a.node;
        std::size_t n = a.size();
        out.node = Tape::active()->add_node(1, [pa, n](Tape& t, int self) {
            const double g = t.grad(self)[0];
            if (pa >= 0) {
                std::vector<double>& ga = t.grad_mut(pa);
                for (std::size_t i = 0; i < n; ++i) ga[i] += g;
            }
        });
    }
    return out;
}

// Mean over the batch of -log softmax(logits)[label], via log-sum-exp.
inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels) {
    if (logits.shape.size() != 2)
        throw std::invalid_argument("cross_entropy: logits must be 2-d, got " +
                                    shape_str(logits.shape));
    const std::size_t b = logits.shape[0], c = logits.shape[1];
    if (labels.size() != b)
        throw std::invalid_argument("cross_entropy: batch " + std::to_string(b) + " vs " +
                                    std::to_string(labels.size()) + " labels");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= c)
            throw std::invalid_argument("cross_entropy: label " + std::to_string(y) +
                                        " out of range [0," + std::to_string(c) + ")");
    std::vector<double> probs(b * c);
    double loss = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        const double* row = logits.data.data() + r * c;
        double mx = row[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < c; ++j) probs[r * c + j] = std::exp(row[j] - lse);
        loss += lse - row[labels[r]];
    }
    loss /= static_cast<double>(b);
    Tensor out = Tensor::scalar(loss);
    if (detail::any_tracked({&logits})) {
        int pl = logits.node;
        std::vector<int> lab = labels;
        out.node = Tape::active()->add_node(
            1, [pl, b, c, probs = std::move(probs), lab = std::move(lab)](Tape& t, int self) {
                const double g = t.grad(self)[0];
                if (pl >= 0) {
                    std::vector<double>& gl = t.grad_mut(pl);
                    const double inv_b = 1.0 / static_cast<double>(b);
                    for (std::size_t r = 0; r < b; ++r)
                        for (std::size_t j = 0; j < c; ++j) {
                            double d = probs[r * c + j];
                            if (j == static_cast<std::size_t>(lab[r])) d -= 1.0;
                            gl[r * c + j] += g * d * inv_b;
                        }
                }
            });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle
// ---------------------------------------------------------------------------

// Central differences (f(p+h e_i) - f(p-h e_i)) / 2h per coordinate.
inline std::vector<double> finite_diff_grad(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> params, double h) {
    if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be positive");
    std::vector<double> grad(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double orig = params[i];
        params[i] = orig + h;
        const double fp = f(params);
        params[i] = orig - h;
        const double fm = f(params);
        params[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("finite_diff_grad: non-finite evaluation at coordinate " +
                                     std::to_string(i));
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

// Finite-difference of a single coordinate, for sampled checks.
inline double finite_diff_coord(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> params, std::size_t i, double h) {
    const double orig = params[i];
    params[i] = orig + h;
    const double fp = f(params);
    params[i] = orig - h;
    const double fm = f(params);
    if (!std::isfinite(fp) || !std::isfinite(fm))
        throw std::runtime_error("finite_diff_coord: non-finite evaluation");
    return (fp - fm) / (2.0 * h);
}

inline double rel_error(double a, double b) {
    const double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

}  // namespace laurel
