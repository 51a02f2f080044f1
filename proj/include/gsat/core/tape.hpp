#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gsat/core/matrix.hpp"

namespace gsat {

/// Handle to a node on a Tape.
struct Var {
    std::size_t id = static_cast<std::size_t>(-1);
};

/// Minimal reverse-mode tape. Nodes are appended in evaluation order, so a
/// single reverse sweep over the node list is a valid topological order.
class Tape {
public:
    /// Receives the gradient flowing into the node's output.
    using BackwardFn = std::function<void(Tape&, const DenseMatrix& out_grad)>;

    Var constant(DenseMatrix value) { return append(std::move(value), false, {}); }
    Var parameter(DenseMatrix value) { return append(std::move(value), true, {}); }

    /// Records an op result. `fn` runs only if some parent requires grad.
    Var push(DenseMatrix value, std::span<const Var> parents, BackwardFn fn) {
        bool req = false;
        for (const Var p : parents) req = req || nodes_.at(p.id).requires_grad;
        if (!value.all_finite()) throw std::runtime_error("non-finite value produced on tape");
        return append(std::move(value), req, req ? std::move(fn) : BackwardFn{});
    }
    Var push(DenseMatrix value, std::initializer_list<Var> parents, BackwardFn fn) {
        return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
    }

    const DenseMatrix& value(Var v) const { return nodes_.at(v.id).value; }
    bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }

    /// Gradient of the last backward() target w.r.t. v (zeros if none reached it).
    const DenseMatrix& grad(Var v) {
        auto& n = nodes_.at(v.id);
        ensure_grad(n);
        return n.grad;
    }

    /// Adds `g` into v's gradient buffer; no-op for constants.
    void accumulate(Var v, const DenseMatrix& g) {
        auto& n = nodes_.at(v.id);
        if (!n.requires_grad) return;
        ensure_grad(n);
        n.grad += g;
    }

    /// Mutable gradient buffer for ops that scatter sparsely. Null for constants.
    DenseMatrix* grad_buffer(Var v) {
        auto& n = nodes_.at(v.id);
        if (!n.requires_grad) return nullptr;
        ensure_grad(n);
        return &n.grad;
    }

    void backward(Var scalar) {
        auto& root = nodes_.at(scalar.id);
        if (root.value.size() != 1) throw std::invalid_argument("backward: target must be 1x1, got " + root.value.shape_str());
        for (auto& n : nodes_) n.grad = DenseMatrix();
        if (!root.requires_grad) return;
        ensure_grad(root);
        root.grad(0, 0) = 1.0;
        for (std::size_t i = scalar.id + 1; i-- > 0;) {
            auto& n = nodes_[i];
            if (!n.backward || n.grad.empty()) continue;
            const DenseMatrix g = n.grad;
            n.backward(*this, g);
        }
    }

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    struct Node {
        DenseMatrix value;
        DenseMatrix grad;
        bool requires_grad = false;
        BackwardFn backward;
    };

    Var append(DenseMatrix value, bool req, BackwardFn fn) {
        nodes_.push_back(Node{std::move(value), DenseMatrix(), req, std::move(fn)});
        return Var{nodes_.size() - 1};
    }

    static void ensure_grad(Node& n) {
        if (n.grad.empty() && !n.value.empty()) n.grad = DenseMatrix(n.value.rows(), n.value.cols());
    }

    std::vector<Node> nodes_;
};

namespace ad {

inline Var matmul(Tape& tape, Var a, Var b) {
    DenseMatrix out = gsat::matmul(tape.value(a), tape.value(b));
    return tape.push(std::move(out), {a, b}, [a, b](Tape& t, const DenseMatrix& g) {
        if (t.requires_grad(a)) t.accumulate(a, matmul_nt(g, t.value(b)));
        if (t.requires_grad(b)) t.accumulate(b, matmul_tn(t.value(a), g));
    });
}

inline Var add(Tape& tape, Var a, Var b) {
    DenseMatrix out = tape.value(a) + tape.value(b);
    return tape.push(std::move(out), {a, b}, [a, b](Tape& t, const DenseMatrix& g) {
        t.accumulate(a, g);
        t.accumulate(b, g);
    });
}

enum class Activation { identity, elu, relu };

inline Var activate(Tape& tape, Var x, Activation act) {
    if (act == Activation::identity) return x;
    DenseMatrix out = tape.value(x);
    for (auto& v : out.data()) v = act == Activation::elu ? elu(v) : std::max(v, 0.0);
    return tape.push(std::move(out), {x}, [x, act](Tape& t, const DenseMatrix& g) {
        const auto& in = t.value(x);
        DenseMatrix d = g;
        for (std::size_t i = 0; i < d.size(); ++i) {
            const double xi = in.data()[i];
            d.data()[i] *= act == Activation::elu ? elu_grad(xi) : (xi > 0.0 ? 1.0 : 0.0);
        }
        t.accumulate(x, d);
    });
}

/// Horizontal concatenation of equally tall blocks.
inline Var concat_cols(Tape& tape, const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const std::size_t rows = tape.value(parts.front()).rows();
    std::size_t cols = 0;
    for (const Var p : parts) {
        if (tape.value(p).rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
        cols += tape.value(p).cols();
    }
    DenseMatrix out(rows, cols);
    std::size_t off = 0;
    for (const Var p : parts) {
        const auto& v = tape.value(p);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < v.cols(); ++j) out(i, off + j) = v(i, j);
        off += v.cols();
    }
    return tape.push(std::move(out), parts, [parts](Tape& t, const DenseMatrix& g) {
        std::size_t o = 0;
        for (const Var p : parts) {
            const std::size_t w = t.value(p).cols();
            if (DenseMatrix* buf = t.grad_buffer(p)) {
                for (std::size_t i = 0; i < g.rows(); ++i)
                    for (std::size_t j = 0; j < w; ++j) (*buf)(i, j) += g(i, o + j);
            }
            o += w;
        }
    });
}

/// Elementwise mean of equally shaped inputs.
inline Var mean_of(Tape& tape, const std::vector<Var>& parts) {
    if (parts.empty()) throw std::invalid_argument("mean_of: no inputs");
    DenseMatrix out = tape.value(parts.front());
    for (std::size_t k = 1; k < parts.size(); ++k) out += tape.value(parts[k]);
    const double inv = 1.0 / static_cast<double>(parts.size());
    out *= inv;
    return tape.push(std::move(out), parts, [parts, inv](Tape& t, const DenseMatrix& g) {
        const DenseMatrix scaled = g * inv;
        for (const Var p : parts) t.accumulate(p, scaled);
    });
}

/// Row-wise softmax.
inline Var softmax_rows(Tape& tape, Var x) {
    const auto& in = tape.value(x);
    DenseMatrix out(in.rows(), in.cols());
    for (std::size_t i = 0; i < in.rows(); ++i) {
        const auto s = softmax_row(in.row(i));
        std::copy(s.begin(), s.end(), out.row(i).begin());
    }
    DenseMatrix saved = out;
    return tape.push(std::move(out), {x}, [x, p = std::move(saved)](Tape& t, const DenseMatrix& g) {
        DenseMatrix d(p.rows(), p.cols());
        for (std::size_t i = 0; i < p.rows(); ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) dot += g(i, j) * p(i, j);
            for (std::size_t j = 0; j < p.cols(); ++j) d(i, j) = p(i, j) * (g(i, j) - dot);
        }
        t.accumulate(x, d);
    });
}

inline constexpr double kProbFloor = 1e-12;

/// Summed negative log-likelihood of the true class over masked rows of a
/// probability matrix. Probabilities are floored at kProbFloor.
inline Var cross_entropy(Tape& tape, Var probs, std::span<const int> labels, std::span<const std::uint8_t> mask) {
    const auto& o = tape.value(probs);
    if (labels.size() != o.rows() || mask.size() != o.rows())
        throw std::invalid_argument("cross_entropy: labels/mask length must equal row count");
    std::vector<std::size_t> rows;
    double loss = 0.0;
    for (std::size_t i = 0; i < o.rows(); ++i) {
        if (!mask[i]) continue;
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= o.cols())
            throw std::invalid_argument("cross_entropy: node " + std::to_string(i) + " has invalid class " +
                                        std::to_string(labels[i]));
        loss -= std::log(std::max(o(i, static_cast<std::size_t>(labels[i])), kProbFloor));
        rows.push_back(i);
    }
    std::vector<int> lab(labels.begin(), labels.end());
    return tape.push(DenseMatrix(1, 1, loss), {probs}, [probs, rows, lab](Tape& t, const DenseMatrix& g) {
        const auto& p = t.value(probs);
        DenseMatrix d(p.rows(), p.cols());
        for (const auto i : rows) {
            const auto c = static_cast<std::size_t>(lab[i]);
            const double pi = p(i, c);
            if (pi > kProbFloor) d(i, c) = -g(0, 0) / pi;
        }
        t.accumulate(probs, d);
    });
}

}  // namespace ad
}  // namespace gsat
