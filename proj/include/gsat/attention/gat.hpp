#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsat/attention/spiking.hpp"
#include "gsat/core/matrix.hpp"
#include "gsat/core/tape.hpp"
#include "gsat/graph/graph.hpp"

namespace gsat {

struct GatAttentionParams {
    DenseMatrix theta;  // 1 x 2d'; first half scores the source, second half the neighbor
    double leaky_slope = 0.2;

    std::size_t width() const { return theta.cols() / 2; }

    void validate(std::size_t d) const {
        if (theta.rows() != 1 || theta.cols() != 2 * d)
            throw std::invalid_argument("gat attention: theta must be 1x" + std::to_string(2 * d) + ", got " +
                                        theta.shape_str());
    }
};

/// Raw scores via the split form: alpha_ij = h_i . theta1 + h_j . theta2,
/// with each half projected once per node rather than once per edge.
inline EdgeAttention gat_attention(const DenseMatrix& h, const GatAttentionParams& p, const Graph& g) {
    p.validate(h.cols());
    if (h.rows() != g.num_nodes()) throw std::invalid_argument("gat_attention: h rows != node count");
    const std::size_t d = h.cols();
    std::vector<double> left(h.rows(), 0.0), right(h.rows(), 0.0);
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t k = 0; k < d; ++k) {
            left[i] += h(i, k) * p.theta(0, k);
            right[i] += h(i, k) * p.theta(0, d + k);
        }
    EdgeAttention a;
    a.coefficients.resize(g.num_edge_slots());
    for (std::size_t e = 0; e < g.num_edge_slots(); ++e) a.coefficients[e] = left[g.src(e)] + right[g.dst(e)];
    return a;
}

/// Per-node softmax of leaky_relu(score) over the node's edge slots.
inline EdgeAttention softmax_normalize(const EdgeAttention& alpha, const Graph& g, double slope = 0.2) {
    if (alpha.size() != g.num_edge_slots()) throw std::invalid_argument("softmax_normalize: coefficient count != edge slots");
    EdgeAttention out{std::vector<double>(alpha.size(), 0.0)};
    std::vector<double> buf;
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        const auto b = g.row_begin(i), e = g.row_end(i);
        if (b == e) continue;
        buf.assign(alpha.coefficients.begin() + static_cast<std::ptrdiff_t>(b),
                   alpha.coefficients.begin() + static_cast<std::ptrdiff_t>(e));
        for (auto& v : buf) v = leaky_relu(v, slope);
        const auto s = softmax_row(buf);
        std::copy(s.begin(), s.end(), out.coefficients.begin() + static_cast<std::ptrdiff_t>(b));
    }
    return out;
}

namespace ad {

inline Var gat_scores(Tape& tape, Var h, Var theta, const Graph& g) {
    const DenseMatrix& hv = tape.value(h);
    GatAttentionParams p{tape.value(theta)};
    EdgeAttention a = gat_attention(hv, p, g);
    const std::size_t m = a.size();
    DenseMatrix out(m, 1, std::move(a.coefficients));
    return tape.push(std::move(out), {h, theta}, [h, theta, &g](Tape& t, const DenseMatrix& grad) {
        const auto& hv = t.value(h);
        const auto& th = t.value(theta);
        const std::size_t d = hv.cols();
        const std::size_t n = hv.rows();
        // Per-node totals of incoming gradient as source and as neighbor.
        std::vector<double> g_left(n, 0.0), g_right(n, 0.0);
        for (std::size_t e = 0; e < g.num_edge_slots(); ++e) {
            g_left[g.src(e)] += grad(e, 0);
            g_right[g.dst(e)] += grad(e, 0);
        }
        if (DenseMatrix* dh = t.grad_buffer(h)) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < d; ++k) (*dh)(i, k) += g_left[i] * th(0, k) + g_right[i] * th(0, d + k);
        }
        if (DenseMatrix* dth = t.grad_buffer(theta)) {
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < d; ++k) {
                    (*dth)(0, k) += g_left[i] * hv(i, k);
                    (*dth)(0, d + k) += g_right[i] * hv(i, k);
                }
        }
    });
}

inline Var edge_softmax(Tape& tape, Var scores, const Graph& g, double slope) {
    const auto& s = tape.value(scores);
    EdgeAttention normed = softmax_normalize(EdgeAttention{s.values()}, g, slope);
    DenseMatrix out(normed.size(), 1, normed.coefficients);
    return tape.push(std::move(out), {scores},
                     [scores, &g, slope, y = std::move(normed.coefficients)](Tape& t, const DenseMatrix& grad) {
                         const auto& s = t.value(scores);
                         DenseMatrix d(s.rows(), 1);
                         for (std::size_t i = 0; i < g.num_nodes(); ++i) {
                             double dot = 0.0;
                             for (auto e = g.row_begin(i); e < g.row_end(i); ++e) dot += grad(e, 0) * y[e];
                             for (auto e = g.row_begin(i); e < g.row_end(i); ++e)
                                 d(e, 0) = y[e] * (grad(e, 0) - dot) * leaky_relu_grad(s(e, 0), slope);
                         }
                         t.accumulate(scores, d);
                     });
}

}  // namespace ad
}  // namespace gsat
