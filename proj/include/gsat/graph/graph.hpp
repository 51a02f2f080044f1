#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gsat/core/matrix.hpp"

namespace gsat {

using NodeId = std::uint32_t;
using Mask = std::vector<std::uint8_t>;

struct Masks {
    Mask train, val, test;

    friend bool operator==(const Masks&, const Masks&) = default;
};

inline std::size_t mask_count(const Mask& m) {
    return static_cast<std::size_t>(std::count(m.begin(), m.end(), std::uint8_t{1}));
}

/// Immutable node-attributed graph. Adjacency is CSR with both directions of
/// every undirected edge stored, columns sorted and unique within each row.
/// Self loops, when present, are a single slot (i, i).
class Graph {
public:
    Graph() = default;

    /// Builds from an undirected edge list. Duplicates are collapsed and every
    /// pair is mirrored. Throws on out-of-range endpoints or malformed labels.
    static Graph build(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges, DenseMatrix features,
                       std::vector<int> labels, std::size_t num_classes) {
        if (features.rows() != n)
            throw std::invalid_argument("Graph: feature rows " + std::to_string(features.rows()) + " != n " +
                                        std::to_string(n));
        if (labels.size() != n)
            throw std::invalid_argument("Graph: label count " + std::to_string(labels.size()) + " != n " +
                                        std::to_string(n));
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes)
                throw std::invalid_argument("Graph: label " + std::to_string(labels[i]) + " of node " +
                                            std::to_string(i) + " outside [0," + std::to_string(num_classes) + ")");
        }
        std::vector<std::pair<NodeId, NodeId>> directed;
        directed.reserve(edges.size() * 2);
        for (const auto& [u, v] : edges) {
            if (u >= n || v >= n)
                throw std::invalid_argument("Graph: edge (" + std::to_string(u) + "," + std::to_string(v) +
                                            ") outside node range " + std::to_string(n));
            directed.emplace_back(u, v);
            if (u != v) directed.emplace_back(v, u);
        }
        std::sort(directed.begin(), directed.end());
        directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

        Graph g;
        g.n_ = n;
        g.offsets_.assign(n + 1, 0);
        g.cols_.reserve(directed.size());
        g.srcs_.reserve(directed.size());
        for (const auto& [u, v] : directed) {
            g.offsets_[u + 1] += 1;
            g.cols_.push_back(v);
            g.srcs_.push_back(u);
        }
        for (std::size_t i = 0; i < n; ++i) g.offsets_[i + 1] += g.offsets_[i];
        g.features_ = std::move(features);
        g.labels_ = std::move(labels);
        g.num_classes_ = num_classes;
        g.masks_ = Masks{Mask(n, 0), Mask(n, 0), Mask(n, 0)};
        return g;
    }

    std::size_t num_nodes() const noexcept { return n_; }
    std::size_t num_edge_slots() const noexcept { return cols_.size(); }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t feature_dim() const noexcept { return features_.cols(); }

    std::size_t row_begin(std::size_t i) const { return offsets_[i]; }
    std::size_t row_end(std::size_t i) const { return offsets_[i + 1]; }
    std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }

    std::span<const NodeId> neighbors(std::size_t i) const {
        return {cols_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
    }

    /// Per-slot source and target; slot e is the directed edge src(e) -> dst(e).
    NodeId src(std::size_t e) const { return srcs_[e]; }
    NodeId dst(std::size_t e) const { return cols_[e]; }

    std::span<const std::size_t> offsets() const noexcept { return offsets_; }
    std::span<const NodeId> columns() const noexcept { return cols_; }

    bool has_edge(std::size_t i, std::size_t j) const {
        const auto nb = neighbors(i);
        return std::binary_search(nb.begin(), nb.end(), static_cast<NodeId>(j));
    }

    /// Slot index of (i, j), or num_edge_slots() if absent.
    std::size_t slot(std::size_t i, std::size_t j) const {
        const auto nb = neighbors(i);
        const auto it = std::lower_bound(nb.begin(), nb.end(), static_cast<NodeId>(j));
        if (it == nb.end() || *it != j) return num_edge_slots();
        return offsets_[i] + static_cast<std::size_t>(it - nb.begin());
    }

    /// Each undirected edge once, as (min, max), including self loops.
    std::vector<std::pair<NodeId, NodeId>> undirected_edges() const {
        std::vector<std::pair<NodeId, NodeId>> out;
        for (std::size_t e = 0; e < cols_.size(); ++e)
            if (srcs_[e] <= cols_[e]) out.emplace_back(srcs_[e], cols_[e]);
        return out;
    }

    /// Undirected edge count excluding self loops.
    std::size_t num_undirected_edges() const {
        std::size_t c = 0;
        for (std::size_t e = 0; e < cols_.size(); ++e)
            if (srcs_[e] < cols_[e]) ++c;
        return c;
    }

    const DenseMatrix& features() const noexcept { return features_; }
    std::span<const int> labels() const noexcept { return labels_; }
    const Masks& masks() const noexcept { return masks_; }
    bool self_loops_added() const noexcept { return self_loops_added_; }

    Graph with_masks(Masks m) const {
        if (m.train.size() != n_ || m.val.size() != n_ || m.test.size() != n_)
            throw std::invalid_argument("Graph: mask length must equal node count");
        for (std::size_t i = 0; i < n_; ++i) {
            if (m.train[i] + m.val[i] + m.test[i] > 1)
                throw std::invalid_argument("Graph: masks overlap at node " + std::to_string(i));
        }
        Graph g = *this;
        g.masks_ = std::move(m);
        return g;
    }

    Graph with_features(DenseMatrix f) const {
        if (f.rows() != n_) throw std::invalid_argument("Graph: feature rows must equal node count");
        Graph g = *this;
        g.features_ = std::move(f);
        return g;
    }

    /// Same nodes/attributes/masks, different edge set.
    Graph with_edges(std::span<const std::pair<NodeId, NodeId>> edges) const {
        Graph g = build(n_, edges, features_, labels_, num_classes_);
        g.masks_ = masks_;
        g.self_loops_added_ = self_loops_added_;
        return g;
    }

    Graph with_self_loop_flag(bool flag) const {
        Graph g = *this;
        g.self_loops_added_ = flag;
        return g;
    }

    friend bool operator==(const Graph&, const Graph&) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> offsets_{0};
    std::vector<NodeId> cols_;
    std::vector<NodeId> srcs_;
    DenseMatrix features_;
    std::vector<int> labels_;
    std::size_t num_classes_ = 0;
    Masks masks_;
    bool self_loops_added_ = false;
};

/// Adds (i, i) for every node. Idempotent.
inline Graph add_self_loops(const Graph& g) {
    auto edges = g.undirected_edges();
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
        if (!g.has_edge(i, i)) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(i));
    return g.with_edges(edges).with_self_loop_flag(true);
}

/// Scales each feature row to unit L1 norm; all-zero rows stay zero.
inline DenseMatrix row_normalize_l1(DenseMatrix f) {
    for (std::size_t i = 0; i < f.rows(); ++i) {
        auto r = f.row(i);
        double s = 0.0;
        for (double v : r) s += std::abs(v);
        if (s > 0.0)
            for (double& v : r) v /= s;
    }
    return f;
}

}  // namespace gsat
