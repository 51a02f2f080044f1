#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsat/core/rng.hpp"
#include "gsat/graph/graph.hpp"

namespace gsat {

enum class AttackKind { random, degree_targeted };

struct AttackSpec {
    AttackKind kind = AttackKind::random;
    double rate = 0.0;  // random: fraction of existing undirected edges; targeted: edges per target
    std::uint64_t seed = 42;
};

/// Number of edges a random attack at `rate` adds: round(rate * |E|), self loops excluded.
inline std::size_t random_attack_quota(const Graph& g, double rate) {
    if (!(rate >= 0.0)) throw std::invalid_argument("random_attack: rate must be >= 0");
    return static_cast<std::size_t>(std::llround(rate * static_cast<double>(g.num_undirected_edges())));
}

/// Adds round(rate * |E|) absent undirected pairs, sampled uniformly without
/// replacement. Node attributes, labels and masks are untouched.
inline Graph random_attack(const Graph& g, double rate, Rng& rng) {
    const std::size_t quota = random_attack_quota(g, rate);
    if (quota == 0) return g;
    const std::size_t n = g.num_nodes();
    const std::size_t all_pairs = n * (n - 1) / 2;
    const std::size_t present = g.num_undirected_edges();
    const std::size_t absent = all_pairs - present;
    if (quota > absent)
        throw std::invalid_argument("random_attack: rate " + std::to_string(rate) + " needs " + std::to_string(quota) +
                                    " new edges but only " + std::to_string(absent) + " node pairs are free");

    auto edges = g.undirected_edges();
    std::set<std::pair<NodeId, NodeId>> added;
    if (absent >= 2 * quota) {
        // Sparse regime: rejection sampling over random pairs.
        while (added.size() < quota) {
            auto u = static_cast<NodeId>(rng.below(n));
            auto v = static_cast<NodeId>(rng.below(n));
            if (u == v) continue;
            if (u > v) std::swap(u, v);
            if (g.has_edge(u, v)) continue;
            added.emplace(u, v);
        }
    } else {
        // Dense regime: enumerate the free pairs and take a random prefix.
        std::vector<std::pair<NodeId, NodeId>> free;
        free.reserve(absent);
        for (std::size_t u = 0; u < n; ++u)
            for (std::size_t v = u + 1; v < n; ++v)
                if (!g.has_edge(u, v)) free.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        rng.shuffle(free.begin(), free.end());
        added.insert(free.begin(), free.begin() + static_cast<std::ptrdiff_t>(quota));
    }
    edges.insert(edges.end(), added.begin(), added.end());
    return g.with_edges(edges);
}

/// For each target, connects it to the `budget` highest-degree nodes of a
/// different class that it is not already adjacent to. Degree ties are
/// broken by a seeded shuffle.
inline Graph degree_targeted_attack(const Graph& g, std::size_t budget, std::span<const NodeId> targets, Rng& rng) {
    if (budget == 0) return g;
    const std::size_t n = g.num_nodes();
    auto plain_degree = [&](std::size_t i) { return g.degree(i) - (g.has_edge(i, i) ? 1 : 0); };

    std::vector<NodeId> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<NodeId>(i);
    rng.shuffle(order.begin(), order.end());
    std::stable_sort(order.begin(), order.end(),
                     [&](NodeId a, NodeId b) { return plain_degree(a) > plain_degree(b); });

    auto edges = g.undirected_edges();
    std::set<std::pair<NodeId, NodeId>> added;
    for (const NodeId t : targets) {
        if (t >= n) throw std::invalid_argument("degree_targeted_attack: target " + std::to_string(t) + " out of range");
        if (budget > n - 1 - plain_degree(t))
            throw std::invalid_argument("degree_targeted_attack: budget " + std::to_string(budget) +
                                        " exceeds free slots of node " + std::to_string(t));
        std::size_t placed = 0;
        for (const NodeId c : order) {
            if (placed == budget) break;
            if (c == t || g.labels()[c] == g.labels()[t] || g.has_edge(t, c)) continue;
            const auto key = std::minmax(t, c);
            if (!added.emplace(key.first, key.second).second) continue;
            ++placed;
        }
        if (placed < budget)
            throw std::invalid_argument("degree_targeted_attack: node " + std::to_string(t) + " has only " +
                                        std::to_string(placed) + " eligible other-class partners");
    }
    edges.insert(edges.end(), added.begin(), added.end());
    return g.with_edges(edges);
}

}  // namespace gsat
