#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsat/core/rng.hpp"
#include "gsat/graph/graph.hpp"

namespace gsat {

/// How many nodes go to validation / test after the per-class training draw.
/// A count of nullopt for `test` means "every remaining node".
struct SplitPolicy {
    std::size_t train_per_class = 20;
    std::size_t val_count = 500;
    bool val_per_class = false;
    std::optional<std::size_t> test_count = 1000;

    /// 20 per class / 500 / 1000.
    static SplitPolicy citation() { return {}; }
    /// 20 per class / 30 per class / rest.
    static SplitPolicy copurchase() { return {20, 30, true, std::nullopt}; }

    static SplitPolicy from_name(const std::string& name) {
        if (name == "citation") return citation();
        if (name == "copurchase" || name == "co-purchase") return copurchase();
        throw std::invalid_argument("unknown split policy '" + name + "'");
    }
};

inline Masks split_nodes(const Graph& g, const SplitPolicy& policy, Rng& rng) {
    const std::size_t n = g.num_nodes();
    const std::size_t c = g.num_classes();
    std::vector<std::vector<std::size_t>> by_class(c);
    for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(g.labels()[i])].push_back(i);

    Masks m{Mask(n, 0), Mask(n, 0), Mask(n, 0)};
    std::vector<std::vector<std::size_t>> rest_by_class(c);
    for (std::size_t k = 0; k < c; ++k) {
        auto& nodes = by_class[k];
        if (nodes.size() < policy.train_per_class)
            throw std::invalid_argument("split_nodes: class " + std::to_string(k) + " has " +
                                        std::to_string(nodes.size()) + " nodes, need " +
                                        std::to_string(policy.train_per_class));
        rng.shuffle(nodes.begin(), nodes.end());
        for (std::size_t t = 0; t < policy.train_per_class; ++t) m.train[nodes[t]] = 1;
        rest_by_class[k].assign(nodes.begin() + static_cast<std::ptrdiff_t>(policy.train_per_class), nodes.end());
    }

    std::vector<std::size_t> pool;
    if (policy.val_per_class) {
        for (std::size_t k = 0; k < c; ++k) {
            auto& rest = rest_by_class[k];
            if (rest.size() < policy.val_count)
                throw std::invalid_argument("split_nodes: class " + std::to_string(k) +
                                            " lacks nodes for per-class validation");
            for (std::size_t t = 0; t < policy.val_count; ++t) m.val[rest[t]] = 1;
            pool.insert(pool.end(), rest.begin() + static_cast<std::ptrdiff_t>(policy.val_count), rest.end());
        }
        std::sort(pool.begin(), pool.end());
        rng.shuffle(pool.begin(), pool.end());
    } else {
        for (const auto& rest : rest_by_class) pool.insert(pool.end(), rest.begin(), rest.end());
        std::sort(pool.begin(), pool.end());
        rng.shuffle(pool.begin(), pool.end());
        if (pool.size() < policy.val_count)
            throw std::invalid_argument("split_nodes: not enough nodes for " + std::to_string(policy.val_count) +
                                        " validation nodes");
        for (std::size_t t = 0; t < policy.val_count; ++t) m.val[pool[t]] = 1;
        pool.erase(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(policy.val_count));
    }

    const std::size_t test_n = policy.test_count.value_or(pool.size());
    if (pool.size() < test_n)
        throw std::invalid_argument("split_nodes: not enough nodes for " + std::to_string(test_n) + " test nodes");
    for (std::size_t t = 0; t < test_n; ++t) m.test[pool[t]] = 1;
    return m;
}

struct SbmSpec {
    std::size_t blocks = 2;
    std::size_t nodes_per_block = 100;
    double p_in = 0.1;
    double p_out = 0.01;
    std::size_t feature_dim = 8;
    double feature_shift = 1.0;
};

/// Planted-partition graph. Each pair is an independent Bernoulli draw
/// (p_in inside a block, p_out across). Node features are the block mean
/// (+shift on coordinates j with j % blocks == block, 0 elsewhere) plus unit
/// Gaussian noise. Labels are block ids.
inline Graph sbm_generate(const SbmSpec& spec, Rng& rng) {
    if (!(spec.p_out >= 0.0 && spec.p_out < spec.p_in && spec.p_in <= 1.0))
        throw std::invalid_argument("sbm_generate: need 0 <= p_out < p_in <= 1");
    if (spec.blocks == 0 || spec.nodes_per_block == 0 || spec.feature_dim == 0)
        throw std::invalid_argument("sbm_generate: blocks, nodes_per_block and feature_dim must be >= 1");
    const std::size_t n = spec.blocks * spec.nodes_per_block;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i / spec.nodes_per_block);

    std::vector<std::pair<NodeId, NodeId>> edges;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double p = labels[i] == labels[j] ? spec.p_in : spec.p_out;
            if (rng.uniform() < p) edges.emplace_back(static_cast<NodeId>(i), static_cast<NodeId>(j));
        }
    }

    DenseMatrix x(n, spec.feature_dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto b = static_cast<std::size_t>(labels[i]);
        for (std::size_t j = 0; j < spec.feature_dim; ++j) {
            const double mean = (j % spec.blocks == b) ? spec.feature_shift : 0.0;
            x(i, j) = mean + rng.normal();
        }
    }
    return Graph::build(n, edges, std::move(x), std::move(labels), spec.blocks);
}

}  // namespace gsat
