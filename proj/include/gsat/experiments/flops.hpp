#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "gsat/model/network.hpp"

namespace gsat {

/// Operation counts for one forward pass.
///
/// Counting rules, applied identically to both attention kinds:
///   dense matmul (a x b)(b x c)          2abc
///   baseline scores                      2 * (2d') per edge slot
///   baseline softmax                     2 per edge slot (exp + divide)
///   spiking charge Z(t) * Theta(t)       2 * nnz(Z(t)) additions per step
///   spiking fire + reset                 2n * 2 per step
///   symmetric normalization              1 per edge slot + 2n (square roots)
///   aggregation                          2 * (edge slots) * d'
struct OpCount {
    std::uint64_t flops = 0;       // multiply-accumulate and other float ops
    std::uint64_t spike_adds = 0;  // accumulate-only additions driven by input spikes

    std::uint64_t total() const { return flops + spike_adds; }
    OpCount& operator+=(const OpCount& o) {
        flops += o.flops;
        spike_adds += o.spike_adds;
        return *this;
    }
    friend bool operator==(const OpCount&, const OpCount&) = default;
};

struct FlopsReport {
    OpCount projection;
    OpCount attention;
    OpCount normalization;
    OpCount aggregation;

    OpCount attention_path() const {
        OpCount c = attention;
        c += normalization;
        return c;
    }
    OpCount total() const {
        OpCount c = projection;
        c += attention;
        c += normalization;
        c += aggregation;
        return c;
    }
    friend bool operator==(const FlopsReport&, const FlopsReport&) = default;
};

inline std::uint64_t dense_matmul_flops(std::uint64_t a, std::uint64_t b, std::uint64_t c) { return 2 * a * b * c; }

/// Applies the counting rules to a recorded forward pass.
inline FlopsReport count_flops(const ForwardRecord& trace) {
    FlopsReport r;
    const std::uint64_t n = trace.num_nodes;
    const std::uint64_t m = trace.num_edge_slots;
    for (const auto& layer : trace.layers) {
        for (const auto& head : layer) {
            const std::uint64_t d = head.out_dim;
            r.projection.flops += dense_matmul_flops(n, head.in_dim, d);
            r.aggregation.flops += 2 * m * d;
            if (head.kind == AttentionKind::baseline) {
                r.attention.flops += 2 * (2 * d) * m;
                r.normalization.flops += 2 * m;
            } else {
                for (const auto z : head.spikes.input_spikes) r.attention.spike_adds += 2 * z;
                r.attention.flops += static_cast<std::uint64_t>(head.spikes.T) * 2 * n * 2;
                r.normalization.flops += m + 2 * n;
            }
        }
    }
    return r;
}

inline FlopsReport count_flops(const ModelConfig& cfg, const Graph& g, const ForwardRecord& trace) {
    const Graph looped = g.self_loops_added() ? g : add_self_loops(g);
    if (trace.num_nodes != looped.num_nodes() || trace.num_edge_slots != looped.num_edge_slots())
        throw std::invalid_argument("count_flops: trace was recorded on a different graph");
    const auto layers = cfg.layers(looped.feature_dim(), looped.num_classes());
    if (trace.layers.size() != layers.size())
        throw std::invalid_argument("count_flops: trace layer count does not match the configuration");
    return count_flops(trace);
}

/// Instruments one evaluation-mode forward pass (fixed evaluation seed) and counts it.
inline FlopsReport count_flops(const ModelConfig& cfg, const Graph& g, const ModelParams& params) {
    const Graph looped = g.self_loops_added() ? g : add_self_loops(g);
    Tape tape;
    Rng rng = Rng(cfg.seed).split(0xF10F5);
    ForwardRecord rec;
    ForwardOptions opts;
    opts.record = &rec;
    model_forward(tape, params, cfg, looped, rng, false, opts);
    return count_flops(rec);
}

inline void to_json(nlohmann::json& j, const OpCount& c) {
    j = nlohmann::json{{"flops", c.flops}, {"spike_adds", c.spike_adds}, {"total", c.total()}};
}

inline void to_json(nlohmann::json& j, const FlopsReport& r) {
    j = nlohmann::json{{"projection", r.projection},     {"attention", r.attention},
                       {"normalization", r.normalization}, {"aggregation", r.aggregation},
                       {"attention_path", r.attention_path()}, {"total", r.total()}};
}

}  // namespace gsat
