#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsat/attention/gat.hpp"
#include "gsat/attention/spiking.hpp"
#include "gsat/core/optim.hpp"
#include "gsat/core/rng.hpp"
#include "gsat/core/tape.hpp"
#include "gsat/graph/graph.hpp"
#include "gsat/model/config.hpp"

namespace gsat {

/// Projection W (in x out) plus attention parameters: T (or 1) matrices of
/// out x 2 for spiking heads, a single 1 x 2*out vector for baseline heads.
struct HeadParams {
    DenseMatrix weight;
    std::vector<DenseMatrix> attention;
};

struct LayerParams {
    std::vector<HeadParams> heads;
};

struct ModelParams {
    std::vector<LayerParams> layers;

    /// Fixed traversal order shared by the optimizer and the parameter file.
    template <typename F>
    void for_each(F&& f) {
        for (auto& l : layers)
            for (auto& h : l.heads) {
                f(h.weight);
                for (auto& a : h.attention) f(a);
            }
    }
    template <typename F>
    void for_each(F&& f) const {
        for (const auto& l : layers)
            for (const auto& h : l.heads) {
                f(h.weight);
                for (const auto& a : h.attention) f(a);
            }
    }

    std::vector<DenseMatrix> flatten() const {
        std::vector<DenseMatrix> out;
        for_each([&](const DenseMatrix& m) { out.push_back(m); });
        return out;
    }

    friend bool operator==(const ModelParams& a, const ModelParams& b) { return a.flatten() == b.flatten(); }
};

inline std::size_t attention_matrix_count(const ModelConfig& cfg, AttentionKind kind) {
    if (kind == AttentionKind::baseline) return 1;
    return cfg.share_theta ? 1 : cfg.T;
}

/// Glorot initialization. Every tensor draws from its own stream keyed by
/// (layer, head, slot), so changing T or the head count leaves the other
/// tensors' initial values untouched.
inline ModelParams init_params(const ModelConfig& cfg, std::size_t in_dim, std::size_t classes, Rng& rng) {
    ModelParams p;
    const auto layers = cfg.layers(in_dim, classes);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& lc = layers[l];
        LayerParams lp;
        for (std::size_t k = 0; k < lc.heads; ++k) {
            auto stream = [&](std::size_t slot) { return rng.split((l << 48) | (k << 24) | slot); };
            HeadParams hp;
            Rng wr = stream(0);
            hp.weight = glorot_init(lc.in_dim, lc.out_dim, wr);
            const std::size_t count = attention_matrix_count(cfg, lc.attention_kind);
            for (std::size_t t = 0; t < count; ++t) {
                Rng ar = stream(1 + t);
                hp.attention.push_back(lc.attention_kind == AttentionKind::spiking ? glorot_init(lc.out_dim, 2, ar)
                                                                                   : glorot_init(1, 2 * lc.out_dim, ar));
            }
            lp.heads.push_back(std::move(hp));
        }
        p.layers.push_back(std::move(lp));
    }
    return p;
}

/// Rebuilds the parameter structure from a flat list; shapes must match `cfg`.
inline ModelParams unflatten_params(const ModelConfig& cfg, std::size_t in_dim, std::size_t classes,
                                    std::vector<DenseMatrix> flat) {
    Rng dummy(0);
    ModelParams p = init_params(cfg, in_dim, classes, dummy);
    std::size_t idx = 0;
    bool ok = true;
    p.for_each([&](DenseMatrix& m) {
        if (idx >= flat.size() || !flat[idx].same_shape(m)) {
            ok = false;
            ++idx;
            return;
        }
        m = std::move(flat[idx++]);
    });
    if (!ok || idx != flat.size())
        throw std::invalid_argument("parameter list does not match the model configuration");
    return p;
}

// Tape mirrors of the parameters.
struct HeadVars {
    Var weight;
    std::vector<Var> attention;
};
struct LayerVars {
    std::vector<HeadVars> heads;
};

/// h'_i = act(sum over slots (i -> j) of alpha'_ij * h_j).
inline DenseMatrix aggregate(const EdgeAttention& alpha, const DenseMatrix& h, const Graph& g,
                             ad::Activation act = ad::Activation::identity) {
    if (alpha.size() != g.num_edge_slots() || h.rows() != g.num_nodes())
        throw std::invalid_argument("aggregate: attention/feature shape does not match graph");
    DenseMatrix out(h.rows(), h.cols());
    for (std::size_t e = 0; e < g.num_edge_slots(); ++e) {
        const double w = alpha.coefficients[e];
        if (w == 0.0) continue;
        auto o = out.row(g.src(e));
        auto hj = h.row(g.dst(e));
        for (std::size_t k = 0; k < o.size(); ++k) o[k] += w * hj[k];
    }
    for (auto& v : out.data()) v = act == ad::Activation::elu ? elu(v) : act == ad::Activation::relu ? std::max(v, 0.0) : v;
    return out;
}

namespace ad {

/// Sparse weighted neighbor sum; gradient flows to both alpha and h.
inline Var aggregate(Tape& tape, Var alpha, Var h, const Graph& g) {
    const auto& a = tape.value(alpha);
    EdgeAttention att{a.values()};
    DenseMatrix out = gsat::aggregate(att, tape.value(h), g);
    return tape.push(std::move(out), {alpha, h}, [alpha, h, &g](Tape& t, const DenseMatrix& grad) {
        const auto& a = t.value(alpha);
        const auto& hv = t.value(h);
        if (DenseMatrix* da = t.grad_buffer(alpha)) {
            for (std::size_t e = 0; e < g.num_edge_slots(); ++e) {
                auto gi = grad.row(g.src(e));
                auto hj = hv.row(g.dst(e));
                double acc = 0.0;
                for (std::size_t k = 0; k < gi.size(); ++k) acc += gi[k] * hj[k];
                (*da)(e, 0) += acc;
            }
        }
        if (DenseMatrix* dh = t.grad_buffer(h)) {
            for (std::size_t e = 0; e < g.num_edge_slots(); ++e) {
                const double w = a(e, 0);
                if (w == 0.0) continue;
                auto gi = grad.row(g.src(e));
                auto dj = dh->row(g.dst(e));
                for (std::size_t k = 0; k < gi.size(); ++k) dj[k] += w * gi[k];
            }
        }
    });
}

/// Inverted dropout with keep-probability 1 - rate.
inline Var dropout(Tape& tape, Var x, double rate, Rng& rng) {
    if (rate <= 0.0) return x;
    const auto& v = tape.value(x);
    DenseMatrix mask(v.rows(), v.cols());
    const double scale = 1.0 / (1.0 - rate);
    for (auto& m : mask.data()) m = rng.uniform() >= rate ? scale : 0.0;
    DenseMatrix out = v;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
    return tape.push(std::move(out), {x}, [x, mask = std::move(mask)](Tape& t, const DenseMatrix& g) {
        DenseMatrix d = g;
        for (std::size_t i = 0; i < d.size(); ++i) d.data()[i] *= mask.data()[i];
        t.accumulate(x, d);
    });
}

}  // namespace ad

/// What one head produced during a forward pass.
struct HeadRecord {
    AttentionKind kind = AttentionKind::spiking;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    EdgeAttention normalized;
    SpikingTrace spikes;  // empty for baseline heads
};

struct ForwardRecord {
    std::size_t num_nodes = 0;
    std::size_t num_edge_slots = 0;
    std::vector<std::vector<HeadRecord>> layers;
};

/// Attention coefficients to inject instead of computing them (one per head per layer).
using FrozenAttention = std::vector<std::vector<EdgeAttention>>;

struct LayerContext {
    const Graph& graph;
    const ModelConfig& config;
    std::span<Rng> head_rngs;                              // one stream per head
    const std::vector<EdgeAttention>* frozen = nullptr;    // per head, optional
    std::vector<HeadRecord>* record = nullptr;
};

/// Project, attend, aggregate per head; combine by concat or average.
inline Var multi_head_forward(Tape& tape, Var x, const LayerConfig& layer, const LayerVars& params,
                              const LayerContext& ctx) {
    const Graph& g = ctx.graph;
    if (params.heads.size() != layer.heads) throw std::invalid_argument("multi_head_forward: head count mismatch");
    if (ctx.head_rngs.size() < layer.heads) throw std::invalid_argument("multi_head_forward: need one rng per head");
    if (tape.value(x).cols() != layer.in_dim || tape.value(x).rows() != g.num_nodes())
        throw std::invalid_argument("multi_head_forward: input is " + tape.value(x).shape_str() + ", layer expects " +
                                    std::to_string(g.num_nodes()) + "x" + std::to_string(layer.in_dim));
    std::vector<Var> outs;
    for (std::size_t k = 0; k < layer.heads; ++k) {
        const auto& hv = params.heads[k];
        const Var h = ad::matmul(tape, x, hv.weight);
        HeadRecord rec{layer.attention_kind, layer.in_dim, layer.out_dim, {}, {}};
        Var alpha;
        if (ctx.frozen) {
            alpha = tape.constant(DenseMatrix(g.num_edge_slots(), 1, ctx.frozen->at(k).coefficients));
        } else if (layer.attention_kind == AttentionKind::spiking) {
            const Var raw = ad::spiking_scores(tape, h, hv.attention, ctx.config.spiking_shape(),
                                               ctx.config.surrogate, g, ctx.head_rngs[k], &rec.spikes);
            alpha = ad::symmetric_normalize(tape, raw, g);
        } else {
            const Var raw = ad::gat_scores(tape, h, hv.attention.front(), g);
            alpha = ad::edge_softmax(tape, raw, g, ctx.config.leaky_slope);
        }
        if (ctx.record) {
            rec.normalized.coefficients = tape.value(alpha).values();
            ctx.record->push_back(std::move(rec));
        }
        Var agg = ad::aggregate(tape, alpha, h, g);
        if (layer.head_combine == HeadCombine::concat) agg = ad::activate(tape, agg, layer.activation);
        outs.push_back(agg);
    }
    if (layer.head_combine == HeadCombine::concat) return outs.size() == 1 ? outs.front() : ad::concat_cols(tape, outs);
    const Var avg = outs.size() == 1 ? outs.front() : ad::mean_of(tape, outs);
    return ad::activate(tape, avg, layer.activation);
}

struct ForwardOptions {
    bool training = false;
    const FrozenAttention* frozen = nullptr;
    ForwardRecord* record = nullptr;
};

struct ForwardOutput {
    Var probs;
    std::vector<LayerVars> params;
};

/// Places parameters on the tape (tracked when `track`), runs every layer, and
/// applies the final softmax. `g` must outlive the tape.
inline ForwardOutput model_forward(Tape& tape, const ModelParams& params, const ModelConfig& cfg, const Graph& g,
                                   Rng& rng, bool track, const ForwardOptions& opts = {}) {
    ForwardOutput out;
    for (const auto& lp : params.layers) {
        LayerVars lv;
        for (const auto& hp : lp.heads) {
            HeadVars hv;
            hv.weight = track ? tape.parameter(hp.weight) : tape.constant(hp.weight);
            for (const auto& a : hp.attention) hv.attention.push_back(track ? tape.parameter(a) : tape.constant(a));
            lv.heads.push_back(std::move(hv));
        }
        out.params.push_back(std::move(lv));
    }

    const auto layers = cfg.layers(g.feature_dim(), g.num_classes());
    if (layers.size() != params.layers.size()) throw std::invalid_argument("model_forward: layer count mismatch");
    if (opts.record) {
        opts.record->num_nodes = g.num_nodes();
        opts.record->num_edge_slots = g.num_edge_slots();
        opts.record->layers.assign(layers.size(), {});
    }

    Var x = tape.constant(g.features());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (opts.training) {
            Rng drop_rng = rng.split(1000 + l);
            x = ad::dropout(tape, x, cfg.dropout, drop_rng);
        }
        std::vector<Rng> head_rngs;
        for (std::size_t k = 0; k < layers[l].heads; ++k) head_rngs.push_back(rng.split(l * 64 + k));
        LayerContext ctx{g, cfg, head_rngs, opts.frozen ? &opts.frozen->at(l) : nullptr,
                         opts.record ? &opts.record->layers[l] : nullptr};
        x = multi_head_forward(tape, x, layers[l], out.params[l], ctx);
    }
    out.probs = ad::softmax_rows(tape, x);
    return out;
}

/// Fraction of non-self-loop edge slots whose normalized coefficient is exactly 0.
inline double edge_removal_ratio(const EdgeAttention& alpha, const Graph& g) {
    if (alpha.size() != g.num_edge_slots()) throw std::invalid_argument("edge_removal_ratio: size mismatch");
    std::size_t total = 0, zero = 0;
    for (std::size_t e = 0; e < alpha.size(); ++e) {
        if (g.src(e) == g.dst(e)) continue;
        ++total;
        if (alpha.coefficients[e] == 0.0) ++zero;
    }
    return total == 0 ? 0.0 : static_cast<double>(zero) / static_cast<double>(total);
}

/// Pooled removal ratio over every spiking head in a record (0 when there are none).
inline double edge_removal_ratio(const ForwardRecord& rec, const Graph& g) {
    std::size_t total = 0, zero = 0;
    for (const auto& layer : rec.layers)
        for (const auto& h : layer) {
            if (h.kind != AttentionKind::spiking) continue;
            for (std::size_t e = 0; e < h.normalized.size(); ++e) {
                if (g.src(e) == g.dst(e)) continue;
                ++total;
                if (h.normalized.coefficients[e] == 0.0) ++zero;
            }
        }
    return total == 0 ? 0.0 : static_cast<double>(zero) / static_cast<double>(total);
}

}  // namespace gsat
