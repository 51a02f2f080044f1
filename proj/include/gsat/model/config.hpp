#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsat/attention/spiking.hpp"
#include "gsat/core/tape.hpp"

namespace gsat {

enum class AttentionKind { spiking, baseline };
enum class HeadCombine { concat, average };

inline std::string to_string(AttentionKind k) { return k == AttentionKind::spiking ? "spiking" : "baseline"; }
inline AttentionKind attention_kind_from(const std::string& s) {
    if (s == "spiking" || s == "gsat") return AttentionKind::spiking;
    if (s == "baseline" || s == "gat") return AttentionKind::baseline;
    throw std::invalid_argument("unknown attention kind '" + s + "' (expected spiking|baseline)");
}

struct LayerConfig {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::size_t heads = 1;
    HeadCombine head_combine = HeadCombine::concat;
    AttentionKind attention_kind = AttentionKind::spiking;
    ad::Activation activation = ad::Activation::elu;

    std::size_t output_width() const { return head_combine == HeadCombine::concat ? heads * out_dim : out_dim; }
};

struct ModelConfig {
    AttentionKind attention = AttentionKind::spiking;
    std::size_t hidden = 8;
    std::size_t heads = 8;
    std::size_t output_heads = 8;
    HeadCombine output_combine = HeadCombine::average;

    // Spiking attention.
    std::size_t T = 8;
    double mu = 0.5;
    bool share_theta = false;
    ResetMode reset = ResetMode::on_fire;
    Surrogate surrogate{};

    // Baseline attention.
    double leaky_slope = 0.2;

    // Optimization.
    double lr = 0.005;
    double weight_decay = 5e-4;
    std::size_t epochs = 200;
    std::size_t patience = 100;
    double dropout = 0.0;
    std::uint64_t seed = 42;
    std::size_t eval_passes = 1;

    /// Two layers: hidden (concat, ELU) then output (average, identity).
    std::vector<LayerConfig> layers(std::size_t in_dim, std::size_t classes) const {
        if (hidden == 0 || heads == 0 || output_heads == 0)
            throw std::invalid_argument("model config: hidden, heads and output_heads must be >= 1");
        LayerConfig l1{in_dim, hidden, heads, HeadCombine::concat, attention, ad::Activation::elu};
        LayerConfig l2{l1.output_width(), classes, output_heads, output_combine, attention, ad::Activation::identity};
        if (l2.output_width() != classes && output_combine == HeadCombine::concat && output_heads != 1)
            throw std::invalid_argument("model config: concatenated output heads must have width = class count");
        return {l1, l2};
    }

    SpikingAttentionParams spiking_shape() const {
        SpikingAttentionParams p;
        p.mu = mu;
        p.T = T;
        p.share_theta = share_theta;
        p.reset = reset;
        return p;
    }
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{
        {"attention", to_string(c.attention)},
        {"hidden", c.hidden},
        {"heads", c.heads},
        {"output_heads", c.output_heads},
        {"output_combine", c.output_combine == HeadCombine::concat ? "concat" : "average"},
        {"T", c.T},
        {"mu", c.mu},
        {"share_theta", c.share_theta},
        {"reset", c.reset == ResetMode::on_fire ? "on_fire" : "unconditional"},
        {"surrogate", c.surrogate.kind == SurrogateKind::rectangle ? "rectangle" : "sigmoid"},
        {"surrogate_width", c.surrogate.width},
        {"surrogate_slope", c.surrogate.slope},
        {"leaky_slope", c.leaky_slope},
        {"lr", c.lr},
        {"weight_decay", c.weight_decay},
        {"epochs", c.epochs},
        {"patience", c.patience},
        {"dropout", c.dropout},
        {"seed", c.seed},
        {"eval_passes", c.eval_passes},
    };
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.attention = attention_kind_from(j.value("attention", to_string(d.attention)));
    c.hidden = j.value("hidden", d.hidden);
    c.heads = j.value("heads", d.heads);
    c.output_heads = j.value("output_heads", d.output_heads);
    c.output_combine = j.value("output_combine", std::string("average")) == "concat" ? HeadCombine::concat
                                                                                      : HeadCombine::average;
    c.T = j.value("T", d.T);
    c.mu = j.value("mu", d.mu);
    c.share_theta = j.value("share_theta", d.share_theta);
    c.reset = j.value("reset", std::string("on_fire")) == "unconditional" ? ResetMode::unconditional
                                                                          : ResetMode::on_fire;
    c.surrogate.kind = j.value("surrogate", std::string("rectangle")) == "sigmoid" ? SurrogateKind::sigmoid
                                                                                   : SurrogateKind::rectangle;
    c.surrogate.width = j.value("surrogate_width", d.surrogate.width);
    c.surrogate.slope = j.value("surrogate_slope", d.surrogate.slope);
    c.leaky_slope = j.value("leaky_slope", d.leaky_slope);
    c.lr = j.value("lr", d.lr);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.epochs = j.value("epochs", d.epochs);
    c.patience = j.value("patience", d.patience);
    c.dropout = j.value("dropout", d.dropout);
    c.seed = j.value("seed", d.seed);
    c.eval_passes = j.value("eval_passes", d.eval_passes);
}

}  // namespace gsat
