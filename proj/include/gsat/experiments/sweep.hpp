#pragma once

#include <span>
#include <stdexcept>
#include <vector>

#include "gsat/experiments/attack.hpp"
#include "gsat/model/trainer.hpp"

namespace gsat {

struct SweepRow {
    double mu = 0.0;
    std::size_t T = 0;
    double removal_ratio = 0.0;
    double test_acc = 0.0;
};

/// Trains one model per (mu, T) grid point with the same seed and records the
/// test-time edge removal ratio and test accuracy.
inline std::vector<SweepRow> sparsity_sweep(const Graph& g, const ModelConfig& base, std::span<const double> mu_values,
                                            std::span<const std::size_t> t_values) {
    if (mu_values.empty() || t_values.empty()) throw std::invalid_argument("sparsity_sweep: empty grid");
    const Graph looped = g.self_loops_added() ? g : add_self_loops(g);
    std::vector<SweepRow> rows;
    for (const double mu : mu_values) {
        if (mu < 0.0) throw std::invalid_argument("sparsity_sweep: mu must be >= 0");
        for (const std::size_t T : t_values) {
            if (T == 0) throw std::invalid_argument("sparsity_sweep: T must be >= 1");
            ModelConfig cfg = base;
            cfg.attention = AttentionKind::spiking;
            cfg.mu = mu;
            cfg.T = T;
            const auto result = train(looped, cfg);
            const auto pred = predict(result.params, looped, cfg);
            SweepRow row{mu, T, edge_removal_ratio(pred.record, looped), 0.0};
            if (mask_count(looped.masks().test))
                row.test_acc = accuracy(argmax_rows(pred.probs), looped.labels(), looped.masks().test);
            rows.push_back(row);
        }
    }
    return rows;
}

struct RobustnessResult {
    double clean_acc = 0.0;
    double attacked_acc = 0.0;
    double drop() const { return clean_acc - attacked_acc; }
};

/// Poisoning protocol: train and test once on the clean graph and once on the
/// randomly attacked graph, same seed and split.
inline RobustnessResult random_attack_drop(const Graph& g, const ModelConfig& cfg, double rate, std::uint64_t attack_seed) {
    Rng rng(attack_seed);
    const Graph attacked = random_attack(g, rate, rng);
    RobustnessResult r;
    const auto clean = train(g, cfg);
    r.clean_acc = evaluate(clean.params, g, g.masks().test, cfg);
    const auto poisoned = train(attacked, cfg);
    r.attacked_acc = evaluate(poisoned.params, attacked, attacked.masks().test, cfg);
    return r;
}

}  // namespace gsat
