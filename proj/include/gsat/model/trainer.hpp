#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsat/core/optim.hpp"
#include "gsat/model/network.hpp"

namespace gsat {

inline constexpr std::uint64_t kEvalStream = 0xE7A1'5EED'0000'0001ULL;

/// Summed negative log-likelihood of the true class over labeled rows of a
/// row-stochastic matrix, with probabilities floored at 1e-12.
inline double cross_entropy_loss(const DenseMatrix& probs, std::span<const int> labels, std::span<const std::uint8_t> labeled) {
    Tape tape;
    const Var p = tape.constant(probs);
    return tape.value(ad::cross_entropy(tape, p, labels, labeled))(0, 0);
}

struct Prediction {
    DenseMatrix probs;      // averaged over evaluation passes
    ForwardRecord record;   // from the first evaluation pass
};

/// Evaluation-mode forward: E passes with a fixed evaluation seed, averaged.
inline Prediction predict(const ModelParams& params, const Graph& g, const ModelConfig& cfg) {
    const Graph& graph = g;
    Prediction out;
    const std::size_t passes = std::max<std::size_t>(1, cfg.eval_passes);
    const Rng root = Rng(cfg.seed).split(kEvalStream);
    for (std::size_t pass = 0; pass < passes; ++pass) {
        Tape tape;
        Rng rng = root.split(pass);
        ForwardOptions opts;
        if (pass == 0) opts.record = &out.record;
        const auto fwd = model_forward(tape, params, cfg, graph, rng, false, opts);
        if (pass == 0)
            out.probs = tape.value(fwd.probs);
        else
            out.probs += tape.value(fwd.probs);
    }
    out.probs *= 1.0 / static_cast<double>(passes);
    return out;
}

inline std::vector<int> argmax_rows(const DenseMatrix& probs) {
    std::vector<int> out(probs.rows(), 0);
    for (std::size_t i = 0; i < probs.rows(); ++i) {
        const auto r = probs.row(i);
        out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    }
    return out;
}

/// Fraction of masked nodes whose prediction equals the label.
inline double accuracy(std::span<const int> predicted, std::span<const int> labels, const Mask& mask) {
    std::size_t total = 0, correct = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i]) continue;
        ++total;
        if (predicted[i] == labels[i]) ++correct;
    }
    if (total == 0) throw std::invalid_argument("accuracy: empty mask");
    return static_cast<double>(correct) / static_cast<double>(total);
}

inline double evaluate(const ModelParams& params, const Graph& g, const Mask& mask, const ModelConfig& cfg) {
    if (mask_count(mask) == 0) throw std::invalid_argument("evaluate: empty mask");
    const Graph looped = g.self_loops_added() ? g : add_self_loops(g);
    const auto pred = predict(params, looped, cfg);
    return accuracy(argmax_rows(pred.probs), looped.labels(), mask);
}

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_acc = 0.0;
    double test_acc = 0.0;
    double edge_removal_ratio = 0.0;
};

inline void to_json(nlohmann::json& j, const EpochMetrics& m) {
    j = nlohmann::json{{"epoch", m.epoch},
                       {"train_loss", m.train_loss},
                       {"val_acc", m.val_acc},
                       {"test_acc", m.test_acc},
                       {"edge_removal_ratio", m.edge_removal_ratio}};
}

struct TrainResult {
    ModelParams params;               // best-validation parameters
    std::vector<EpochMetrics> log;
    std::size_t best_epoch = 0;       // 0 = initialization
    double best_val_acc = 0.0;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Full-batch training with Adam on the summed cross-entropy of training nodes.
/// Self loops are added if the graph lacks them. Deterministic given cfg.seed.
inline TrainResult train(const Graph& input, const ModelConfig& cfg,
                         const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
    const Graph g = input.self_loops_added() ? input : add_self_loops(input);
    const auto& masks = g.masks();
    if (mask_count(masks.train) == 0) throw std::invalid_argument("train: empty training mask");

    Rng init_rng = Rng(cfg.seed).split(1);
    ModelParams params = init_params(cfg, g.feature_dim(), g.num_classes(), init_rng);

    AdamHyper hyper;
    hyper.lr = cfg.lr;
    hyper.weight_decay = cfg.weight_decay;
    std::vector<AdamState> states;
    params.for_each([&](const DenseMatrix& m) { states.emplace_back(m.rows(), m.cols(), hyper); });

    auto eval_metrics = [&](const ModelParams& p, EpochMetrics& m) {
        const auto pred = predict(p, g, cfg);
        const auto yhat = argmax_rows(pred.probs);
        m.val_acc = mask_count(masks.val) ? accuracy(yhat, g.labels(), masks.val) : 0.0;
        m.test_acc = mask_count(masks.test) ? accuracy(yhat, g.labels(), masks.test) : 0.0;
        m.edge_removal_ratio = edge_removal_ratio(pred.record, g);
    };

    TrainResult result;
    result.params = params;
    {
        EpochMetrics m0;
        eval_metrics(params, m0);
        result.best_val_acc = m0.val_acc;
    }

    const bool has_val = mask_count(masks.val) > 0;
    const Rng train_root = Rng(cfg.seed).split(2);
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Tape tape;
        Rng rng = train_root.split(epoch);
        ForwardOptions opts;
        opts.training = true;
        EpochMetrics m;
        m.epoch = epoch;
        try {
            const auto fwd = model_forward(tape, params, cfg, g, rng, true, opts);
            const Var loss = ad::cross_entropy(tape, fwd.probs, g.labels(), masks.train);
            m.train_loss = tape.value(loss)(0, 0);
            if (!std::isfinite(m.train_loss)) throw TrainingDiverged("loss is not finite");
            tape.backward(loss);

            std::vector<Var> vars;
            for (const auto& lv : fwd.params)
                for (const auto& hv : lv.heads) {
                    vars.push_back(hv.weight);
                    vars.insert(vars.end(), hv.attention.begin(), hv.attention.end());
                }
            std::size_t idx = 0;
            params.for_each([&](DenseMatrix& p) {
                p = adam_step(p, tape.grad(vars[idx]), states[idx]);
                if (!p.all_finite()) throw TrainingDiverged("parameter became non-finite");
                ++idx;
            });
        } catch (const TrainingDiverged& e) {
            throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
        } catch (const std::runtime_error& e) {
            if (std::string(e.what()).find("non-finite") != std::string::npos)
                throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
            throw;
        }

        eval_metrics(params, m);
        result.log.push_back(m);
        if (on_epoch) on_epoch(m);

        if (!has_val) {
            result.params = params;
            result.best_epoch = epoch;
        } else if (m.val_acc > result.best_val_acc) {
            result.best_val_acc = m.val_acc;
            result.best_epoch = epoch;
            result.params = params;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return result;
}

}  // namespace gsat
