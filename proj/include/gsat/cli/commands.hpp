#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gsat/cli/run_config.hpp"
#include "gsat/experiments/attack.hpp"
#include "gsat/experiments/flops.hpp"
#include "gsat/experiments/sweep.hpp"
#include "gsat/graph/generate.hpp"
#include "gsat/graph/io.hpp"
#include "gsat/model/param_io.hpp"
#include "gsat/model/trainer.hpp"

namespace gsat::cli {

namespace fs = std::filesystem;

inline constexpr std::uint64_t kSplitStream = 3;

/// Files are written as `<name>.partial` and renamed on commit(); anything
/// uncommitted is removed on destruction, along with the directory if this
/// object created it.
class StagedOutputs {
public:
    explicit StagedOutputs(fs::path dir) : dir_(std::move(dir)) {
        if (dir_.empty()) throw std::invalid_argument("--out is required");
        created_ = !fs::exists(dir_);
        fs::create_directories(dir_);
    }
    StagedOutputs(const StagedOutputs&) = delete;
    StagedOutputs& operator=(const StagedOutputs&) = delete;
    ~StagedOutputs() {
        if (committed_) return;
        std::error_code ec;
        for (const auto& n : names_) fs::remove(partial(n), ec);
        if (created_) fs::remove(dir_, ec);
    }

    void write(const std::string& name, const std::string& content) {
        std::ofstream os(partial(name), std::ios::binary);
        os << content;
        if (!os) throw std::runtime_error("cannot write " + partial(name).string());
        names_.push_back(name);
    }
    void write_binary(const std::string& name, const std::vector<DenseMatrix>& tensors) {
        std::ofstream os(partial(name), std::ios::binary);
        write_params(os, tensors);
        if (!os) throw std::runtime_error("cannot write " + partial(name).string());
        names_.push_back(name);
    }
    void commit() {
        for (const auto& n : names_) fs::rename(partial(n), dir_ / n);
        committed_ = true;
    }

private:
    fs::path partial(const std::string& name) const { return dir_ / (name + ".partial"); }

    fs::path dir_;
    std::vector<std::string> names_;
    bool created_ = false;
    bool committed_ = false;
};

/// Loads a manifest and, when it carries no splits, draws them from the
/// manifest's policy with a stream of the run seed.
inline Graph prepare_dataset(const fs::path& dir, std::uint64_t seed, LoadOptions opts = {}) {
    if (dir.empty()) throw std::invalid_argument("--data is required");
    const ManifestMeta meta = read_meta(dir);
    Graph g = load_graph(dir, opts);
    const auto& m = g.masks();
    if (mask_count(m.train) + mask_count(m.val) + mask_count(m.test) == 0) {
        Rng rng = Rng(seed).split(kSplitStream);
        g = g.with_masks(split_nodes(g, SplitPolicy::from_name(meta.policy), rng));
    }
    return g;
}

inline std::string dump_line(const nlohmann::json& j) { return j.dump() + "\n"; }

inline int cmd_train(const RunConfig& rc, std::ostream& out) {
    const Graph g = prepare_dataset(rc.data, rc.model.seed);
    std::ostringstream metrics;
    const auto result = train(g, rc.model, [&](const EpochMetrics& m) { metrics << nlohmann::json(m).dump() << '\n'; });

    StagedOutputs files(rc.out);
    files.write("metrics.jsonl", metrics.str());
    files.write_binary("params.bin", result.params.flatten());
    files.write("config.json", snapshot(rc, "train").dump(2) + "\n");
    files.commit();

    const double test = mask_count(g.masks().test) ? evaluate(result.params, g, g.masks().test, rc.model) : 0.0;
    out << dump_line({{"best_epoch", result.best_epoch},
                      {"best_val_acc", result.best_val_acc},
                      {"test_acc", test},
                      {"epochs_run", result.log.size()}});
    return 0;
}

/// Run directory (config.json + params.bin) or a bare params.bin.
inline std::pair<fs::path, fs::path> locate_model(const fs::path& p) {
    if (p.empty()) throw std::invalid_argument("--model is required");
    if (fs::is_directory(p)) return {p / "params.bin", p / "config.json"};
    return {p, p.parent_path() / "config.json"};
}

/// Base configuration for eval: the training run's snapshot when present.
inline RunConfig eval_base(const std::vector<Setting>& settings) {
    RunConfig probe = resolve({}, settings);
    RunConfig base;
    const auto [params, config] = locate_model(probe.model_path);
    if (fs::exists(config)) {
        std::ifstream in(config);
        nlohmann::json j;
        try {
            in >> j;
            base.model = j.at("model").get<ModelConfig>();
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(config.string() + ": " + e.what());
        }
    }
    return resolve(base, settings);
}

inline int cmd_eval(const RunConfig& rc, std::ostream& out) {
    const auto [param_path, config_path] = locate_model(rc.model_path);
    Graph g = prepare_dataset(rc.data, rc.model.seed);
    g = add_self_loops(g);
    const ModelParams params =
        unflatten_params(rc.model, g.feature_dim(), g.num_classes(), load_param_tensors(param_path));
    const auto pred = predict(params, g, rc.model);
    const auto yhat = argmax_rows(pred.probs);
    nlohmann::json j;
    const auto& m = g.masks();
    for (const auto& [name, mask] : {std::pair{"train_acc", &m.train}, {"val_acc", &m.val}, {"test_acc", &m.test}})
        j[name] = mask_count(*mask) ? nlohmann::json(accuracy(yhat, g.labels(), *mask)) : nlohmann::json(nullptr);
    j["accuracy"] = j["test_acc"];
    j["edge_removal_ratio"] = edge_removal_ratio(pred.record, g);
    j["eval_passes"] = rc.model.eval_passes;
    j["attention"] = to_string(rc.model.attention);
    out << dump_line(j);
    return 0;
}

inline int cmd_attack(const RunConfig& rc, std::ostream& out) {
    if (rc.out.empty()) throw std::invalid_argument("--out is required");
    if (rc.data.empty()) throw std::invalid_argument("--data is required");
    if (fs::exists(rc.out) && fs::equivalent(rc.out, rc.data))
        throw std::invalid_argument("--out must differ from --data (inputs are never modified)");
    if (fs::exists(rc.out) && !fs::is_empty(rc.out))
        throw std::invalid_argument(rc.out.string() + " exists and is not empty");

    const ManifestMeta meta = read_meta(rc.data);
    LoadOptions raw;
    raw.row_normalize = false;
    const Graph g = load_graph(rc.data, raw);
    Rng rng = Rng(rc.model.seed).split(0xA77AC);
    Graph attacked;
    if (rc.attack_kind == "random") {
        attacked = random_attack(g, rc.attack_rate, rng);
    } else {
        if (rc.attack_rate < 0.0) throw std::invalid_argument("attack_rate must be >= 0");
        std::vector<NodeId> targets;
        for (std::size_t i = 0; i < g.num_nodes(); ++i)
            if (g.masks().test.size() == g.num_nodes() && g.masks().test[i]) targets.push_back(static_cast<NodeId>(i));
        attacked = degree_targeted_attack(g, static_cast<std::size_t>(std::llround(rc.attack_rate)), targets, rng);
    }

    // Build the manifest beside the destination, then move it into place.
    fs::path staging = rc.out;
    staging += ".partial";
    std::error_code ec;
    fs::remove_all(staging, ec);
    try {
        save_graph(attacked, staging, meta.policy, meta.normalize_features);
        nlohmann::json report = snapshot(rc, "attack");
        report["edges_before"] = g.num_undirected_edges();
        report["edges_after"] = attacked.num_undirected_edges();
        report["edges_added"] = attacked.num_undirected_edges() - g.num_undirected_edges();
        std::ofstream(staging / "attack.json") << report.dump(2) << "\n";
        if (fs::exists(rc.out)) fs::remove(rc.out);
        fs::rename(staging, rc.out);
        out << dump_line({{"edges_before", report["edges_before"]},
                          {"edges_after", report["edges_after"]},
                          {"out", rc.out.string()}});
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
    return 0;
}

inline int cmd_flops(const RunConfig& rc, std::ostream& out) {
    const Graph g = add_self_loops(prepare_dataset(rc.data, rc.model.seed));
    nlohmann::json summary;
    std::ostringstream csv;
    csv << "attention,component,flops,spike_adds,total\n";
    for (const AttentionKind kind : {AttentionKind::spiking, AttentionKind::baseline}) {
        ModelConfig cfg = rc.model;
        cfg.attention = kind;
        ModelParams params;
        if (rc.trained) {
            params = train(g, cfg).params;
        } else {
            Rng init = Rng(cfg.seed).split(1);
            params = init_params(cfg, g.feature_dim(), g.num_classes(), init);
        }
        const FlopsReport r = count_flops(cfg, g, params);
        const std::string name = to_string(kind);
        summary[name] = r;
        for (const auto& [component, c] : {std::pair<const char*, OpCount>{"projection", r.projection},
                                           {"attention", r.attention},
                                           {"normalization", r.normalization},
                                           {"aggregation", r.aggregation},
                                           {"attention_path", r.attention_path()},
                                           {"total", r.total()}})
            csv << name << ',' << component << ',' << c.flops << ',' << c.spike_adds << ',' << c.total() << '\n';
    }
    summary["spiking_attention_path_below_baseline"] =
        summary["spiking"]["attention_path"]["total"].get<std::uint64_t>() <
        summary["baseline"]["attention_path"]["total"].get<std::uint64_t>();

    StagedOutputs files(rc.out);
    files.write("flops.csv", csv.str());
    files.write("flops.json", summary.dump(2) + "\n");
    files.write("config.json", snapshot(rc, "flops").dump(2) + "\n");
    files.commit();
    out << dump_line({{"spiking_attention_path", summary["spiking"]["attention_path"]["total"]},
                      {"baseline_attention_path", summary["baseline"]["attention_path"]["total"]}});
    return 0;
}

/// Counts adjacent-pair violations of the expected direction larger than `tol`
/// and the largest one; used for the sweep summary.
struct TrendCheck {
    std::size_t inversions = 0;
    double worst = 0.0;
};

inline TrendCheck check_trend(const std::vector<double>& v, bool increasing, double tol = 0.0) {
    TrendCheck t;
    for (std::size_t i = 1; i < v.size(); ++i) {
        const double step = increasing ? v[i - 1] - v[i] : v[i] - v[i - 1];
        if (step > tol) {
            ++t.inversions;
            t.worst = std::max(t.worst, step);
        }
    }
    return t;
}

inline int cmd_sweep(const RunConfig& rc, std::ostream& out) {
    const Graph g = prepare_dataset(rc.data, rc.model.seed);
    const std::vector<double> mus = rc.mu_grid.empty() ? std::vector<double>{rc.model.mu} : rc.mu_grid;
    const std::vector<std::size_t> ts = rc.T_grid.empty() ? std::vector<std::size_t>{rc.model.T} : rc.T_grid;
    const auto rows = sparsity_sweep(g, rc.model, mus, ts);

    std::ostringstream csv;
    csv << "mu,T,removal_ratio,test_acc\n" << std::setprecision(17);
    nlohmann::json table = nlohmann::json::array();
    for (const auto& r : rows) {
        csv << r.mu << ',' << r.T << ',' << r.removal_ratio << ',' << r.test_acc << '\n';
        table.push_back({{"mu", r.mu}, {"T", r.T}, {"removal_ratio", r.removal_ratio}, {"test_acc", r.test_acc}});
    }
    nlohmann::json summary = {{"rows", table}};
    // Trend along mu at each T and along T at each mu.
    nlohmann::json trends = nlohmann::json::array();
    for (std::size_t ti = 0; ti < ts.size() && mus.size() > 1; ++ti) {
        std::vector<double> v;
        for (std::size_t mi = 0; mi < mus.size(); ++mi) v.push_back(rows[mi * ts.size() + ti].removal_ratio);
        const auto t = check_trend(v, true);
        trends.push_back({{"along", "mu"}, {"T", ts[ti]}, {"inversions", t.inversions}, {"worst_inversion", t.worst}});
    }
    for (std::size_t mi = 0; mi < mus.size() && ts.size() > 1; ++mi) {
        std::vector<double> v;
        for (std::size_t ti = 0; ti < ts.size(); ++ti) v.push_back(rows[mi * ts.size() + ti].removal_ratio);
        const auto t = check_trend(v, false);
        trends.push_back({{"along", "T"}, {"mu", mus[mi]}, {"inversions", t.inversions}, {"worst_inversion", t.worst}});
    }
    summary["trends"] = trends;

    RunConfig snap = rc;
    snap.mu_grid = mus;
    snap.T_grid = ts;
    StagedOutputs files(rc.out);
    files.write("sweep.csv", csv.str());
    files.write("sweep.json", summary.dump(2) + "\n");
    files.write("config.json", snapshot(snap, "sweep").dump(2) + "\n");
    files.commit();
    out << dump_line({{"points", rows.size()}, {"out", rc.out.string()}});
    return 0;
}

/// Writes a planted-partition manifest (co-purchase style split, raw features).
inline int cmd_sbm(const RunConfig& rc, std::ostream& out) {
    if (rc.out.empty()) throw std::invalid_argument("--out is required");
    if (fs::exists(rc.out) && !fs::is_empty(rc.out))
        throw std::invalid_argument(rc.out.string() + " exists and is not empty");
    Rng rng(rc.model.seed);
    Graph g = sbm_generate(rc.sbm, rng);
    g = g.with_masks(split_nodes(g, SplitPolicy::copurchase(), rng));
    fs::path staging = rc.out;
    staging += ".partial";
    std::error_code ec;
    fs::remove_all(staging, ec);
    try {
        save_graph(g, staging, "copurchase", false);
        if (fs::exists(rc.out)) fs::remove(rc.out);
        fs::rename(staging, rc.out);
    } catch (...) {
        fs::remove_all(staging, ec);
        throw;
    }
    out << dump_line({{"nodes", g.num_nodes()}, {"edges", g.num_undirected_edges()}, {"out", rc.out.string()}});
    return 0;
}

}  // namespace gsat::cli
