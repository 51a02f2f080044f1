#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gsat/graph/generate.hpp"
#include "gsat/model/config.hpp"

namespace gsat::cli {

using Setting = std::pair<std::string, std::string>;

/// Everything a command needs: model hyperparameters plus paths and
/// command-specific options.
struct RunConfig {
    ModelConfig model;
    std::filesystem::path data;
    std::filesystem::path out;
    std::filesystem::path model_path;  // eval: run directory or params.bin

    // attack
    std::string attack_kind = "random";  // random | degree_targeted
    double attack_rate = 0.2;            // random: fraction of |E|; degree_targeted: edges per test node

    // sweep
    std::vector<double> mu_grid;
    std::vector<std::size_t> T_grid;

    // flops: train before counting instead of using the seeded initialization
    bool trained = false;

    // sbm generator
    SbmSpec sbm;
};

namespace detail {

inline std::string normalize_key(std::string k) {
    while (!k.empty() && k.front() == '-') k.erase(k.begin());
    for (auto& c : k)
        if (c == '-') c = '_';
    return k;
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
    T out{};
    const char* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw std::invalid_argument("bad value '" + v + "' for " + key);
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::invalid_argument("bad value '" + v + "' for " + key + " (expected true|false)");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
    std::vector<T> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const auto comma = v.find(',', start);
        const auto piece = v.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
        if (!piece.empty()) out.push_back(parse_number<T>(key, piece));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw std::invalid_argument("empty list for " + key);
    return out;
}

}  // namespace detail

/// Applies one key/value pair. Dashes and underscores in keys are interchangeable.
inline void apply_setting(RunConfig& rc, const std::string& raw_key, const std::string& v) {
    using detail::parse_bool;
    using detail::parse_number;
    const std::string key = detail::normalize_key(raw_key);
    auto& m = rc.model;
    if (key == "attention") m.attention = attention_kind_from(v);
    else if (key == "hidden") m.hidden = parse_number<std::size_t>(key, v);
    else if (key == "heads") m.heads = parse_number<std::size_t>(key, v);
    else if (key == "output_heads") m.output_heads = parse_number<std::size_t>(key, v);
    else if (key == "output_combine") {
        if (v != "concat" && v != "average") throw std::invalid_argument("output_combine must be concat|average");
        m.output_combine = v == "concat" ? HeadCombine::concat : HeadCombine::average;
    } else if (key == "T") m.T = parse_number<std::size_t>(key, v);
    else if (key == "mu") m.mu = parse_number<double>(key, v);
    else if (key == "share_theta") m.share_theta = parse_bool(key, v);
    else if (key == "reset") {
        if (v != "on_fire" && v != "unconditional") throw std::invalid_argument("reset must be on_fire|unconditional");
        m.reset = v == "on_fire" ? ResetMode::on_fire : ResetMode::unconditional;
    } else if (key == "surrogate") {
        if (v != "rectangle" && v != "sigmoid") throw std::invalid_argument("surrogate must be rectangle|sigmoid");
        m.surrogate.kind = v == "rectangle" ? SurrogateKind::rectangle : SurrogateKind::sigmoid;
    } else if (key == "surrogate_width") m.surrogate.width = parse_number<double>(key, v);
    else if (key == "surrogate_slope") m.surrogate.slope = parse_number<double>(key, v);
    else if (key == "leaky_slope") m.leaky_slope = parse_number<double>(key, v);
    else if (key == "lr") m.lr = parse_number<double>(key, v);
    else if (key == "weight_decay") m.weight_decay = parse_number<double>(key, v);
    else if (key == "epochs") m.epochs = parse_number<std::size_t>(key, v);
    else if (key == "patience") m.patience = parse_number<std::size_t>(key, v);
    else if (key == "dropout") m.dropout = parse_number<double>(key, v);
    else if (key == "seed") m.seed = parse_number<std::uint64_t>(key, v);
    else if (key == "eval_passes") m.eval_passes = parse_number<std::size_t>(key, v);
    else if (key == "data") rc.data = v;
    else if (key == "out") rc.out = v;
    else if (key == "model") rc.model_path = v;
    else if (key == "attack_kind") {
        if (v != "random" && v != "degree_targeted") throw std::invalid_argument("attack_kind must be random|degree_targeted");
        rc.attack_kind = v;
    } else if (key == "attack_rate") rc.attack_rate = parse_number<double>(key, v);
    else if (key == "mu_grid") rc.mu_grid = detail::parse_list<double>(key, v);
    else if (key == "T_grid") rc.T_grid = detail::parse_list<std::size_t>(key, v);
    else if (key == "trained") rc.trained = parse_bool(key, v);
    else if (key == "blocks") rc.sbm.blocks = parse_number<std::size_t>(key, v);
    else if (key == "nodes_per_block") rc.sbm.nodes_per_block = parse_number<std::size_t>(key, v);
    else if (key == "p_in") rc.sbm.p_in = parse_number<double>(key, v);
    else if (key == "p_out") rc.sbm.p_out = parse_number<double>(key, v);
    else if (key == "feature_dim") rc.sbm.feature_dim = parse_number<std::size_t>(key, v);
    else if (key == "feature_shift") rc.sbm.feature_shift = parse_number<double>(key, v);
    else throw std::invalid_argument("unknown setting '" + raw_key + "'");
}

/// Reads `key = value` lines; '#' starts a comment, blank lines are ignored.
inline std::vector<Setting> read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    std::vector<Setting> out;
    std::string line;
    for (std::size_t ln = 1; std::getline(in, line); ++ln) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument(path.string() + ":" + std::to_string(ln) + ": expected key = value");
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

inline RunConfig resolve(RunConfig base, const std::vector<Setting>& settings) {
    for (const auto& [k, v] : settings) apply_setting(base, k, v);
    return base;
}

inline nlohmann::json snapshot(const RunConfig& rc, const std::string& command) {
    nlohmann::json j;
    j["command"] = command;
    j["model"] = rc.model;
    j["data"] = rc.data.string();
    j["out"] = rc.out.string();
    if (!rc.model_path.empty()) j["model_path"] = rc.model_path.string();
    if (command == "attack") {
        j["attack_kind"] = rc.attack_kind;
        j["attack_rate"] = rc.attack_rate;
    }
    if (command == "sweep") {
        j["mu_grid"] = rc.mu_grid;
        j["T_grid"] = rc.T_grid;
    }
    if (command == "flops") j["trained"] = rc.trained;
    if (command == "sbm")
        j["sbm"] = {{"blocks", rc.sbm.blocks},       {"nodes_per_block", rc.sbm.nodes_per_block},
                    {"p_in", rc.sbm.p_in},           {"p_out", rc.sbm.p_out},
                    {"feature_dim", rc.sbm.feature_dim}, {"feature_shift", rc.sbm.feature_shift}};
    return j;
}

}  // namespace gsat::cli
