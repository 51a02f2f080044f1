#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gsat/graph/graph.hpp"

namespace gsat {

/// Dataset manifest directory layout:
///   meta.json     {"n", "d", "c", "policy": "citation"|"copurchase", optional
///                  "self_loops_added": bool, "normalize_features": bool (default true)}
///   edges.csv     "src,dst" per line, 0-based, undirected, no header
///   features.csv  n lines of d comma-separated reals
///   labels.csv    n lines, one integer each
///   splits.json   optional {"train": [...], "val": [...], "test": [...]}
struct ManifestMeta {
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t c = 0;
    std::string policy = "citation";
    bool self_loops_added = false;
    bool normalize_features = true;  // L1 row normalization on load
};

struct LoadOptions {
    bool row_normalize = true;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace detail {

[[noreturn]] inline void fail_at(const std::filesystem::path& file, std::size_t line, const std::string& msg) {
    throw DatasetError(file.string() + ":" + std::to_string(line) + ": " + msg);
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end && !s.empty();
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        parts.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

inline std::ifstream open_or_throw(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw DatasetError(p.string() + ": cannot open file");
    return in;
}

}  // namespace detail

inline ManifestMeta read_meta(const std::filesystem::path& dir) {
    const auto path = dir / "meta.json";
    auto in = detail::open_or_throw(path);
    nlohmann::json j;
    try {
        in >> j;
        ManifestMeta m;
        m.n = j.at("n").get<std::size_t>();
        m.d = j.at("d").get<std::size_t>();
        m.c = j.at("c").get<std::size_t>();
        m.policy = j.value("policy", std::string("citation"));
        m.self_loops_added = j.value("self_loops_added", false);
        m.normalize_features = j.value("normalize_features", true);
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(path.string() + ": " + e.what());
    }
}

/// Loads and validates a manifest directory. Self loops are not added here.
inline Graph load_graph(const std::filesystem::path& dir, LoadOptions opts = {}) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw DatasetError(dir.string() + ": manifest directory not found");
    const ManifestMeta meta = read_meta(dir);

    // Edges.
    std::vector<std::pair<NodeId, NodeId>> edges;
    {
        const auto path = dir / "edges.csv";
        auto in = detail::open_or_throw(path);
        std::string line;
        std::size_t ln = 0;
        while (std::getline(in, line)) {
            ++ln;
            const auto t = detail::trim(line);
            if (t.empty()) continue;
            const auto parts = detail::split_commas(t);
            std::uint64_t u = 0, v = 0;
            if (parts.size() != 2 || !detail::parse_number(parts[0], u) || !detail::parse_number(parts[1], v))
                detail::fail_at(path, ln, "expected 'src,dst' integers, got '" + std::string(t) + "'");
            if (u >= meta.n || v >= meta.n)
                detail::fail_at(path, ln, "node index out of range [0," + std::to_string(meta.n) + ")");
            edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        }
    }

    // Features.
    DenseMatrix features(meta.n, meta.d);
    {
        const auto path = dir / "features.csv";
        auto in = detail::open_or_throw(path);
        std::string line;
        std::size_t ln = 0, row = 0;
        while (std::getline(in, line)) {
            ++ln;
            const auto t = detail::trim(line);
            if (t.empty()) continue;
            if (row >= meta.n) detail::fail_at(path, ln, "more than n=" + std::to_string(meta.n) + " rows");
            const auto parts = detail::split_commas(t);
            if (parts.size() != meta.d)
                detail::fail_at(path, ln, "expected " + std::to_string(meta.d) + " values, got " +
                                              std::to_string(parts.size()));
            for (std::size_t j = 0; j < meta.d; ++j) {
                double v = 0.0;
                if (!detail::parse_number(parts[j], v) || !std::isfinite(v))
                    detail::fail_at(path, ln, "malformed real '" + std::string(detail::trim(parts[j])) + "'");
                features(row, j) = v;
            }
            ++row;
        }
        if (row != meta.n)
            detail::fail_at(path, ln, "expected " + std::to_string(meta.n) + " rows, got " + std::to_string(row));
    }

    // Labels.
    std::vector<int> labels;
    labels.reserve(meta.n);
    {
        const auto path = dir / "labels.csv";
        auto in = detail::open_or_throw(path);
        std::string line;
        std::size_t ln = 0;
        while (std::getline(in, line)) {
            ++ln;
            const auto t = detail::trim(line);
            if (t.empty()) continue;
            int y = 0;
            if (!detail::parse_number(t, y)) detail::fail_at(path, ln, "malformed label '" + std::string(t) + "'");
            if (y < 0 || static_cast<std::size_t>(y) >= meta.c)
                detail::fail_at(path, ln, "label " + std::to_string(y) + " out of range [0," + std::to_string(meta.c) + ")");
            if (labels.size() >= meta.n) detail::fail_at(path, ln, "more than n labels");
            labels.push_back(y);
        }
        if (labels.size() != meta.n)
            detail::fail_at(path, ln, "expected " + std::to_string(meta.n) + " labels, got " +
                                          std::to_string(labels.size()));
    }

    if (opts.row_normalize && meta.normalize_features) features = row_normalize_l1(std::move(features));
    Graph g = Graph::build(meta.n, edges, std::move(features), std::move(labels), meta.c);
    if (meta.self_loops_added) g = add_self_loops(g);

    const auto split_path = dir / "splits.json";
    if (fs::exists(split_path)) {
        auto in = detail::open_or_throw(split_path);
        Masks m{Mask(meta.n, 0), Mask(meta.n, 0), Mask(meta.n, 0)};
        try {
            nlohmann::json j;
            in >> j;
            auto fill = [&](const char* key, Mask& mask) {
                for (const auto& idx : j.at(key)) {
                    const auto i = idx.get<std::size_t>();
                    if (i >= meta.n) throw DatasetError(split_path.string() + ": index " + std::to_string(i) + " in '" + key + "' out of range");
                    mask[i] = 1;
                }
            };
            fill("train", m.train);
            fill("val", m.val);
            fill("test", m.test);
        } catch (const nlohmann::json::exception& e) {
            throw DatasetError(split_path.string() + ": " + e.what());
        }
        try {
            g = g.with_masks(std::move(m));
        } catch (const std::invalid_argument& e) {
            throw DatasetError(split_path.string() + ": " + e.what());
        }
    }
    return g;
}

/// Writes `g` as a manifest. Reals use 17 significant digits so load(save(g)) is bit-exact
/// when loaded with row_normalize = false. Masks are written to splits.json when any is set.
inline void save_graph(const Graph& g, const std::filesystem::path& dir, const std::string& policy = "citation",
                       bool normalize_features = true) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        nlohmann::json meta = {{"n", g.num_nodes()},
                               {"d", g.feature_dim()},
                               {"c", g.num_classes()},
                               {"policy", policy},
                               {"self_loops_added", g.self_loops_added()},
                               {"normalize_features", normalize_features}};
        std::ofstream(dir / "meta.json") << meta.dump(2) << "\n";
    }
    {
        std::ofstream out(dir / "edges.csv");
        for (const auto& [u, v] : g.undirected_edges()) out << u << ',' << v << '\n';
    }
    {
        std::ofstream out(dir / "features.csv");
        char buf[64];
        const auto& f = g.features();
        for (std::size_t i = 0; i < f.rows(); ++i) {
            std::string line;
            for (std::size_t j = 0; j < f.cols(); ++j) {
                if (j) line.push_back(',');
                const double v = f(i, j);
                if (v == 0.0) {
                    line.push_back('0');
                    continue;
                }
                auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
                line.append(buf, p);
            }
            out << line << '\n';
        }
    }
    {
        std::ofstream out(dir / "labels.csv");
        for (const int y : g.labels()) out << y << '\n';
    }
    const auto& m = g.masks();
    if (mask_count(m.train) + mask_count(m.val) + mask_count(m.test) > 0) {
        auto idx = [](const Mask& mask) {
            std::vector<std::size_t> v;
            for (std::size_t i = 0; i < mask.size(); ++i)
                if (mask[i]) v.push_back(i);
            return v;
        };
        nlohmann::json j = {{"train", idx(m.train)}, {"val", idx(m.val)}, {"test", idx(m.test)}};
        std::ofstream(dir / "splits.json") << j.dump() << "\n";
    }
}

}  // namespace gsat
