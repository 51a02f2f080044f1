// gsat: train / eval / attack / flops / sweep / sbm
#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gsat/cli/commands.hpp"

namespace {

using namespace gsat::cli;

struct FlagSpec {
    const char* name;
    const char* help;
};

// Flags shared by every subcommand; each maps onto a config key.
constexpr FlagSpec kFlags[] = {
    {"data", "dataset manifest directory"},
    {"out", "output directory"},
    {"seed", "run seed (default 42)"},
    {"attention", "spiking | baseline"},
    {"mu", "firing threshold"},
    {"T", "time steps"},
    {"heads", "hidden-layer heads"},
    {"hidden", "hidden units per head"},
    {"epochs", "training epochs"},
    {"attack-rate", "random: fraction of |E| to add; degree_targeted: edges per test node"},
    {"attack-kind", "random | degree_targeted"},
    {"model", "eval: training run directory or params.bin"},
    {"lr", "Adam learning rate"},
    {"weight-decay", "L2 weight decay"},
    {"patience", "early-stopping patience"},
    {"output-heads", "output-layer heads"},
    {"eval-passes", "evaluation passes averaged"},
    {"mu-grid", "sweep: comma-separated mu values"},
    {"T-grid", "sweep: comma-separated T values"},
    {"trained", "flops: train before counting (bare flag or true|false)"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spiking and baseline graph attention networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> extra;
    std::map<std::string, std::string> values;

    using Command = std::function<int(const std::vector<Setting>&)>;
    std::map<CLI::App*, Command> commands;

    auto add = [&](const char* name, const char* help, Command cmd) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "key = value config file");
        for (const auto& f : kFlags) {
            auto* opt = sub->add_option(std::string("--") + f.name, values[f.name], f.help);
            if (std::string_view(f.name) == "trained") opt->expected(0, 1);  // bare --trained means true
        }
        sub->add_option("--set", extra, "extra key=value setting (repeatable)");
        commands[sub] = std::move(cmd);
    };

    auto plain = [](int (*fn)(const RunConfig&, std::ostream&)) {
        return [fn](const std::vector<Setting>& s) { return fn(resolve({}, s), std::cout); };
    };
    add("train", "train a model and write metrics.jsonl, params.bin, config.json", plain(cmd_train));
    add("eval", "evaluate saved parameters and print accuracy JSON",
        [](const std::vector<Setting>& s) { return cmd_eval(eval_base(s), std::cout); });
    add("attack", "write an edge-perturbed copy of a manifest", plain(cmd_attack));
    add("flops", "count forward-pass operations for both attention kinds", plain(cmd_flops));
    add("sweep", "train over a (mu, T) grid and tabulate edge removal", plain(cmd_sweep));
    add("sbm", "generate a stochastic block model manifest", plain(cmd_sbm));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        std::vector<Setting> settings;
        if (!config_path.empty()) settings = read_config_file(config_path);
        for (auto* sub : app.get_subcommands()) {
            for (const auto& f : kFlags)
                if (sub->count(std::string("--") + f.name))
                    settings.emplace_back(f.name, values[f.name].empty() ? "true" : values[f.name]);
            for (const auto& kv : extra) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + kv + "'");
                settings.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
            }
            return commands.at(sub)(settings);
        }
    } catch (const std::exception& e) {
        std::cerr << "gsat: error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
