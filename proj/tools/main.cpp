#include "fidsel/app.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

fidsel::StartState parse_state(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw CLI::ValidationError("--state", "expected q,level");
    try {
        return {std::stoi(text.substr(0, comma)), std::stod(text.substr(comma + 1))};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--state", "expected q,level");
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Fidelity selection for a human operator servicing a task queue"};
    app.require_subcommand(1);

    fidsel::CommandOptions opts;
    std::string out_dir;
    std::uint64_t seed = 0;
    int episodes = 0;
    std::string state;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "JSON run configuration")->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "output directory (overrides the config)");
        cmd->add_option("--seed", seed, "random seed (overrides the config)");
    };

    auto* solve = app.add_subcommand("solve", "value iteration; writes value/policy CSVs and heatmaps");
    auto* check = app.add_subcommand("check", "structural checks; writes structure.json and thresholds.csv");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo evaluation of a policy");
    auto* sweep = app.add_subcommand("sweep", "solve and check every point of a parameter grid");
    auto* moments = app.add_subcommand("export-moments", "per-level sojourn moment table");
    for (auto* cmd : {solve, check, simulate, sweep, moments}) add_common(cmd);

    check->add_option("--solution", opts.solution_path, "value.csv from an earlier solve");
    simulate->add_option("--episodes", episodes, "episodes per start state");
    simulate->add_option("--policy", opts.policy_path, "policy.csv to simulate");
    simulate->add_option("--state", state, "start state as q,level");
    sweep->add_option("--grid", opts.grid, "grid such as arrival_rate=0.5,1,4;skip_time=1,2");

    try {
        app.parse(argc, argv);
        if (!out_dir.empty()) opts.out_dir = out_dir;
        for (auto* cmd : {solve, check, simulate, sweep, moments})
            if (cmd->count("--seed")) opts.seed = seed;
        if (simulate->count("--episodes")) opts.episodes = episodes;
        if (!state.empty()) opts.state = parse_state(state);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : fidsel::kExitInvalidInput;
    }

    if (*solve) return fidsel::cmd_solve(opts, std::cout, std::cerr);
    if (*check) return fidsel::cmd_check(opts, std::cout, std::cerr);
    if (*simulate) return fidsel::cmd_simulate(opts, std::cout, std::cerr);
    if (*sweep) return fidsel::cmd_sweep(opts, std::cout, std::cerr);
    return fidsel::cmd_export_moments(opts, std::cout, std::cerr);
}
