// Acceptance run: one PASS/FAIL line per criterion, non-zero exit when any fails.

#include "fidsel/app.hpp"
#include "fidsel/io.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace fidsel;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double x) { return format_real(x); }

RunConfig config(const std::string& name) { return load_config(oracle::config_path(name)); }

Outcome small_instance_oracle() {
    const SmdpModel m = SmdpModel::build(config("tiny.json").model);
    const double cost = 1.0;
    double worst = 0.0;
    const auto t0 = Clock::now();
    std::vector<double> fh(static_cast<std::size_t>(m.state_count()));
    for (int i = 0; i < m.state_count(); ++i) fh[i] = finite_horizon_value(m, {3, cost}, m.state_at(i));
    const double elapsed = seconds_since(t0);
    for (int i = 0; i < m.state_count(); ++i)
        worst = std::max(worst, std::abs(fh[i] - oracle::expectimax(m, m.state_at(i), 3, cost)));
    return {worst <= 1e-10 && elapsed < 1.0,
            "max |diff| " + fmt(worst) + " over " + std::to_string(m.state_count()) + " states in " +
                fmt(elapsed) + " s"};
}

Outcome fixed_point() {
    const SmdpModel m = SmdpModel::build(config("default.json").model);
    const auto t0 = Clock::now();
    const ValuePolicyTable t = value_iteration(m, 1e-9);
    const double elapsed = seconds_since(t0);
    const double again = oracle::sup_diff(bellman_backup(m, t.value).value, t.value);
    return {t.converged && t.residual <= 1e-9 && again <= 1e-9 && elapsed < 60.0,
            "residual " + fmt(t.residual) + " after " + std::to_string(t.sweeps) + " sweeps in " +
                fmt(elapsed) + " s; extra backup moves V by " + fmt(again)};
}

Outcome reward_shape() {
    const SmdpModel m = SmdpModel::build(config("default.json").model);
    const RewardShapeReport r = check_reward_shape(m);
    return {r.affine && r.unimodal,
            "max second difference " + fmt(r.max_second_difference) + ", unimodal " +
                (r.unimodal ? "yes" : "no")};
}

Outcome value_bounds() {
    const RunConfig cfg = config("high_lambda.json");
    const Solved s = solve(cfg);
    const StructureReport r = check(s.model, s.solution, cfg);
    double lower = INFINITY, upper = INFINITY;
    int pairs = 0;
    for (const ValueBoundRow& row : r.value_bounds.rows) {
        lower = std::min(lower, row.lower_margin);
        upper = std::min(upper, row.upper_margin);
        pairs += row.pairs;
    }
    const bool busy = r.assumptions.empty_fraction < 0.01;
    return {busy && r.value_bounds.pass && pairs > 0,
            "empty fraction " + fmt(r.assumptions.empty_fraction) + ", " + std::to_string(pairs) +
                " pairs, worst lower margin " + fmt(lower) + ", worst upper margin " + fmt(upper) +
                ", light tail " + (r.assumptions.light_tail ? "holds" : "fails")};
}

Outcome light_tail() {
    const SmdpModel m = SmdpModel::build(config("default.json").model);
    const RhoReport r = compute_rho(m);
    int failures = 0;
    for (const RhoEntry& e : r.entries) failures += e.light_tail ? 0 : 1;
    bool shipped_ok = false;
    std::string which;
    for (const char* name : {"default.json", "large_gap.json", "high_lambda.json", "skip_cheap.json", "tiny.json"}) {
        if (compute_rho(SmdpModel::build(config(name).model)).light_tail_everywhere) {
            shipped_ok = true;
            which += std::string(which.empty() ? "" : ", ") + name;
        }
    }
    return {r.jensen_everywhere && r.rho < 1.0 && shipped_ok,
            "rho " + fmt(r.rho) + ", Jensen everywhere " + (r.jensen_everywhere ? "yes" : "no") +
                ", default light-tail failures " + std::to_string(failures) + " of " +
                std::to_string(r.entries.size()) + " (reported), light tail everywhere in: " + which};
}

Outcome large_gap() {
    const RunConfig cfg = config("large_gap.json");
    const Solved s = solve(cfg);
    const StructureReport r = check(s.model, s.solution, cfg);
    double margin = INFINITY;
    int threshold = 0;
    for (std::size_t i = 0; i < r.dominance.size(); ++i) {
        margin = std::min(margin, r.dominance[i].combined);
        threshold += r.thresholds[i].is_threshold ? 1 : 0;
    }
    const bool all = threshold == static_cast<int>(r.thresholds.size());
    return {margin >= 0.0 && all && !r.guarantee.violated && r.assumptions.all(),
            "smallest margin " + fmt(margin) + ", threshold rows " + std::to_string(threshold) + " of " +
                std::to_string(r.thresholds.size())};
}

Outcome skip_cheap_sweep() {
    const RunConfig cfg = config("skip_cheap.json");
    const auto points = run_sweep(cfg, cfg.sweep.axes);
    int flagged = 0;
    bool violated = false;
    std::string example;
    for (const SweepPointResult& p : points) {
        violated = violated || p.report.guarantee.violated;
        for (std::size_t i = 0; i < p.report.thresholds.size(); ++i) {
            const ThresholdRow& t = p.report.thresholds[i];
            if (t.is_threshold || p.report.dominance[i].combined >= 0.0 || t.violations.empty()) continue;
            ++flagged;
            if (example.empty())
                example = p.values[0].first + "=" + fmt(p.values[0].second) + " level " +
                          std::to_string(t.cog) + ": " + t.violations[0] + ", margin " +
                          fmt(p.report.dominance[i].combined);
        }
    }
    return {flagged > 0 && !violated,
            std::to_string(flagged) + " flagged rows with negative margin across " +
                std::to_string(points.size()) + " points; e.g. " + example};
}

Outcome value_shape() {
    const RunConfig cfg = config("high_lambda.json");
    const Solved s = solve(cfg);
    const int q_limit = queue_scan_limit(s.model.capacity(), cfg.analysis.boundary_buffer);
    const ValueShapeReport r = check_value_shape(s.model, s.solution.value, q_limit);
    return {r.decreasing_in_q && r.unimodal_in_cog,
            std::string("decreasing in q ") + (r.decreasing_in_q ? "yes" : "no") + ", unimodal in level " +
                (r.unimodal_in_cog ? "yes" : "no") + " for q <= " + std::to_string(q_limit)};
}

Outcome simulation() {
    const RunConfig cfg = config("high_lambda.json");
    const auto t0 = Clock::now();
    const Solved s = solve(cfg);
    bool pass = cfg.simulation.start_states.size() >= 5;
    double worst_z = 0.0, worst_ratio = 0.0;
    for (const StartState& st : cfg.simulation.start_states) {
        const State start{st.q, level_index(s.model.grid(), st.level)};
        SimConfig sim;
        sim.seed = cfg.simulation.seed;
        sim.episodes = 10000;
        sim.threads = cfg.simulation.threads;
        const MonteCarloEstimate e = monte_carlo_value(s.model, s.solution.policy, start, sim);
        const double z = std::abs(e.mean - s.solution.at(s.model, start)) / e.std_error;
        worst_z = std::max(worst_z, z);
        worst_ratio = std::max(worst_ratio, e.truncation_bound / e.std_error);
        pass = pass && z <= 3.0 && e.truncation_bound < 0.1 * e.std_error;
    }
    const double elapsed = seconds_since(t0);
    return {pass && elapsed < 120.0,
            std::to_string(cfg.simulation.start_states.size()) + " start states, worst |z| " + fmt(worst_z) +
                ", worst bias/SE " + fmt(worst_ratio) + ", " + fmt(elapsed) + " s"};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Outcome determinism() {
    const fs::path root = fs::temp_directory_path() / "fidsel_acceptance_determinism";
    fs::remove_all(root);
    std::ostringstream sink;
    for (const char* run : {"a", "b"}) {
        CommandOptions o;
        o.config_path = oracle::config_path("high_lambda.json");
        o.out_dir = (root / run).string();
        o.episodes = 500;
        cmd_solve(o, sink, sink);
        cmd_check(o, sink, sink);
        cmd_simulate(o, sink, sink);
        cmd_export_moments(o, sink, sink);
    }
    int files = 0, identical = 0;
    for (const auto& entry : fs::directory_iterator(root / "a")) {
        if (entry.path().extension() != ".csv") continue;
        ++files;
        const fs::path other = root / "b" / entry.path().filename();
        identical += fs::exists(other) && slurp(entry.path()) == slurp(other) ? 1 : 0;
    }
    return {files >= 5 && identical == files,
            std::to_string(identical) + " of " + std::to_string(files) + " CSV files byte-identical"};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"small-instance expectimax oracle", small_instance_oracle},
        {"Bellman fixed point on the default model", fixed_point},
        {"reward affine in q and unimodal in level", reward_shape},
        {"value-difference bounds on the busy queue", value_bounds},
        {"light-tail bound, Jensen and rho", light_tail},
        {"threshold guarantee on the large-gap model", large_gap},
        {"non-threshold rows in the cheap-skip sweep", skip_cheap_sweep},
        {"value monotone in q and unimodal in level", value_shape},
        {"Monte Carlo agrees with the solved value", simulation},
        {"byte-identical CSV outputs", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failed += o.pass ? 0 : 1;
        std::printf("criterion %zu: %s  %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
