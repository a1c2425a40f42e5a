#include "fidsel/app.hpp"

#include "fidsel/error.hpp"
#include "fidsel/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>
#include <thread>

namespace fidsel {

namespace fs = std::filesystem;

namespace {

using ordered = nlohmann::ordered_json;

CsvStamp stamp_for(const RunConfig& config) {
    return {config_hash(config), config.simulation.seed};
}

int report_error(std::ostream& err, const std::exception& e) {
    if (const auto* fe = dynamic_cast<const Error*>(&e))
        err << "error (" << to_string(fe->code()) << "): " << fe->what() << "\n";
    else
        err << "error: " << e.what() << "\n";
    return kExitInvalidInput;
}

// Runs a command body, mapping every failure to "invalid input".
int guarded(std::ostream& err, const std::function<int()>& body) {
    try {
        return body();
    } catch (const std::exception& e) {
        return report_error(err, e);
    }
}

void print_warnings(const SmdpModel& model, std::ostream& err) {
    for (const std::string& w : model.warnings()) err << "warning: " << w << "\n";
}

std::string summarise(const StructureReport& r) {
    std::ostringstream os;
    int guaranteed = 0, threshold = 0;
    for (std::size_t i = 0; i < r.guarantee.rows.size(); ++i) {
        guaranteed += r.guarantee.rows[i].guaranteed ? 1 : 0;
        threshold += r.thresholds[i].is_threshold ? 1 : 0;
    }
    os << "rho=" << format_real(r.rho.rho) << " t_max=" << format_real(r.scale.t_max)
       << (r.scale.substituted ? " (substituted)" : "") << " empty_fraction="
       << format_real(r.assumptions.empty_fraction) << "\n"
       << "levels guaranteed=" << guaranteed << " threshold-shaped=" << threshold << " of "
       << r.thresholds.size() << (r.guarantee.violated ? "  GUARANTEE VIOLATED" : "") << "\n";
    return os.str();
}

} // namespace

RunConfig effective_config(const CommandOptions& options) {
    RunConfig config = options.config_path.empty() ? parse_config("{}") : load_config(options.config_path);
    if (options.out_dir) config.output_dir = *options.out_dir;
    if (options.seed) config.simulation.seed = *options.seed;
    if (options.episodes) {
        if (*options.episodes < 1)
            throw Error(ErrorCode::ConfigInvalid, "--episodes must be at least 1");
        config.simulation.episodes = *options.episodes;
    }
    if (options.state) {
        if (options.state->q < 0 || options.state->q > config.model.capacity)
            throw Error(ErrorCode::ConfigInvalid, "--state queue length outside 0..capacity");
        level_index(config.model.grid, options.state->level);
        config.simulation.start_states = {*options.state};
    }
    if (!options.grid.empty()) config.sweep.axes = parse_grid(options.grid);
    return config;
}

Solved solve(const RunConfig& config) {
    SmdpModel model = SmdpModel::build(config.model);
    ValuePolicyTable solution = value_iteration(model, config.solver.tolerance, config.solver.max_sweeps);
    return {std::move(model), std::move(solution)};
}

double measure_empty_fraction(const SmdpModel& model, std::span<const Action> policy,
                              const RunConfig& config) {
    const State start{model.capacity() / 2, model.grid().optimal_index()};
    return empty_queue_fraction(model, policy, start, config.analysis.occupancy_episodes,
                                config.analysis.occupancy_horizon, config.simulation.seed);
}

StructureReport check(const SmdpModel& model, const ValuePolicyTable& solution,
                      const RunConfig& config) {
    const double empty = measure_empty_fraction(model, solution.policy, config);
    return analyze_structure(model, solution, empty, config.analysis.empty_threshold,
                             config.analysis.boundary_buffer);
}

std::vector<SweepPointResult> run_sweep(const RunConfig& config, const std::vector<SweepAxis>& axes) {
    if (axes.empty()) throw Error(ErrorCode::ConfigInvalid, "sweep needs at least one grid axis");
    std::size_t total = 1;
    for (const SweepAxis& axis : axes) {
        total *= axis.values.size();
        if (total > static_cast<std::size_t>(config.sweep.max_points))
            throw Error(ErrorCode::GridTooLarge, "sweep grid exceeds " +
                                                     std::to_string(config.sweep.max_points) +
                                                     " points");
    }
    std::vector<SweepPointResult> results(total);
    for (std::size_t i = 0; i < total; ++i) {
        std::size_t rest = i;
        // last axis varies fastest
        std::vector<std::pair<std::string, double>> values(axes.size());
        for (std::size_t k = axes.size(); k-- > 0;) {
            const auto n = axes[k].values.size();
            values[k] = {axes[k].key, axes[k].values[rest % n]};
            rest /= n;
        }
        results[i].values = std::move(values);
    }

    auto run_point = [&](SweepPointResult& point) {
        try {
            RunConfig local = config;
            for (const auto& [key, value] : point.values) apply_sweep_value(local.model, key, value);
            local.model.validate();
            Solved solved = solve(local);
            point.converged = solved.solution.converged;
            point.report = check(solved.model, solved.solution, local);
        } catch (const std::exception& e) {
            point.error = e.what();
        }
    };

    int threads = config.sweep.threads > 0 ? config.sweep.threads
                                           : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, static_cast<int>(total));
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = static_cast<std::size_t>(t); i < total; i += static_cast<std::size_t>(threads))
                run_point(results[i]);
        });
    for (auto& th : pool) th.join();
    return results;
}

std::string sweep_csv(const std::vector<SweepPointResult>& points, const std::vector<SweepAxis>& axes,
                      const RunConfig& config) {
    std::ostringstream os;
    const CsvStamp stamp = stamp_for(config);
    os << "# config_hash=" << stamp.config_hash << ", seed=" << stamp.seed << "\n";
    os << "point";
    for (const SweepAxis& axis : axes) os << ',' << axis.key;
    os << ",cog,combined_margin,is_threshold,status,converged,violations\n";
    for (std::size_t i = 0; i < points.size(); ++i) {
        const SweepPointResult& p = points[i];
        auto prefix = [&] {
            os << i;
            for (const auto& kv : p.values) os << ',' << format_real(kv.second);
        };
        if (!p.error.empty()) {
            std::string msg = p.error;
            std::replace(msg.begin(), msg.end(), ',', ';');
            prefix();
            os << ",,,,error,false," << msg << "\n";
            continue;
        }
        for (std::size_t c = 0; c < p.report.thresholds.size(); ++c) {
            const ThresholdRow& t = p.report.thresholds[c];
            std::string violations;
            for (const std::string& v : t.violations) violations += (violations.empty() ? "" : "|") + v;
            prefix();
            os << ',' << t.cog << ',' << format_real(p.report.dominance[c].combined) << ','
               << (t.is_threshold ? "true" : "false") << ',' << p.report.guarantee.rows[c].status
               << ',' << (p.converged ? "true" : "false") << ',' << violations << "\n";
        }
    }
    return os.str();
}

int cmd_solve(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig config = effective_config(options);
        const Solved s = solve(config);
        print_warnings(s.model, err);
        const fs::path dir(config.output_dir);
        const CsvStamp stamp = stamp_for(config);
        write_text(dir / "value.csv", value_csv(s.model, s.solution, stamp));
        write_text(dir / "policy.csv", policy_csv(s.model, s.solution.policy, stamp));
        write_text(dir / "convergence.json", convergence_json(s.model, s.solution, config.solver.tolerance));
        write_text(dir / "policy.svg", policy_svg(s.model, s.solution.policy));
        write_text(dir / "value.svg", value_svg(s.model, s.solution.value));
        out << "solved " << s.model.state_count() << " states in " << s.solution.sweeps
            << " sweeps, residual " << format_real(s.solution.residual) << "\n";
        if (!s.solution.converged) {
            err << "value iteration did not reach tolerance " << format_real(config.solver.tolerance)
                << "\n";
            return int(kExitNoConvergence);
        }
        return int(kExitOk);
    });
}

int cmd_check(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig config = effective_config(options);
        SmdpModel model = SmdpModel::build(config.model);
        print_warnings(model, err);
        ValuePolicyTable solution = options.solution_path.empty()
                                        ? value_iteration(model, config.solver.tolerance,
                                                          config.solver.max_sweeps)
                                        : read_value_csv(options.solution_path, model);
        const StructureReport report = check(model, solution, config);
        const fs::path dir(config.output_dir);
        write_text(dir / "structure.json", structure_json(model, report));
        write_text(dir / "thresholds.csv", thresholds_csv(report, stamp_for(config)));
        out << summarise(report);
        if (report.guarantee.violated) {
            for (const GuaranteeRow& row : report.guarantee.rows)
                if (row.status == "violation")
                    err << "guaranteed level " << row.cog << " is not threshold-shaped\n";
            return int(kExitGuaranteeViolation);
        }
        if (!solution.converged) return int(kExitNoConvergence);
        return int(kExitOk);
    });
}

int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig config = effective_config(options);
        SmdpModel model = SmdpModel::build(config.model);
        print_warnings(model, err);
        PolicyTable policy;
        std::vector<double> reference;
        std::string reference_kind;
        bool converged = true;
        if (options.policy_path.empty()) {
            ValuePolicyTable solution =
                value_iteration(model, config.solver.tolerance, config.solver.max_sweeps);
            converged = solution.converged;
            policy = solution.policy;
            reference = solution.value;
            reference_kind = "optimal_value";
        } else {
            policy = read_policy_csv(options.policy_path, model);
            reference = evaluate_policy(model, policy, config.solver.tolerance, config.solver.max_sweeps);
            reference_kind = "policy_value";
        }

        ordered doc;
        doc["episodes"] = config.simulation.episodes;
        doc["seed"] = config.simulation.seed;
        doc["contraction_factor"] = model.contraction_factor();
        doc["reference"] = reference_kind;
        doc["estimates"] = ordered::array();
        std::vector<Trajectory> recorded;
        for (std::size_t i = 0; i < config.simulation.start_states.size(); ++i) {
            const StartState& st = config.simulation.start_states[i];
            const State start{st.q, level_index(model.grid(), st.level)};
            SimConfig sim;
            sim.seed = config.simulation.seed;
            sim.episodes = config.simulation.episodes;
            sim.horizon = config.simulation.horizon;
            sim.threads = config.simulation.threads;
            sim.record_episodes = i == 0 ? config.simulation.record_episodes : 0;
            MonteCarloEstimate est = monte_carlo_value(model, policy, start, sim);
            if (i == 0) recorded = std::move(est.recorded);
            const double ref = reference[static_cast<std::size_t>(model.state_index(start))];
            const double z = est.std_error > 0.0 ? (est.mean - ref) / est.std_error : 0.0;
            doc["estimates"].push_back({{"q", start.q},
                                        {"cog", start.cog},
                                        {"level", model.grid().level(start.cog)},
                                        {"estimate", est.mean},
                                        {"std_error", est.std_error},
                                        {"horizon", est.horizon},
                                        {"truncation_bound", est.truncation_bound},
                                        {reference_kind, ref},
                                        {"z_score", z},
                                        {"within_3_se", std::abs(est.mean - ref) <= 3.0 * est.std_error},
                                        {"mean_tau", est.mean_tau},
                                        {"mean_arrivals_per_epoch", est.mean_arrivals_per_epoch},
                                        {"empty_fraction", est.empty_fraction}});
            out << "q=" << start.q << " level=" << format_real(model.grid().level(start.cog))
                << ": estimate " << format_real(est.mean) << " +/- " << format_real(est.std_error)
                << " vs " << format_real(ref) << "\n";
        }
        const fs::path dir(config.output_dir);
        write_text(dir / "trajectories.csv", trajectories_csv(recorded, model, stamp_for(config)));
        write_text(dir / "mc_value.json", doc.dump(2) + "\n");
        return converged ? int(kExitOk) : int(kExitNoConvergence);
    });
}

int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig config = effective_config(options);
        const auto points = run_sweep(config, config.sweep.axes);
        write_text(fs::path(config.output_dir) / "sweep.csv", sweep_csv(points, config.sweep.axes, config));
        bool violated = false, unconverged = false;
        int failed = 0;
        for (const SweepPointResult& p : points) {
            if (!p.error.empty()) {
                ++failed;
                err << "sweep point failed: " << p.error << "\n";
                continue;
            }
            violated = violated || p.report.guarantee.violated;
            unconverged = unconverged || !p.converged;
        }
        out << "swept " << points.size() << " points (" << failed << " failed)\n";
        if (violated) return int(kExitGuaranteeViolation);
        if (failed > 0) return int(kExitInvalidInput);
        if (unconverged) return int(kExitNoConvergence);
        return int(kExitOk);
    });
}

int cmd_export_moments(const CommandOptions& options, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const RunConfig config = effective_config(options);
        const SmdpModel model = SmdpModel::build(config.model);
        print_warnings(model, err);
        const fs::path dir(config.output_dir);
        write_text(dir / "moments.csv", moments_csv(model, stamp_for(config)));
        write_text(dir / "model.json", model_summary_json(model));
        out << "exported moments for " << model.cog_count() << " levels\n";
        return int(kExitOk);
    });
}

} // namespace fidsel
