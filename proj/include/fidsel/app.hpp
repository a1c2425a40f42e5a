#pragma once

#include "fidsel/config.hpp"
#include "fidsel/model.hpp"
#include "fidsel/simulator.hpp"
#include "fidsel/solver.hpp"
#include "fidsel/structure.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace fidsel {

enum ExitCode : int {
    kExitOk = 0,
    kExitInvalidInput = 1,
    kExitGuaranteeViolation = 2,
    kExitNoConvergence = 3,
};

struct CommandOptions {
    /// Empty runs with the built-in defaults.
    std::string config_path;
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> episodes;
    /// "key=v1,v2;key2=..." overrides the config's sweep grid.
    std::string grid;
    /// policy.csv to simulate instead of the solved policy.
    std::string policy_path;
    /// value.csv to check instead of solving.
    std::string solution_path;
    std::optional<StartState> state;
};

/// Config with command-line overrides applied.
RunConfig effective_config(const CommandOptions& options);

struct Solved {
    SmdpModel model;
    ValuePolicyTable solution;
};

Solved solve(const RunConfig& config);

/// Share of epochs with an empty queue under `policy`, from the middle of the queue at the optimum.
double measure_empty_fraction(const SmdpModel& model, std::span<const Action> policy,
                              const RunConfig& config);

StructureReport check(const SmdpModel& model, const ValuePolicyTable& solution,
                      const RunConfig& config);

struct SweepPointResult {
    std::vector<std::pair<std::string, double>> values;
    bool converged = false;
    std::string error;
    StructureReport report;
};

/// Every point of the cartesian grid, solved and checked. Throws ErrorCode::GridTooLarge.
std::vector<SweepPointResult> run_sweep(const RunConfig& config, const std::vector<SweepAxis>& axes);

std::string sweep_csv(const std::vector<SweepPointResult>& points,
                      const std::vector<SweepAxis>& axes, const RunConfig& config);

int cmd_solve(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_check(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_simulate(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_export_moments(const CommandOptions& options, std::ostream& out, std::ostream& err);

} // namespace fidsel
