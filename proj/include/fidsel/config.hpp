#pragma once

#include "fidsel/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace fidsel {

struct SolverSettings {
    double tolerance = 1e-9;
    int max_sweeps = 200000;
};

/// A start state given by queue length and cognitive level (not index).
struct StartState {
    int q = 0;
    double level = 0.0;
};

struct SimulationSettings {
    std::uint64_t seed = 1;
    int episodes = 10000;
    /// 0 selects a horizon from the truncation-bias bound.
    int horizon = 0;
    std::vector<StartState> start_states{{10, 0.6}};
    int record_episodes = 1;
    int threads = 0;
};

struct AnalysisSettings {
    /// The queue counts as busy when the empty-queue share of epochs is below this.
    double empty_threshold = 0.01;
    double boundary_buffer = 0.2;
    int occupancy_episodes = 200;
    int occupancy_horizon = 2000;
};

struct SweepAxis {
    std::string key;
    std::vector<double> values;
};

struct SweepSettings {
    std::vector<SweepAxis> axes;
    int max_points = 1000;
    int threads = 0;
};

struct RunConfig {
    ModelParams model;
    SolverSettings solver;
    SimulationSettings simulation;
    AnalysisSettings analysis;
    SweepSettings sweep;
    std::string output_dir = "out";
};

/// Parses a JSON document; missing keys keep their defaults, unknown keys are rejected.
/// Throws ErrorCode::ConfigInvalid naming the offending key or parse position.
RunConfig parse_config(const std::string& text);

RunConfig load_config(const std::string& path);

/// Canonical JSON of the full effective configuration.
std::string dump_config(const RunConfig& config);

/// FNV-1a hash of dump_config without the output directory, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Keys a sweep may vary.
const std::vector<std::string>& sweep_keys();

/// Applies one sweep value to the model parameters.
void apply_sweep_value(ModelParams& params, const std::string& key, double value);

/// Parses "key=v1,v2;key2=v3" into sweep axes.
std::vector<SweepAxis> parse_grid(const std::string& spec);

/// Index of a cognitive level on the grid; throws when it is not a grid point.
int level_index(const CogGrid& grid, double level);

} // namespace fidsel
