#pragma once

#include "fidsel/model.hpp"
#include "fidsel/simulator.hpp"
#include "fidsel/solver.hpp"
#include "fidsel/structure.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace fidsel {

/// Provenance written as the first line of every CSV: "# config_hash=<hash>, seed=<seed>".
struct CsvStamp {
    std::string config_hash;
    std::uint64_t seed = 0;
};

/// Shortest decimal text that reads back to the same double.
std::string format_real(double x);

void write_text(const std::filesystem::path& path, const std::string& text);

std::string value_csv(const SmdpModel& model, const ValuePolicyTable& table, const CsvStamp& stamp);
std::string policy_csv(const SmdpModel& model, std::span<const Action> policy, const CsvStamp& stamp);
std::string thresholds_csv(const StructureReport& report, const CsvStamp& stamp);
std::string moments_csv(const SmdpModel& model, const CsvStamp& stamp);
std::string trajectories_csv(const std::vector<Trajectory>& episodes, const SmdpModel& model,
                             const CsvStamp& stamp);

std::string convergence_json(const SmdpModel& model, const ValuePolicyTable& table, double tolerance);
std::string structure_json(const SmdpModel& model, const StructureReport& report);
std::string model_summary_json(const SmdpModel& model);

/// Reads a policy CSV written by policy_csv. Throws ErrorCode::LoadError on malformed input and
/// ErrorCode::PolicyMismatch when it does not cover the model's states with admissible actions.
PolicyTable read_policy_csv(const std::filesystem::path& path, const SmdpModel& model);
PolicyTable parse_policy_csv(const std::string& text, const SmdpModel& model);

/// Reads value.csv back into values and actions; same error contract as the policy reader.
ValuePolicyTable parse_value_csv(const std::string& text, const SmdpModel& model);
ValuePolicyTable read_value_csv(const std::filesystem::path& path, const SmdpModel& model);

/// Heatmaps with q along the horizontal axis and the cognitive level along the vertical axis.
std::string policy_svg(const SmdpModel& model, std::span<const Action> policy);
std::string value_svg(const SmdpModel& model, std::span<const double> value);

} // namespace fidsel
