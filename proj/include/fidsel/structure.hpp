#pragma once

#include "fidsel/model.hpp"
#include "fidsel/solver.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fidsel {

/// Gamma-MGF bound on E[gamma^tau]: (1 - Var ln(gamma) / E)^(-E^2 / Var), gamma^E at Var = 0.
double gamma_mgf_bound(double mean, double variance, double gamma);

struct RhoEntry {
    int cog = 0;
    Action action = Action::S;
    double mean = 0.0;
    double variance = 0.0;
    /// gamma_mgf_bound(mean, variance)
    double bound = 0.0;
    /// Exact E[gamma^tau] from the PMF.
    double discount = 0.0;
    bool light_tail = false; // discount <= bound
    bool jensen = false;     // gamma^mean <= discount
    /// Entries for W are tabulated but do not enter rho (the queue is assumed never empty).
    bool in_rho = false;
};

struct RhoReport {
    std::vector<RhoEntry> entries;
    double rho = 0.0;
    bool light_tail_everywhere = false;
    bool jensen_everywhere = false;
};

/// Throws ErrorCode::RhoGeOne when rho >= 1.
RhoReport compute_rho(const SmdpModel& model);

/// Largest expected sojourn time used by the bounds.
struct SojournScale {
    /// E[tau | cog = 1, H]
    double assumed = 0.0;
    /// max over levels and S, R, N, H of E[tau]
    double actual = 0.0;
    /// max(assumed, actual); differs from `assumed` when the top-level H assumption fails.
    double t_max = 0.0;
    bool substituted = false;
};

SojournScale max_sojourn(const SmdpModel& model);

struct RewardShapeReport {
    double max_second_difference = 0.0;
    bool affine = false;
    bool unimodal = false;
    std::vector<std::string> failures;
};

/// Immediate reward is affine in q and unimodal in cog with its peak at the optimal level.
RewardShapeReport check_reward_shape(const SmdpModel& model, double tolerance = 1e-12);

/// Peak-at-index unimodality: non-decreasing up to `peak` and non-increasing after it.
bool is_unimodal_at(std::span<const double> values, int peak, double tolerance);

/// Which modelling assumptions hold for a configuration.
struct AssumptionStatus {
    /// Queue rarely empty under the optimal policy.
    bool busy_queue = true;
    double empty_fraction = 0.0;
    /// Sojourn moment ordering.
    bool moment_order = true;
    /// Light-tail bound everywhere and rho < 1.
    bool light_tail = true;

    bool all() const { return busy_queue && moment_order && light_tail; }
};

struct ValueBoundRow {
    int cog = 0;
    int pairs = 0;
    /// min over pairs of (V(q) - V(q+dq)) - lower bound
    double lower_margin = 0.0;
    /// min over pairs of upper bound - (V(q) - V(q+dq))
    double upper_margin = 0.0;
    bool pass = false;
};

struct ValueBoundReport {
    std::vector<ValueBoundRow> rows;
    double lower_slope = 0.0; // c t_s / (1 - gamma^t_max)
    double upper_slope = 0.0; // c t_max / (1 - rho)
    int q_limit = 0;
    bool pass = false;
    /// Set when a modelling assumption fails; failures then do not count against the bounds.
    bool assumption_violated = false;
};

/// Highest queue length outside the top `buffer_fraction` of the queue range.
int queue_scan_limit(int capacity, double buffer_fraction);

ValueBoundReport check_value_bounds(const SmdpModel& model, std::span<const double> value, double rho,
                                 const AssumptionStatus& assumptions, double buffer_fraction = 0.2,
                                 double tolerance = 1e-9);

/// Signed per-level margins of the dominance conditions; non-negative means the condition holds.
struct DominanceRow {
    int cog = 0;
    bool above_optimal = false;
    /// t_s gamma^E[tau|H] / (1 - gamma^t_max)
    double skip_bonus = 0.0;
    /// N strictly dominates H beyond a threshold.
    double high_to_normal = 0.0;
    /// R dominates N and H beyond a threshold (levels above the optimum only).
    std::optional<double> normal_to_rest;
    /// S optimal beyond a threshold: R-based above the optimum, N-based otherwise.
    double to_skip = 0.0;
    /// Separate S-over-H and S-over-N conditions at or below the optimum.
    std::optional<double> skip_over_high;
    std::optional<double> skip_over_normal;
    double max_discount = 0.0;
    /// Combined condition over the admissible set.
    double combined = 0.0;
};

std::vector<DominanceRow> check_dominance_conditions(const SmdpModel& model, double rho);

struct ThresholdRow {
    int cog = 0;
    /// Last queue length of each prefix block; nullopt means beyond the scanned range.
    std::optional<int> q1;
    std::optional<int> q2;
    std::optional<int> q3;
    bool is_threshold = false;
    std::vector<std::string> violations;
};

/// Scans actions ordered by q = 1, 2, ... for the H, N, (R), S block pattern.
ThresholdRow extract_thresholds(std::span<const Action> row, bool above_optimal);

/// Policy row for one level over q = 1..q_limit.
std::vector<Action> policy_row(const SmdpModel& model, std::span<const Action> policy, int cog,
                               int q_limit);

struct GuaranteeRow {
    int cog = 0;
    bool guaranteed = false;
    bool is_threshold = false;
    /// guaranteed-threshold | no-guarantee | assumption-violated | violation
    std::string status;
};

struct GuaranteeVerdict {
    std::vector<GuaranteeRow> rows;
    bool violated = false;
};

/// Every level whose combined margin is non-negative must be threshold-shaped when all assumptions hold.
GuaranteeVerdict verify_threshold_guarantee(std::span<const DominanceRow> margins,
                                std::span<const ThresholdRow> thresholds,
                                const AssumptionStatus& assumptions);

/// Shape of the solved value function outside the boundary buffer.
struct ValueShapeReport {
    /// V(q, cog) > V(q + 1, cog) for q = 1..q_limit - 1.
    bool decreasing_in_q = false;
    /// V(q, .) unimodal with its peak at the optimal level for q = 1..q_limit.
    bool unimodal_in_cog = false;
    std::vector<std::string> failures;
};

ValueShapeReport check_value_shape(const SmdpModel& model, std::span<const double> value, int q_limit,
                                   double tolerance = 1e-12);

/// Everything the checker computes for one solved configuration.
struct StructureReport {
    RhoReport rho;
    SojournScale scale;
    AssumptionStatus assumptions;
    std::vector<OrderingViolation> ordering;
    RewardShapeReport reward_shape;
    ValueBoundReport value_bounds;
    std::vector<DominanceRow> dominance;
    std::vector<ThresholdRow> thresholds;
    GuaranteeVerdict guarantee;
    ValueShapeReport value_shape;
    int q_limit = 0;
    bool skip_stable = true;
};

/// Runs every check. `empty_fraction` is the measured share of epochs with an empty queue.
StructureReport analyze_structure(const SmdpModel& model, const ValuePolicyTable& solution,
                                  double empty_fraction, double empty_threshold = 0.01,
                                  double buffer_fraction = 0.2);

} // namespace fidsel
