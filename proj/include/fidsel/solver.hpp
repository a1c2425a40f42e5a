#pragma once

#include "fidsel/model.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace fidsel {

/// Optimal values and greedy actions per state index, with convergence metadata.
struct ValuePolicyTable {
    std::vector<double> value;
    std::vector<Action> policy;
    double residual = 0.0;
    int sweeps = 0;
    bool converged = false;
    /// Sup-norm change of every sweep, in order.
    std::vector<double> residual_trace;

    double at(const SmdpModel& m, const State& s) const {
        return value[static_cast<std::size_t>(m.state_index(s))];
    }
    Action action_at(const SmdpModel& m, const State& s) const {
        return policy[static_cast<std::size_t>(m.state_index(s))];
    }
};

struct BackupResult {
    std::vector<double> value;
    std::vector<Action> policy;
};

/// One Jacobi Bellman sweep: V'(s) = max_a R(s,a) + sum gamma^tau P(s',tau|s,a) V(s').
/// Ties resolve to the earliest action in S < R < N < H < W order.
BackupResult bellman_backup(const SmdpModel& model, std::span<const double> value);

/// Expected discounted continuation sum gamma^tau P(s',tau|s,a) V(s') for one pair.
double continuation_value(const SmdpModel& model, std::span<const double> value, const State& s,
                          Action a);

/// Value iteration from V = 0 until the sup-norm change is at most `tolerance`.
ValuePolicyTable value_iteration(const SmdpModel& model, double tolerance = 1e-9,
                                 int max_sweeps = 200000);

/// Iterative evaluation of a fixed stationary policy.
std::vector<double> evaluate_policy(const SmdpModel& model, std::span<const Action> policy,
                                    double tolerance = 1e-9, int max_sweeps = 200000);

struct HorizonSpec {
    int steps = 0;
    /// Terminal value is -terminal_cost * q.
    double terminal_cost = 0.0;
};

std::vector<double> terminal_values(const SmdpModel& model, double terminal_cost);

/// Exact n-stage expectimax by exhaustive expansion of the kernel.
/// Throws ErrorCode::BudgetExceeded once more than `node_budget` nodes are expanded.
double finite_horizon_value(const SmdpModel& model, const HorizonSpec& spec, const State& start,
                            std::size_t node_budget = 20'000'000);

} // namespace fidsel
