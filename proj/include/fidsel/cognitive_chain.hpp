#pragma once

#include "fidsel/action.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace fidsel {

/// Discrete cognitive levels {0, 1/N, ..., 1} with an interior optimal level.
class CogGrid {
  public:
    CogGrid(int intervals, int optimal_index);

    /// Grid whose optimal index is the level nearest to `optimal_level`.
    static CogGrid with_optimal_level(int intervals, double optimal_level);

    int intervals() const { return intervals_; }
    int size() const { return intervals_ + 1; }
    int optimal_index() const { return optimal_index_; }
    double level(int index) const { return static_cast<double>(index) / intervals_; }
    double optimal_level() const { return level(optimal_index_); }

  private:
    int intervals_;
    int optimal_index_;
};

/// Per-step forward/backward move probabilities of the cognitive chain.
struct StepRates {
    double forward = 0.0;
    double backward = 0.0;
};

struct ChainRates {
    std::array<StepRates, kActionCount> by_action{};

    StepRates& operator[](Action a) { return by_action[index_of(a)]; }
    const StepRates& operator[](Action a) const { return by_action[index_of(a)]; }

    /// Default per-action rates for a unit time step (H forward capped at 0.9).
    static ChainRates defaults();

    /// Throws ErrorCode::InvalidRates when any invariant fails.
    void validate() const;
};

/// Row-stochastic tridiagonal transition matrix of one action's chain.
class StepMatrix {
  public:
    StepMatrix(Action action, int size);

    Action action() const { return action_; }
    int size() const { return size_; }

    double operator()(int row, int col) const { return data_[index(row, col)]; }
    double& operator()(int row, int col) { return data_[index(row, col)]; }

    std::span<const double> row(int r) const {
        return {data_.data() + static_cast<std::size_t>(r) * size_, static_cast<std::size_t>(size_)};
    }

  private:
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * size_ + static_cast<std::size_t>(col);
    }

    Action action_;
    int size_;
    std::vector<double> data_;
};

StepMatrix build_step_matrix(const CogGrid& grid, const ChainRates& rates, Action action);

/// Row `cog_index` of step^tau.
std::vector<double> evolve(const StepMatrix& step, int cog_index, int tau);

/// Distribution after one further step from an arbitrary starting distribution.
std::vector<double> step_distribution(const StepMatrix& step, std::span<const double> dist);

struct FptResult {
    /// pmf[k-1] = P(first passage at step k), k = 1..t_cap, renormalised.
    std::vector<double> pmf;
    /// Probability mass beyond t_cap before renormalisation.
    double tail_mass = 0.0;
};

inline constexpr double kTruncationTolerance = 1e-6;

/// First-passage-time distribution from `cog_index` down to `cog_star`.
FptResult fpt_pmf(const StepMatrix& step, int cog_index, int cog_star, int t_cap);

/// Untruncated mean first-passage time, from the fundamental-matrix system.
double fpt_mean(const StepMatrix& step, int cog_index, int cog_star);

} // namespace fidsel
