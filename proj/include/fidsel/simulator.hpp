#pragma once

#include "fidsel/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace fidsel {

/// Action per state index, in SmdpModel::state_index order.
using PolicyTable = std::vector<Action>;

/// Uses `action` wherever it is admissible, otherwise the first admissible action.
PolicyTable constant_policy(const SmdpModel& model, Action action);

struct Epoch {
    int index = 0;
    /// Cumulative time at the start of the epoch.
    long long time = 0;
    State state;
    Action action = Action::W;
    int tau = 0;
    int arrivals = 0;
    /// Undiscounted epoch reward.
    double reward = 0.0;
};

struct Trajectory {
    std::vector<Epoch> epochs;
    double discounted_reward = 0.0;
    State final_state;
};

struct SimConfig {
    std::uint64_t seed = 1;
    int episodes = 10000;
    /// Epochs per episode; 0 picks a horizon whose truncation bias is below a tenth of the SE.
    int horizon = 0;
    /// Number of leading episodes whose epochs are kept.
    int record_episodes = 0;
    /// 0 uses the hardware concurrency.
    int threads = 0;
};

/// r(a) - c tau (q + w/2): the realised reward of one epoch.
double epoch_reward_accounting(const ModelParams& params, int q, int arrivals, int tau, Action a);

/// Seed of episode `k` derived from the run seed.
std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode);

/// One episode of `horizon` epochs from `start`.
Trajectory run_episode(const SmdpModel& model, std::span<const Action> policy, const State& start,
                       int horizon, std::uint64_t seed, bool record);

struct MonteCarloEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    int episodes = 0;
    int horizon = 0;
    /// beta^n max|R| / (1 - beta) with beta the model's contraction factor.
    double truncation_bound = 0.0;
    double mean_arrivals_per_epoch = 0.0;
    double mean_tau = 0.0;
    double empty_fraction = 0.0;
    std::vector<Trajectory> recorded;
};

/// Smallest horizon n with beta^n max|R| / (1 - beta) <= target.
int horizon_for_bias(const SmdpModel& model, double target);

/// Truncation bound for a given horizon.
double truncation_bound(const SmdpModel& model, int horizon);

/// Sample mean and standard error of discounted episode rewards started at `start`.
MonteCarloEstimate monte_carlo_value(const SmdpModel& model, std::span<const Action> policy,
                                     const State& start, const SimConfig& config);

/// Share of epochs spent with an empty queue.
double empty_queue_fraction(const SmdpModel& model, std::span<const Action> policy,
                            const State& start, int episodes, int horizon, std::uint64_t seed);

/// Visit counts of a single action's cognitive chain, sampled every `thin` steps after `burn_in`.
std::vector<long> cog_occupancy(const StepMatrix& step, int start, long samples, int thin,
                                int burn_in, std::uint64_t seed);

} // namespace fidsel
