#pragma once

#include "fidsel/action.hpp"
#include "fidsel/cognitive_chain.hpp"
#include "fidsel/sojourn.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace fidsel {

struct ModelParams {
    int capacity = 30;
    CogGrid grid{10, 6};
    ChainRates rates = ChainRates::defaults();
    double arrival_rate = 0.4;
    double holding_cost = 0.05;
    double reward_normal = 10.0;
    double reward_high = 14.0;
    double gamma = 0.96;
    ServiceFamily service{};
    int skip_time = 2;
    /// 0 selects default_wait_cap().
    int wait_cap = 0;
    /// 0 selects ceil(rest_cap_factor * mean first-passage time) per level.
    int rest_cap = 0;
    double rest_cap_factor = 50.0;

    SkipWaitSpec skip_wait() const { return {skip_time, arrival_rate}; }
    /// r(a): fidelity reward, zero for W, R and S.
    double reward(Action a) const;
    void validate() const;
};

struct State {
    int q = 0;
    int cog = 0;

    friend bool operator==(const State&, const State&) = default;
};

/// Admissible actions in tie-breaking order.
std::vector<Action> admissible(const State& s, const CogGrid& grid);

/// Poisson(mean) probabilities evaluated until the upper tail is below 1e-12, renormalised.
std::vector<double> poisson_pmf(double mean);

/// Distribution of q' = clamp(q - d + w, 0, L), w ~ Poisson(lambda * tau); overflow lumps at L.
std::vector<double> queue_kernel(int q, int tau, Action action, double arrival_rate, int capacity);

/// One sojourn length with its probability and the resulting cognitive distribution.
struct SojournOutcome {
    int tau = 0;
    double prob = 0.0;
    std::vector<double> next_cog;
};

/// One (tau, cog', q') factorised block of P(s', tau | s, a).
struct KernelEntry {
    int tau = 0;
    double prob = 0.0;
    std::vector<double> next_cog;
    std::vector<double> next_queue;
};

/// Sojourn-moment ordering violation (cog, first or second moment, offending pair).
struct OrderingViolation {
    int cog = 0;
    int moment = 1;
    Action lower = Action::S;
    Action upper = Action::S;
};

/// Immutable assembled SMDP: states, admissible actions, rewards and the joint kernel.
class SmdpModel {
  public:
    static SmdpModel build(const ModelParams& params);

    const ModelParams& params() const { return params_; }
    const CogGrid& grid() const { return params_.grid; }
    int capacity() const { return params_.capacity; }
    int cog_count() const { return params_.grid.size(); }
    int state_count() const { return (capacity() + 1) * cog_count(); }
    int state_index(const State& s) const { return s.q * cog_count() + s.cog; }
    State state_at(int index) const { return {index / cog_count(), index % cog_count()}; }

    std::vector<Action> admissible(const State& s) const { return fidsel::admissible(s, grid()); }
    /// True when the action is available at some queue length for this cognitive level.
    bool has_sojourn(int cog, Action a) const;

    const StepMatrix& step_matrix(Action a) const { return steps_[index_of(a)]; }
    const SojournPmf& sojourn(int cog, Action a) const;
    const std::vector<SojournOutcome>& outcomes(int cog, Action a) const;

    /// Poisson arrival pmf for a sojourn of length tau.
    const std::vector<double>& arrivals(int tau) const;
    int max_tau() const { return max_tau_; }

    /// R(s,a) = r(a) - c E[tau] q - (c lambda / 2) E[tau^2].
    double immediate_reward(const State& s, Action a) const;

    /// Materialised P(s', tau | s, a) as factorised blocks.
    std::vector<KernelEntry> transitions(const State& s, Action a) const;

    /// max over states and admissible actions of E[gamma^tau].
    double contraction_factor() const;

    const std::vector<OrderingViolation>& ordering_violations() const { return violations_; }
    std::vector<std::string> warnings() const;

  private:
    explicit SmdpModel(ModelParams params) : params_(std::move(params)) {}

    std::size_t slot(int cog, Action a) const {
        return static_cast<std::size_t>(cog) * kActionCount + static_cast<std::size_t>(index_of(a));
    }

    ModelParams params_;
    std::vector<StepMatrix> steps_;
    std::vector<std::optional<SojournPmf>> sojourns_;
    std::vector<std::vector<SojournOutcome>> outcomes_;
    std::vector<std::vector<double>> arrivals_;
    int max_tau_ = 0;
    std::vector<OrderingViolation> violations_;
};

/// Checks mu(S) < mu(R) < mu(N) < mu(H) for first and second moments at every level.
std::vector<OrderingViolation> check_moment_ordering(const SmdpModel& model);

} // namespace fidsel
