#include "fidsel/solver.hpp"

#include "fidsel/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fidsel {

namespace {

// Expected next-state values E_w[V(min(base + w, L), c)] for every sojourn length that occurs,
// restricted to the cognitive columns reachable at that length.
class ContinuationCache {
  public:
    explicit ContinuationCache(const SmdpModel& model)
        : model_(model), cogs_(model.cog_count()), levels_(model.capacity() + 1) {
        const int max_tau = model.max_tau();
        needed_.assign(static_cast<std::size_t>(max_tau + 1) * cogs_, 0);
        for (int cog = 0; cog < cogs_; ++cog)
            for (Action a : kAllActions) {
                if (!model.has_sojourn(cog, a)) continue;
                for (const SojournOutcome& o : model.outcomes(cog, a))
                    for (int c = 0; c < cogs_; ++c)
                        if (o.next_cog[static_cast<std::size_t>(c)] > 0.0)
                            needed_[static_cast<std::size_t>(o.tau) * cogs_ + c] = 1;
            }
        ev_.assign(static_cast<std::size_t>(max_tau + 1) * cogs_ * levels_, 0.0);
    }

    void refresh(std::span<const double> value) {
        const int cap = model_.capacity();
        for (int tau = 1; tau <= model_.max_tau(); ++tau) {
            const std::vector<double>& pmf = model_.arrivals(tau);
            for (int c = 0; c < cogs_; ++c) {
                if (!needed_[static_cast<std::size_t>(tau) * cogs_ + c]) continue;
                for (int base = 0; base <= cap; ++base) {
                    double acc = 0.0;
                    double below = 0.0;
                    for (std::size_t w = 0; w < pmf.size(); ++w) {
                        const int q = base + static_cast<int>(w);
                        if (q >= cap) break;
                        acc += pmf[w] * value[static_cast<std::size_t>(q * cogs_ + c)];
                        below += pmf[w];
                    }
                    acc += std::max(0.0, 1.0 - below) *
                           value[static_cast<std::size_t>(cap * cogs_ + c)];
                    ev_[offset(tau, c, base)] = acc;
                }
            }
        }
    }

    double continuation(const State& s, Action a) const {
        const double gamma = model_.params().gamma;
        const int base = s.q - queue_decrement(a);
        double total = 0.0;
        for (const SojournOutcome& o : model_.outcomes(s.cog, a)) {
            double inner = 0.0;
            for (int c = 0; c < cogs_; ++c) {
                const double pc = o.next_cog[static_cast<std::size_t>(c)];
                if (pc > 0.0) inner += pc * ev_[offset(o.tau, c, base)];
            }
            total += o.prob * std::pow(gamma, o.tau) * inner;
        }
        return total;
    }

  private:
    std::size_t offset(int tau, int c, int base) const {
        return (static_cast<std::size_t>(tau) * cogs_ + c) * levels_ + base;
    }

    const SmdpModel& model_;
    int cogs_;
    int levels_;
    std::vector<char> needed_;
    std::vector<double> ev_;
};

void check_size(const SmdpModel& model, std::size_t n) {
    if (n != static_cast<std::size_t>(model.state_count()))
        throw Error(ErrorCode::InvalidParams, "value vector does not match the state space");
}

BackupResult backup_with(const SmdpModel& model, const ContinuationCache& cache) {
    BackupResult out;
    out.value.resize(static_cast<std::size_t>(model.state_count()));
    out.policy.resize(out.value.size());
    for (int i = 0; i < model.state_count(); ++i) {
        const State s = model.state_at(i);
        double best = -std::numeric_limits<double>::infinity();
        Action best_action = Action::W;
        for (Action a : model.admissible(s)) {
            const double q = model.immediate_reward(s, a) + cache.continuation(s, a);
            if (q > best) {
                best = q;
                best_action = a;
            }
        }
        out.value[static_cast<std::size_t>(i)] = best;
        out.policy[static_cast<std::size_t>(i)] = best_action;
    }
    return out;
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

} // namespace

BackupResult bellman_backup(const SmdpModel& model, std::span<const double> value) {
    check_size(model, value.size());
    ContinuationCache cache(model);
    cache.refresh(value);
    return backup_with(model, cache);
}

double continuation_value(const SmdpModel& model, std::span<const double> value, const State& s,
                          Action a) {
    check_size(model, value.size());
    ContinuationCache cache(model);
    cache.refresh(value);
    return cache.continuation(s, a);
}

ValuePolicyTable value_iteration(const SmdpModel& model, double tolerance, int max_sweeps) {
    if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidParams, "tolerance must be positive");
    ContinuationCache cache(model);
    ValuePolicyTable table;
    table.value.assign(static_cast<std::size_t>(model.state_count()), 0.0);
    table.policy.assign(table.value.size(), Action::W);
    table.residual = std::numeric_limits<double>::infinity();
    while (table.sweeps < max_sweeps) {
        cache.refresh(table.value);
        BackupResult next = backup_with(model, cache);
        table.residual = sup_distance(next.value, table.value);
        table.residual_trace.push_back(table.residual);
        table.value = std::move(next.value);
        table.policy = std::move(next.policy);
        ++table.sweeps;
        if (table.residual <= tolerance) {
            table.converged = true;
            break;
        }
    }
    return table;
}

std::vector<double> evaluate_policy(const SmdpModel& model, std::span<const Action> policy,
                                    double tolerance, int max_sweeps) {
    check_size(model, policy.size());
    for (int i = 0; i < model.state_count(); ++i) {
        const auto allowed = model.admissible(model.state_at(i));
        if (std::find(allowed.begin(), allowed.end(), policy[static_cast<std::size_t>(i)]) ==
            allowed.end())
            throw Error(ErrorCode::PolicyMismatch, "policy selects an inadmissible action");
    }
    ContinuationCache cache(model);
    std::vector<double> v(static_cast<std::size_t>(model.state_count()), 0.0);
    std::vector<double> next(v.size());
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        cache.refresh(v);
        for (int i = 0; i < model.state_count(); ++i) {
            const State s = model.state_at(i);
            const Action a = policy[static_cast<std::size_t>(i)];
            next[static_cast<std::size_t>(i)] =
                model.immediate_reward(s, a) + cache.continuation(s, a);
        }
        const double r = sup_distance(next, v);
        v.swap(next);
        if (r <= tolerance) break;
    }
    return v;
}

std::vector<double> terminal_values(const SmdpModel& model, double terminal_cost) {
    std::vector<double> v(static_cast<std::size_t>(model.state_count()));
    for (int i = 0; i < model.state_count(); ++i)
        v[static_cast<std::size_t>(i)] = -terminal_cost * model.state_at(i).q;
    return v;
}

namespace {

class Expectimax {
  public:
    Expectimax(const SmdpModel& model, double terminal_cost, std::size_t budget)
        : model_(model), terminal_cost_(terminal_cost), budget_(budget),
          kernels_(static_cast<std::size_t>(model.state_count()) * kActionCount) {}

    double value(const State& s, int stages) {
        if (++nodes_ > budget_)
            throw Error(ErrorCode::BudgetExceeded,
                        "expectimax expanded more than " + std::to_string(budget_) + " nodes");
        if (stages == 0) return -terminal_cost_ * s.q;
        const double gamma = model_.params().gamma;
        double best = -std::numeric_limits<double>::infinity();
        for (Action a : model_.admissible(s)) {
            double future = 0.0;
            for (const KernelEntry& e : kernel(s, a)) {
                const double discount = e.prob * std::pow(gamma, e.tau);
                for (int c = 0; c < model_.cog_count(); ++c) {
                    const double pc = e.next_cog[static_cast<std::size_t>(c)];
                    if (pc == 0.0) continue;
                    for (int q = 0; q <= model_.capacity(); ++q) {
                        const double pq = e.next_queue[static_cast<std::size_t>(q)];
                        if (pq == 0.0) continue;
                        future += discount * pc * pq * value({q, c}, stages - 1);
                    }
                }
            }
            best = std::max(best, model_.immediate_reward(s, a) + future);
        }
        return best;
    }

  private:
    const std::vector<KernelEntry>& kernel(const State& s, Action a) {
        auto& slot = kernels_[static_cast<std::size_t>(model_.state_index(s)) * kActionCount +
                              static_cast<std::size_t>(index_of(a))];
        if (slot.empty()) slot = model_.transitions(s, a);
        return slot;
    }

    const SmdpModel& model_;
    double terminal_cost_;
    std::size_t budget_;
    std::size_t nodes_ = 0;
    std::vector<std::vector<KernelEntry>> kernels_;
};

} // namespace

double finite_horizon_value(const SmdpModel& model, const HorizonSpec& spec, const State& start,
                            std::size_t node_budget) {
    if (spec.steps < 0) throw Error(ErrorCode::InvalidParams, "horizon must be non-negative");
    if (spec.terminal_cost < 0.0)
        throw Error(ErrorCode::InvalidParams, "terminal cost must be non-negative");
    Expectimax search(model, spec.terminal_cost, node_budget);
    return search.value(start, spec.steps);
}

} // namespace fidsel
