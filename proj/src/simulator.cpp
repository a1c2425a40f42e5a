#include "fidsel/simulator.hpp"

#include "fidsel/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

namespace fidsel {

namespace {

double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<double> cumulative(std::span<const double> pmf) {
    std::vector<double> cdf(pmf.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < pmf.size(); ++i) {
        acc += pmf[i];
        cdf[i] = acc;
    }
    return cdf;
}

std::size_t draw(const std::vector<double>& cdf, std::mt19937_64& rng) {
    const double u = uniform01(rng) * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

// Inverse-CDF tables for everything an episode samples.
class Sampler {
  public:
    explicit Sampler(const SmdpModel& model) : model_(model) {
        const int n = model.cog_count();
        sojourn_.resize(static_cast<std::size_t>(n) * kActionCount);
        for (int cog = 0; cog < n; ++cog)
            for (Action a : kAllActions)
                if (model.has_sojourn(cog, a))
                    sojourn_[slot(cog, a)] = cumulative(model.sojourn(cog, a).probs());
        arrivals_.resize(static_cast<std::size_t>(model.max_tau()) + 1);
        for (int tau = 1; tau <= model.max_tau(); ++tau)
            arrivals_[static_cast<std::size_t>(tau)] = cumulative(model.arrivals(tau));
        chain_.resize(static_cast<std::size_t>(n) * kActionCount);
        for (Action a : kAllActions)
            for (int cog = 0; cog < n; ++cog)
                chain_[slot(cog, a)] = cumulative(model.step_matrix(a).row(cog));
    }

    int tau(int cog, Action a, std::mt19937_64& rng) const {
        return static_cast<int>(draw(sojourn_[slot(cog, a)], rng)) + 1;
    }
    int arrivals(int tau, std::mt19937_64& rng) const {
        return static_cast<int>(draw(arrivals_[static_cast<std::size_t>(tau)], rng));
    }
    int step(int cog, Action a, std::mt19937_64& rng) const {
        return static_cast<int>(draw(chain_[slot(cog, a)], rng));
    }
    int next_cog(int cog, Action a, int tau, std::mt19937_64& rng) const {
        if (a == Action::S) return cog;
        if (a == Action::R) return model_.grid().optimal_index();
        for (int t = 0; t < tau; ++t) cog = step(cog, a, rng);
        return cog;
    }

  private:
    std::size_t slot(int cog, Action a) const {
        return static_cast<std::size_t>(cog) * kActionCount + static_cast<std::size_t>(index_of(a));
    }

    const SmdpModel& model_;
    std::vector<std::vector<double>> sojourn_;
    std::vector<std::vector<double>> arrivals_;
    std::vector<std::vector<double>> chain_;
};

struct EpisodeSummary {
    double discounted = 0.0;
    long epochs = 0;
    long arrivals = 0;
    long long time = 0;
    long empty = 0;
};

Trajectory simulate(const SmdpModel& model, const Sampler& sampler, std::span<const Action> policy,
                    const State& start, int horizon, std::uint64_t seed, bool record,
                    EpisodeSummary* summary) {
    std::mt19937_64 rng(seed);
    const ModelParams& p = model.params();
    Trajectory traj;
    State s = start;
    long long zeta = 0;
    double discount = 1.0;
    double total = 0.0;
    for (int k = 0; k < horizon; ++k) {
        const Action a = policy[static_cast<std::size_t>(model.state_index(s))];
        const auto allowed = model.admissible(s);
        if (std::find(allowed.begin(), allowed.end(), a) == allowed.end())
            throw Error(ErrorCode::UnreachableState,
                        "policy has no admissible action at q=" + std::to_string(s.q) +
                            ", cog=" + std::to_string(s.cog));
        const int tau = sampler.tau(s.cog, a, rng);
        const int w = sampler.arrivals(tau, rng);
        const double reward = epoch_reward_accounting(p, s.q, w, tau, a);
        total += discount * reward;
        if (summary) {
            summary->arrivals += w;
            summary->time += tau;
            summary->empty += s.q == 0 ? 1 : 0;
        }
        if (record) traj.epochs.push_back({k, zeta, s, a, tau, w, reward});
        const int cog = sampler.next_cog(s.cog, a, tau, rng);
        const int q = std::clamp(s.q - queue_decrement(a) + w, 0, model.capacity());
        s = {q, cog};
        zeta += tau;
        discount *= std::pow(p.gamma, tau);
    }
    traj.discounted_reward = total;
    traj.final_state = s;
    if (summary) {
        summary->discounted = total;
        summary->epochs = horizon;
    }
    return traj;
}

void check_inputs(const SmdpModel& model, std::span<const Action> policy, const State& start) {
    if (policy.size() != static_cast<std::size_t>(model.state_count()))
        throw Error(ErrorCode::PolicyMismatch, "policy does not cover the state space");
    if (start.q < 0 || start.q > model.capacity() || start.cog < 0 || start.cog >= model.cog_count())
        throw Error(ErrorCode::InvalidParams, "start state lies outside the state space");
}

int thread_count(int requested, int work) {
    int n = requested > 0 ? requested : static_cast<int>(std::thread::hardware_concurrency());
    return std::clamp(n, 1, std::max(1, work));
}

std::vector<EpisodeSummary> run_batch(const SmdpModel& model, const Sampler& sampler,
                                      std::span<const Action> policy, const State& start,
                                      int episodes, int horizon, std::uint64_t seed, int threads) {
    std::vector<EpisodeSummary> out(static_cast<std::size_t>(episodes));
    const int n = thread_count(threads, episodes);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::vector<std::thread> pool;
    for (int t = 0; t < n; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int e = t; e < episodes; e += n)
                    simulate(model, sampler, policy, start, horizon,
                             episode_seed(seed, static_cast<std::uint64_t>(e)), false,
                             &out[static_cast<std::size_t>(e)]);
            } catch (...) {
                errors[static_cast<std::size_t>(t)] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    return out;
}

// Neumaier summation in index order so the result does not depend on the thread schedule.
double compensated_sum(const std::vector<double>& xs) {
    double sum = 0.0;
    double comp = 0.0;
    for (double x : xs) {
        const double t = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
        sum = t;
    }
    return sum + comp;
}

struct Moments {
    double mean = 0.0;
    double std_error = 0.0;
};

Moments sample_moments(const std::vector<EpisodeSummary>& runs) {
    std::vector<double> xs;
    xs.reserve(runs.size());
    for (const auto& r : runs) xs.push_back(r.discounted);
    Moments m;
    const double n = static_cast<double>(xs.size());
    m.mean = compensated_sum(xs) / n;
    if (xs.size() > 1) {
        std::vector<double> sq;
        sq.reserve(xs.size());
        for (double x : xs) sq.push_back((x - m.mean) * (x - m.mean));
        m.std_error = std::sqrt(compensated_sum(sq) / (n - 1.0) / n);
    }
    return m;
}

double max_abs_reward(const SmdpModel& model) {
    double r = 0.0;
    for (int i = 0; i < model.state_count(); ++i) {
        const State s = model.state_at(i);
        for (Action a : model.admissible(s)) r = std::max(r, std::abs(model.immediate_reward(s, a)));
    }
    return r;
}

} // namespace

PolicyTable constant_policy(const SmdpModel& model, Action action) {
    PolicyTable out(static_cast<std::size_t>(model.state_count()));
    for (int i = 0; i < model.state_count(); ++i) {
        const auto allowed = model.admissible(model.state_at(i));
        out[static_cast<std::size_t>(i)] =
            std::find(allowed.begin(), allowed.end(), action) != allowed.end() ? action
                                                                                : allowed.front();
    }
    return out;
}

double epoch_reward_accounting(const ModelParams& params, int q, int arrivals, int tau, Action a) {
    return params.reward(a) - params.holding_cost * tau * (q + 0.5 * arrivals);
}

std::uint64_t episode_seed(std::uint64_t seed, std::uint64_t episode) {
    // splitmix64 finaliser over the combined counter
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (episode + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Trajectory run_episode(const SmdpModel& model, std::span<const Action> policy, const State& start,
                       int horizon, std::uint64_t seed, bool record) {
    check_inputs(model, policy, start);
    if (horizon < 0) throw Error(ErrorCode::InvalidParams, "horizon must be non-negative");
    const Sampler sampler(model);
    return simulate(model, sampler, policy, start, horizon, seed, record, nullptr);
}

double truncation_bound(const SmdpModel& model, int horizon) {
    const double beta = model.contraction_factor();
    return std::pow(beta, horizon) * max_abs_reward(model) / (1.0 - beta);
}

int horizon_for_bias(const SmdpModel& model, double target) {
    if (!(target > 0.0)) throw Error(ErrorCode::InvalidParams, "bias target must be positive");
    const double beta = model.contraction_factor();
    const double scale = max_abs_reward(model) / (1.0 - beta);
    if (scale <= target) return 1;
    return std::max(1, static_cast<int>(std::ceil(std::log(target / scale) / std::log(beta))));
}

MonteCarloEstimate monte_carlo_value(const SmdpModel& model, std::span<const Action> policy,
                                     const State& start, const SimConfig& config) {
    check_inputs(model, policy, start);
    if (config.episodes < 1) throw Error(ErrorCode::InvalidParams, "episode count must be at least 1");
    if (config.horizon < 0) throw Error(ErrorCode::InvalidParams, "horizon must be non-negative");
    const Sampler sampler(model);

    int horizon = config.horizon;
    if (horizon == 0) {
        // pilot run for the spread of episode returns, on a separate seed stream
        const int pilot_episodes = std::clamp(config.episodes, 2, 1000);
        const int pilot_horizon = horizon_for_bias(model, 1e-6 * std::max(1.0, max_abs_reward(model)));
        const auto pilot = run_batch(model, sampler, policy, start, pilot_episodes, pilot_horizon,
                                     ~config.seed, config.threads);
        const double sd = sample_moments(pilot).std_error * std::sqrt(double(pilot_episodes));
        const double se = sd / std::sqrt(double(config.episodes));
        horizon = se > 0.0 ? horizon_for_bias(model, 0.05 * se) : pilot_horizon;
    }

    const auto runs = run_batch(model, sampler, policy, start, config.episodes, horizon, config.seed,
                                config.threads);
    MonteCarloEstimate est;
    const Moments m = sample_moments(runs);
    est.mean = m.mean;
    est.std_error = m.std_error;
    est.episodes = config.episodes;
    est.horizon = horizon;
    est.truncation_bound = truncation_bound(model, horizon);
    long long arrivals = 0, time = 0, empty = 0, epochs = 0;
    for (const auto& r : runs) {
        arrivals += r.arrivals;
        time += r.time;
        empty += r.empty;
        epochs += r.epochs;
    }
    if (epochs > 0) {
        est.mean_arrivals_per_epoch = double(arrivals) / double(epochs);
        est.mean_tau = double(time) / double(epochs);
        est.empty_fraction = double(empty) / double(epochs);
    }
    const int keep = std::min(config.record_episodes, config.episodes);
    for (int e = 0; e < keep; ++e)
        est.recorded.push_back(simulate(model, sampler, policy, start, horizon,
                                        episode_seed(config.seed, static_cast<std::uint64_t>(e)),
                                        true, nullptr));
    return est;
}

double empty_queue_fraction(const SmdpModel& model, std::span<const Action> policy,
                            const State& start, int episodes, int horizon, std::uint64_t seed) {
    check_inputs(model, policy, start);
    if (episodes < 1 || horizon < 1)
        throw Error(ErrorCode::InvalidParams, "need at least one episode and one epoch");
    const Sampler sampler(model);
    const auto runs = run_batch(model, sampler, policy, start, episodes, horizon, seed, 0);
    long long empty = 0, epochs = 0;
    for (const auto& r : runs) {
        empty += r.empty;
        epochs += r.epochs;
    }
    return double(empty) / double(epochs);
}

std::vector<long> cog_occupancy(const StepMatrix& step, int start, long samples, int thin,
                                int burn_in, std::uint64_t seed) {
    if (start < 0 || start >= step.size())
        throw Error(ErrorCode::InvalidParams, "start level outside the grid");
    if (samples < 1 || thin < 1 || burn_in < 0)
        throw Error(ErrorCode::InvalidParams, "invalid occupancy sampling schedule");
    std::vector<std::vector<double>> rows;
    for (int r = 0; r < step.size(); ++r) rows.push_back(cumulative(step.row(r)));
    std::mt19937_64 rng(seed);
    std::vector<long> counts(static_cast<std::size_t>(step.size()), 0);
    int cog = start;
    for (int t = 0; t < burn_in; ++t) cog = static_cast<int>(draw(rows[cog], rng));
    for (long k = 0; k < samples; ++k) {
        for (int t = 0; t < thin; ++t) cog = static_cast<int>(draw(rows[cog], rng));
        ++counts[static_cast<std::size_t>(cog)];
    }
    return counts;
}

} // namespace fidsel
