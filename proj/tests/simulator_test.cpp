#include "fidsel/config.hpp"
#include "fidsel/error.hpp"
#include "fidsel/simulator.hpp"
#include "fidsel/solver.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace fidsel;

namespace {

const SmdpModel& default_model() {
    static const SmdpModel m = SmdpModel::build(ModelParams{});
    return m;
}

const SmdpModel& tiny_model() {
    static const SmdpModel m = SmdpModel::build(load_config(oracle::config_path("tiny.json")).model);
    return m;
}

int sample_pmf(std::span<const double> probs, std::mt19937_64& rng) {
    std::discrete_distribution<int> d(probs.begin(), probs.end());
    return d(rng) + 1;
}

} // namespace

TEST_SUITE("simulator") {

TEST_CASE("skipping drains the queue when arrivals vanish") {
    ModelParams p;
    p.arrival_rate = 1e-12;
    p.wait_cap = 5;
    const SmdpModel m = SmdpModel::build(p);
    const PolicyTable pi = constant_policy(m, Action::S);
    const Trajectory t = run_episode(m, pi, {5, 3}, 8, 42, true);
    REQUIRE(t.epochs.size() == 8u);
    for (int k = 0; k < 5; ++k) {
        CHECK(t.epochs[k].state.q == 5 - k);
        CHECK(t.epochs[k].action == Action::S);
        CHECK(t.epochs[k].tau == p.skip_time);
        CHECK(t.epochs[k].state.cog == 3);
        CHECK(t.epochs[k].time == static_cast<long long>(k) * p.skip_time);
    }
    for (int k = 5; k < 8; ++k) {
        CHECK(t.epochs[k].state.q == 0);
        CHECK(t.epochs[k].action == Action::W);
    }
}

TEST_CASE("fixed seed reproduces the trajectory") {
    const SmdpModel& m = default_model();
    const PolicyTable pi = constant_policy(m, Action::N);
    const Trajectory a = run_episode(m, pi, {10, 6}, 200, 99, true);
    const Trajectory b = run_episode(m, pi, {10, 6}, 200, 99, true);
    REQUIRE(a.epochs.size() == b.epochs.size());
    for (std::size_t k = 0; k < a.epochs.size(); ++k) {
        CHECK(a.epochs[k].state == b.epochs[k].state);
        CHECK(a.epochs[k].tau == b.epochs[k].tau);
        CHECK(a.epochs[k].arrivals == b.epochs[k].arrivals);
    }
    CHECK(a.discounted_reward == b.discounted_reward);
    CHECK(run_episode(m, pi, {10, 6}, 200, 100, false).discounted_reward != a.discounted_reward);
}

TEST_CASE("trajectory clock and queue bounds") {
    const SmdpModel& m = default_model();
    const PolicyTable pi = constant_policy(m, Action::H);
    const Trajectory t = run_episode(m, pi, {28, 2}, 300, 7, true);
    for (std::size_t k = 0; k + 1 < t.epochs.size(); ++k) {
        CHECK(t.epochs[k + 1].time == t.epochs[k].time + t.epochs[k].tau);
        CHECK(t.epochs[k].state.q >= 0);
        CHECK(t.epochs[k].state.q <= m.capacity());
    }
    CHECK(t.epochs.front().time == 0);
}

TEST_CASE("arrivals per epoch average lambda times tau") {
    const SmdpModel& m = default_model();
    const PolicyTable pi = constant_policy(m, Action::N);
    double sum = 0.0, sum_sq = 0.0;
    long n = 0;
    for (std::uint64_t e = 0; e < 2000; ++e) {
        const Trajectory t = run_episode(m, pi, {15, 6}, 50, episode_seed(5, e), true);
        for (const Epoch& ep : t.epochs) {
            const double d = ep.arrivals - m.params().arrival_rate * ep.tau;
            sum += d;
            sum_sq += d * d;
            ++n;
        }
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) <= 3.0 * std::sqrt((sum_sq / n - mean * mean) / n));
}

TEST_CASE("epoch reward accounting is unbiased") {
    const SmdpModel& m = default_model();
    const auto& p = m.params();
    std::mt19937_64 rng(2024);
    for (const auto& [s, a] : std::vector<std::pair<State, Action>>{
             {{3, 6}, Action::H}, {{12, 9}, Action::R}, {{7, 2}, Action::N}, {{20, 4}, Action::S}, {{0, 5}, Action::W}}) {
        const auto probs = m.sojourn(s.cog, a).probs();
        const int draws = 1000000;
        double sum = 0.0, sum_sq = 0.0;
        for (int i = 0; i < draws; ++i) {
            const int tau = sample_pmf(probs, rng);
            std::poisson_distribution<int> arrivals(p.arrival_rate * tau);
            const double r = epoch_reward_accounting(p, s.q, arrivals(rng), tau, a);
            sum += r;
            sum_sq += r * r;
        }
        const double mean = sum / draws;
        const double se = std::sqrt((sum_sq / draws - mean * mean) / draws);
        CHECK(std::abs(mean - m.immediate_reward(s, a)) <= 3.0 * se);
    }
    CHECK(epoch_reward_accounting(p, 4, 0, 3, Action::N) == doctest::Approx(p.reward_normal - p.holding_cost * 3 * 4));
    CHECK(epoch_reward_accounting(p, 4, 2, 2, Action::S) == doctest::Approx(-p.holding_cost * 2 * (4 + 1)));
}

TEST_CASE("cost-only policy estimate agrees with the exact value") {
    const SmdpModel& m = tiny_model();
    const PolicyTable pi = constant_policy(m, Action::S);
    const auto exact = oracle::solve_policy(m, pi);
    SimConfig cfg;
    cfg.seed = 3;
    cfg.episodes = 20000;
    for (int i = 0; i < m.state_count(); ++i) {
        const MonteCarloEstimate est = monte_carlo_value(m, pi, m.state_at(i), cfg);
        CHECK(std::abs(est.mean - exact[i]) <= 3.0 * est.std_error + est.truncation_bound);
        CHECK(est.truncation_bound <= 0.1 * est.std_error);
    }
}

TEST_CASE("different seeds give different estimates that both cover the value") {
    const SmdpModel& m = tiny_model();
    const ValuePolicyTable t = value_iteration(m, 1e-10);
    SimConfig a, b;
    a.seed = 1;
    b.seed = 2;
    a.episodes = b.episodes = 20000;
    const State s{2, 1};
    const MonteCarloEstimate ea = monte_carlo_value(m, t.policy, s, a);
    const MonteCarloEstimate eb = monte_carlo_value(m, t.policy, s, b);
    CHECK(ea.mean != eb.mean);
    CHECK(std::abs(ea.mean - t.at(m, s)) <= 3.0 * ea.std_error);
    CHECK(std::abs(eb.mean - t.at(m, s)) <= 3.0 * eb.std_error);
}

TEST_CASE("estimates do not depend on the thread count") {
    const SmdpModel& m = tiny_model();
    const PolicyTable pi = constant_policy(m, Action::H);
    SimConfig one, four;
    one.episodes = four.episodes = 3000;
    one.threads = 1;
    four.threads = 4;
    const auto a = monte_carlo_value(m, pi, {3, 0}, one);
    const auto b = monte_carlo_value(m, pi, {3, 0}, four);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("horizon for a bias target") {
    const SmdpModel& m = default_model();
    for (double target : {1.0, 0.01, 1e-4}) {
        const int n = horizon_for_bias(m, target);
        CHECK(truncation_bound(m, n) <= target);
        CHECK(truncation_bound(m, n - 1) > target);
    }
}

TEST_CASE("episode seeds are distinct") {
    CHECK(episode_seed(1, 0) != episode_seed(1, 1));
    CHECK(episode_seed(1, 0) != episode_seed(2, 0));
    CHECK(episode_seed(1, 5) == episode_seed(1, 5));
}

TEST_CASE("inadmissible policy entries are rejected") {
    const SmdpModel& m = default_model();
    PolicyTable pi = constant_policy(m, Action::N);
    pi[m.state_index({4, 2})] = Action::R;
    try {
        run_episode(m, pi, {4, 2}, 3, 1, false);
        FAIL("expected unreachable state");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnreachableState);
    }
}

TEST_CASE("constant-action occupancy matches the stationary distribution") {
    const int levels = 6;
    const double f = 0.3, b = 0.25;
    ChainRates rates = ChainRates::defaults();
    rates[Action::N] = {f, b};
    const StepMatrix step = build_step_matrix(CogGrid(levels - 1, 2), rates, Action::N);
    // Birth-death chain: pi(i+1) / pi(i) = f / b.
    std::vector<double> stationary(levels);
    double total = 0.0;
    for (int i = 0; i < levels; ++i) total += stationary[i] = std::pow(f / b, i);
    for (double& x : stationary) x /= total;

    const long samples = 100000;
    const auto counts = cog_occupancy(step, 0, samples, 25, 200, 77);
    double chi2 = 0.0;
    long seen = 0;
    for (int i = 0; i < levels; ++i) {
        const double expected = samples * stationary[i];
        chi2 += (counts[i] - expected) * (counts[i] - expected) / expected;
        seen += counts[i];
    }
    CHECK(seen == samples);
    CHECK(chi2 < 20.52); // chi-square 0.999 quantile, 5 degrees of freedom
}

TEST_CASE("queue stays busy under heavy load") {
    const RunConfig cfg = load_config(oracle::config_path("high_lambda.json"));
    const SmdpModel m = SmdpModel::build(cfg.model);
    const ValuePolicyTable t = value_iteration(m);
    CHECK(empty_queue_fraction(m, t.policy, {15, 6}, 100, 1000, 1) < 0.01);
    const SmdpModel light = SmdpModel::build(ModelParams{});
    CHECK(empty_queue_fraction(light, constant_policy(light, Action::S), {15, 6}, 50, 1000, 1) > 0.01);
}

} // TEST_SUITE
