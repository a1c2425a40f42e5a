#include "fidsel/model.hpp"

#include "fidsel/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fidsel {

double ModelParams::reward(Action a) const {
    switch (a) {
    case Action::N: return reward_normal;
    case Action::H: return reward_high;
    default: return 0.0;
    }
}

void ModelParams::validate() const {
    if (capacity < 1) throw Error(ErrorCode::InvalidParams, "queue capacity must be at least 1");
    if (!(holding_cost > 0.0)) throw Error(ErrorCode::InvalidParams, "holding cost must be positive");
    if (!(reward_normal >= 0.0 && reward_high > reward_normal))
        throw Error(ErrorCode::InvalidParams, "rewards must satisfy r_H > r_N >= 0");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw Error(ErrorCode::InvalidParams, "discount factor must satisfy γ ∈ (0,1)");
    if (wait_cap < 0 || rest_cap < 0)
        throw Error(ErrorCode::InvalidParams, "support caps must be non-negative");
    if (!(rest_cap_factor >= 1.0))
        throw Error(ErrorCode::InvalidParams, "rest cap factor must be at least 1");
    rates.validate();
    service.validate();
    skip_wait().validate();
}

std::vector<Action> admissible(const State& s, const CogGrid& grid) {
    if (s.q == 0) return {Action::W};
    if (s.cog > grid.optimal_index()) return {Action::S, Action::R, Action::N, Action::H};
    return {Action::S, Action::N, Action::H};
}

std::vector<double> poisson_pmf(double mean) {
    if (mean < 0.0) throw Error(ErrorCode::InvalidParams, "Poisson mean must be non-negative");
    if (mean == 0.0) return {1.0};
    constexpr double kTail = 1e-12;
    std::vector<double> out;
    const double log_mean = std::log(mean);
    double cumulative = 0.0;
    for (int w = 0;; ++w) {
        const double p = std::exp(w * log_mean - mean - std::lgamma(w + 1.0));
        out.push_back(p);
        cumulative += p;
        // past the mode the tail is dominated by a geometric series with ratio mean/(w+1)
        const double ratio = mean / (w + 1.0);
        if (ratio < 1.0 && p * ratio / (1.0 - ratio) < kTail) break;
    }
    for (double& p : out) p /= cumulative;
    return out;
}

namespace {

std::vector<double> clamp_arrivals(int base, const std::vector<double>& pmf, int capacity) {
    std::vector<double> out(static_cast<std::size_t>(capacity) + 1, 0.0);
    double below = 0.0;
    for (std::size_t w = 0; w < pmf.size(); ++w) {
        const int target = base + static_cast<int>(w);
        if (target >= capacity) break;
        out[static_cast<std::size_t>(target)] += pmf[w];
        below += pmf[w];
    }
    out[static_cast<std::size_t>(capacity)] += std::max(0.0, 1.0 - below);
    return out;
}

} // namespace

std::vector<double> queue_kernel(int q, int tau, Action action, double arrival_rate, int capacity) {
    if (q < 0 || q > capacity) throw Error(ErrorCode::InvalidParams, "queue length out of range");
    const int base = q - queue_decrement(action);
    if (base < 0) throw Error(ErrorCode::InvalidParams, "action not admissible on an empty queue");
    return clamp_arrivals(base, poisson_pmf(arrival_rate * tau), capacity);
}

SmdpModel SmdpModel::build(const ModelParams& params) {
    params.validate();
    SmdpModel model(params);
    const CogGrid& grid = model.grid();
    const int n = grid.size();
    const double gamma = params.gamma;

    for (Action a : kAllActions) model.steps_.push_back(build_step_matrix(grid, params.rates, a));

    model.sojourns_.resize(static_cast<std::size_t>(n) * kActionCount);
    model.outcomes_.resize(static_cast<std::size_t>(n) * kActionCount);

    const SkipWaitSpec sw = params.skip_wait();
    const SojournPmf skip = skip_pmf(sw, gamma);
    const SojournPmf wait =
        wait_pmf(sw, params.wait_cap > 0 ? params.wait_cap : default_wait_cap(sw), gamma);

    for (int cog = 0; cog < n; ++cog) {
        for (Action a : kAllActions) {
            std::optional<SojournPmf> pmf;
            switch (a) {
            case Action::S: pmf = skip; break;
            case Action::W: pmf = wait; break;
            case Action::N:
            case Action::H: pmf = service_pmf(params.service, grid, cog, a, gamma); break;
            case Action::R:
                if (cog > grid.optimal_index())
                    pmf = rest_pmf(model.step_matrix(Action::R), grid, cog, gamma, params.rest_cap,
                                   params.rest_cap_factor);
                break;
            }
            if (!pmf) continue;

            std::vector<SojournOutcome> outs;
            std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
            dist[static_cast<std::size_t>(cog)] = 1.0;
            const StepMatrix& step = model.step_matrix(a);
            for (int tau = 1; tau <= pmf->max_support(); ++tau) {
                // chain distribution after tau steps, built incrementally
                if (a != Action::S && a != Action::R) dist = step_distribution(step, dist);
                const double p = pmf->prob(tau);
                if (p == 0.0) continue;
                SojournOutcome o;
                o.tau = tau;
                o.prob = p;
                if (a == Action::R) {
                    o.next_cog.assign(static_cast<std::size_t>(n), 0.0);
                    o.next_cog[static_cast<std::size_t>(grid.optimal_index())] = 1.0;
                } else {
                    o.next_cog = dist;
                }
                outs.push_back(std::move(o));
            }
            model.max_tau_ = std::max(model.max_tau_, pmf->max_support());
            model.sojourns_[model.slot(cog, a)] = std::move(pmf);
            model.outcomes_[model.slot(cog, a)] = std::move(outs);
        }
    }

    model.arrivals_.resize(static_cast<std::size_t>(model.max_tau_) + 1);
    for (int tau = 0; tau <= model.max_tau_; ++tau)
        model.arrivals_[static_cast<std::size_t>(tau)] = poisson_pmf(params.arrival_rate * tau);

    model.violations_ = check_moment_ordering(model);
    return model;
}

bool SmdpModel::has_sojourn(int cog, Action a) const {
    return cog >= 0 && cog < cog_count() && sojourns_[slot(cog, a)].has_value();
}

const SojournPmf& SmdpModel::sojourn(int cog, Action a) const {
    if (!has_sojourn(cog, a))
        throw Error(ErrorCode::InvalidParams,
                    std::string("no sojourn distribution for action ") + to_char(a) +
                        " at cognitive index " + std::to_string(cog));
    return *sojourns_[slot(cog, a)];
}

const std::vector<SojournOutcome>& SmdpModel::outcomes(int cog, Action a) const {
    sojourn(cog, a);
    return outcomes_[slot(cog, a)];
}

const std::vector<double>& SmdpModel::arrivals(int tau) const {
    if (tau < 0 || tau > max_tau_) throw Error(ErrorCode::InvalidParams, "tau out of range");
    return arrivals_[static_cast<std::size_t>(tau)];
}

double SmdpModel::immediate_reward(const State& s, Action a) const {
    const SojournPmf& pmf = sojourn(s.cog, a);
    const double c = params_.holding_cost;
    return params_.reward(a) - c * pmf.mean() * s.q -
           0.5 * c * params_.arrival_rate * pmf.second_moment();
}

std::vector<KernelEntry> SmdpModel::transitions(const State& s, Action a) const {
    const auto allowed = admissible(s);
    if (std::find(allowed.begin(), allowed.end(), a) == allowed.end())
        throw Error(ErrorCode::InvalidParams, std::string("action ") + to_char(a) +
                                                  " is not admissible in this state");
    std::vector<KernelEntry> out;
    const int base = s.q - queue_decrement(a);
    for (const SojournOutcome& o : outcomes(s.cog, a)) {
        KernelEntry e;
        e.tau = o.tau;
        e.prob = o.prob;
        e.next_cog = o.next_cog;
        e.next_queue = clamp_arrivals(base, arrivals(o.tau), capacity());
        out.push_back(std::move(e));
    }
    return out;
}

double SmdpModel::contraction_factor() const {
    double beta = 0.0;
    for (int cog = 0; cog < cog_count(); ++cog)
        for (Action a : kAllActions)
            if (has_sojourn(cog, a)) beta = std::max(beta, sojourn(cog, a).discount());
    return beta;
}

std::vector<std::string> SmdpModel::warnings() const {
    std::vector<std::string> out;
    if (!params_.skip_wait().skip_stable()) {
        std::ostringstream os;
        os << "skip time " << params_.skip_time << " is not below 1/lambda = "
           << 1.0 / params_.arrival_rate << "; skipping does not drain the queue";
        out.push_back(os.str());
    }
    for (const auto& v : violations_) {
        std::ostringstream os;
        os << "sojourn ordering violated at cog index " << v.cog << ": moment " << v.moment
           << " of " << to_char(v.lower) << " is not below " << to_char(v.upper);
        out.push_back(os.str());
    }
    return out;
}

std::vector<OrderingViolation> check_moment_ordering(const SmdpModel& model) {
    std::vector<OrderingViolation> out;
    for (int cog = 0; cog < model.cog_count(); ++cog) {
        std::vector<Action> chain{Action::S};
        if (model.has_sojourn(cog, Action::R)) chain.push_back(Action::R);
        chain.push_back(Action::N);
        chain.push_back(Action::H);
        for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
            const SojournPmf& lo = model.sojourn(cog, chain[i]);
            const SojournPmf& hi = model.sojourn(cog, chain[i + 1]);
            if (!(lo.mean() < hi.mean())) out.push_back({cog, 1, chain[i], chain[i + 1]});
            if (!(lo.second_moment() < hi.second_moment()))
                out.push_back({cog, 2, chain[i], chain[i + 1]});
        }
    }
    return out;
}

} // namespace fidsel
