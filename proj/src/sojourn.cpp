#include "fidsel/sojourn.hpp"

#include "fidsel/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fidsel {

SojournPmf::SojournPmf(std::vector<double> probs, double gamma)
    : probs_(std::move(probs)), gamma_(gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw Error(ErrorCode::InvalidParams, "discount factor must lie in (0,1)");
    while (!probs_.empty() && probs_.back() == 0.0) probs_.pop_back();
    if (probs_.empty()) throw Error(ErrorCode::InvalidParams, "empty sojourn distribution");
    double total = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0)) throw Error(ErrorCode::InvalidParams, "negative sojourn probability");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-6)
        throw Error(ErrorCode::InvalidParams,
                    "sojourn probabilities sum to " + std::to_string(total));
    for (double& p : probs_) p /= total;

    min_support_ = 1;
    while (probs_[static_cast<std::size_t>(min_support_ - 1)] == 0.0) ++min_support_;

    double g = 1.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        const double k = static_cast<double>(i + 1);
        g *= gamma;
        mean_ += probs_[i] * k;
        second_moment_ += probs_[i] * k * k;
        discount_ += probs_[i] * g;
    }
    double var = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        const double d = static_cast<double>(i + 1) - mean_;
        var += probs_[i] * d * d;
    }
    variance_ = var;
}

SojournPmf SojournPmf::point_mass(int tau, double gamma) {
    if (tau < 1) throw Error(ErrorCode::InvalidParams, "point mass needs tau >= 1");
    std::vector<double> p(static_cast<std::size_t>(tau), 0.0);
    p.back() = 1.0;
    return SojournPmf(std::move(p), gamma);
}

double discount_transform(const SojournPmf& pmf, double gamma) {
    if (!(gamma > 0.0 && gamma < 1.0))
        throw Error(ErrorCode::InvalidParams, "discount factor must lie in (0,1)");
    double g = 1.0;
    double out = 0.0;
    for (double p : pmf.probs()) {
        g *= gamma;
        out += p * g;
    }
    return out;
}

const ServiceShape& ServiceFamily::shape(Action a) const {
    if (a == Action::N) return normal;
    if (a == Action::H) return high;
    throw Error(ErrorCode::InvalidParams, "service family only covers N and H");
}

void ServiceFamily::validate() const {
    for (const ServiceShape* s : {&normal, &high}) {
        if (!(s->base_mean >= 1.0))
            throw Error(ErrorCode::InvalidParams, "service base mean must be at least 1");
        if (!(s->curvature >= 0.0))
            throw Error(ErrorCode::InvalidParams, "service curvature must be non-negative");
        if (!(s->concentration > 0.0))
            throw Error(ErrorCode::InvalidParams, "service concentration must be positive");
        if (s->support_cap < 2)
            throw Error(ErrorCode::InvalidParams, "service support cap must be at least 2");
    }
    if (!(high.base_mean > normal.base_mean))
        throw Error(ErrorCode::InvalidParams, "high-fidelity service must take longer than normal");
}

namespace {

// P(X = k) for X ~ BetaBinomial(n, a, b), evaluated in log space.
std::vector<double> beta_binomial(int n, double a, double b) {
    std::vector<double> out(static_cast<std::size_t>(n) + 1);
    const double log_beta_ab = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    for (int k = 0; k <= n; ++k) {
        const double log_choose =
            std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        const double log_beta = std::lgamma(k + a) + std::lgamma(n - k + b) - std::lgamma(n + a + b);
        out[static_cast<std::size_t>(k)] = std::exp(log_choose + log_beta - log_beta_ab);
    }
    return out;
}

} // namespace

SojournPmf service_pmf(const ServiceFamily& family, const CogGrid& grid, int cog_index,
                       Action action, double gamma) {
    const ServiceShape& shape = family.shape(action);
    const double target = shape.mean_at(grid.level(cog_index), grid.optimal_level());
    const int cap = shape.support_cap;
    if (target > cap - 1)
        throw Error(ErrorCode::SupportTooSmall,
                    "target service mean " + std::to_string(target) + " exceeds support cap " +
                        std::to_string(cap) + " - 1");

    const int n = cap - 1;
    const double p = (target - 1.0) / n;
    if (p <= 0.0) return SojournPmf::point_mass(1, gamma);

    const double a = p * shape.concentration;
    const double b = (1.0 - p) * shape.concentration;
    const std::vector<double> x = beta_binomial(n, a, b);
    // tau = 1 + X
    return SojournPmf(x, gamma);
}

SojournPmf rest_pmf(const StepMatrix& rest_chain, const CogGrid& grid, int cog_index,
                    double gamma, int t_cap, double cap_factor) {
    if (cog_index <= grid.optimal_index())
        throw Error(ErrorCode::InadmissibleRest,
                    "rest is only admissible above the optimal cognitive level");
    if (t_cap <= 0) {
        const double mean = fpt_mean(rest_chain, cog_index, grid.optimal_index());
        t_cap = static_cast<int>(std::ceil(cap_factor * mean));
    }
    FptResult fpt = fpt_pmf(rest_chain, cog_index, grid.optimal_index(), t_cap);
    return SojournPmf(std::move(fpt.pmf), gamma);
}

double SkipWaitSpec::wait_probability() const { return 1.0 - std::exp(-arrival_rate); }

void SkipWaitSpec::validate() const {
    if (skip_time < 1) throw Error(ErrorCode::InvalidParams, "skip time must be a positive integer");
    if (!(arrival_rate > 0.0)) throw Error(ErrorCode::InvalidParams, "arrival rate must be positive");
}

SojournPmf skip_pmf(const SkipWaitSpec& spec, double gamma) {
    spec.validate();
    return SojournPmf::point_mass(spec.skip_time, gamma);
}

SojournPmf wait_pmf(const SkipWaitSpec& spec, int support_cap, double gamma) {
    spec.validate();
    if (support_cap < 1) throw Error(ErrorCode::InvalidParams, "wait support cap must be positive");
    const double p = spec.wait_probability();
    std::vector<double> probs(static_cast<std::size_t>(support_cap));
    double survive = 1.0;
    for (auto& f : probs) {
        f = survive * p;
        survive *= 1.0 - p;
    }
    const double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    for (auto& f : probs) f /= total;
    return SojournPmf(std::move(probs), gamma);
}

int default_wait_cap(const SkipWaitSpec& spec) {
    spec.validate();
    const double q = 1.0 - spec.wait_probability();
    if (q <= 0.0) return 1;
    // (1-p)^T <= tol
    const double t = std::log(kTruncationTolerance) / std::log(q);
    return std::max(1, static_cast<int>(std::ceil(t)));
}

} // namespace fidsel
