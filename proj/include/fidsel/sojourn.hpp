#pragma once

#include "fidsel/action.hpp"
#include "fidsel/cognitive_chain.hpp"

#include <span>
#include <vector>

namespace fidsel {

/// Discrete sojourn-time distribution on {1, ..., T} with cached moments.
///
/// probs()[k-1] is P(tau = k). Trailing zero mass is trimmed on construction and the
/// weights are renormalised, so the cached values always describe a proper PMF. The
/// discount transform E[gamma^tau] is cached for the discount factor the model uses.
class SojournPmf {
  public:
    SojournPmf(std::vector<double> probs, double gamma);

    static SojournPmf point_mass(int tau, double gamma);

    std::span<const double> probs() const { return probs_; }
    double prob(int tau) const {
        return (tau >= 1 && tau <= max_support()) ? probs_[static_cast<std::size_t>(tau - 1)] : 0.0;
    }
    int max_support() const { return static_cast<int>(probs_.size()); }
    int min_support() const { return min_support_; }

    double mean() const { return mean_; }
    double second_moment() const { return second_moment_; }
    double variance() const { return variance_; }
    double gamma() const { return gamma_; }
    /// E[gamma^tau] for the cached gamma.
    double discount() const { return discount_; }

  private:
    std::vector<double> probs_;
    int min_support_ = 1;
    double gamma_;
    double mean_ = 0.0;
    double second_moment_ = 0.0;
    double variance_ = 0.0;
    double discount_ = 0.0;
};

/// Exact sum_k P(tau=k) gamma^k.
double discount_transform(const SojournPmf& pmf, double gamma);

/// Service time parameters for one fidelity level.
struct ServiceShape {
    /// Mean service time at the optimal cognitive level.
    double base_mean = 0.0;
    /// Added mean per squared deviation from the optimal level.
    double curvature = 0.0;
    /// Beta concentration alpha + beta; larger is less dispersed.
    double concentration = 0.0;
    int support_cap = 0;

    double mean_at(double level, double optimal_level) const {
        const double d = level - optimal_level;
        return base_mean + curvature * d * d;
    }
};

struct ServiceFamily {
    ServiceShape normal{8.0, 60.0, 20.0, 60};
    ServiceShape high{12.0, 70.0, 20.0, 80};

    const ServiceShape& shape(Action a) const;
    void validate() const;
};

/// Shifted beta-binomial service time 1 + BetaBinomial(T-1, alpha, beta) whose mean is the
/// quadratic profile base_mean + curvature * (cog - cog*)^2.
SojournPmf service_pmf(const ServiceFamily& family, const CogGrid& grid, int cog_index,
                       Action action, double gamma);

/// Rest time: first passage from cog_index down to the optimal level. A t_cap of 0 uses
/// ceil(cap_factor * untruncated mean).
SojournPmf rest_pmf(const StepMatrix& rest_chain, const CogGrid& grid, int cog_index,
                    double gamma, int t_cap = 0, double cap_factor = 50.0);

struct SkipWaitSpec {
    int skip_time = 1;
    double arrival_rate = 0.0;

    /// P(at least one arrival in one time unit).
    double wait_probability() const;
    /// Queue drains under repeated skipping when t_s < 1/lambda.
    bool skip_stable() const { return skip_time * arrival_rate < 1.0; }
    void validate() const;
};

SojournPmf skip_pmf(const SkipWaitSpec& spec, double gamma);

/// Geometric wait with p = 1 - exp(-lambda), truncated at T and renormalised.
SojournPmf wait_pmf(const SkipWaitSpec& spec, int support_cap, double gamma);

/// Smallest cap whose geometric tail beyond it is below the truncation tolerance.
int default_wait_cap(const SkipWaitSpec& spec);

} // namespace fidsel
