#include "fidsel/structure.hpp"

#include "fidsel/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace fidsel {

double gamma_mgf_bound(double mean, double variance, double gamma) {
    if (!(mean > 0.0) || variance < 0.0)
        throw Error(ErrorCode::InvalidParams, "bound needs mean > 0 and variance >= 0");
    if (!(gamma > 0.0 && gamma < 1.0))
        throw Error(ErrorCode::InvalidParams, "discount factor must lie in (0,1)");
    if (variance == 0.0) return std::pow(gamma, mean);
    const double shape = mean * mean / variance;
    return std::exp(-shape * std::log1p(-variance * std::log(gamma) / mean));
}

RhoReport compute_rho(const SmdpModel& model) {
    const double gamma = model.params().gamma;
    RhoReport report;
    report.light_tail_everywhere = true;
    report.jensen_everywhere = true;
    for (int cog = 0; cog < model.cog_count(); ++cog) {
        for (Action a : kAllActions) {
            if (!model.has_sojourn(cog, a)) continue;
            const SojournPmf& pmf = model.sojourn(cog, a);
            RhoEntry e;
            e.cog = cog;
            e.action = a;
            e.mean = pmf.mean();
            e.variance = pmf.variance();
            e.bound = gamma_mgf_bound(e.mean, e.variance, gamma);
            e.discount = pmf.discount();
            // relative slack for the point-mass case where both sides coincide
            const double slack = 1e-12 * std::max(1.0, e.bound);
            e.light_tail = e.discount <= e.bound + slack;
            e.jensen = std::pow(gamma, e.mean) <= e.discount + slack;
            e.in_rho = a != Action::W;
            if (e.in_rho) report.rho = std::max(report.rho, e.bound);
            report.light_tail_everywhere = report.light_tail_everywhere && e.light_tail;
            report.jensen_everywhere = report.jensen_everywhere && e.jensen;
            report.entries.push_back(e);
        }
    }
    if (report.rho >= 1.0)
        throw Error(ErrorCode::RhoGeOne, "rho = " + std::to_string(report.rho) + " is not below 1");
    return report;
}

SojournScale max_sojourn(const SmdpModel& model) {
    SojournScale s;
    s.assumed = model.sojourn(model.cog_count() - 1, Action::H).mean();
    for (int cog = 0; cog < model.cog_count(); ++cog)
        for (Action a : {Action::S, Action::R, Action::N, Action::H})
            if (model.has_sojourn(cog, a)) s.actual = std::max(s.actual, model.sojourn(cog, a).mean());
    s.substituted = s.actual > s.assumed;
    s.t_max = std::max(s.assumed, s.actual);
    return s;
}

bool is_unimodal_at(std::span<const double> values, int peak, double tolerance) {
    const int n = static_cast<int>(values.size());
    for (int i = 1; i <= peak && i < n; ++i) {
        const double tol = tolerance * std::max(1.0, std::abs(values[i]));
        if (values[i] < values[i - 1] - tol) return false;
    }
    for (int i = std::max(peak, 0) + 1; i < n; ++i) {
        const double tol = tolerance * std::max(1.0, std::abs(values[i]));
        if (values[i] > values[i - 1] + tol) return false;
    }
    return true;
}

RewardShapeReport check_reward_shape(const SmdpModel& model, double tolerance) {
    RewardShapeReport report;
    const int cog_star = model.grid().optimal_index();
    for (Action a : {Action::S, Action::R, Action::N, Action::H}) {
        for (int cog = 0; cog < model.cog_count(); ++cog) {
            if (!model.has_sojourn(cog, a)) continue;
            for (int q = 1; q < model.capacity(); ++q) {
                const double d = model.immediate_reward({q + 1, cog}, a) -
                                 2.0 * model.immediate_reward({q, cog}, a) +
                                 model.immediate_reward({q - 1, cog}, a);
                report.max_second_difference = std::max(report.max_second_difference, std::abs(d));
            }
        }
        for (int q = 0; q <= model.capacity(); ++q) {
            std::vector<double> values;
            int first = -1;
            for (int cog = 0; cog < model.cog_count(); ++cog) {
                if (!model.has_sojourn(cog, a)) continue;
                if (first < 0) first = cog;
                values.push_back(model.immediate_reward({q, cog}, a));
            }
            // on a restricted domain (rest) the peak sits at the level closest to the optimum
            const int peak = std::clamp(cog_star - first, 0, static_cast<int>(values.size()) - 1);
            if (!is_unimodal_at(values, peak, tolerance)) {
                std::ostringstream os;
                os << "reward of " << to_char(a) << " at q=" << q
                   << " is not unimodal with its peak at the optimal level";
                report.failures.push_back(os.str());
            }
        }
    }
    report.affine = report.max_second_difference <= tolerance;
    report.unimodal = report.failures.empty();
    return report;
}

int queue_scan_limit(int capacity, double buffer_fraction) {
    if (buffer_fraction < 0.0 || buffer_fraction >= 1.0)
        throw Error(ErrorCode::InvalidParams, "boundary buffer must lie in [0,1)");
    const int excluded = static_cast<int>(std::ceil(buffer_fraction * capacity - 1e-9));
    return std::max(1, capacity - excluded);
}

ValueBoundReport check_value_bounds(const SmdpModel& model, std::span<const double> value, double rho,
                                 const AssumptionStatus& assumptions, double buffer_fraction,
                                 double tolerance) {
    const ModelParams& p = model.params();
    const double t_max = max_sojourn(model).t_max;
    ValueBoundReport report;
    report.lower_slope = p.holding_cost * p.skip_time / (1.0 - std::pow(p.gamma, t_max));
    report.upper_slope = p.holding_cost * t_max / (1.0 - rho);
    report.q_limit = queue_scan_limit(model.capacity(), buffer_fraction);
    report.assumption_violated = !assumptions.all();
    report.pass = true;
    for (int cog = 0; cog < model.cog_count(); ++cog) {
        ValueBoundRow row;
        row.cog = cog;
        row.lower_margin = std::numeric_limits<double>::infinity();
        row.upper_margin = std::numeric_limits<double>::infinity();
        for (int q0 = 1; q0 <= report.q_limit; ++q0) {
            for (int q1 = q0 + 1; q1 <= report.q_limit; ++q1) {
                const double diff = value[static_cast<std::size_t>(model.state_index({q0, cog}))] -
                                    value[static_cast<std::size_t>(model.state_index({q1, cog}))];
                const int dq = q1 - q0;
                row.lower_margin = std::min(row.lower_margin, diff - report.lower_slope * dq);
                row.upper_margin = std::min(row.upper_margin, report.upper_slope * dq - diff);
                ++row.pairs;
            }
        }
        row.pass = row.pairs == 0 || (row.lower_margin >= -tolerance && row.upper_margin >= -tolerance);
        report.pass = report.pass && row.pass;
        report.rows.push_back(row);
    }
    return report;
}

std::vector<DominanceRow> check_dominance_conditions(const SmdpModel& model, double rho) {
    const ModelParams& p = model.params();
    const double gamma = p.gamma;
    const double ts = p.skip_time;
    const double t_max = max_sojourn(model).t_max;
    const double scale = t_max / (1.0 - rho);
    const double skip_discount = std::pow(gamma, ts);
    const double tail = 1.0 - std::pow(gamma, t_max);

    std::vector<DominanceRow> rows;
    for (int cog = 0; cog < model.cog_count(); ++cog) {
        DominanceRow r;
        r.cog = cog;
        r.above_optimal = cog > model.grid().optimal_index();
        const SojournPmf& high = model.sojourn(cog, Action::H);
        const SojournPmf& normal = model.sojourn(cog, Action::N);
        const double eh = high.mean();
        const double en = normal.mean();
        r.skip_bonus = ts * std::pow(gamma, eh) / tail;
        r.high_to_normal = eh - en + r.skip_bonus - scale * normal.discount();
        r.max_discount = std::max({skip_discount, normal.discount(), high.discount()});
        double gap = eh - en;
        if (r.above_optimal) {
            const SojournPmf& rest = model.sojourn(cog, Action::R);
            const double er = rest.mean();
            r.normal_to_rest = en - er + r.skip_bonus - scale * rest.discount();
            r.to_skip = er - ts + r.skip_bonus - skip_discount * scale;
            r.max_discount = std::max(r.max_discount, rest.discount());
            gap = std::min({gap, en - er, er - ts});
        } else {
            r.to_skip = en - ts + r.skip_bonus - skip_discount * scale;
            r.skip_over_high = eh - ts + ts * std::pow(gamma, eh) / tail - skip_discount * scale;
            r.skip_over_normal = en - ts + ts * std::pow(gamma, en) / tail - skip_discount * scale;
            gap = std::min(gap, en - ts);
        }
        r.combined = gap + r.skip_bonus - scale * r.max_discount;
        rows.push_back(r);
    }
    return rows;
}

namespace {

int pattern_rank(Action a, bool above_optimal) {
    switch (a) {
    case Action::H: return 0;
    case Action::N: return 1;
    case Action::R: return above_optimal ? 2 : -1;
    case Action::S: return above_optimal ? 3 : 2;
    case Action::W: return -1;
    }
    return -1;
}

} // namespace

ThresholdRow extract_thresholds(std::span<const Action> row, bool above_optimal) {
    ThresholdRow out;
    const int blocks = above_optimal ? 3 : 2;
    auto prefix = [&](int j) -> std::optional<int> {
        int count = 0;
        for (Action a : row) {
            const int r = pattern_rank(a, above_optimal);
            if (r < 0 || r >= j) return count;
            ++count;
        }
        return std::nullopt;
    };
    out.q1 = prefix(1);
    out.q2 = prefix(2);
    if (blocks == 3) out.q3 = prefix(3);

    std::vector<bool> closed(kActionCount, false);
    for (std::size_t i = 0; i < row.size(); ++i) {
        const Action a = row[i];
        const int q = static_cast<int>(i) + 1;
        if (pattern_rank(a, above_optimal) < 0) {
            std::ostringstream os;
            os << to_char(a) << " is not part of the pattern at q=" << q;
            out.violations.push_back(os.str());
            continue;
        }
        if (i == 0 || a == row[i - 1]) continue;
        const Action prev = row[i - 1];
        closed[static_cast<std::size_t>(index_of(prev))] = true;
        std::ostringstream os;
        if (closed[static_cast<std::size_t>(index_of(a))]) {
            os << to_char(a) << " reappears at q=" << q;
            out.violations.push_back(os.str());
        } else if (pattern_rank(prev, above_optimal) >= 0 &&
                   pattern_rank(a, above_optimal) < pattern_rank(prev, above_optimal)) {
            os << to_char(a) << " follows " << to_char(prev) << " at q=" << q << " (out of order)";
            out.violations.push_back(os.str());
        }
    }
    out.is_threshold = out.violations.empty();
    return out;
}

std::vector<Action> policy_row(const SmdpModel& model, std::span<const Action> policy, int cog,
                               int q_limit) {
    std::vector<Action> row;
    for (int q = 1; q <= std::min(q_limit, model.capacity()); ++q)
        row.push_back(policy[static_cast<std::size_t>(model.state_index({q, cog}))]);
    return row;
}

GuaranteeVerdict verify_threshold_guarantee(std::span<const DominanceRow> margins,
                                std::span<const ThresholdRow> thresholds,
                                const AssumptionStatus& assumptions) {
    if (margins.size() != thresholds.size())
        throw Error(ErrorCode::InvalidParams, "margins and thresholds cover different levels");
    GuaranteeVerdict verdict;
    for (std::size_t i = 0; i < margins.size(); ++i) {
        GuaranteeRow row;
        row.cog = margins[i].cog;
        row.is_threshold = thresholds[i].is_threshold;
        const bool condition = margins[i].combined >= 0.0;
        row.guaranteed = condition && assumptions.all();
        if (row.guaranteed) {
            row.status = row.is_threshold ? "guaranteed-threshold" : "violation";
            verdict.violated = verdict.violated || !row.is_threshold;
        } else {
            row.status = condition ? "assumption-violated" : "no-guarantee";
        }
        verdict.rows.push_back(row);
    }
    return verdict;
}

ValueShapeReport check_value_shape(const SmdpModel& model, std::span<const double> value, int q_limit,
                                   double tolerance) {
    ValueShapeReport report;
    auto v = [&](int q, int cog) { return value[static_cast<std::size_t>(model.state_index({q, cog}))]; };
    const int top = std::min(q_limit, model.capacity());
    for (int cog = 0; cog < model.cog_count(); ++cog)
        for (int q = 1; q < top; ++q)
            if (!(v(q, cog) > v(q + 1, cog))) {
                std::ostringstream os;
                os << "V does not decrease from q=" << q << " to q=" << q + 1 << " at cog=" << cog;
                report.failures.push_back(os.str());
            }
    const std::size_t monotone_failures = report.failures.size();
    for (int q = 1; q <= top; ++q) {
        std::vector<double> row;
        for (int cog = 0; cog < model.cog_count(); ++cog) row.push_back(v(q, cog));
        if (!is_unimodal_at(row, model.grid().optimal_index(), tolerance)) {
            std::ostringstream os;
            os << "V is not unimodal in cog with its peak at the optimum for q=" << q;
            report.failures.push_back(os.str());
        }
    }
    report.decreasing_in_q = monotone_failures == 0;
    report.unimodal_in_cog = report.failures.size() == monotone_failures;
    return report;
}

StructureReport analyze_structure(const SmdpModel& model, const ValuePolicyTable& solution,
                                  double empty_fraction, double empty_threshold,
                                  double buffer_fraction) {
    StructureReport r;
    r.rho = compute_rho(model);
    r.scale = max_sojourn(model);
    r.ordering = model.ordering_violations();
    r.assumptions.empty_fraction = empty_fraction;
    r.assumptions.busy_queue = empty_fraction < empty_threshold;
    r.assumptions.moment_order = r.ordering.empty();
    r.assumptions.light_tail = r.rho.light_tail_everywhere && r.rho.rho < 1.0;
    r.skip_stable = model.params().skip_wait().skip_stable();
    r.reward_shape = check_reward_shape(model);
    r.value_bounds = check_value_bounds(model, solution.value, r.rho.rho, r.assumptions, buffer_fraction);
    r.dominance = check_dominance_conditions(model, r.rho.rho);
    r.q_limit = queue_scan_limit(model.capacity(), buffer_fraction);
    for (int cog = 0; cog < model.cog_count(); ++cog) {
        const auto row = policy_row(model, solution.policy, cog, r.q_limit);
        ThresholdRow t = extract_thresholds(row, cog > model.grid().optimal_index());
        t.cog = cog;
        r.thresholds.push_back(std::move(t));
    }
    r.guarantee = verify_threshold_guarantee(r.dominance, r.thresholds, r.assumptions);
    r.value_shape = check_value_shape(model, solution.value, r.q_limit);
    return r;
}

} // namespace fidsel
