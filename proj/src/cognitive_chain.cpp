#include "fidsel/cognitive_chain.hpp"

#include "fidsel/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace fidsel {

namespace {

std::string action_name(Action a) { return std::string(1, to_char(a)); }

} // namespace

CogGrid::CogGrid(int intervals, int optimal_index)
    : intervals_(intervals), optimal_index_(optimal_index) {
    if (intervals < 2)
        throw Error(ErrorCode::InvalidGrid, "cognitive grid needs at least 2 intervals");
    if (optimal_index <= 0 || optimal_index >= intervals)
        throw Error(ErrorCode::InvalidGrid, "optimal cognitive level must be interior");
}

CogGrid CogGrid::with_optimal_level(int intervals, double optimal_level) {
    if (intervals < 2)
        throw Error(ErrorCode::InvalidGrid, "cognitive grid needs at least 2 intervals");
    const double scaled = optimal_level * intervals;
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > 1e-9)
        throw Error(ErrorCode::InvalidGrid, "optimal level " + std::to_string(optimal_level) +
                                                " is not on the grid of " +
                                                std::to_string(intervals) + " intervals");
    return CogGrid(intervals, static_cast<int>(rounded));
}

ChainRates ChainRates::defaults() {
    ChainRates r;
    r[Action::W] = {0.02, 0.5};
    r[Action::R] = {0.02, 0.5};
    r[Action::N] = {0.6, 0.02};
    r[Action::H] = {0.9, 0.02};
    r[Action::S] = {0.0, 0.0};
    return r;
}

void ChainRates::validate() const {
    for (Action a : kAllActions) {
        const StepRates& r = (*this)[a];
        if (r.forward < 0.0 || r.backward < 0.0)
            throw Error(ErrorCode::InvalidRates, "negative rate for action " + action_name(a));
        if (r.forward + r.backward > 1.0 + 1e-15)
            throw Error(ErrorCode::InvalidRates,
                        "forward + backward exceeds 1 for action " + action_name(a));
    }
    const StepRates& s = (*this)[Action::S];
    if (s.forward != 0.0 || s.backward != 0.0)
        throw Error(ErrorCode::InvalidRates, "skip must leave the cognitive state unchanged");
    for (Action a : {Action::W, Action::R}) {
        if (!((*this)[a].backward > (*this)[a].forward))
            throw Error(ErrorCode::InvalidRates,
                        "idle action " + action_name(a) + " must drift downwards");
    }
    for (Action a : {Action::N, Action::H}) {
        if (!((*this)[a].forward > (*this)[a].backward))
            throw Error(ErrorCode::InvalidRates,
                        "service action " + action_name(a) + " must drift upwards");
    }
    if (!((*this)[Action::H].forward > (*this)[Action::N].forward))
        throw Error(ErrorCode::InvalidRates, "H must raise the cognitive state faster than N");
}

StepMatrix::StepMatrix(Action action, int size)
    : action_(action), size_(size), data_(static_cast<std::size_t>(size) * size, 0.0) {}

StepMatrix build_step_matrix(const CogGrid& grid, const ChainRates& rates, Action action) {
    const StepRates r = rates[action];
    if (r.forward < 0.0 || r.backward < 0.0 || r.forward + r.backward > 1.0 + 1e-15)
        throw Error(ErrorCode::InvalidRates, "invalid rates for action " + action_name(action));

    const int n = grid.size();
    StepMatrix m(action, n);
    for (int i = 0; i < n; ++i) {
        // reflective boundaries: no backward move at 0, no forward move at the top
        const double fwd = (i + 1 < n) ? r.forward : 0.0;
        const double bwd = (i > 0) ? r.backward : 0.0;
        if (i > 0) m(i, i - 1) = bwd;
        if (i + 1 < n) m(i, i + 1) = fwd;
        m(i, i) = 1.0 - fwd - bwd;
    }
    return m;
}

std::vector<double> step_distribution(const StepMatrix& step, std::span<const double> dist) {
    const int n = step.size();
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const double p = dist[static_cast<std::size_t>(i)];
        if (p == 0.0) continue;
        const int lo = i > 0 ? i - 1 : 0;
        const int hi = i + 1 < n ? i + 1 : n - 1;
        for (int j = lo; j <= hi; ++j) out[static_cast<std::size_t>(j)] += p * step(i, j);
    }
    return out;
}

std::vector<double> evolve(const StepMatrix& step, int cog_index, int tau) {
    if (tau < 1) throw Error(ErrorCode::InvalidParams, "evolve requires tau >= 1");
    if (cog_index < 0 || cog_index >= step.size())
        throw Error(ErrorCode::InvalidParams, "cognitive index out of range");
    std::vector<double> dist(static_cast<std::size_t>(step.size()), 0.0);
    dist[static_cast<std::size_t>(cog_index)] = 1.0;
    for (int t = 0; t < tau; ++t) dist = step_distribution(step, dist);
    return dist;
}

FptResult fpt_pmf(const StepMatrix& step, int cog_index, int cog_star, int t_cap) {
    if (cog_index <= cog_star)
        throw Error(ErrorCode::InadmissibleRest, "first passage requires a start above the target");
    if (t_cap < 1) throw Error(ErrorCode::InvalidParams, "t_cap must be positive");

    // Transient block: states cog_star+1 .. top, stored at offset 0 .. m-1.
    const int top = step.size() - 1;
    const int m = top - cog_star;
    std::vector<double> v(static_cast<std::size_t>(m), 0.0);
    v[static_cast<std::size_t>(cog_index - cog_star - 1)] = 1.0;
    // Only the lowest transient state absorbs in one step.
    const double absorb = step(cog_star + 1, cog_star);

    FptResult out;
    out.pmf.resize(static_cast<std::size_t>(t_cap));
    double total = 0.0;
    std::vector<double> next(static_cast<std::size_t>(m));
    for (int k = 1; k <= t_cap; ++k) {
        const double f = v[0] * absorb;
        out.pmf[static_cast<std::size_t>(k - 1)] = f;
        total += f;
        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < m; ++i) {
            const double p = v[static_cast<std::size_t>(i)];
            if (p == 0.0) continue;
            const int s = cog_star + 1 + i;
            if (i > 0) next[static_cast<std::size_t>(i - 1)] += p * step(s, s - 1);
            next[static_cast<std::size_t>(i)] += p * step(s, s);
            if (i + 1 < m) next[static_cast<std::size_t>(i + 1)] += p * step(s, s + 1);
        }
        v.swap(next);
    }

    out.tail_mass = 1.0 - total;
    if (out.tail_mass > kTruncationTolerance)
        throw Error(ErrorCode::TailMassTooLarge,
                    "first-passage mass beyond t_cap=" + std::to_string(t_cap) + " is " +
                        std::to_string(out.tail_mass));
    for (double& f : out.pmf) f /= total;
    return out;
}

double fpt_mean(const StepMatrix& step, int cog_index, int cog_star) {
    if (cog_index <= cog_star)
        throw Error(ErrorCode::InadmissibleRest, "first passage requires a start above the target");
    const int top = step.size() - 1;
    const int m = top - cog_star;
    // (I - Q) x = 1 on the tridiagonal transient block; Thomas algorithm.
    std::vector<double> sub(m), diag(m), sup(m), rhs(m, 1.0);
    for (int i = 0; i < m; ++i) {
        const int s = cog_star + 1 + i;
        sub[i] = i > 0 ? -step(s, s - 1) : 0.0;
        diag[i] = 1.0 - step(s, s);
        sup[i] = i + 1 < m ? -step(s, s + 1) : 0.0;
    }
    for (int i = 1; i < m; ++i) {
        const double w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    std::vector<double> x(m);
    x[m - 1] = rhs[m - 1] / diag[m - 1];
    for (int i = m - 2; i >= 0; --i) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    return x[static_cast<std::size_t>(cog_index - cog_star - 1)];
}

} // namespace fidsel
