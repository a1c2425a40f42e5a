#include "fidsel/app.hpp"
#include "fidsel/config.hpp"
#include "fidsel/io.hpp"
#include "fidsel/structure.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <map>
#include <sstream>

using namespace fidsel;

namespace {

constexpr double kGamma = 0.96;

const SmdpModel& default_model() {
    static const SmdpModel m = SmdpModel::build(ModelParams{});
    return m;
}

std::vector<Action> row_of(const std::string& s) {
    std::vector<Action> out;
    for (char c : s) out.push_back(*action_from_char(c));
    return out;
}

struct MomentRow {
    double mean = 0.0, discount = 0.0, bound = 0.0;
};

// Parses moments.csv into (cog, action) -> row.
std::map<std::pair<int, char>, MomentRow> parse_moments(const std::string& csv) {
    std::map<std::pair<int, char>, MomentRow> out;
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line); // stamp
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        REQUIRE(f.size() == 9u);
        out[{std::stoi(f[0]), f[2][0]}] = {std::stod(f[3]), std::stod(f[6]), std::stod(f[7])};
    }
    return out;
}

} // namespace

TEST_SUITE("structure") {

TEST_CASE("gamma bound closed forms") {
    CHECK(gamma_mgf_bound(2.0, 0.0, kGamma) == doctest::Approx(std::pow(kGamma, 2)).epsilon(1e-15));
    CHECK(gamma_mgf_bound(2.0, 2.0, kGamma) ==
          doctest::Approx(std::pow(1.0 - std::log(kGamma), -2.0)).epsilon(1e-14));
    CHECK(std::abs(gamma_mgf_bound(3.0, 1e-8, kGamma) - std::pow(kGamma, 3.0)) <= 1e-9);
}

TEST_CASE("gamma bound is monotone and above the Jensen floor") {
    for (double e = 1.0; e <= 60.0; e += 1.7) {
        double previous_var = 0.0;
        for (double var : {0.0, 0.5, 3.0, 20.0, 150.0}) {
            const double f = gamma_mgf_bound(e, var, kGamma);
            CHECK(f >= std::pow(kGamma, e) * (1.0 - 1e-14));
            CHECK(f < 1.0);
            CHECK(f >= previous_var);
            previous_var = f;
            CHECK(gamma_mgf_bound(e + 1.0, var, kGamma) < f);
        }
    }
}

TEST_CASE("rho table on the default configuration") {
    const SmdpModel& m = default_model();
    const RhoReport r = compute_rho(m);
    const double skip = std::pow(kGamma, m.params().skip_time);
    CHECK(r.rho >= skip);
    CHECK(r.rho < 1.0);
    CHECK(r.jensen_everywhere);
    double largest = 0.0;
    for (const RhoEntry& e : r.entries) {
        CHECK(e.discount >= std::pow(kGamma, e.mean) * (1.0 - 1e-14));
        CHECK(e.in_rho == (e.action != Action::W));
        if (e.in_rho) largest = std::max(largest, e.bound);
        if (e.action == Action::S) {
            CHECK(e.bound == doctest::Approx(skip).epsilon(1e-15));
            CHECK(e.discount == doctest::Approx(skip).epsilon(1e-15));
            CHECK(e.light_tail);
        }
        CHECK(e.discount == doctest::Approx(m.sojourn(e.cog, e.action).discount()).epsilon(1e-15));
    }
    CHECK(r.rho == largest);
}

TEST_CASE("large-gap configuration satisfies the light-tail bound everywhere") {
    const SmdpModel m = SmdpModel::build(load_config(oracle::config_path("large_gap.json")).model);
    const RhoReport r = compute_rho(m);
    CHECK(r.light_tail_everywhere);
    for (const RhoEntry& e : r.entries) CHECK(e.discount <= e.bound * (1.0 + 1e-12));
}

TEST_CASE("dominance margins match a recomputation from the exported moment table") {
    const SmdpModel& m = default_model();
    const auto table = parse_moments(moments_csv(m, {"0", 1}));
    const int star = m.grid().optimal_index();
    const int top = m.cog_count() - 1;
    const double ts = m.params().skip_time;

    double rho = 0.0, t_max = table.at({top, 'H'}).mean;
    for (const auto& [key, row] : table) {
        if (key.second == 'W') continue;
        rho = std::max(rho, row.bound);
        t_max = std::max(t_max, row.mean);
    }
    const double scale = t_max / (1.0 - rho);
    const double tail = 1.0 - std::pow(kGamma, t_max);
    const auto rows = check_dominance_conditions(m, compute_rho(m).rho);
    REQUIRE(rows.size() == static_cast<std::size_t>(m.cog_count()));
    for (const DominanceRow& r : rows) {
        const MomentRow& h = table.at({r.cog, 'H'});
        const MomentRow& n = table.at({r.cog, 'N'});
        const double bonus = ts * std::pow(kGamma, h.mean) / tail;
        CHECK(r.skip_bonus == doctest::Approx(bonus).epsilon(1e-12));
        CHECK(r.high_to_normal == doctest::Approx(h.mean - n.mean + bonus - scale * n.discount).epsilon(1e-12));
        double gap = h.mean - n.mean;
        double disc = std::max({std::pow(kGamma, ts), n.discount, h.discount});
        if (r.cog > star) {
            const MomentRow& rest = table.at({r.cog, 'R'});
            REQUIRE(r.normal_to_rest.has_value());
            CHECK(*r.normal_to_rest ==
                  doctest::Approx(n.mean - rest.mean + bonus - scale * rest.discount).epsilon(1e-12));
            CHECK(r.to_skip ==
                  doctest::Approx(rest.mean - ts + bonus - std::pow(kGamma, ts) * scale).epsilon(1e-12));
            gap = std::min({gap, n.mean - rest.mean, rest.mean - ts});
            disc = std::max(disc, rest.discount);
        } else {
            CHECK_FALSE(r.normal_to_rest.has_value());
            CHECK(r.to_skip ==
                  doctest::Approx(n.mean - ts + bonus - std::pow(kGamma, ts) * scale).epsilon(1e-12));
            gap = std::min(gap, n.mean - ts);
        }
        CHECK(r.combined == doctest::Approx(gap + bonus - scale * disc).epsilon(1e-12));
    }
}

TEST_CASE("equal service means leave only the skip bonus in the high-to-normal margin") {
    ModelParams p;
    p.service.high = p.service.normal;
    p.service.high.base_mean += 0.01; // validation requires high fidelity to be slower
    const SmdpModel m = SmdpModel::build(p);
    const double rho = compute_rho(m).rho;
    for (const DominanceRow& r : check_dominance_conditions(m, rho)) {
        const double en = m.sojourn(r.cog, Action::N).mean();
        const double eh = m.sojourn(r.cog, Action::H).mean();
        CHECK(std::abs(eh - en) < 0.05);
        CHECK(r.high_to_normal < 0.0);
    }
}

TEST_CASE("threshold extraction on pattern rows") {
    SUBCASE("complete pattern above the optimum") {
        const ThresholdRow t = extract_thresholds(row_of("HHNNRSS"), true);
        CHECK(t.is_threshold);
        CHECK(t.q1 == 2);
        CHECK(t.q2 == 4);
        CHECK(t.q3 == 5);
    }
    SUBCASE("skip between high and normal") {
        const ThresholdRow t = extract_thresholds(row_of("HSNNS"), false);
        CHECK_FALSE(t.is_threshold);
        bool reappears = false;
        for (const std::string& v : t.violations) reappears = reappears || v.find("S reappears") != std::string::npos;
        CHECK(reappears);
    }
    SUBCASE("all skip") {
        for (bool above : {false, true}) {
            const ThresholdRow t = extract_thresholds(row_of("SSSS"), above);
            CHECK(t.is_threshold);
            CHECK(t.q1 == 0);
            CHECK(t.q2 == 0);
            if (above) CHECK(t.q3 == 0);
        }
    }
    SUBCASE("rest below the optimum is not part of the pattern") {
        CHECK_FALSE(extract_thresholds(row_of("HRS"), false).is_threshold);
    }
    SUBCASE("blocks out of order") {
        CHECK_FALSE(extract_thresholds(row_of("NNHS"), false).is_threshold);
        CHECK_FALSE(extract_thresholds(row_of("HSRS"), true).is_threshold);
    }
    SUBCASE("a block that never ends lies beyond the scan") {
        const ThresholdRow t = extract_thresholds(row_of("HHNN"), false);
        CHECK(t.is_threshold);
        CHECK(t.q1 == 2);
        CHECK_FALSE(t.q2.has_value());
    }
}

TEST_CASE("guarantee verdicts") {
    std::vector<DominanceRow> margins(3);
    std::vector<ThresholdRow> rows(3);
    for (int i = 0; i < 3; ++i) margins[i].cog = rows[i].cog = i;
    margins[0].combined = 0.5;
    rows[0].is_threshold = true;
    margins[1].combined = -0.5;
    rows[1].is_threshold = false;
    margins[2].combined = 0.0;
    rows[2].is_threshold = false;

    AssumptionStatus ok;
    GuaranteeVerdict v = verify_threshold_guarantee(margins, rows, ok);
    CHECK(v.violated);
    CHECK(v.rows[0].status == "guaranteed-threshold");
    CHECK(v.rows[1].status == "no-guarantee");
    CHECK(v.rows[2].status == "violation");

    AssumptionStatus failed;
    failed.light_tail = false;
    v = verify_threshold_guarantee(margins, rows, failed);
    CHECK_FALSE(v.violated);
    CHECK(v.rows[2].status == "assumption-violated");

    CHECK_FALSE(verify_threshold_guarantee({}, {}, ok).violated);
}

TEST_CASE("value-bound gating on a quiet queue") {
    const SmdpModel& m = default_model();
    const auto t = value_iteration(m);
    AssumptionStatus quiet;
    quiet.busy_queue = false;
    quiet.empty_fraction = 0.4;
    const ValueBoundReport r = check_value_bounds(m, t.value, compute_rho(m).rho, quiet);
    CHECK(r.assumption_violated);
    CHECK(r.q_limit == 24);
    CHECK(r.lower_slope > 0.0);
    CHECK(r.upper_slope > r.lower_slope);
}

TEST_CASE("value bounds hold on the busy configuration") {
    const RunConfig cfg = load_config(oracle::config_path("high_lambda.json"));
    const Solved s = solve(cfg);
    const StructureReport r = check(s.model, s.solution, cfg);
    CHECK(r.assumptions.busy_queue);
    CHECK(r.value_bounds.pass);
    for (const ValueBoundRow& row : r.value_bounds.rows) {
        CHECK(row.pairs > 0);
        CHECK(row.lower_margin >= -1e-9);
        CHECK(row.upper_margin >= -1e-9);
    }
}

TEST_CASE("reward shape on the default configuration") {
    const RewardShapeReport r = check_reward_shape(default_model());
    CHECK(r.affine);
    CHECK(r.unimodal);
    CHECK(r.max_second_difference <= 1e-12);
    CHECK(r.failures.empty());
}

TEST_CASE("value shape on synthetic tables") {
    const SmdpModel& m = default_model();
    const int star = m.grid().optimal_index();
    std::vector<double> v(m.state_count());
    for (int i = 0; i < m.state_count(); ++i) {
        const State s = m.state_at(i);
        v[i] = -2.0 * s.q - std::abs(s.cog - star);
    }
    ValueShapeReport r = check_value_shape(m, v, 24);
    CHECK(r.decreasing_in_q);
    CHECK(r.unimodal_in_cog);

    v[m.state_index({5, 2})] = v[m.state_index({4, 2})];
    v[m.state_index({7, 0})] = v[m.state_index({7, 1})] + 1.0;
    r = check_value_shape(m, v, 24);
    CHECK_FALSE(r.decreasing_in_q);
    CHECK_FALSE(r.unimodal_in_cog);
    CHECK(r.failures.size() >= 2u);
}

TEST_CASE("peak unimodality helper") {
    const std::vector<double> up_down{1, 2, 3, 2, 1};
    CHECK(is_unimodal_at(up_down, 2, 0.0));
    CHECK_FALSE(is_unimodal_at(up_down, 1, 0.0));
    const std::vector<double> dip{1, 0, 3, 2, 1};
    CHECK_FALSE(is_unimodal_at(dip, 2, 0.0));
}

TEST_CASE("queue scan limit keeps a boundary buffer") {
    CHECK(queue_scan_limit(30, 0.2) == 24);
    CHECK(queue_scan_limit(10, 0.2) == 8);
    CHECK(queue_scan_limit(30, 0.0) == 30);
}

TEST_CASE("guarantee soundness on solved instances") {
    for (const char* name : {"default.json", "large_gap.json", "high_lambda.json", "tiny.json"}) {
        CAPTURE(name);
        const RunConfig cfg = load_config(oracle::config_path(name));
        const Solved s = solve(cfg);
        const StructureReport r = check(s.model, s.solution, cfg);
        CHECK_FALSE(r.guarantee.violated);
        for (std::size_t i = 0; i < r.dominance.size(); ++i)
            if (r.dominance[i].combined >= 0.0 && r.assumptions.all()) CHECK(r.thresholds[i].is_threshold);
    }
}

} // TEST_SUITE
