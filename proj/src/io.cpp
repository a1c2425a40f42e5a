#include "fidsel/io.hpp"

#include "fidsel/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fidsel {

namespace {

using ordered = nlohmann::ordered_json;

std::string header(const CsvStamp& stamp) {
    return "# config_hash=" + stamp.config_hash + ", seed=" + std::to_string(stamp.seed) + "\n";
}

std::string threshold_cell(const std::optional<int>& q, bool applicable) {
    if (!applicable) return "";
    return q ? std::to_string(*q) : "inf";
}

ordered optional_json(const std::optional<int>& q) {
    return q ? ordered(*q) : ordered("inf");
}

ordered optional_json(const std::optional<double>& x) {
    return x ? ordered(*x) : ordered(nullptr);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, sep)) out.push_back(cell);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

bool parse_int(const std::string& s, int& out) {
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && ptr == end;
}

// Five-stop perceptual ramp, dark to light.
std::string ramp(double t) {
    static constexpr std::array<std::array<double, 3>, 5> stops{{{68, 1, 84},
                                                                 {59, 82, 139},
                                                                 {33, 145, 140},
                                                                 {94, 201, 98},
                                                                 {253, 231, 37}}};
    t = std::clamp(t, 0.0, 1.0) * (stops.size() - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(t), stops.size() - 2);
    const double f = t - static_cast<double>(i);
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                  static_cast<int>(std::lround(stops[i][0] + f * (stops[i + 1][0] - stops[i][0]))),
                  static_cast<int>(std::lround(stops[i][1] + f * (stops[i + 1][1] - stops[i][1]))),
                  static_cast<int>(std::lround(stops[i][2] + f * (stops[i + 1][2] - stops[i][2]))));
    return buf;
}

const char* action_colour(Action a) {
    switch (a) {
    case Action::S: return "#9e9e9e";
    case Action::R: return "#43a047";
    case Action::N: return "#1e88e5";
    case Action::H: return "#e53935";
    case Action::W: return "#ffffff";
    }
    return "#000000";
}

constexpr int kCell = 18;
constexpr int kLeft = 56;
constexpr int kTop = 30;

// Shared frame: one cell per state, q to the right, cognitive level upwards.
template <class CellFill>
std::string heatmap(const SmdpModel& model, const std::string& title, CellFill fill,
                    const std::string& legend, int legend_height) {
    const int cols = model.capacity() + 1;
    const int rows = model.cog_count();
    const int width = kLeft + cols * kCell + 150;
    const int height = std::max(kTop + rows * kCell + 50, kTop + legend_height + 20);
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << kLeft << "\" y=\"18\" font-size=\"13\">" << title << "</text>\n";
    for (int cog = 0; cog < rows; ++cog) {
        const int y = kTop + (rows - 1 - cog) * kCell;
        for (int q = 0; q < cols; ++q) {
            os << "<rect x=\"" << kLeft + q * kCell << "\" y=\"" << y << "\" width=\"" << kCell
               << "\" height=\"" << kCell << "\" fill=\"" << fill(State{q, cog})
               << "\" stroke=\"#dddddd\" stroke-width=\"0.5\"/>\n";
        }
        os << "<text x=\"" << kLeft - 6 << "\" y=\"" << y + kCell - 5
           << "\" text-anchor=\"end\">" << format_real(model.grid().level(cog)) << "</text>\n";
    }
    for (int q = 0; q < cols; q += std::max(1, cols / 10))
        os << "<text x=\"" << kLeft + q * kCell + kCell / 2 << "\" y=\"" << kTop + rows * kCell + 14
           << "\" text-anchor=\"middle\">" << q << "</text>\n";
    os << "<text x=\"" << kLeft + cols * kCell / 2 << "\" y=\"" << kTop + rows * kCell + 32
       << "\" text-anchor=\"middle\">queue length q</text>\n";
    os << "<text x=\"14\" y=\"" << kTop + rows * kCell / 2 << "\" transform=\"rotate(-90 14 "
       << kTop + rows * kCell / 2 << ")\" text-anchor=\"middle\">cognitive state</text>\n";
    os << legend;
    os << "</svg>\n";
    return os.str();
}

} // namespace

std::string format_real(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::LoadError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::LoadError, "failed writing " + path.string());
}

std::string value_csv(const SmdpModel& model, const ValuePolicyTable& table, const CsvStamp& stamp) {
    std::ostringstream os;
    os << header(stamp) << "q,cog,V,action\n";
    for (int i = 0; i < model.state_count(); ++i) {
        const State s = model.state_at(i);
        os << s.q << ',' << s.cog << ',' << format_real(table.value[static_cast<std::size_t>(i)])
           << ',' << to_char(table.policy[static_cast<std::size_t>(i)]) << '\n';
    }
    return os.str();
}

std::string policy_csv(const SmdpModel& model, std::span<const Action> policy, const CsvStamp& stamp) {
    std::ostringstream os;
    os << header(stamp) << "q,cog,action\n";
    for (int i = 0; i < model.state_count(); ++i) {
        const State s = model.state_at(i);
        os << s.q << ',' << s.cog << ',' << to_char(policy[static_cast<std::size_t>(i)]) << '\n';
    }
    return os.str();
}

std::string thresholds_csv(const StructureReport& report, const CsvStamp& stamp) {
    std::ostringstream os;
    os << header(stamp) << "cog,q1,q2,q3,is_threshold,combined_margin,status\n";
    for (std::size_t i = 0; i < report.thresholds.size(); ++i) {
        const ThresholdRow& t = report.thresholds[i];
        const DominanceRow& d = report.dominance[i];
        os << t.cog << ',' << threshold_cell(t.q1, true) << ',' << threshold_cell(t.q2, true) << ','
           << threshold_cell(t.q3, d.above_optimal) << ',' << (t.is_threshold ? "true" : "false")
           << ',' << format_real(d.combined) << ',' << report.guarantee.rows[i].status << '\n';
    }
    return os.str();
}

std::string moments_csv(const SmdpModel& model, const CsvStamp& stamp) {
    std::ostringstream os;
    os << header(stamp)
       << "cog,level,action,mean,second_moment,variance,discount,gamma_bound,max_support\n";
    const double gamma = model.params().gamma;
    for (int cog = 0; cog < model.cog_count(); ++cog)
        for (Action a : kAllActions) {
            if (!model.has_sojourn(cog, a)) continue;
            const SojournPmf& p = model.sojourn(cog, a);
            os << cog << ',' << format_real(model.grid().level(cog)) << ',' << to_char(a) << ','
               << format_real(p.mean()) << ',' << format_real(p.second_moment()) << ','
               << format_real(p.variance()) << ',' << format_real(p.discount()) << ','
               << format_real(gamma_mgf_bound(p.mean(), p.variance(), gamma)) << ','
               << p.max_support() << '\n';
        }
    return os.str();
}

std::string trajectories_csv(const std::vector<Trajectory>& episodes, const SmdpModel& model,
                             const CsvStamp& stamp) {
    std::ostringstream os;
    os << header(stamp) << "episode,epoch,t,q,cog,action,tau,arrivals,reward\n";
    (void)model;
    for (std::size_t e = 0; e < episodes.size(); ++e)
        for (const Epoch& ep : episodes[e].epochs)
            os << e << ',' << ep.index << ',' << ep.time << ',' << ep.state.q << ',' << ep.state.cog
               << ',' << to_char(ep.action) << ',' << ep.tau << ',' << ep.arrivals << ','
               << format_real(ep.reward) << '\n';
    return os.str();
}

std::string convergence_json(const SmdpModel& model, const ValuePolicyTable& table, double tolerance) {
    ordered o;
    o["converged"] = table.converged;
    o["sweeps"] = table.sweeps;
    o["residual"] = table.residual;
    o["tolerance"] = tolerance;
    o["contraction_factor"] = model.contraction_factor();
    o["state_count"] = model.state_count();
    o["residual_trace"] = table.residual_trace;
    return o.dump(2) + "\n";
}

std::string model_summary_json(const SmdpModel& model) {
    ordered o;
    o["state_count"] = model.state_count();
    o["capacity"] = model.capacity();
    o["levels"] = model.cog_count();
    o["optimal_index"] = model.grid().optimal_index();
    o["max_tau"] = model.max_tau();
    o["contraction_factor"] = model.contraction_factor();
    o["warnings"] = model.warnings();
    return o.dump(2) + "\n";
}

std::string structure_json(const SmdpModel& model, const StructureReport& r) {
    ordered o;
    o["rho"]["value"] = r.rho.rho;
    o["rho"]["light_tail_everywhere"] = r.rho.light_tail_everywhere;
    o["rho"]["jensen_everywhere"] = r.rho.jensen_everywhere;
    o["rho"]["entries"] = ordered::array();
    for (const RhoEntry& e : r.rho.entries)
        o["rho"]["entries"].push_back({{"cog", e.cog},
                                       {"action", std::string(1, to_char(e.action))},
                                       {"mean", e.mean},
                                       {"variance", e.variance},
                                       {"bound", e.bound},
                                       {"discount", e.discount},
                                       {"light_tail", e.light_tail},
                                       {"jensen", e.jensen},
                                       {"in_rho", e.in_rho}});
    o["t_max"] = {{"assumed", r.scale.assumed},
                  {"actual", r.scale.actual},
                  {"value", r.scale.t_max},
                  {"substituted", r.scale.substituted}};
    o["assumptions"] = {{"busy_queue", r.assumptions.busy_queue},
                        {"empty_fraction", r.assumptions.empty_fraction},
                        {"moment_order", r.assumptions.moment_order},
                        {"light_tail", r.assumptions.light_tail},
                        {"skip_stable", r.skip_stable}};
    o["moment_order_violations"] = ordered::array();
    for (const OrderingViolation& v : r.ordering)
        o["moment_order_violations"].push_back({{"cog", v.cog},
                                                {"moment", v.moment},
                                                {"lower", std::string(1, to_char(v.lower))},
                                                {"upper", std::string(1, to_char(v.upper))}});
    o["reward_shape"] = {{"max_second_difference", r.reward_shape.max_second_difference},
                         {"affine", r.reward_shape.affine},
                         {"unimodal", r.reward_shape.unimodal},
                         {"failures", r.reward_shape.failures}};
    ordered vb;
    vb["lower_slope"] = r.value_bounds.lower_slope;
    vb["upper_slope"] = r.value_bounds.upper_slope;
    vb["q_limit"] = r.value_bounds.q_limit;
    vb["pass"] = r.value_bounds.pass;
    vb["assumption_violated"] = r.value_bounds.assumption_violated;
    vb["rows"] = ordered::array();
    for (const ValueBoundRow& row : r.value_bounds.rows)
        vb["rows"].push_back({{"cog", row.cog},
                              {"pairs", row.pairs},
                              {"lower_margin", row.lower_margin},
                              {"upper_margin", row.upper_margin},
                              {"pass", row.pass}});
    o["value_bounds"] = vb;
    o["value_shape"] = {{"decreasing_in_q", r.value_shape.decreasing_in_q},
                        {"unimodal_in_cog", r.value_shape.unimodal_in_cog},
                        {"failures", r.value_shape.failures}};
    o["q_limit"] = r.q_limit;
    o["levels"] = ordered::array();
    for (std::size_t i = 0; i < r.dominance.size(); ++i) {
        const DominanceRow& d = r.dominance[i];
        const ThresholdRow& t = r.thresholds[i];
        const GuaranteeRow& g = r.guarantee.rows[i];
        ordered level;
        level["cog"] = d.cog;
        level["level"] = model.grid().level(d.cog);
        level["above_optimal"] = d.above_optimal;
        level["margins"] = {{"skip_bonus", d.skip_bonus},
                            {"high_to_normal", d.high_to_normal},
                            {"normal_to_rest", optional_json(d.normal_to_rest)},
                            {"to_skip", d.to_skip},
                            {"skip_over_high", optional_json(d.skip_over_high)},
                            {"skip_over_normal", optional_json(d.skip_over_normal)},
                            {"max_discount", d.max_discount},
                            {"combined", d.combined}};
        level["thresholds"] = {{"q1", optional_json(t.q1)}, {"q2", optional_json(t.q2)}};
        if (d.above_optimal) level["thresholds"]["q3"] = optional_json(t.q3);
        level["is_threshold"] = t.is_threshold;
        level["violations"] = t.violations;
        level["guaranteed"] = g.guaranteed;
        level["status"] = g.status;
        o["levels"].push_back(level);
    }
    o["guarantee_violated"] = r.guarantee.violated;
    return o.dump(2) + "\n";
}

namespace {

// Shared reader for the per-state CSVs; `row` consumes the cells after q and cog.
template <class RowFn>
void read_state_csv(const std::string& text, const SmdpModel& model, const std::string& expected,
                    std::size_t columns, RowFn row) {
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    bool seen_header = false;
    std::vector<char> seen(static_cast<std::size_t>(model.state_count()), 0);
    auto fail = [&](const std::string& what) {
        throw Error(ErrorCode::LoadError, "line " + std::to_string(line_no) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!seen_header) {
            if (line != expected) fail("expected header '" + expected + "'");
            seen_header = true;
            continue;
        }
        const auto cells = split(line, ',');
        int q = 0, cog = 0;
        if (cells.size() != columns || !parse_int(cells[0], q) || !parse_int(cells[1], cog))
            fail("expected '" + expected + "'");
        const auto action = cells.back().size() == 1 ? action_from_char(cells.back()[0]) : std::nullopt;
        if (!action) fail("unknown action '" + cells.back() + "'");
        if (q < 0 || q > model.capacity() || cog < 0 || cog >= model.cog_count())
            throw Error(ErrorCode::PolicyMismatch, "state (" + std::to_string(q) + "," +
                                                       std::to_string(cog) + ") lies outside the model");
        const auto idx = static_cast<std::size_t>(model.state_index({q, cog}));
        if (seen[idx]) fail("duplicate state");
        const auto allowed = model.admissible({q, cog});
        if (std::find(allowed.begin(), allowed.end(), *action) == allowed.end())
            throw Error(ErrorCode::PolicyMismatch, "action " + cells.back() + " at (" +
                                                       std::to_string(q) + "," + std::to_string(cog) +
                                                       ") is not admissible");
        seen[idx] = 1;
        if (!row(idx, cells, *action)) fail("malformed value '" + cells[2] + "'");
    }
    if (!seen_header) throw Error(ErrorCode::LoadError, "file has no header");
    if (std::count(seen.begin(), seen.end(), 0) > 0)
        throw Error(ErrorCode::PolicyMismatch, "file does not cover every state");
}

} // namespace

PolicyTable parse_policy_csv(const std::string& text, const SmdpModel& model) {
    PolicyTable policy(static_cast<std::size_t>(model.state_count()), Action::W);
    read_state_csv(text, model, "q,cog,action", 3,
                   [&](std::size_t idx, const std::vector<std::string>&, Action a) {
                       policy[idx] = a;
                       return true;
                   });
    return policy;
}

ValuePolicyTable parse_value_csv(const std::string& text, const SmdpModel& model) {
    ValuePolicyTable table;
    table.value.assign(static_cast<std::size_t>(model.state_count()), 0.0);
    table.policy.assign(table.value.size(), Action::W);
    read_state_csv(text, model, "q,cog,V,action", 4,
                   [&](std::size_t idx, const std::vector<std::string>& cells, Action a) {
                       const std::string& v = cells[2];
                       auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), table.value[idx]);
                       table.policy[idx] = a;
                       return ec == std::errc() && ptr == v.data() + v.size() &&
                              std::isfinite(table.value[idx]);
                   });
    table.converged = true;
    return table;
}

namespace {

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::LoadError, "cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

ValuePolicyTable read_value_csv(const std::filesystem::path& path, const SmdpModel& model) {
    return parse_value_csv(slurp(path), model);
}

PolicyTable read_policy_csv(const std::filesystem::path& path, const SmdpModel& model) {
    return parse_policy_csv(slurp(path), model);
}

std::string policy_svg(const SmdpModel& model, std::span<const Action> policy) {
    std::ostringstream legend;
    const int x = kLeft + (model.capacity() + 1) * kCell + 16;
    int y = kTop;
    for (Action a : kAllActions) {
        legend << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\""
               << action_colour(a) << "\" stroke=\"#555555\" stroke-width=\"0.5\"/>\n"
               << "<text x=\"" << x + 18 << "\" y=\"" << y + 10 << "\">" << to_char(a) << ' ' << long_name(a)
               << "</text>\n";
        y += 18;
    }
    auto fill = [&](const State& s) {
        return std::string(action_colour(policy[static_cast<std::size_t>(model.state_index(s))]));
    };
    return heatmap(model, "Optimal policy", fill, legend.str(), y - kTop);
}

std::string value_svg(const SmdpModel& model, std::span<const double> value) {
    const auto [lo_it, hi_it] = std::minmax_element(value.begin(), value.end());
    const double lo = *lo_it;
    const double span = std::max(*hi_it - lo, 1e-300);
    std::ostringstream legend;
    const int x = kLeft + (model.capacity() + 1) * kCell + 16;
    const int steps = 10;
    for (int i = 0; i <= steps; ++i) {
        const double t = 1.0 - static_cast<double>(i) / steps;
        legend << "<rect x=\"" << x << "\" y=\"" << kTop + i * 12 << "\" width=\"14\" height=\"12\" fill=\""
               << ramp(t) << "\"/>\n";
    }
    legend << "<text x=\"" << x + 20 << "\" y=\"" << kTop + 10 << "\">" << format_real(*hi_it)
           << "</text>\n"
           << "<text x=\"" << x + 20 << "\" y=\"" << kTop + steps * 12 + 10 << "\">"
           << format_real(lo) << "</text>\n";
    auto fill = [&](const State& s) {
        return ramp((value[static_cast<std::size_t>(model.state_index(s))] - lo) / span);
    };
    return heatmap(model, "Optimal value", fill, legend.str(), (steps + 1) * 12);
}

} // namespace fidsel
