#include "fidsel/config.hpp"

#include "fidsel/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace fidsel {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

[[noreturn]] void invalid(const std::string& key, const std::string& what) {
    throw Error(ErrorCode::ConfigInvalid, "config key '" + key + "': " + what);
}

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

// Object view that remembers its key path and rejects keys nobody asked about.
class Section {
  public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) invalid(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string& key) {
        known_.insert(key);
        return node_.contains(key);
    }

    const json& raw(const std::string& key) { return node_.at(key); }

    Section child(const std::string& key) {
        known_.insert(key);
        return Section(node_.at(key), join(path_, key));
    }

    void read(const std::string& key, double& out) {
        if (!has(key)) return;
        const json& v = node_.at(key);
        if (!v.is_number()) invalid(join(path_, key), "expected a number");
        out = v.get<double>();
    }

    void read(const std::string& key, int& out) {
        if (!has(key)) return;
        const json& v = node_.at(key);
        if (!v.is_number_integer()) invalid(join(path_, key), "expected an integer");
        out = v.get<int>();
    }

    void read(const std::string& key, std::uint64_t& out) {
        if (!has(key)) return;
        const json& v = node_.at(key);
        if (!v.is_number_integer() || v.get<long long>() < 0)
            invalid(join(path_, key), "expected a non-negative integer");
        out = v.get<std::uint64_t>();
    }

    void read(const std::string& key, std::string& out) {
        if (!has(key)) return;
        const json& v = node_.at(key);
        if (!v.is_string()) invalid(join(path_, key), "expected a string");
        out = v.get<std::string>();
    }

    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it)
            if (!known_.count(it.key())) invalid(join(path_, it.key()), "unknown key");
    }

    const std::string& path() const { return path_; }

  private:
    const json& node_;
    std::string path_;
    std::set<std::string> known_;
};

void read_shape(Section s, ServiceShape& shape) {
    s.read("base_mean", shape.base_mean);
    s.read("curvature", shape.curvature);
    s.read("concentration", shape.concentration);
    s.read("support_cap", shape.support_cap);
    s.finish();
}

void read_model(Section& root, RunConfig& cfg) {
    ModelParams& m = cfg.model;
    if (root.has("queue")) {
        Section q = root.child("queue");
        q.read("capacity", m.capacity);
        q.read("arrival_rate", m.arrival_rate);
        q.finish();
    }
    if (root.has("cognition")) {
        Section c = root.child("cognition");
        int intervals = m.grid.intervals();
        double optimal = m.grid.optimal_level();
        c.read("levels", intervals);
        c.read("optimal_level", optimal);
        try {
            m.grid = CogGrid::with_optimal_level(intervals, optimal);
        } catch (const Error& e) {
            invalid(join(c.path(), "optimal_level"), e.what());
        }
        if (c.has("rates")) {
            Section r = c.child("rates");
            for (Action a : kAllActions) {
                const std::string name(1, to_char(a));
                if (!r.has(name)) continue;
                Section one = r.child(name);
                one.read("forward", m.rates[a].forward);
                one.read("backward", m.rates[a].backward);
                one.finish();
            }
            r.finish();
        }
        c.finish();
    }
    if (root.has("rewards")) {
        Section r = root.child("rewards");
        r.read("normal", m.reward_normal);
        r.read("high", m.reward_high);
        r.read("holding_cost", m.holding_cost);
        r.finish();
    }
    root.read("discount", m.gamma);
    if (root.has("service")) {
        Section s = root.child("service");
        if (s.has("normal")) read_shape(s.child("normal"), m.service.normal);
        if (s.has("high")) read_shape(s.child("high"), m.service.high);
        s.finish();
    }
    root.read("skip_time", m.skip_time);
    root.read("wait_cap", m.wait_cap);
    if (root.has("rest")) {
        Section r = root.child("rest");
        r.read("cap", m.rest_cap);
        r.read("cap_factor", m.rest_cap_factor);
        r.finish();
    }
}

void read_runtime(Section& root, RunConfig& cfg) {
    if (root.has("solver")) {
        Section s = root.child("solver");
        s.read("tolerance", cfg.solver.tolerance);
        s.read("max_sweeps", cfg.solver.max_sweeps);
        s.finish();
    }
    if (root.has("simulation")) {
        Section s = root.child("simulation");
        s.read("seed", cfg.simulation.seed);
        s.read("episodes", cfg.simulation.episodes);
        s.read("horizon", cfg.simulation.horizon);
        s.read("record_episodes", cfg.simulation.record_episodes);
        s.read("threads", cfg.simulation.threads);
        if (s.has("start_states")) {
            const json& arr = s.raw("start_states");
            const std::string key = join(s.path(), "start_states");
            if (!arr.is_array() || arr.empty()) invalid(key, "expected a non-empty array");
            cfg.simulation.start_states.clear();
            for (std::size_t i = 0; i < arr.size(); ++i) {
                Section st(arr[i], key + "[" + std::to_string(i) + "]");
                StartState one;
                st.read("q", one.q);
                st.read("level", one.level);
                st.finish();
                cfg.simulation.start_states.push_back(one);
            }
        }
        s.finish();
    }
    if (root.has("analysis")) {
        Section s = root.child("analysis");
        s.read("empty_threshold", cfg.analysis.empty_threshold);
        s.read("boundary_buffer", cfg.analysis.boundary_buffer);
        s.read("occupancy_episodes", cfg.analysis.occupancy_episodes);
        s.read("occupancy_horizon", cfg.analysis.occupancy_horizon);
        s.finish();
    }
    if (root.has("sweep")) {
        Section s = root.child("sweep");
        s.read("max_points", cfg.sweep.max_points);
        s.read("threads", cfg.sweep.threads);
        if (s.has("grid")) {
            Section g = s.child("grid");
            const json& node = s.raw("grid");
            for (auto it = node.begin(); it != node.end(); ++it) {
                const std::string key = join(g.path(), it.key());
                const auto& keys = sweep_keys();
                if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
                    invalid(key, "not a sweepable parameter");
                g.has(it.key());
                if (!it.value().is_array() || it.value().empty())
                    invalid(key, "expected a non-empty array of numbers");
                SweepAxis axis{it.key(), {}};
                for (const json& v : it.value()) {
                    if (!v.is_number()) invalid(key, "expected a non-empty array of numbers");
                    axis.values.push_back(v.get<double>());
                }
                cfg.sweep.axes.push_back(std::move(axis));
            }
            g.finish();
        }
        s.finish();
    }
    root.read("output_dir", cfg.output_dir);
}

void validate(const RunConfig& cfg) {
    const ModelParams& m = cfg.model;
    if (!(m.gamma > 0.0 && m.gamma < 1.0))
        invalid("discount", "γ ∈ (0,1) required, got " + json(m.gamma).dump());
    try {
        m.validate();
    } catch (const Error& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("invalid model parameters: ") + e.what());
    }
    if (!(cfg.solver.tolerance > 0.0)) invalid("solver.tolerance", "must be positive");
    if (cfg.solver.max_sweeps < 1) invalid("solver.max_sweeps", "must be at least 1");
    if (cfg.simulation.episodes < 1) invalid("simulation.episodes", "must be at least 1");
    if (cfg.simulation.horizon < 0) invalid("simulation.horizon", "must be non-negative");
    if (cfg.simulation.record_episodes < 0) invalid("simulation.record_episodes", "must be non-negative");
    for (const StartState& s : cfg.simulation.start_states) {
        if (s.q < 0 || s.q > m.capacity) invalid("simulation.start_states", "q outside 0..capacity");
        try {
            level_index(m.grid, s.level);
        } catch (const Error& e) {
            invalid("simulation.start_states", e.what());
        }
    }
    if (!(cfg.analysis.empty_threshold > 0.0 && cfg.analysis.empty_threshold <= 1.0))
        invalid("analysis.empty_threshold", "must lie in (0,1]");
    if (!(cfg.analysis.boundary_buffer >= 0.0 && cfg.analysis.boundary_buffer < 1.0))
        invalid("analysis.boundary_buffer", "must lie in [0,1)");
    if (cfg.analysis.occupancy_episodes < 1 || cfg.analysis.occupancy_horizon < 1)
        invalid("analysis", "occupancy episodes and horizon must be at least 1");
    if (cfg.sweep.max_points < 1) invalid("sweep.max_points", "must be at least 1");
}

ordered shape_json(const ServiceShape& s) {
    ordered o;
    o["base_mean"] = s.base_mean;
    o["curvature"] = s.curvature;
    o["concentration"] = s.concentration;
    o["support_cap"] = s.support_cap;
    return o;
}

} // namespace

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::ConfigInvalid, std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    Section root(doc, "");
    read_model(root, cfg);
    read_runtime(root, cfg);
    root.finish();
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigInvalid, "cannot open config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string dump_config(const RunConfig& cfg) {
    const ModelParams& m = cfg.model;
    ordered o;
    o["queue"]["capacity"] = m.capacity;
    o["queue"]["arrival_rate"] = m.arrival_rate;
    o["cognition"]["levels"] = m.grid.intervals();
    o["cognition"]["optimal_level"] = m.grid.optimal_level();
    for (Action a : kAllActions) {
        const std::string name(1, to_char(a));
        o["cognition"]["rates"][name]["forward"] = m.rates[a].forward;
        o["cognition"]["rates"][name]["backward"] = m.rates[a].backward;
    }
    o["rewards"]["normal"] = m.reward_normal;
    o["rewards"]["high"] = m.reward_high;
    o["rewards"]["holding_cost"] = m.holding_cost;
    o["discount"] = m.gamma;
    o["service"]["normal"] = shape_json(m.service.normal);
    o["service"]["high"] = shape_json(m.service.high);
    o["skip_time"] = m.skip_time;
    o["wait_cap"] = m.wait_cap;
    o["rest"]["cap"] = m.rest_cap;
    o["rest"]["cap_factor"] = m.rest_cap_factor;
    o["solver"]["tolerance"] = cfg.solver.tolerance;
    o["solver"]["max_sweeps"] = cfg.solver.max_sweeps;
    o["simulation"]["seed"] = cfg.simulation.seed;
    o["simulation"]["episodes"] = cfg.simulation.episodes;
    o["simulation"]["horizon"] = cfg.simulation.horizon;
    o["simulation"]["record_episodes"] = cfg.simulation.record_episodes;
    o["simulation"]["threads"] = cfg.simulation.threads;
    o["simulation"]["start_states"] = ordered::array();
    for (const StartState& s : cfg.simulation.start_states)
        o["simulation"]["start_states"].push_back({{"q", s.q}, {"level", s.level}});
    o["analysis"]["empty_threshold"] = cfg.analysis.empty_threshold;
    o["analysis"]["boundary_buffer"] = cfg.analysis.boundary_buffer;
    o["analysis"]["occupancy_episodes"] = cfg.analysis.occupancy_episodes;
    o["analysis"]["occupancy_horizon"] = cfg.analysis.occupancy_horizon;
    o["sweep"]["max_points"] = cfg.sweep.max_points;
    o["sweep"]["threads"] = cfg.sweep.threads;
    o["sweep"]["grid"] = ordered::object();
    for (const SweepAxis& axis : cfg.sweep.axes) o["sweep"]["grid"][axis.key] = axis.values;
    o["output_dir"] = cfg.output_dir;
    return o.dump(2);
}

std::string config_hash(const RunConfig& config) {
    // The output location does not affect any result.
    RunConfig content = config;
    content.output_dir.clear();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : dump_config(content)) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

const std::vector<std::string>& sweep_keys() {
    static const std::vector<std::string> keys{
        "arrival_rate",  "holding_cost",     "skip_time",      "discount",      "normal_base_mean",
        "high_base_mean", "normal_curvature", "high_curvature", "curvature"};
    return keys;
}

void apply_sweep_value(ModelParams& p, const std::string& key, double value) {
    if (key == "arrival_rate") p.arrival_rate = value;
    else if (key == "holding_cost") p.holding_cost = value;
    else if (key == "skip_time") {
        if (value != std::floor(value)) invalid("sweep.skip_time", "skip time must be an integer");
        p.skip_time = static_cast<int>(value);
    } else if (key == "discount") p.gamma = value;
    else if (key == "normal_base_mean") p.service.normal.base_mean = value;
    else if (key == "high_base_mean") p.service.high.base_mean = value;
    else if (key == "normal_curvature") p.service.normal.curvature = value;
    else if (key == "high_curvature") p.service.high.curvature = value;
    else if (key == "curvature") {
        p.service.normal.curvature = value;
        p.service.high.curvature = value;
    } else invalid("sweep." + key, "not a sweepable parameter");
}

std::vector<SweepAxis> parse_grid(const std::string& spec) {
    std::vector<SweepAxis> axes;
    std::stringstream all(spec);
    std::string part;
    while (std::getline(all, part, ';')) {
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string::npos) invalid("--grid", "expected key=v1,v2 in '" + part + "'");
        SweepAxis axis{part.substr(0, eq), {}};
        const auto& keys = sweep_keys();
        if (std::find(keys.begin(), keys.end(), axis.key) == keys.end())
            invalid("--grid", "'" + axis.key + "' is not a sweepable parameter");
        std::stringstream values(part.substr(eq + 1));
        std::string v;
        while (std::getline(values, v, ',')) {
            try {
                std::size_t used = 0;
                axis.values.push_back(std::stod(v, &used));
                if (used != v.size()) throw std::invalid_argument(v);
            } catch (const std::exception&) {
                invalid("--grid", "'" + v + "' is not a number");
            }
        }
        if (axis.values.empty()) invalid("--grid", "axis '" + axis.key + "' has no values");
        axes.push_back(std::move(axis));
    }
    if (axes.empty()) invalid("--grid", "empty grid");
    return axes;
}

int level_index(const CogGrid& grid, double level) {
    const double scaled = level * grid.intervals();
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > 1e-9 || rounded < 0 || rounded > grid.intervals())
        throw Error(ErrorCode::InvalidParams,
                    "level " + std::to_string(level) + " is not a point of the cognitive grid");
    return static_cast<int>(rounded);
}

} // namespace fidsel
