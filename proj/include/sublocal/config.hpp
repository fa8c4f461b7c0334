#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sublocal/branches.hpp"
#include "sublocal/errors.hpp"
#include "sublocal/modegrid.hpp"
#include "sublocal/sources.hpp"

namespace sublocal {

enum class Expectation { any, two_local, not_two_local };

inline std::string to_string(Expectation e) {
    switch (e) {
    case Expectation::two_local: return "two-local";
    case Expectation::not_two_local: return "not-two-local";
    default: return "any";
    }
}

struct FieldBlock {
    double mass = 1.0;
    double k_cutoff = 20.0;
    std::size_t n_modes = 1024;
    GridOptions options;
};

struct IntervalBlock {
    double t_initial = 0.0;
    double t_final = 1.0;
    std::size_t time_steps = 256;
    std::size_t subdivisions = 1;
    std::vector<double> breakpoints;
};

/// One branch source; `qudit` is "A" or "B".
struct SourceBlock {
    std::string qudit;
    std::size_t branch = 0;
    Shape shape = Shape::gaussian;
    double charge = 0.0;
    double width = 0.1;
    double truncation_multiplier = 5.0;
    Shape pointer_shape = Shape::gaussian;
    double pointer_spread = 0.05;
    double spread_rate = 0.0;
    double center = 0.0;
    double velocity = 0.0;
    std::vector<double> path_times;    ///< piecewise-linear path, overrides center/velocity
    std::vector<double> path_centers;

    BranchSource build(double t_initial, double t_final) const {
        ChargeDistribution q = shape == Shape::point ? ChargeDistribution::point(charge)
                                                     : ChargeDistribution::gaussian(charge, width, truncation_multiplier);
        PointerTrajectory path = !path_times.empty()
            ? PointerTrajectory::piecewise(path_times, path_centers, pointer_spread, pointer_shape, truncation_multiplier)
            : velocity != 0.0
                ? PointerTrajectory::linear(center, velocity, t_initial, t_final, pointer_spread, pointer_shape,
                                            truncation_multiplier)
                : PointerTrajectory::stationary(center, pointer_spread, pointer_shape, truncation_multiplier);
        if (spread_rate != 0.0) path.with_spread_rate(spread_rate);
        return {q, path, static_cast<int>(branch)};
    }
};

struct ChecksBlock {
    std::vector<std::string> suites;
    Expectation expect = Expectation::any;
    double relative_tolerance = 1e-6;
    double safety_margin = 0.0;
    std::size_t distance_samples = 65;
    std::size_t fock_modes = 2;
    double reconstruction_tolerance = 1e-6;
    double amplitude_tolerance = 1e-10;
    double phase_tolerance = 1e-8;
    double factorization_tolerance = 1e-8;
    double oracle_tolerance = 1e-2;
    double heisenberg_tolerance = 1e-7;
    double microcausality_tolerance = 1e-3;
    double microcausality_gap = 0.5;
};

struct OracleBlock {
    double dx = 0.01;
    double cfl = 0.5;
    double half_width = 8.0;
    double region = 5.0;
};

struct OutputBlock {
    std::string directory;
    std::string report = "report.json";
    bool csv = true;
};

struct ScenarioConfig {
    FieldBlock field;
    IntervalBlock interval;
    std::vector<SourceBlock> sources_a;
    std::vector<SourceBlock> sources_b;
    ChecksBlock checks;
    OracleBlock oracle;
    OutputBlock output;
    /// every accepted "section.key" -> raw value, for echoing into reports
    std::map<std::string, std::string> entries;
    std::string text;

    GridPtr make_grid() const { return sublocal::make_grid(field.mass, field.k_cutoff, field.n_modes, field.options); }

    Scenario scenario(GridPtr grid = nullptr) const {
        Scenario sc;
        sc.grid = grid ? std::move(grid) : make_grid();
        sc.t_initial = interval.t_initial;
        sc.t_final = interval.t_final;
        sc.time_steps = interval.time_steps;
        sc.subdivisions = interval.subdivisions;
        sc.breakpoints = interval.breakpoints;
        sc.safety_margin = checks.safety_margin;
        sc.distance_samples = checks.distance_samples;
        sc.relative_tolerance = checks.relative_tolerance;
        for (const auto& s : sources_a) sc.sources_a.push_back(s.build(interval.t_initial, interval.t_final));
        for (const auto& s : sources_b) sc.sources_b.push_back(s.build(interval.t_initial, interval.t_final));
        return sc;
    }
};

namespace config_detail {

inline std::string trim(std::string s) {
    const auto ws = " \t\r\n";
    s.erase(0, s.find_first_not_of(ws));
    s.erase(s.find_last_not_of(ws) + 1);
    return s;
}

inline double to_double(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty()) throw ConfigError(key, "expected a number, got '" + raw + "'");
    return out;
}

inline std::size_t to_count(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    std::size_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size() || v.empty())
        throw ConfigError(key, "expected a non-negative integer, got '" + raw + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError(key, "expected true or false, got '" + raw + "'");
}

inline std::vector<std::string> to_list(const std::string& raw) {
    std::vector<std::string> out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ','))
        if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
}

inline std::vector<double> to_numbers(const std::string& key, const std::string& raw) {
    std::vector<double> out;
    for (const auto& s : to_list(raw)) out.push_back(to_double(key, s));
    return out;
}

inline Shape to_shape(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (v == "gaussian") return Shape::gaussian;
    if (v == "point") return Shape::point;
    throw ConfigError(key, "expected gaussian or point, got '" + raw + "'");
}

// Dispatches "key = value" lines of one section to typed setters.
class SectionReader {
public:
    SectionReader(std::string section, const boost::property_tree::ptree& tree, std::map<std::string, std::string>& echo)
        : section_(std::move(section)), tree_(tree), echo_(echo) {}

    template <typename F>
    SectionReader& on(const std::string& key, F&& setter) {
        handlers_.emplace(key, std::forward<F>(setter));
        return *this;
    }

    void run() {
        for (const auto& [key, node] : tree_) {
            const std::string full = section_ + "." + key;
            if (!node.empty()) throw ConfigError(full, "unexpected nesting");
            auto it = handlers_.find(key);
            if (it == handlers_.end()) throw ConfigError(full, "unknown key");
            const std::string value = node.get_value<std::string>();
            it->second(full, value);
            echo_[full] = trim(value);
        }
    }

private:
    std::string section_;
    const boost::property_tree::ptree& tree_;
    std::map<std::string, std::string>& echo_;
    std::map<std::string, std::function<void(const std::string&, const std::string&)>> handlers_;
};

} // namespace config_detail

/**
 * Parse a scenario file. Sections: [field], [interval], [sources.A.<r>],
 * [sources.B.<s>], [checks], [oracle], [output]. Unknown sections or keys are
 * errors; ConfigError::key() names the offending entry.
 */
inline ScenarioConfig parse_config(const std::string& text) {
    namespace pt = boost::property_tree;
    using namespace config_detail;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError("line " + std::to_string(e.line()), e.message());
    }

    ScenarioConfig cfg;
    cfg.text = text;
    auto num = [](double& dst) { return [&dst](const std::string& k, const std::string& v) { dst = to_double(k, v); }; };
    auto cnt = [](std::size_t& dst) { return [&dst](const std::string& k, const std::string& v) { dst = to_count(k, v); }; };

    for (const auto& [name, section] : tree) {
        if (section.empty() && !section.data().empty()) throw ConfigError(name, "key outside of any section");
        if (name == "field") {
            SectionReader(name, section, cfg.entries)
                .on("mass_natural_units", num(cfg.field.mass))
                .on("k_cutoff_natural_units", num(cfg.field.k_cutoff))
                .on("n_modes", cnt(cfg.field.n_modes))
                .on("taper_start", num(cfg.field.options.taper_start))
                .on("quadrature", [&](const std::string& k, const std::string& v) {
                    const std::string t = trim(v);
                    if (t == "trapezoid") cfg.field.options.quadrature = Quadrature::trapezoid;
                    else if (t == "gauss_legendre") cfg.field.options.quadrature = Quadrature::gauss_legendre;
                    else throw ConfigError(k, "expected trapezoid or gauss_legendre");
                })
                .run();
        } else if (name == "interval") {
            SectionReader(name, section, cfg.entries)
                .on("t_initial_natural_units", num(cfg.interval.t_initial))
                .on("t_final_natural_units", num(cfg.interval.t_final))
                .on("time_steps", cnt(cfg.interval.time_steps))
                .on("subdivisions", cnt(cfg.interval.subdivisions))
                .on("breakpoints_natural_units",
                    [&](const std::string& k, const std::string& v) { cfg.interval.breakpoints = to_numbers(k, v); })
                .run();
        } else if (name.rfind("sources.", 0) == 0) {
            const auto parts = [&] {
                std::vector<std::string> p;
                std::stringstream ss(name);
                std::string item;
                while (std::getline(ss, item, '.')) p.push_back(item);
                return p;
            }();
            if (parts.size() != 3 || (parts[1] != "A" && parts[1] != "B"))
                throw ConfigError(name, "source sections are named sources.A.<branch> or sources.B.<branch>");
            SourceBlock src;
            src.qudit = parts[1];
            src.branch = to_count(name, parts[2]);
            SectionReader(name, section, cfg.entries)
                .on("shape", [&](const std::string& k, const std::string& v) { src.shape = to_shape(k, v); })
                .on("charge", num(src.charge))
                .on("charge_width_natural_units", num(src.width))
                .on("truncation_multiplier", num(src.truncation_multiplier))
                .on("pointer_shape", [&](const std::string& k, const std::string& v) { src.pointer_shape = to_shape(k, v); })
                .on("pointer_spread_natural_units", num(src.pointer_spread))
                .on("spread_rate", num(src.spread_rate))
                .on("center_natural_units", num(src.center))
                .on("velocity", num(src.velocity))
                .on("path_times_natural_units",
                    [&](const std::string& k, const std::string& v) { src.path_times = to_numbers(k, v); })
                .on("path_centers_natural_units",
                    [&](const std::string& k, const std::string& v) { src.path_centers = to_numbers(k, v); })
                .run();
            if (src.path_times.size() != src.path_centers.size())
                throw ConfigError(name + ".path_centers_natural_units", "needs one center per path time");
            (src.qudit == "A" ? cfg.sources_a : cfg.sources_b).push_back(src);
        } else if (name == "checks") {
            SectionReader(name, section, cfg.entries)
                .on("suites", [&](const std::string&, const std::string& v) { cfg.checks.suites = to_list(v); })
                .on("expect", [&](const std::string& k, const std::string& v) {
                    const std::string t = trim(v);
                    if (t == "two-local") cfg.checks.expect = Expectation::two_local;
                    else if (t == "not-two-local") cfg.checks.expect = Expectation::not_two_local;
                    else if (t == "any") cfg.checks.expect = Expectation::any;
                    else throw ConfigError(k, "expected two-local, not-two-local or any");
                })
                .on("relative_tolerance", num(cfg.checks.relative_tolerance))
                .on("safety_margin_natural_units", num(cfg.checks.safety_margin))
                .on("distance_samples", cnt(cfg.checks.distance_samples))
                .on("fock_modes", cnt(cfg.checks.fock_modes))
                .on("reconstruction_tolerance", num(cfg.checks.reconstruction_tolerance))
                .on("amplitude_tolerance", num(cfg.checks.amplitude_tolerance))
                .on("phase_tolerance", num(cfg.checks.phase_tolerance))
                .on("factorization_tolerance", num(cfg.checks.factorization_tolerance))
                .on("oracle_tolerance", num(cfg.checks.oracle_tolerance))
                .on("heisenberg_tolerance", num(cfg.checks.heisenberg_tolerance))
                .on("microcausality_tolerance", num(cfg.checks.microcausality_tolerance))
                .on("microcausality_gap_natural_units", num(cfg.checks.microcausality_gap))
                .run();
        } else if (name == "oracle") {
            SectionReader(name, section, cfg.entries)
                .on("dx_natural_units", num(cfg.oracle.dx))
                .on("cfl", num(cfg.oracle.cfl))
                .on("half_width_natural_units", num(cfg.oracle.half_width))
                .on("region_natural_units", num(cfg.oracle.region))
                .run();
        } else if (name == "output") {
            SectionReader(name, section, cfg.entries)
                .on("directory", [&](const std::string&, const std::string& v) { cfg.output.directory = trim(v); })
                .on("report", [&](const std::string&, const std::string& v) { cfg.output.report = trim(v); })
                .on("csv", [&](const std::string& k, const std::string& v) { cfg.output.csv = to_bool(k, v); })
                .run();
        } else {
            throw ConfigError(name, "unknown section");
        }
    }

    for (auto* group : {&cfg.sources_a, &cfg.sources_b}) {
        std::sort(group->begin(), group->end(), [](const SourceBlock& a, const SourceBlock& b) { return a.branch < b.branch; });
        for (std::size_t i = 0; i < group->size(); ++i)
            if ((*group)[i].branch != i)
                throw ConfigError("sources." + (*group)[i].qudit + "." + std::to_string((*group)[i].branch),
                                  "branch labels must run 0, 1, ... without gaps or repeats");
    }
    if (cfg.sources_a.empty()) throw ConfigError("sources.A", "at least one branch is required");
    if (cfg.sources_b.empty()) throw ConfigError("sources.B", "at least one branch is required");
    if (cfg.field.n_modes < 2 || cfg.field.n_modes % 2) throw ConfigError("field.n_modes", "must be an even integer >= 2");
    if (!(cfg.field.mass > 0.0)) throw ConfigError("field.mass_natural_units", "must be positive");
    if (!(cfg.field.k_cutoff > 0.0)) throw ConfigError("field.k_cutoff_natural_units", "must be positive");
    if (!(cfg.interval.t_final > cfg.interval.t_initial))
        throw ConfigError("interval.t_final_natural_units", "must exceed t_initial_natural_units");
    if (cfg.interval.time_steps == 0) throw ConfigError("interval.time_steps", "must be positive");
    if (cfg.interval.subdivisions == 0) throw ConfigError("interval.subdivisions", "must be at least 1");
    return cfg;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

} // namespace sublocal
