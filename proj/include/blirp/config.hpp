#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "blirp/errors.hpp"
#include "blirp/schedule.hpp"

// Flat key = value experiment configs with dotted keys, e.g.
//
//   schedule.beta = 1.0
//   mc.per_level_samples = 64,32
//   run.mode = psi_sweep
//
// '#' starts a comment; blank lines are skipped. One config file = one
// experiment. Unknown keys are rejected so typos cannot silently change a
// run.

namespace blirp {

enum class RunMode { psi_sweep, derivative_check, perceptron_census, local_entropy, zero_temperature };
enum class OutputFormat { csv, json };

struct ExperimentConfig {
    // dims
    int x_dim = 1, y_dim = 1, set_size = 1;
    // sets
    std::string set_source = "sphere"; // binary | sphere | file
    std::uint64_t sets_seed = 0;       // 0 = follow mc.seed
    std::string set_file;
    double anchor_nu = 0.0;
    double anchor_delta = 0.0;
    bool restrict_overlap = false;
    double restrict_delta = 1.0;
    // schedule
    LiftingSchedule schedule;
    // mc
    long outer_samples = 128;
    std::vector<long> per_level_samples = {64};
    std::uint64_t seed = 1;
    // run
    RunMode mode = RunMode::psi_sweep;
    std::vector<double> t_grid = {0.0, 0.25, 0.5, 0.75, 1.0};
    double fd_step = 1e-3;
    std::vector<double> beta_grid = {20.0, 40.0};
    std::vector<int> d_grid; // empty = 0..n
    std::string reference_policy = "solutions_only";
    // output
    std::string output_path = "out.csv";
    OutputFormat format = OutputFormat::csv;

    std::map<std::string, std::string> resolved; // full effective config
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.push_back("");
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ValidationError("config: " + key + " is not a number: '" + v + "'");
    }
}

inline long parse_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ValidationError("config: " + key + " is not an integer: '" + v + "'");
    }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config: " + key + " is not a boolean: '" + v + "'");
}

inline std::vector<double> parse_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const std::string& item : split(v, ','))
        if (!item.empty()) out.push_back(parse_double(key, item));
    return out;
}

} // namespace detail

inline std::map<std::string, std::string> parse_config_text(std::istream& is) {
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        if (key.empty()) throw ValidationError("config: empty key at line " + std::to_string(lineno));
        if (kv.count(key)) throw ValidationError("config: duplicate key '" + key + "'");
        kv[key] = val;
    }
    return kv;
}

inline const std::set<std::string>& known_config_keys() {
    static const std::set<std::string> keys = {
        "dims.x_dim", "dims.y_dim", "dims.set_size",
        "sets.source", "sets.seed", "sets.file",
        "sets.anchor_nu", "sets.anchor_delta",
        "sets.restrict_overlap", "sets.restrict_delta",
        "schedule.r", "schedule.m_schedule", "schedule.p_schedule", "schedule.q_schedule",
        "schedule.beta", "schedule.s", "schedule.group_exponent",
        "mc.outer_samples", "mc.per_level_samples", "mc.seed",
        "run.mode", "run.t_grid", "run.fd_step", "run.beta_grid", "run.d_grid",
        "run.reference_policy",
        "output.path", "output.format",
    };
    return keys;
}

// Keys the sweep runner may override, one scalar value per run. List-valued
// schedule entries are deliberately absent.
inline const std::set<std::string>& sweepable_config_keys() {
    static const std::set<std::string> keys = {
        "dims.x_dim", "dims.y_dim", "dims.set_size",
        "sets.seed", "sets.anchor_nu", "sets.anchor_delta", "sets.restrict_delta",
        "schedule.beta", "schedule.s", "schedule.group_exponent",
        "mc.outer_samples", "mc.seed",
        "run.fd_step", "run.beta_grid",
    };
    return keys;
}

inline ExperimentConfig resolve_config(const std::map<std::string, std::string>& kv) {
    for (const auto& [k, v] : kv)
        if (!known_config_keys().count(k)) throw ValidationError("config: unknown key '" + k + "'");

    auto get = [&](const std::string& key) -> const std::string* {
        auto it = kv.find(key);
        return it == kv.end() ? nullptr : &it->second;
    };

    ExperimentConfig c;
    if (auto* v = get("dims.x_dim")) c.x_dim = static_cast<int>(detail::parse_long("dims.x_dim", *v));
    if (auto* v = get("dims.y_dim")) c.y_dim = static_cast<int>(detail::parse_long("dims.y_dim", *v));
    if (auto* v = get("dims.set_size"))
        c.set_size = static_cast<int>(detail::parse_long("dims.set_size", *v));

    if (auto* v = get("sets.source")) c.set_source = *v;
    if (c.set_source != "binary" && c.set_source != "sphere" && c.set_source != "file")
        throw ValidationError("config: sets.source must be binary | sphere | file");
    if (auto* v = get("sets.seed"))
        c.sets_seed = static_cast<std::uint64_t>(detail::parse_long("sets.seed", *v));
    if (auto* v = get("sets.file")) c.set_file = *v;
    if (c.set_source == "file" && c.set_file.empty())
        throw ValidationError("config: sets.source = file requires sets.file");
    if (auto* v = get("sets.anchor_nu")) c.anchor_nu = detail::parse_double("sets.anchor_nu", *v);
    if (auto* v = get("sets.anchor_delta"))
        c.anchor_delta = detail::parse_double("sets.anchor_delta", *v);
    if (auto* v = get("sets.restrict_overlap"))
        c.restrict_overlap = detail::parse_bool("sets.restrict_overlap", *v);
    if (auto* v = get("sets.restrict_delta"))
        c.restrict_delta = detail::parse_double("sets.restrict_delta", *v);

    if (auto* v = get("schedule.r")) c.schedule.r = static_cast<int>(detail::parse_long("schedule.r", *v));
    c.schedule.m_schedule = {1.0, 0.5, 0.0};
    c.schedule.p_schedule = {1.0, 0.5, 0.0};
    c.schedule.q_schedule = {1.0, 0.5, 0.0};
    if (auto* v = get("schedule.m_schedule"))
        c.schedule.m_schedule = detail::parse_doubles("schedule.m_schedule", *v);
    if (auto* v = get("schedule.p_schedule"))
        c.schedule.p_schedule = detail::parse_doubles("schedule.p_schedule", *v);
    if (auto* v = get("schedule.q_schedule"))
        c.schedule.q_schedule = detail::parse_doubles("schedule.q_schedule", *v);
    if (auto* v = get("schedule.beta")) c.schedule.beta = detail::parse_double("schedule.beta", *v);
    if (auto* v = get("schedule.s")) c.schedule.s = detail::parse_double("schedule.s", *v);
    if (auto* v = get("schedule.group_exponent"))
        c.schedule.group_exponent = detail::parse_double("schedule.group_exponent", *v);

    if (auto* v = get("mc.outer_samples")) c.outer_samples = detail::parse_long("mc.outer_samples", *v);
    if (auto* v = get("mc.per_level_samples")) {
        c.per_level_samples.clear();
        for (const std::string& item : detail::split(*v, ','))
            if (!item.empty()) c.per_level_samples.push_back(detail::parse_long("mc.per_level_samples", item));
    }
    if (auto* v = get("mc.seed"))
        c.seed = static_cast<std::uint64_t>(detail::parse_long("mc.seed", *v));
    if (c.sets_seed == 0) c.sets_seed = c.seed;

    if (auto* v = get("run.mode")) {
        if (*v == "psi_sweep") c.mode = RunMode::psi_sweep;
        else if (*v == "derivative_check") c.mode = RunMode::derivative_check;
        else if (*v == "perceptron_census") c.mode = RunMode::perceptron_census;
        else if (*v == "local_entropy") c.mode = RunMode::local_entropy;
        else if (*v == "zero_temperature") c.mode = RunMode::zero_temperature;
        else throw ValidationError("config: unknown run.mode '" + *v + "'");
    }
    if (auto* v = get("run.t_grid")) c.t_grid = detail::parse_doubles("run.t_grid", *v);
    if (auto* v = get("run.fd_step")) c.fd_step = detail::parse_double("run.fd_step", *v);
    if (auto* v = get("run.beta_grid")) c.beta_grid = detail::parse_doubles("run.beta_grid", *v);
    if (auto* v = get("run.d_grid")) {
        c.d_grid.clear();
        for (const std::string& item : detail::split(*v, ','))
            if (!item.empty())
                c.d_grid.push_back(static_cast<int>(detail::parse_long("run.d_grid", item)));
    }
    if (auto* v = get("run.reference_policy")) c.reference_policy = *v;
    if (c.reference_policy != "solutions_only" && c.reference_policy != "all_corners")
        throw ValidationError("config: run.reference_policy must be solutions_only | all_corners");

    if (auto* v = get("output.path")) c.output_path = *v;
    if (auto* v = get("output.format")) {
        if (*v == "csv") c.format = OutputFormat::csv;
        else if (*v == "json") c.format = OutputFormat::json;
        else throw ValidationError("config: output.format must be csv | json");
    }

    // full effective config, defaults included, for output provenance
    auto put = [&](const std::string& k, const std::string& v) { c.resolved[k] = v; };
    auto putd = [&](const std::string& k, double v) {
        std::ostringstream os;
        os.precision(17);
        os << v;
        put(k, os.str());
    };
    put("dims.x_dim", std::to_string(c.x_dim));
    put("dims.y_dim", std::to_string(c.y_dim));
    put("dims.set_size", std::to_string(c.set_size));
    put("sets.source", c.set_source);
    put("sets.seed", std::to_string(c.sets_seed));
    if (!c.set_file.empty()) put("sets.file", c.set_file);
    putd("sets.anchor_nu", c.anchor_nu);
    putd("sets.anchor_delta", c.anchor_delta);
    put("sets.restrict_overlap", c.restrict_overlap ? "true" : "false");
    putd("sets.restrict_delta", c.restrict_delta);
    for (const auto& [k, v] : Schedule::validate(c.schedule).to_record()) put("schedule." + k, v);
    put("mc.outer_samples", std::to_string(c.outer_samples));
    {
        std::string pl;
        for (std::size_t i = 0; i < c.per_level_samples.size(); ++i)
            pl += (i ? "," : "") + std::to_string(c.per_level_samples[i]);
        put("mc.per_level_samples", pl);
    }
    put("mc.seed", std::to_string(c.seed));
    const char* mode_names[] = {"psi_sweep", "derivative_check", "perceptron_census",
                                "local_entropy", "zero_temperature"};
    put("run.mode", mode_names[static_cast<int>(c.mode)]);
    {
        std::ostringstream os;
        os.precision(17);
        for (std::size_t i = 0; i < c.t_grid.size(); ++i) os << (i ? "," : "") << c.t_grid[i];
        put("run.t_grid", os.str());
    }
    putd("run.fd_step", c.fd_step);
    {
        std::ostringstream os;
        os.precision(17);
        for (std::size_t i = 0; i < c.beta_grid.size(); ++i) os << (i ? "," : "") << c.beta_grid[i];
        put("run.beta_grid", os.str());
    }
    {
        std::string dg;
        for (std::size_t i = 0; i < c.d_grid.size(); ++i)
            dg += (i ? "," : "") + std::to_string(c.d_grid[i]);
        put("run.d_grid", dg);
    }
    put("run.reference_policy", c.reference_policy);
    put("output.path", c.output_path);
    put("output.format", c.format == OutputFormat::csv ? "csv" : "json");
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ValidationError("config: cannot read '" + path + "'");
    return resolve_config(parse_config_text(is));
}

} // namespace blirp
