#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "blirp/config.hpp"
#include "blirp/derivative.hpp"
#include "blirp/interpolator.hpp"
#include "blirp/measures.hpp"
#include "blirp/perceptron.hpp"

// Experiment orchestration: build sets from a config, run one mode, write
// machine-readable output. Outputs are written atomically (tmp + rename) and
// contain the fully resolved config in their header; timestamps live only in
// a sidecar log so reruns are byte-identical.

namespace blirp {

using Cell = std::variant<std::string, double, long long>;

struct ResultTable {
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;
    std::vector<std::string> trailer; // extra comment lines, e.g. a summary verdict

    void add_row(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

struct RunOutcome {
    std::string output_file;
    std::map<std::string, std::string> summary; // headline fields for sweep collation
};

namespace detail {

inline std::string cell_to_string(const Cell& c) {
    if (std::holds_alternative<std::string>(c)) return std::get<std::string>(c);
    std::ostringstream os;
    os.precision(17);
    if (std::holds_alternative<double>(c))
        os << std::get<double>(c);
    else
        os << std::get<long long>(c);
    return os.str();
}

inline void write_atomic(const std::filesystem::path& path, const std::string& body) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw ValidationError("cannot write output file " + tmp.string());
        os << body;
    }
    std::filesystem::rename(tmp, path);
}

inline void write_table(const std::filesystem::path& path, OutputFormat format,
                        const std::map<std::string, std::string>& header,
                        const ResultTable& table) {
    if (format == OutputFormat::csv) {
        std::ostringstream os;
        for (const auto& [k, v] : header) os << "# " << k << " = " << v << "\n";
        for (std::size_t i = 0; i < table.columns.size(); ++i)
            os << (i ? "," : "") << table.columns[i];
        os << "\n";
        for (const auto& row : table.rows) {
            for (std::size_t i = 0; i < row.size(); ++i)
                os << (i ? "," : "") << cell_to_string(row[i]);
            os << "\n";
        }
        for (const std::string& line : table.trailer) os << "# " << line << "\n";
        write_atomic(path, os.str());
    } else {
        nlohmann::ordered_json j;
        j["config"] = header;
        j["columns"] = table.columns;
        j["rows"] = nlohmann::ordered_json::array();
        for (const auto& row : table.rows) {
            nlohmann::ordered_json jr = nlohmann::ordered_json::array();
            for (const Cell& c : row) {
                if (std::holds_alternative<std::string>(c))
                    jr.push_back(std::get<std::string>(c));
                else if (std::holds_alternative<double>(c))
                    jr.push_back(std::get<double>(c));
                else
                    jr.push_back(std::get<long long>(c));
            }
            j["rows"].push_back(jr);
        }
        if (!table.trailer.empty()) j["trailer"] = table.trailer;
        write_atomic(path, j.dump(2) + "\n");
    }
}

inline void write_sidecar_log(const std::filesystem::path& out_path, const std::string& what) {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    std::ofstream os(out_path.string() + ".log", std::ios::app);
    char buf[64];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
    os << buf << " " << what << "\n";
}

inline std::string per_level_label(const std::vector<long>& per_level) {
    std::string s;
    for (std::size_t i = 0; i < per_level.size(); ++i)
        s += (i ? "x" : "") + std::to_string(per_level[i]);
    return s;
}

// Sets for the interpolation modes, per the configured source.
inline ConfigurationSets build_sets(const ExperimentConfig& cfg) {
    std::vector<Vec> xs, xbars, ys;
    if (cfg.set_source == "binary") {
        xs = perceptron::build_binary_sets(
            cfg.x_dim, perceptron::CornerSpec::random(cfg.set_size, cfg.sets_seed));
        xbars = xs;
        ys = perceptron::build_sphere_samples(cfg.y_dim, cfg.set_size, true, cfg.sets_seed);
    } else if (cfg.set_source == "sphere") {
        xs = perceptron::build_sphere_samples(cfg.x_dim, cfg.set_size, false, cfg.sets_seed);
        xbars = xs;
        ys = perceptron::build_sphere_samples(cfg.y_dim, cfg.set_size, true, cfg.sets_seed + 1);
    } else {
        std::ifstream is(cfg.set_file);
        if (!is) throw ValidationError("sets.file: cannot read '" + cfg.set_file + "'");
        std::string kind;
        std::vector<Vec>* dst = nullptr;
        std::string line;
        while (std::getline(is, line)) {
            line = detail::trim(line);
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            ls >> kind;
            if (kind == "x") dst = &xs;
            else if (kind == "xbar") dst = &xbars;
            else if (kind == "y") dst = &ys;
            else throw ValidationError("sets.file: rows must start with x | xbar | y");
            Vec v;
            double val;
            while (ls >> val) v.push_back(val);
            dst->push_back(std::move(v));
        }
        if (xbars.empty()) xbars = xs;
    }

    AnchorFn anchor = nullptr;
    if (cfg.anchor_nu != 0.0) anchor = perceptron::soft_anchor(cfg.anchor_nu, cfg.anchor_delta);
    std::vector<std::vector<int>> restriction;
    if (cfg.restrict_overlap)
        restriction = perceptron::build_overlap_restriction(xs, xbars, cfg.restrict_delta);
    return ConfigurationSets(std::move(xs), std::move(xbars), std::move(ys), std::move(anchor),
                             std::move(restriction));
}

inline McPlan build_plan(const ExperimentConfig& cfg, int r) {
    McPlan plan;
    plan.outer_samples = cfg.outer_samples;
    plan.per_level = cfg.per_level_samples;
    if (plan.per_level.size() < static_cast<std::size_t>(r))
        plan.per_level.resize(static_cast<std::size_t>(r),
                              plan.per_level.empty() ? 64 : plan.per_level.back());
    plan.per_level.resize(static_cast<std::size_t>(r));
    plan.seed = cfg.seed;
    return plan;
}

} // namespace detail

inline RunOutcome run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                 int threads = 1) {
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    const fs::path out_path = fs::path(out_dir) / cfg.output_path;
    RunOutcome outcome;
    outcome.output_file = out_path.string();
    ResultTable table;

    switch (cfg.mode) {
        case RunMode::psi_sweep: {
            const Schedule sched = validate_schedule(cfg.schedule);
            const ConfigurationSets sets = detail::build_sets(cfg);
            const McPlan plan = detail::build_plan(cfg, sched.r());
            table.columns = {"t", "psi", "stderr", "outer_samples", "per_level_samples", "seed"};
            for (double t : cfg.t_grid) {
                const MeanAndSe est = psi_estimate(sets, sched, t, plan, threads);
                table.add_row({t, est.value, est.se, static_cast<long long>(plan.outer_samples),
                               detail::per_level_label(plan.per_level),
                               static_cast<long long>(plan.seed)});
            }
            outcome.summary = {{"rows", std::to_string(table.rows.size())}};
            if (!table.rows.empty())
                outcome.summary["psi_last"] = detail::cell_to_string(table.rows.back()[1]);
            break;
        }
        case RunMode::derivative_check: {
            const Schedule sched = validate_schedule(cfg.schedule);
            const ConfigurationSets sets = detail::build_sets(cfg);
            const McPlan plan = detail::build_plan(cfg, sched.r());
            const auto rows = consistency_report(sets, sched, cfg.t_grid, cfg.fd_step, plan, threads);
            table.columns = {"r", "t", "h", "closed", "se_closed", "fd", "se_fd", "z", "seed", "samples"};
            long flagged = 0;
            for (const ConsistencyRow& row : rows) {
                flagged += row.flagged ? 1 : 0;
                table.add_row({static_cast<long long>(row.r), row.t, row.h, row.closed,
                               row.se_closed, row.fd, row.se_fd, row.z,
                               static_cast<long long>(row.seed),
                               std::to_string(plan.outer_samples) + "x" +
                                   detail::per_level_label(plan.per_level)});
            }
            const bool pass = flagged == 0;
            table.trailer.push_back(std::string("summary = ") + (pass ? "pass" : "fail"));
            outcome.summary = {
                {"rows", std::to_string(rows.size())},
                {"pass_fraction",
                 std::to_string(rows.empty() ? 1.0
                                             : 1.0 - static_cast<double>(flagged) /
                                                        static_cast<double>(rows.size()))},
                {"verdict", pass ? "pass" : "fail"},
            };
            break;
        }
        case RunMode::perceptron_census: {
            const perceptron::BinaryInstance inst =
                perceptron::make_binary_instance(cfg.x_dim, cfg.y_dim, cfg.seed);
            const perceptron::SolutionCensus census = perceptron::bp_ground_state(inst);
            std::ostringstream os;
            perceptron::write_census(census, inst, os);
            detail::write_atomic(out_path, os.str());
            detail::write_sidecar_log(out_path, "perceptron_census");
            std::ostringstream gse;
            gse.precision(17);
            gse << census.ground_state_energy;
            outcome.summary = {{"count", std::to_string(census.count)},
                               {"ground_state_energy", gse.str()}};
            return outcome;
        }
        case RunMode::local_entropy: {
            const perceptron::BinaryInstance inst =
                perceptron::make_binary_instance(cfg.x_dim, cfg.y_dim, cfg.seed);
            const perceptron::SolutionCensus census = perceptron::bp_ground_state(inst);
            const perceptron::ReferencePolicy policy =
                cfg.reference_policy == "all_corners" ? perceptron::ReferencePolicy::all_corners
                                                      : perceptron::ReferencePolicy::solutions_only;
            const auto curve = perceptron::local_entropy_curve(inst, census, policy);
            std::vector<int> ds = cfg.d_grid;
            if (ds.empty())
                for (int d = 0; d <= inst.n; ++d) ds.push_back(d);
            table.columns = {"n", "m", "alpha", "seed", "d", "overlap", "count", "sigma",
                             "reference_policy"};
            double max_sigma = 0.0;
            for (int d : ds) {
                if (d < 0 || d > inst.n) throw ValidationError("run.d_grid entry out of [0, n]");
                const auto& pt = curve[static_cast<std::size_t>(d)];
                table.add_row({static_cast<long long>(inst.n), static_cast<long long>(inst.m),
                               inst.alpha(), static_cast<long long>(inst.seed),
                               static_cast<long long>(pt.d), pt.overlap,
                               static_cast<long long>(pt.cluster_count),
                               pt.empty ? Cell{std::string()} : Cell{pt.sigma},
                               cfg.reference_policy});
                if (!pt.empty) max_sigma = std::max(max_sigma, pt.sigma);
            }
            std::ostringstream ms;
            ms.precision(17);
            ms << max_sigma;
            outcome.summary = {{"rows", std::to_string(table.rows.size())},
                               {"solutions", std::to_string(census.count)},
                               {"max_sigma", ms.str()}};
            break;
        }
        case RunMode::zero_temperature: {
            const auto xs = perceptron::build_binary_sets(
                cfg.x_dim, perceptron::CornerSpec::random(cfg.set_size, cfg.sets_seed));
            const auto ys =
                perceptron::build_sphere_samples(cfg.y_dim, cfg.set_size, true, cfg.sets_seed);
            table.columns = {"beta", "psi", "psi_se", "psi_scaled", "min_max", "gap", "psi_sign",
                             "min_max_sign", "seed", "outer_samples"};
            double last_gap = 0.0;
            for (double beta : cfg.beta_grid) {
                const auto rep = perceptron::zero_temperature_check(xs, ys, beta, cfg.seed,
                                                                    cfg.outer_samples, threads);
                last_gap = rep.gap;
                table.add_row({beta, rep.psi, rep.psi_se, rep.psi_scaled, rep.min_max, rep.gap,
                               static_cast<long long>(rep.psi_sign),
                               static_cast<long long>(rep.min_max_sign),
                               static_cast<long long>(cfg.seed),
                               static_cast<long long>(cfg.outer_samples)});
            }
            std::ostringstream gs;
            gs.precision(17);
            gs << last_gap;
            outcome.summary = {{"rows", std::to_string(table.rows.size())}, {"gap", gs.str()}};
            break;
        }
    }

    detail::write_table(out_path, cfg.format, cfg.resolved, table);
    detail::write_sidecar_log(out_path, "run " + cfg.resolved.at("run.mode"));
    return outcome;
}

inline RunOutcome run_experiment_file(const std::string& config_path, const std::string& out_dir,
                                      int threads = 1) {
    return run_experiment(load_config(config_path), out_dir, threads);
}

// One run per override value with derived seeds (base + index), collated
// into a summary table. The override key must name a scalar field.
inline std::string sweep(const std::string& config_path, const std::string& key,
                         const std::vector<std::string>& values, const std::string& out_dir,
                         int threads = 1) {
    namespace fs = std::filesystem;
    if (!known_config_keys().count(key)) throw ValidationError("sweep: unknown key '" + key + "'");
    if (!sweepable_config_keys().count(key))
        throw ValidationError("sweep: key '" + key + "' is not a scalar field");

    std::ifstream is(config_path);
    if (!is) throw ValidationError("config: cannot read '" + config_path + "'");
    const auto base_kv = parse_config_text(is);
    const ExperimentConfig base = resolve_config(base_kv);

    ResultTable summary;
    summary.columns = {"index", "key", "value", "seed", "output"};
    std::vector<std::string> extra_cols;

    for (std::size_t i = 0; i < values.size(); ++i) {
        auto kv = base_kv;
        kv[key] = values[i];
        kv["mc.seed"] = std::to_string(base.seed + i);
        const fs::path base_name = fs::path(base.output_path);
        kv["output.path"] =
            (base_name.stem().string() + "_" + std::to_string(i) + base_name.extension().string());
        const ExperimentConfig cfg = resolve_config(kv);
        const RunOutcome outcome = run_experiment(cfg, out_dir, threads);
        if (extra_cols.empty())
            for (const auto& [k, v] : outcome.summary) {
                extra_cols.push_back(k);
                summary.columns.push_back(k);
            }
        std::vector<Cell> row = {static_cast<long long>(i), key, values[i],
                                 std::to_string(base.seed + i), outcome.output_file};
        for (const std::string& k : extra_cols)
            row.push_back(outcome.summary.count(k) ? outcome.summary.at(k) : std::string());
        summary.add_row(std::move(row));
    }

    fs::create_directories(out_dir);
    const fs::path summary_path = fs::path(out_dir) / "sweep_summary.csv";
    std::map<std::string, std::string> header = base.resolved;
    header["sweep.key"] = key;
    detail::write_table(summary_path, OutputFormat::csv, header, summary);
    detail::write_sidecar_log(summary_path, "sweep " + key);
    return summary_path.string();
}

} // namespace blirp
