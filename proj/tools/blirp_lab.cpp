// Command-line driver: run one experiment config, or sweep one scalar key
// over a list of values. Exit codes: 0 success, 2 config error, 3 numerical
// failure, 1 anything else.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "blirp/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"fully lifted bilinear interpolation lab"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = ".";
    int threads = 1;

    CLI::App* run = app.add_subcommand("run", "run one experiment config");
    run->add_option("config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--threads", threads, "worker threads (speed only, never results)");

    std::string sweep_key;
    std::string sweep_values;
    CLI::App* sw = app.add_subcommand("sweep", "run one config per override value");
    sw->add_option("config", config_path, "config file")->required();
    sw->add_option("--key", sweep_key, "scalar config key to override")->required();
    sw->add_option("--values", sweep_values, "comma-separated override values")->required();
    sw->add_option("--out", out_dir, "output directory");
    sw->add_option("--threads", threads, "worker threads (speed only, never results)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) {
            const blirp::RunOutcome outcome =
                blirp::run_experiment_file(config_path, out_dir, threads);
            std::cout << outcome.output_file << "\n";
            for (const auto& [k, v] : outcome.summary) std::cout << k << " = " << v << "\n";
        } else {
            std::vector<std::string> values;
            for (const std::string& v : blirp::detail::split(sweep_values, ','))
                if (!v.empty()) values.push_back(v);
            const std::string summary = blirp::sweep(config_path, sweep_key, values, out_dir, threads);
            std::cout << summary << "\n";
        }
    } catch (const blirp::ValidationError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const blirp::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
