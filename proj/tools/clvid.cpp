// clvid: dataset generation, experiment runs, sweeps and report inspection.
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "clvid/cli/commands.hpp"

using namespace clvid;

int main(int argc, char** argv) {
    CLI::App app{"Continual-learning experiments on synthetic video clips"};
    app.require_subcommand(1);

    std::string config_path, run_dir, clip_path;
    bool force = false;
    std::size_t workers = 0;
    std::size_t experiment = 0;

    auto* gen = app.add_subcommand("gen-data", "Write the synthetic dataset described by a config");
    gen->add_option("--config", config_path, "Config file")->required();
    gen->add_flag("--force", force, "Overwrite a non-empty dataset directory");

    auto* run = app.add_subcommand("run", "Train and evaluate every sampled problem");
    run->add_option("--config", config_path, "Config file")->required();
    auto* workers_opt = run->add_option("--workers", workers, "Parallel experiments")->check(CLI::PositiveNumber);

    auto* sweep = app.add_subcommand("sweep", "Run the buffer x delta x IDD grid on a shared problem set");
    sweep->add_option("--config", config_path, "Config file")->required();

    auto* inspect = app.add_subcommand("flow-inspect", "Print a clip's optical-flow transition norms as CSV");
    inspect->add_option("clip", clip_path, "Clip file (.vclp)")->required();

    auto* dump = app.add_subcommand("buffer-dump", "Print the stored buffer listings of a run");
    dump->add_option("run_dir", run_dir, "Run directory")->required();
    auto* exp_opt = dump->add_option("--experiment", experiment, "Only this experiment id");

    auto* report = app.add_subcommand("report", "Summarize a run's report.csv");
    report->add_option("run_dir", run_dir, "Run directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? cli::kExitOk : cli::kExitValidation;
    }

    try {
        if (*gen) return cli::cmd_gen_data(cli::load_config(config_path), force, std::cout);
        if (*run)
            return cli::cmd_run(cli::load_config(config_path),
                                *workers_opt ? std::optional<std::size_t>(workers) : std::nullopt, std::cout, std::cerr);
        if (*sweep) return cli::cmd_sweep(cli::load_config(config_path), std::cout, std::cerr);
        if (*inspect) return cli::cmd_flow_inspect(clip_path, std::cout);
        if (*dump)
            return cli::cmd_buffer_dump(run_dir, *exp_opt ? std::optional<std::size_t>(experiment) : std::nullopt, std::cout);
        if (*report) return cli::cmd_report(run_dir, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitValidation;
    } catch (const ProtocolError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kExitRuntime;
    }
    return cli::kExitOk;
}
