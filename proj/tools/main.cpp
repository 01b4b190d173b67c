#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cli_commands.hpp"
#include "vcx/errors.hpp"

int main(int argc, char** argv) {
    CLI::App app{"video counterfactual explanation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, component, run_dir, target_path, report_dir;
    std::optional<std::uint64_t> seed;
    std::size_t workers = 2;

    auto add_seed = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "override the config seed");
    };

    auto* dataset = app.add_subcommand("dataset", "generate a synthetic dataset");
    dataset->add_option("--config", config_path, "dataset config JSON")->required();
    dataset->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "train a codec, denoiser, or target");
    train->add_option("--component", component, "codec|denoiser|target")->required();
    train->add_option("--config", config_path, "training config JSON")->required();
    train->add_option("--out", out_dir, "checkpoint directory")->required();
    add_seed(train);

    auto* generate = app.add_subcommand("generate", "generate counterfactuals for an eval set");
    generate->add_option("--config", config_path, "run config JSON")->required();
    generate->add_option("--out", out_dir, "run output directory")->required();
    generate->add_option("--workers", workers, "parallel videos");
    add_seed(generate);

    auto* sweep = app.add_subcommand("sweep", "run a hyperparameter grid");
    sweep->add_option("--config", config_path, "sweep spec JSON")->required();
    sweep->add_option("--out", out_dir, "sweep output directory")->required();
    sweep->add_option("--workers", workers, "parallel sweep points");
    add_seed(sweep);

    auto* evaluate = app.add_subcommand("evaluate", "compute metrics for a stored run");
    evaluate->add_option("--run", run_dir, "generate output directory")->required();
    evaluate->add_option("--target", target_path, "target checkpoint override");
    evaluate->add_option("--out", out_dir, "metrics output file");

    auto* report = app.add_subcommand("report", "emit tables and frame grids");
    report->add_option("--dir", report_dir, "run or sweep directory")->required();
    report->add_option("--out", out_dir, "report output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (dataset->parsed()) return vcx::cli::cmd_dataset(config_path, out_dir);
        if (train->parsed()) return vcx::cli::cmd_train(component, config_path, out_dir, seed);
        if (generate->parsed()) return vcx::cli::cmd_generate(config_path, out_dir, seed, workers);
        if (sweep->parsed()) return vcx::cli::cmd_sweep(config_path, out_dir, seed, workers);
        if (evaluate->parsed()) return vcx::cli::cmd_evaluate(run_dir, target_path, out_dir);
        if (report->parsed()) return vcx::cli::cmd_report(report_dir, out_dir);
    } catch (const vcx::ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const vcx::CompatError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const vcx::StateError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 1;
    }
    return 2;
}
