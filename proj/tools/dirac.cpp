#include "dirac/commands.hpp"

#include <CLI11.hpp>

#include <thread>

int main(int argc, char** argv) {
    CLI::App app{"Stochastic degradation processes: scheduling, training, sampling and verification"};
    app.require_subcommand(1, 1);

    std::string config_path;
    std::size_t jobs = 1;
    std::string out_dir;
    std::vector<std::string> suites;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "INI configuration file")->required()->check(CLI::ExistingFile);
        cmd->add_option("--jobs", jobs, "worker threads (0 = all cores)")->check(CLI::Range(0, 1024));
        cmd->add_option("--out", out_dir, "output directory (overrides [output] dir)");
    };
    auto* schedule = app.add_subcommand("schedule", "greedy degradation schedule from a distance table");
    auto* train = app.add_subcommand("train", "train the per-bin affine denoiser");
    auto* sample = app.add_subcommand("sample", "run the reverse sampler on one measurement");
    auto* verify = app.add_subcommand("verify", "run verification suites and print PASS/FAIL");
    auto* sweep = app.add_subcommand("sweep", "perception-distortion and robustness sweeps");
    for (auto* cmd : {schedule, train, sample, verify, sweep}) add_common(cmd);
    verify->add_option("--suite", suites, "suite to run (repeatable; default all)")
        ->check(CLI::IsMember(dirac::verify_suite_names()));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? dirac::exit_ok : dirac::exit_usage;
    }

    try {
        auto cfg = dirac::load_config(config_path);
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        if (jobs == 0) jobs = std::max(1U, std::thread::hardware_concurrency());
        const dirac::CommandContext ctx{std::cout, std::cerr, jobs};
        if (*schedule) return dirac::cmd_schedule(cfg, ctx);
        if (*train) return dirac::cmd_train(cfg, ctx);
        if (*sample) return dirac::cmd_sample(cfg, ctx);
        if (*verify) return dirac::cmd_verify(cfg, ctx, suites);
        if (*sweep) return dirac::cmd_sweep(cfg, ctx);
    } catch (const dirac::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return dirac::exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return dirac::exit_failure;
    }
    return dirac::exit_usage;
}
