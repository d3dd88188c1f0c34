#include "diffeolab/parallel.hpp"
#include "diffeolab/runner.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <thread>

int main(int argc, char** argv) {
    CLI::App app{"diffeolab: diffeomorphism actions on sampled fields and equivariance-defect tests"};
    app.require_subcommand(1, 1);
    app.fallthrough();

    std::string config;
    std::string out_dir = "out";
    int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    bool verbose = false;
    app.add_option("--config", config, "Experiment config (JSON); defaults are used when omitted");
    app.add_option("--out", out_dir, "Output directory, created if missing");
    app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_flag("--verbose", verbose, "Progress on stderr");

    const std::pair<const char*, const char*> commands[] = {
        {"defect", "Falsification suites for every configured operator"},
        {"decay", "Contraction decay curves across d and p"},
        {"suite", "All module checks with a scoreboard"},
        {"norm-bound", "Operator-norm estimates against the analytic bound"},
        {"vitali", "Local Vitali ball packing"},
        {"zoo", "Demonstrations for the sup, phase and sqrt operators"},
    };
    for (const auto& [name, help] : commands) app.add_subcommand(name, help);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : diffeolab::kExitConfig;
    }

    diffeolab::set_thread_count(threads);
    diffeolab::RunOptions opts;
    opts.out_dir = out_dir;
    opts.verbose = verbose;
    opts.console = &std::cout;
    opts.log = &std::cerr;
    return diffeolab::run_command(app.get_subcommands().front()->get_name(), config, opts);
}
