// dvhsmooth command line: runs or validates one experiment config.
//
// Exit status: 0 success, 1 runtime or numerical failure (including an
// experiment whose own expectation failed), 2 config or usage error.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "dvhsmooth/dvhsmooth.h"

namespace {

int report(dvhs_status s) {
    std::fprintf(stderr, "dvhsmooth: %s: %s\n", dvhs_status_string(s), dvhs_last_error());
    return s == DVHS_CONFIG ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dose-volume objective smoothness experiments"};
    app.require_subcommand(1);

    std::string run_config, out_dir = "out";
    bool verbose = false;
    auto* run = app.add_subcommand("run", "Run an experiment and write its CSV and JSON outputs");
    run->add_option("config", run_config, "Experiment config (JSON)")->required();
    run->add_option("--out-dir", out_dir, "Output directory (created if missing)");
    run->add_flag("--verbose", verbose, "Progress messages on stderr");

    std::string validate_config;
    auto* validate = app.add_subcommand("validate", "Check a config without running it");
    validate->add_option("config", validate_config, "Experiment config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (*validate) {
        const dvhs_status s = dvhs_validate_config(validate_config.c_str());
        if (s != DVHS_OK) return report(s);
        std::printf("%s: ok\n", validate_config.c_str());
        return 0;
    }

    int met = 1;
    const dvhs_status s = dvhs_run_experiment(run_config.c_str(), out_dir.c_str(), verbose ? 1 : 0, &met);
    if (s != DVHS_OK) return report(s);
    if (!met) {
        std::fprintf(stderr, "dvhsmooth: expectation not met: %s\n", dvhs_last_error());
        return 1;
    }
    return 0;
}
