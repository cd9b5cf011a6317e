#include "ssgan/ssgan.h"

#include "CLI11.hpp"

#include <cstdio>
#include <iostream>
#include <string>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitPartial = 2;

int report_failure(ssgan_status st, const char* what) {
    std::cerr << "error (" << ssgan_status_name(st) << "): " << what << ": " << ssgan_last_error() << "\n";
    // Anything that is not a cell failure is a problem with the request.
    return kExitValidation;
}

void print_line(const char* line, void*) {
    std::cerr << line << std::endl;
}

int cmd_validate(const std::string& config, const std::string& preset) {
    char* report = nullptr;
    const ssgan_status st = ssgan_config_check(config.c_str(), preset.empty() ? nullptr : preset.c_str(), &report);
    if (st == SSGAN_OK) {
        ssgan_string_free(report);
        ssgan_config* cfg = nullptr;
        if (ssgan_config_load(config.c_str(), preset.empty() ? nullptr : preset.c_str(), &cfg) != SSGAN_OK)
            return report_failure(SSGAN_ERR_VALIDATION, "validate");
        char* dump = nullptr;
        ssgan_config_dump(cfg, &dump);
        std::cout << dump << "# " << ssgan_config_cell_count(cfg) << " cells\n";
        ssgan_string_free(dump);
        ssgan_config_free(cfg);
        return kExitOk;
    }
    if (st == SSGAN_ERR_VALIDATION && report) {
        std::cerr << config << " is invalid:\n" << report;
        ssgan_string_free(report);
        return kExitValidation;
    }
    ssgan_string_free(report);
    return report_failure(st, "validate");
}

int cmd_run(const std::string& config, const std::string& preset, int workers, bool resume) {
    ssgan_config* cfg = nullptr;
    ssgan_status st = ssgan_config_load(config.c_str(), preset.empty() ? nullptr : preset.c_str(), &cfg);
    if (st != SSGAN_OK) return report_failure(st, config.c_str());

    ssgan_run_options opts;
    ssgan_run_options_init(&opts);
    opts.resume = resume ? 1 : 0;
    opts.workers = workers;
    opts.log = print_line;

    ssgan_run* run = nullptr;
    st = ssgan_run_start(cfg, &opts, &run);
    ssgan_config_free(cfg);
    if (st != SSGAN_OK) return report_failure(st, "run");

    const std::size_t total = ssgan_run_cells(run);
    const std::size_t done = ssgan_run_cells_done(run);
    const std::size_t failed = ssgan_run_cells_failed(run);
    std::cout << ssgan_run_dir(run) << ": " << done << "/" << total << " cells done";
    if (failed) std::cout << ", " << failed << " failed";
    std::cout << "\n";
    const bool complete = ssgan_run_complete(run) != 0;
    ssgan_run_free(run);
    return complete ? kExitOk : kExitPartial;
}

int cmd_report(const std::string& run_dir, const std::string& plot) {
    char* csv = nullptr;
    const ssgan_status st = ssgan_report(run_dir.c_str(), plot.empty() ? nullptr : plot.c_str(), &csv);
    if (st != SSGAN_OK) return report_failure(st, "report");
    std::cout << csv;
    ssgan_string_free(csv);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Semi-supervised GAN self-training experiments"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(ssgan_version()));

    std::string config;
    std::string preset;
    int workers = 0;
    bool resume = false;
    std::string run_dir;
    std::string plot;

    auto* run = app.add_subcommand("run", "Run (or resume) an experiment grid");
    run->add_option("--config", config, "Config file")->required();
    run->add_option("--preset", preset, "Parameter preset applied under the file")
        ->check(CLI::IsMember({"desk", "paper"}));
    run->add_option("--workers", workers, "Concurrent grid cells")->check(CLI::PositiveNumber);
    run->add_flag("--resume", resume, "Continue an interrupted run");

    auto* validate = app.add_subcommand("validate", "Check a config file and print the resolved values");
    validate->add_option("--config", config, "Config file")->required();
    validate->add_option("--preset", preset, "Parameter preset applied under the file")
        ->check(CLI::IsMember({"desk", "paper"}));

    auto* report = app.add_subcommand("report", "Rebuild metrics.csv and the plot of a run");
    report->add_option("--run-dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    report->add_option("--plot", plot, "SVG output path (default <run-dir>/error_vs_round.svg)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    if (*run) return cmd_run(config, preset, workers, resume);
    if (*validate) return cmd_validate(config, preset);
    return cmd_report(run_dir, plot);
}
