#include "ssgan/ssgan.h"

#include "experiments.hpp"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

struct ssgan_config {
    ssgan::ExperimentConfig config;
};

struct ssgan_run {
    ssgan::RunOutcome outcome;
    std::string dir;
};

namespace {

thread_local std::string last_error;

ssgan_status remember(ssgan::ErrorCode code, const std::string& what) {
    last_error = what;
    return static_cast<ssgan_status>(code);
}

template <typename F>
ssgan_status guarded(F&& f) {
    try {
        last_error.clear();
        f();
        return SSGAN_OK;
    } catch (const ssgan::Error& e) {
        return remember(e.code(), e.what());
    } catch (const std::bad_alloc&) {
        return remember(ssgan::ErrorCode::internal, "out of memory");
    } catch (const std::exception& e) {
        return remember(ssgan::ErrorCode::internal, e.what());
    } catch (...) {
        return remember(ssgan::ErrorCode::internal, "unknown failure");
    }
}

char* copy_out(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::optional<std::string> opt(const char* s) {
    if (s && *s) return std::string(s);
    return std::nullopt;
}

void need(const void* p, const char* name) {
    if (!p) ssgan::fail(ssgan::ErrorCode::invalid_argument, std::string(name) + " is NULL");
}

}  // namespace

extern "C" {

const char* ssgan_version(void) { return "1.0.0"; }

const char* ssgan_status_name(ssgan_status status) {
    return ssgan::error_code_name(static_cast<ssgan::ErrorCode>(status));
}

const char* ssgan_last_error(void) { return last_error.c_str(); }

void ssgan_string_free(char* s) { std::free(s); }

ssgan_status ssgan_config_load(const char* path, const char* preset, ssgan_config** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        auto cfg = ssgan::load_config(path, opt(preset));
        *out = new ssgan_config{std::move(cfg)};
    });
}

ssgan_status ssgan_config_check(const char* path, const char* preset, char** report) {
    std::string text;
    ssgan_status st = guarded([&] {
        need(path, "path");
        need(report, "report");
        *report = nullptr;
        try {
            ssgan::load_config(path, opt(preset));
        } catch (const ssgan::Error& e) {
            if (e.code() != ssgan::ErrorCode::validation) throw;
            const std::string msg = e.what();
            const auto nl = msg.find('\n');
            // Drop the "invalid config:" heading and the indentation.
            if (nl == std::string::npos) {
                text = msg + "\n";
            } else {
                std::string rest = msg.substr(nl + 1);
                std::size_t pos = 0;
                while (pos < rest.size()) {
                    auto end = rest.find('\n', pos);
                    if (end == std::string::npos) end = rest.size();
                    std::string line = rest.substr(pos, end - pos);
                    if (line.rfind("  ", 0) == 0) line.erase(0, 2);
                    text += line + "\n";
                    pos = end + 1;
                }
            }
            throw;
        }
    });
    if (report && (st == SSGAN_OK || st == SSGAN_ERR_VALIDATION)) {
        try {
            *report = copy_out(text);
        } catch (...) {
            return remember(ssgan::ErrorCode::internal, "out of memory");
        }
    }
    return st;
}

ssgan_status ssgan_config_dump(const ssgan_config* config, char** text) {
    return guarded([&] {
        need(config, "config");
        need(text, "text");
        std::string out;
        for (const auto& [k, v] : config->config.snapshot()) out += k + " = " + v + "\n";
        *text = copy_out(out);
    });
}

ssgan_status ssgan_config_run_dir(const ssgan_config* config, char** path) {
    return guarded([&] {
        need(config, "config");
        need(path, "path");
        *path = copy_out(ssgan::run_directory(config->config).string());
    });
}

size_t ssgan_config_cell_count(const ssgan_config* config) {
    return config ? ssgan::plan_cells(config->config).size() : 0;
}

void ssgan_config_free(ssgan_config* config) { delete config; }

void ssgan_run_options_init(ssgan_run_options* options) {
    if (!options) return;
    options->resume = 0;
    options->workers = 0;
    options->max_cells = -1;
    options->log = nullptr;
    options->log_user = nullptr;
}

ssgan_status ssgan_run_start(const ssgan_config* config, const ssgan_run_options* options, ssgan_run** out) {
    return guarded([&] {
        need(config, "config");
        need(out, "out");
        *out = nullptr;
        ssgan::RunOptions opts;
        if (options) {
            opts.resume = options->resume != 0;
            opts.workers = options->workers;
            if (options->max_cells >= 0) opts.max_cells = static_cast<std::size_t>(options->max_cells);
            if (options->log) {
                auto fn = options->log;
                void* user = options->log_user;
                opts.log = [fn, user](const std::string& line) { fn(line.c_str(), user); };
            }
        }
        auto run = std::make_unique<ssgan_run>();
        run->outcome = ssgan::run_experiment(config->config, opts);
        run->dir = run->outcome.run_dir.string();
        *out = run.release();
    });
}

int ssgan_run_complete(const ssgan_run* run) { return run && run->outcome.complete ? 1 : 0; }

size_t ssgan_run_cells(const ssgan_run* run) { return run ? run->outcome.manifest.cells.size() : 0; }

size_t ssgan_run_cells_done(const ssgan_run* run) {
    return run ? run->outcome.manifest.count(ssgan::CellStatus::done) : 0;
}

size_t ssgan_run_cells_failed(const ssgan_run* run) {
    return run ? run->outcome.manifest.count(ssgan::CellStatus::failed) : 0;
}

const char* ssgan_run_dir(const ssgan_run* run) { return run ? run->dir.c_str() : ""; }

void ssgan_run_free(ssgan_run* run) { delete run; }

ssgan_status ssgan_report(const char* run_dir, const char* plot_path, char** csv) {
    return guarded([&] {
        need(run_dir, "run_dir");
        std::optional<std::filesystem::path> plot;
        if (plot_path && *plot_path) plot = plot_path;
        const auto rows = ssgan::write_report(run_dir, plot);
        if (csv) *csv = copy_out(ssgan::format_csv(rows));
    });
}

}  // extern "C"
