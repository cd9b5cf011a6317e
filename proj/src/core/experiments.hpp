#pragma once

#include "reporting.hpp"
#include "ssgan.hpp"

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ssgan {

inline constexpr const char* kOutputRootEnv = "SSGAN_OUTPUT_ROOT";

struct DataConfig {
    std::filesystem::path path;       // directory holding the four IDX files
    bool pad_to_32 = true;
    std::size_t unlabelled_limit = 0; // 0 keeps every unlabelled example
    std::size_t test_limit = 0;       // 0 keeps the whole test set
    double validation_fraction = 0.0; // carved from the training set before splitting
};

struct ExperimentConfig {
    DataConfig data;
    std::vector<int> counts{10};
    std::uint64_t split_seed = 0;
    std::vector<Scheme> schemes{Scheme::vanilla, Scheme::basic, Scheme::rejection};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    GanConfig gan;
    SelfTrainConfig selftrain;
    std::filesystem::path output_dir = "runs";
    std::string name = "run";
    int workers = 1;

    // Every key with its resolved value, in a fixed order.
    std::vector<std::pair<std::string, std::string>> snapshot() const;
};

// Result of checking a config text: the resolved config (defaults filled in
// wherever a value was missing or rejected) plus every problem found.
struct ConfigCheck {
    ExperimentConfig config;
    std::vector<std::string> errors;  // each starts with the offending key
};

// Named parameter sets layered between the built-in defaults and the file.
std::vector<std::string> preset_names();
std::vector<std::pair<std::string, std::string>> preset_values(const std::string& name);

ConfigCheck check_config(const std::string& text, const std::optional<std::string>& preset = std::nullopt);
// Throws a validation error listing every problem.
ExperimentConfig validate_config(const std::string& text, const std::optional<std::string>& preset = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& preset = std::nullopt);

enum class CellStatus { pending, running, done, failed };
const char* cell_status_name(CellStatus s);
CellStatus parse_cell_status(const std::string& s);

struct CellEntry {
    CellKey key;
    std::uint64_t seed = 0;
    CellStatus status = CellStatus::pending;
    std::string dir;    // relative to the run directory
    std::string error;  // set when failed

    bool operator==(const CellEntry&) const = default;
};

struct RunManifest {
    std::vector<std::pair<std::string, std::string>> config;
    std::string seed_rule;
    std::vector<CellEntry> cells;

    bool operator==(const RunManifest&) const = default;
    std::size_t count(CellStatus s) const;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& run_dir);

// Cells in grid order: scheme, then count, then seed.
std::vector<CellEntry> plan_cells(const ExperimentConfig& cfg);
std::uint64_t cell_seed(const ExperimentConfig& cfg, int count, std::uint64_t seed_value);

std::filesystem::path run_directory(const ExperimentConfig& cfg);

struct RunOptions {
    bool resume = false;
    int workers = 0;  // 0 uses the config's value
    // Stops launching new cells once this many have been executed in this
    // invocation; the rest stay pending (used to simulate interruptions).
    std::optional<std::size_t> max_cells;
    std::function<void(const std::string&)> log;
};

struct RunOutcome {
    RunManifest manifest;
    std::filesystem::path run_dir;
    bool complete = false;  // every cell done
};

// Runs every grid cell not already done, then writes metrics.csv and the
// error-vs-round plot when the grid is complete.
RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options = {});

// Regenerates metrics.csv, notes.txt and the plot from a run directory. The
// plot defaults to error_vs_round.svg inside it.
std::vector<MetricsRow> write_report(const std::filesystem::path& run_dir,
                                     const std::optional<std::filesystem::path>& plot = std::nullopt);

}  // namespace ssgan
