#pragma once

#include "selftrain.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace ssgan {

// Fraction of real-source pseudo-labels that match the hidden true label.
// Generated examples have no true label and are ignored; absent when no
// real-source record exists.
std::optional<double> pseudo_label_accuracy(const std::map<ExampleId, PseudoLabelRecord>& added,
                                            const ShadowLabels& shadow);
std::optional<double> pseudo_label_accuracy(const std::vector<PseudoLabelRecord>& records,
                                            const ShadowLabels& shadow);

// Identifies one grid cell.
struct CellKey {
    Scheme scheme = Scheme::vanilla;
    int count = 0;
    int seed_index = 0;

    auto operator<=>(const CellKey&) const = default;
    std::string dir_name() const;  // e.g. "basic-c10-s1"
};

// One line of a cell's rounds.jsonl.
struct RoundRow {
    CellKey cell;
    int round = 0;
    bool final = false;
    std::optional<double> test_error;
    std::optional<double> validation_error;
    double train_error = 0.0;
    std::size_t candidates_before = 0;
    std::size_t confident_count = 0;
    std::size_t added = 0;
    std::size_t labelled_size = 0;
    std::size_t unlabelled_size = 0;
    std::optional<double> pseudo_label_accuracy;
    std::vector<double> disagreements;
    std::optional<int> selected_subset;
    std::vector<std::string> events;

    static RoundRow from_record(const CellKey& cell, const RoundRecord& r);
};

void to_json(nlohmann::json& j, const RoundRow& r);
void from_json(const nlohmann::json& j, RoundRow& r);

// A finished cell's metrics.json.
struct CellMetrics {
    CellKey cell;
    std::uint64_t seed = 0;
    double best_error = 0.0;           // minimum test error over every round
    int best_round = 0;
    std::size_t selected_index = 0;    // the model self-training returned
    bool selected_by_train_error = false;
    std::optional<double> pseudo_label_acc;
    double mean_added = 0.0;           // per self-training round
    std::size_t total_added = 0;
    std::size_t real_added = 0;
    std::size_t real_candidates = 0;   // |U| before self-training
    std::vector<double> round_errors;
};

void to_json(nlohmann::json& j, const CellMetrics& m);
void from_json(const nlohmann::json& j, CellMetrics& m);

CellMetrics cell_metrics(const CellKey& cell, std::uint64_t seed, const SelfTrainResult& result,
                         std::size_t real_candidates);

struct MetricsRow {
    Scheme scheme = Scheme::vanilla;
    int count = 0;
    double mean_error = 0.0;
    double std_error = 0.0;
    std::optional<double> mean_improvement;
    std::optional<double> std_improvement;
    std::optional<double> pseudo_label_acc;
    double mean_added = 0.0;
    std::size_t n_seeds = 0;
    // Fewer than two seeds: the std columns are 0 by convention.
    bool single_seed = false;

    bool operator==(const MetricsRow&) const = default;
};

// Rows ordered by scheme (vanilla, basic, rejection) then count.
std::vector<MetricsRow> summarize(const std::vector<CellMetrics>& cells);

std::vector<CellMetrics> load_cell_metrics(const std::filesystem::path& run_dir);
std::vector<RoundRow> load_round_rows(const std::filesystem::path& run_dir);
std::vector<MetricsRow> summarize(const std::filesystem::path& run_dir);

inline constexpr const char* kCsvHeader =
    "scheme,count,mean_error,std_error,mean_improvement,std_improvement,pseudo_label_acc,mean_added";

// Six significant digits; absent values are empty fields.
std::string format_csv(const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> parse_csv(const std::string& text);
void write_text_atomic(const std::filesystem::path& path, const std::string& text);

// Per-row remarks the fixed CSV schema has no room for.
std::vector<std::string> summary_notes(const std::vector<MetricsRow>& rows);

struct ErrorSeries {
    Scheme scheme = Scheme::vanilla;
    int count = 0;
    std::vector<int> rounds;
    std::vector<double> mean;
    std::vector<double> std;
    bool has_band = false;  // more than one seed contributed
};

std::vector<ErrorSeries> error_vs_round(const std::vector<RoundRow>& rows);
std::string render_svg(const std::vector<ErrorSeries>& series);
// Writes an SVG of mean test error against round with +/-1 std bands.
void plot_error_vs_round(const std::filesystem::path& run_dir, const std::filesystem::path& out);

}  // namespace ssgan
