#include "reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace ssgan {

namespace {

using nlohmann::json;

const std::filesystem::path kCellsDir = "cells";

template <typename T>
void put_optional(json& j, const char* key, const std::optional<T>& v) {
    j[key] = v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> get_optional(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<T>();
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Sample standard deviation; 0 for fewer than two values.
double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string fmt6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string fmt6(const std::optional<double>& v) {
    return v ? fmt6(*v) : std::string();
}

std::vector<std::filesystem::path> cell_dirs(const std::filesystem::path& run_dir) {
    const auto root = run_dir / kCellsDir;
    require(std::filesystem::is_directory(root), ErrorCode::io, "no cells directory under " + run_dir.string());
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root))
        if (e.is_directory()) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::format, "malformed " + path.string() + ": " + e.what());
    }
}

int scheme_rank(Scheme s) {
    return static_cast<int>(s);
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::optional<double> pseudo_label_accuracy(const std::map<ExampleId, PseudoLabelRecord>& added,
                                            const ShadowLabels& shadow) {
    std::size_t real = 0;
    std::size_t correct = 0;
    for (const auto& [id, rec] : added) {
        if (rec.source != Source::real) continue;
        const auto it = shadow.find(id);
        require(it != shadow.end(), ErrorCode::consistency, "no true label for real example " + std::to_string(id));
        ++real;
        correct += it->second == rec.label;
    }
    if (real == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(real);
}

std::optional<double> pseudo_label_accuracy(const std::vector<PseudoLabelRecord>& records,
                                            const ShadowLabels& shadow) {
    std::map<ExampleId, PseudoLabelRecord> by_id;
    for (const auto& r : records) by_id[r.id] = r;
    return pseudo_label_accuracy(by_id, shadow);
}

std::string CellKey::dir_name() const {
    return std::string(scheme_name(scheme)) + "-c" + std::to_string(count) + "-s" + std::to_string(seed_index);
}

RoundRow RoundRow::from_record(const CellKey& cell, const RoundRecord& r) {
    RoundRow row;
    row.cell = cell;
    row.round = r.round;
    row.final = r.final;
    row.test_error = r.test_error;
    row.validation_error = r.validation_error;
    row.train_error = r.train_error;
    row.candidates_before = r.candidates_before;
    row.confident_count = r.confident_count;
    row.added = r.added;
    row.labelled_size = r.labelled_size;
    row.unlabelled_size = r.unlabelled_size;
    row.pseudo_label_accuracy = r.pseudo_label_accuracy;
    row.disagreements = r.disagreements;
    row.selected_subset = r.selected_subset;
    row.events = r.events;
    return row;
}

void to_json(json& j, const RoundRow& r) {
    j = json{{"scheme", scheme_name(r.cell.scheme)},
             {"count", r.cell.count},
             {"seed_index", r.cell.seed_index},
             {"round", r.round},
             {"final", r.final},
             {"train_error", r.train_error},
             {"candidates_before", r.candidates_before},
             {"confident_count", r.confident_count},
             {"added", r.added},
             {"labelled_size", r.labelled_size},
             {"unlabelled_size", r.unlabelled_size},
             {"disagreements", r.disagreements},
             {"events", r.events}};
    put_optional(j, "test_error", r.test_error);
    put_optional(j, "validation_error", r.validation_error);
    put_optional(j, "pseudo_label_accuracy", r.pseudo_label_accuracy);
    put_optional(j, "selected_subset", r.selected_subset);
}

void from_json(const json& j, RoundRow& r) {
    r.cell.scheme = parse_scheme(j.at("scheme").get<std::string>());
    r.cell.count = j.at("count").get<int>();
    r.cell.seed_index = j.at("seed_index").get<int>();
    r.round = j.at("round").get<int>();
    r.final = j.at("final").get<bool>();
    r.train_error = j.at("train_error").get<double>();
    r.candidates_before = j.at("candidates_before").get<std::size_t>();
    r.confident_count = j.at("confident_count").get<std::size_t>();
    r.added = j.at("added").get<std::size_t>();
    r.labelled_size = j.at("labelled_size").get<std::size_t>();
    r.unlabelled_size = j.at("unlabelled_size").get<std::size_t>();
    r.disagreements = j.at("disagreements").get<std::vector<double>>();
    r.events = j.at("events").get<std::vector<std::string>>();
    r.test_error = get_optional<double>(j, "test_error");
    r.validation_error = get_optional<double>(j, "validation_error");
    r.pseudo_label_accuracy = get_optional<double>(j, "pseudo_label_accuracy");
    r.selected_subset = get_optional<int>(j, "selected_subset");
}

void to_json(json& j, const CellMetrics& m) {
    j = json{{"scheme", scheme_name(m.cell.scheme)},
             {"count", m.cell.count},
             {"seed_index", m.cell.seed_index},
             {"seed", m.seed},
             {"best_error", m.best_error},
             {"best_round", m.best_round},
             {"selected_index", m.selected_index},
             {"selected_by_train_error", m.selected_by_train_error},
             {"mean_added", m.mean_added},
             {"total_added", m.total_added},
             {"real_added", m.real_added},
             {"real_candidates", m.real_candidates},
             {"round_errors", m.round_errors}};
    put_optional(j, "pseudo_label_acc", m.pseudo_label_acc);
}

void from_json(const json& j, CellMetrics& m) {
    m.cell.scheme = parse_scheme(j.at("scheme").get<std::string>());
    m.cell.count = j.at("count").get<int>();
    m.cell.seed_index = j.at("seed_index").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.best_error = j.at("best_error").get<double>();
    m.best_round = j.at("best_round").get<int>();
    m.selected_index = j.at("selected_index").get<std::size_t>();
    m.selected_by_train_error = j.at("selected_by_train_error").get<bool>();
    m.mean_added = j.at("mean_added").get<double>();
    m.total_added = j.at("total_added").get<std::size_t>();
    m.real_added = j.at("real_added").get<std::size_t>();
    m.real_candidates = j.at("real_candidates").get<std::size_t>();
    m.round_errors = j.at("round_errors").get<std::vector<double>>();
    m.pseudo_label_acc = get_optional<double>(j, "pseudo_label_acc");
}

CellMetrics cell_metrics(const CellKey& cell, std::uint64_t seed, const SelfTrainResult& result,
                         std::size_t real_candidates) {
    require(!result.rounds.empty(), ErrorCode::empty_input, "cell produced no rounds");
    CellMetrics m;
    m.cell = cell;
    m.seed = seed;
    m.selected_index = result.best_index;
    m.selected_by_train_error = result.selected_by_train_error;
    m.real_candidates = real_candidates;
    m.best_error = std::numeric_limits<double>::infinity();
    std::size_t st_rounds = 0;
    for (const auto& r : result.rounds) {
        require(r.test_error.has_value(), ErrorCode::consistency, "round without a test error");
        m.round_errors.push_back(*r.test_error);
        if (*r.test_error < m.best_error) {
            m.best_error = *r.test_error;
            m.best_round = r.round;
        }
        if (!r.final) {
            ++st_rounds;
            m.total_added += r.added;
        }
        if (r.pseudo_label_accuracy) m.pseudo_label_acc = r.pseudo_label_accuracy;
    }
    if (cell.scheme == Scheme::vanilla) st_rounds = 0;
    m.mean_added = st_rounds == 0 ? 0.0 : static_cast<double>(m.total_added) / static_cast<double>(st_rounds);
    for (const auto& [id, rec] : result.pool.added) m.real_added += rec.source == Source::real;
    return m;
}

std::vector<MetricsRow> summarize(const std::vector<CellMetrics>& cells) {
    std::map<std::pair<int, int>, std::vector<const CellMetrics*>> groups;  // (scheme rank, count)
    std::set<CellKey> seen;
    for (const auto& c : cells) {
        require(seen.insert(c.cell).second, ErrorCode::consistency, "duplicate metrics for cell " + c.cell.dir_name());
        require(c.best_error >= 0.0 && c.best_error <= 1.0, ErrorCode::consistency,
                "best error outside [0, 1] in cell " + c.cell.dir_name());
        groups[{scheme_rank(c.cell.scheme), c.cell.count}].push_back(&c);
    }

    std::vector<MetricsRow> rows;
    for (const auto& [key, members] : groups) {
        MetricsRow row;
        row.scheme = members.front()->cell.scheme;
        row.count = key.second;
        row.n_seeds = members.size();
        row.single_seed = members.size() < 2;

        std::vector<double> errors;
        std::vector<double> added;
        std::vector<double> accs;
        for (const auto* c : members) {
            errors.push_back(c->best_error);
            added.push_back(c->mean_added);
            if (c->pseudo_label_acc) accs.push_back(*c->pseudo_label_acc);
        }
        row.mean_error = mean_of(errors);
        row.std_error = sample_std(errors);
        row.mean_added = mean_of(added);
        if (!accs.empty()) row.pseudo_label_acc = mean_of(accs);

        const auto vanilla = groups.find({scheme_rank(Scheme::vanilla), key.second});
        if (row.scheme == Scheme::vanilla) {
            row.mean_improvement = 0.0;
            row.std_improvement = 0.0;
        } else if (vanilla != groups.end()) {
            std::vector<double> vanilla_errors;
            std::map<int, double> vanilla_by_seed;
            for (const auto* v : vanilla->second) {
                vanilla_errors.push_back(v->best_error);
                vanilla_by_seed[v->cell.seed_index] = v->best_error;
            }
            row.mean_improvement = mean_of(vanilla_errors) - row.mean_error;
            std::vector<double> paired;
            for (const auto* c : members) {
                const auto it = vanilla_by_seed.find(c->cell.seed_index);
                if (it != vanilla_by_seed.end()) paired.push_back(it->second - c->best_error);
            }
            row.std_improvement = sample_std(paired);
        }
        rows.push_back(row);
    }
    return rows;
}

std::vector<CellMetrics> load_cell_metrics(const std::filesystem::path& run_dir) {
    std::vector<CellMetrics> out;
    for (const auto& dir : cell_dirs(run_dir)) {
        const auto path = dir / "metrics.json";
        if (!std::filesystem::exists(path)) continue;
        try {
            out.push_back(read_json_file(path).get<CellMetrics>());
        } catch (const json::exception& e) {
            fail(ErrorCode::format, "malformed " + path.string() + ": " + e.what());
        }
    }
    return out;
}

std::vector<RoundRow> load_round_rows(const std::filesystem::path& run_dir) {
    std::vector<RoundRow> out;
    for (const auto& dir : cell_dirs(run_dir)) {
        const auto path = dir / "rounds.jsonl";
        if (!std::filesystem::exists(path)) continue;
        std::ifstream in(path);
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            try {
                out.push_back(json::parse(line).get<RoundRow>());
            } catch (const json::exception& e) {
                fail(ErrorCode::format, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    return out;
}

std::vector<MetricsRow> summarize(const std::filesystem::path& run_dir) {
    const auto cells = load_cell_metrics(run_dir);
    require(!cells.empty(), ErrorCode::empty_input, "no completed cells under " + run_dir.string());
    return summarize(cells);
}

std::string format_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const auto& r : rows) {
        out << scheme_name(r.scheme) << ',' << r.count << ',' << fmt6(r.mean_error) << ',' << fmt6(r.std_error) << ','
            << fmt6(r.mean_improvement) << ',' << fmt6(r.std_improvement) << ',' << fmt6(r.pseudo_label_acc) << ','
            << fmt6(r.mean_added) << '\n';
    }
    return out.str();
}

std::vector<MetricsRow> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    require(static_cast<bool>(std::getline(in, line)) && line == kCsvHeader, ErrorCode::format,
            "metrics CSV has an unexpected header");
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::string cell;
        std::istringstream ls(line);
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (!line.empty() && line.back() == ',') f.emplace_back();
        require(f.size() == 8, ErrorCode::format, "metrics CSV row has " + std::to_string(f.size()) + " fields");
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return std::stod(s);
        };
        try {
            MetricsRow r;
            r.scheme = parse_scheme(f[0]);
            r.count = std::stoi(f[1]);
            r.mean_error = std::stod(f[2]);
            r.std_error = std::stod(f[3]);
            r.mean_improvement = opt(f[4]);
            r.std_improvement = opt(f[5]);
            r.pseudo_label_acc = opt(f[6]);
            r.mean_added = std::stod(f[7]);
            rows.push_back(r);
        } catch (const std::logic_error&) {
            fail(ErrorCode::format, "metrics CSV row is not numeric: " + line);
        }
    }
    return rows;
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorCode::io, "cannot write " + path.string());
        out << text;
        out.flush();
        require(out.good(), ErrorCode::io, "failed writing " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    require(!ec, ErrorCode::io, "cannot move " + tmp.string() + " into place: " + ec.message());
}

std::vector<std::string> summary_notes(const std::vector<MetricsRow>& rows) {
    std::vector<std::string> notes;
    for (const auto& r : rows) {
        const std::string tag = std::string(scheme_name(r.scheme)) + " count " + std::to_string(r.count);
        if (r.single_seed) notes.push_back(tag + ": single seed, standard deviations reported as 0");
        if (!r.mean_improvement) notes.push_back(tag + ": no vanilla cells, improvement absent");
    }
    return notes;
}

std::vector<ErrorSeries> error_vs_round(const std::vector<RoundRow>& rows) {
    require(!rows.empty(), ErrorCode::empty_input, "no round records to plot");
    // (scheme, count) -> round -> per-seed errors
    std::map<std::pair<int, int>, std::map<int, std::vector<double>>> acc;
    std::map<std::pair<int, int>, std::set<int>> seeds;
    for (const auto& r : rows) {
        if (!r.test_error) continue;
        const std::pair<int, int> key{scheme_rank(r.cell.scheme), r.cell.count};
        acc[key][r.round].push_back(*r.test_error);
        seeds[key].insert(r.cell.seed_index);
    }
    require(!acc.empty(), ErrorCode::empty_input, "round records carry no test errors");
    std::vector<ErrorSeries> out;
    for (const auto& [key, by_round] : acc) {
        ErrorSeries s;
        s.scheme = static_cast<Scheme>(key.first);
        s.count = key.second;
        s.has_band = seeds[key].size() > 1;
        for (const auto& [round, errs] : by_round) {
            s.rounds.push_back(round);
            s.mean.push_back(mean_of(errs));
            s.std.push_back(sample_std(errs));
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string render_svg(const std::vector<ErrorSeries>& series) {
    require(!series.empty(), ErrorCode::empty_input, "nothing to plot");
    constexpr double W = 640, H = 420, L = 70, R = 180, T = 30, B = 50;
    int max_round = 1;
    double lo = 1.0, hi = 0.0;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.rounds.size(); ++i) {
            max_round = std::max(max_round, s.rounds[i]);
            lo = std::min(lo, s.mean[i] - s.std[i]);
            hi = std::max(hi, s.mean[i] + s.std[i]);
        }
    }
    lo = std::max(0.0, lo);
    if (hi - lo < 1e-6) {
        lo = std::max(0.0, lo - 0.01);
        hi += 0.01;
    }
    const double pad = 0.05 * (hi - lo);
    lo = std::max(0.0, lo - pad);
    hi += pad;
    auto px = [&](double round) { return L + (W - L - R) * round / max_round; };
    auto py = [&](double err) { return T + (H - T - B) * (hi - err) / (hi - lo); };

    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(2);
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (int r = 0; r <= max_round; ++r)
        o << "<text x=\"" << px(r) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << r << "</text>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = lo + (hi - lo) * k / 4.0;
        o << "<text x=\"" << L - 6 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">" << fmt6(v) << "</text>\n";
    }
    o << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">round</text>\n";
    o << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << (T + H - B) / 2 << ")\">test error</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* colour = kPalette[k % std::size(kPalette)];
        if (s.has_band) {
            o << "<polygon fill=\"" << colour << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < s.rounds.size(); ++i) o << px(s.rounds[i]) << ',' << py(s.mean[i] + s.std[i]) << ' ';
            for (std::size_t i = s.rounds.size(); i-- > 0;) o << px(s.rounds[i]) << ',' << py(s.mean[i] - s.std[i]) << ' ';
            o << "\"/>\n";
        }
        o << "<polyline class=\"series\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < s.rounds.size(); ++i) o << px(s.rounds[i]) << ',' << py(s.mean[i]) << ' ';
        o << "\"/>\n";
        for (std::size_t i = 0; i < s.rounds.size(); ++i)
            o << "<circle cx=\"" << px(s.rounds[i]) << "\" cy=\"" << py(s.mean[i]) << "\" r=\"3\" fill=\"" << colour << "\"/>\n";
        const double ly = T + 18.0 * static_cast<double>(k);
        o << "<line x1=\"" << W - R + 15 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 35 << "\" y2=\"" << ly
          << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        o << "<text x=\"" << W - R + 40 << "\" y=\"" << ly + 4 << "\">" << scheme_name(s.scheme) << ", count " << s.count
          << "</text>\n";
    }
    o << "</svg>\n";
    return o.str();
}

void plot_error_vs_round(const std::filesystem::path& run_dir, const std::filesystem::path& out) {
    const std::string svg = render_svg(error_vs_round(load_round_rows(run_dir)));
    std::ofstream f(out, std::ios::trunc);
    require(f.good(), ErrorCode::io, "cannot write plot " + out.string());
    f << svg;
    require(f.good(), ErrorCode::io, "failed writing plot " + out.string());
}

}  // namespace ssgan
