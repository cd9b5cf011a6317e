#include "experiments.hpp"

#include "gan_backend.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace ssgan {

namespace {

using nlohmann::json;

constexpr int kManifestVersion = 1;
constexpr const char* kSeedRule =
    "split seed = derive_seed(split.seed, count, seed); self-training seed = derive_seed(selftrain.seed, count, seed); "
    "every GAN training mixes gan.seed with a round/role tag; schemes share seeds so round 0 is paired with vanilla";

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

[[noreturn]] void bad_value(const std::string& what) {
    fail(ErrorCode::validation, what);
}

long long parse_int(const std::string& v) {
    long long out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value("expected an integer, got '" + v + "'");
    return out;
}

std::uint64_t parse_uint(const std::string& v) {
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value("expected a non-negative integer, got '" + v + "'");
    return out;
}

double parse_real(const std::string& v) {
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
        bad_value("expected a number, got '" + v + "'");
    return out;
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value("expected true or false, got '" + v + "'");
}

int parse_int_in(const std::string& v, long long lo, long long hi, const char* range) {
    const long long x = parse_int(v);
    if (x < lo || x > hi) bad_value(std::string("must be ") + range + ", got " + v);
    return static_cast<int>(x);
}

std::string real_str(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + f(v[i]);
    return out;
}

struct KeySpec {
    const char* name;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeySpec>& key_specs() {
    static const std::vector<KeySpec> specs = {
        {"data.path", [](ExperimentConfig& c, const std::string& v) {
             if (v.empty()) bad_value("must not be empty");
             c.data.path = v;
         },
         [](const ExperimentConfig& c) { return c.data.path.string(); }},
        {"data.pad_to_32", [](ExperimentConfig& c, const std::string& v) { c.data.pad_to_32 = parse_bool(v); },
         [](const ExperimentConfig& c) { return std::string(c.data.pad_to_32 ? "true" : "false"); }},
        {"data.unlabelled_limit",
         [](ExperimentConfig& c, const std::string& v) { c.data.unlabelled_limit = parse_uint(v); },
         [](const ExperimentConfig& c) { return std::to_string(c.data.unlabelled_limit); }},
        {"data.test_limit", [](ExperimentConfig& c, const std::string& v) { c.data.test_limit = parse_uint(v); },
         [](const ExperimentConfig& c) { return std::to_string(c.data.test_limit); }},
        {"data.validation_fraction",
         [](ExperimentConfig& c, const std::string& v) {
             const double f = parse_real(v);
             if (f < 0.0 || f >= 1.0) bad_value("must be in [0, 1), got " + v);
             c.data.validation_fraction = f;
         },
         [](const ExperimentConfig& c) { return real_str(c.data.validation_fraction); }},
        {"split.count_per_class",
         [](ExperimentConfig& c, const std::string& v) {
             std::vector<int> counts;
             for (const auto& item : split_list(v)) counts.push_back(parse_int_in(item, 1, 1 << 30, ">= 1"));
             if (counts.empty()) bad_value("needs at least one count");
             c.counts = counts;
         },
         [](const ExperimentConfig& c) { return join(c.counts, [](int x) { return std::to_string(x); }); }},
        {"split.seed", [](ExperimentConfig& c, const std::string& v) { c.split_seed = parse_uint(v); },
         [](const ExperimentConfig& c) { return std::to_string(c.split_seed); }},
        {"gan.epochs", [](ExperimentConfig& c, const std::string& v) { c.gan.epochs = parse_int_in(v, 1, 1 << 30, ">= 1"); },
         [](const ExperimentConfig& c) { return std::to_string(c.gan.epochs); }},
        {"gan.batch_size",
         [](ExperimentConfig& c, const std::string& v) { c.gan.batch_size = parse_int_in(v, 2, 1 << 30, ">= 2"); },
         [](const ExperimentConfig& c) { return std::to_string(c.gan.batch_size); }},
        {"gan.lr",
         [](ExperimentConfig& c, const std::string& v) {
             const double lr = parse_real(v);
             if (lr <= 0.0) bad_value("must be > 0, got " + v);
             c.gan.learning_rate = lr;
         },
         [](const ExperimentConfig& c) { return real_str(c.gan.learning_rate); }},
        {"gan.latent_dim",
         [](ExperimentConfig& c, const std::string& v) { c.gan.latent_dim = parse_int_in(v, 1, 1 << 20, ">= 1"); },
         [](const ExperimentConfig& c) { return std::to_string(c.gan.latent_dim); }},
        {"gan.arch", [](ExperimentConfig& c, const std::string& v) { c.gan.arch = parse_architecture(v); },
         [](const ExperimentConfig& c) { return std::string(architecture_name(c.gan.arch)); }},
        {"gan.feature_layer",
         [](ExperimentConfig& c, const std::string& v) { c.gan.feature_layer = parse_int_in(v, -1, 1 << 20, ">= -1"); },
         [](const ExperimentConfig& c) { return std::to_string(c.gan.feature_layer); }},
        {"gan.log_eps",
         [](ExperimentConfig& c, const std::string& v) {
             const double e = parse_real(v);
             if (e <= 0.0 || e >= 1.0) bad_value("must be in (0, 1), got " + v);
             c.gan.log_epsilon = e;
         },
         [](const ExperimentConfig& c) { return real_str(c.gan.log_epsilon); }},
        {"gan.seed", [](ExperimentConfig& c, const std::string& v) { c.gan.seed = parse_uint(v); },
         [](const ExperimentConfig& c) { return std::to_string(c.gan.seed); }},
        {"selftrain.scheme",
         [](ExperimentConfig& c, const std::string& v) {
             std::vector<Scheme> schemes;
             for (const auto& item : split_list(v)) {
                 const Scheme s = parse_scheme(item);
                 if (std::find(schemes.begin(), schemes.end(), s) != schemes.end()) bad_value("lists '" + item + "' twice");
                 schemes.push_back(s);
             }
             if (schemes.empty()) bad_value("needs at least one scheme");
             c.schemes = schemes;
         },
         [](const ExperimentConfig& c) { return join(c.schemes, [](Scheme s) { return std::string(scheme_name(s)); }); }},
        {"selftrain.threshold",
         [](ExperimentConfig& c, const std::string& v) {
             const double t = parse_real(v);
             if (t <= 0.0 || t >= 1.0) bad_value("must be in (0, 1), got " + v);
             c.selftrain.threshold = t;
         },
         [](const ExperimentConfig& c) { return real_str(c.selftrain.threshold); }},
        {"selftrain.rounds",
         [](ExperimentConfig& c, const std::string& v) { c.selftrain.num_rounds = parse_int_in(v, 0, 1000, "in [0, 1000]"); },
         [](const ExperimentConfig& c) { return std::to_string(c.selftrain.num_rounds); }},
        {"selftrain.n_subsets",
         [](ExperimentConfig& c, const std::string& v) { c.selftrain.n_subsets = parse_int_in(v, 1, 1000, "in [1, 1000]"); },
         [](const ExperimentConfig& c) { return std::to_string(c.selftrain.n_subsets); }},
        {"selftrain.sample_frac",
         [](ExperimentConfig& c, const std::string& v) {
             const double f = parse_real(v);
             if (f <= 0.0 || f > 1.0) bad_value("must be in (0, 1], got " + v);
             c.selftrain.sample_frac = f;
         },
         [](const ExperimentConfig& c) { return real_str(c.selftrain.sample_frac); }},
        {"selftrain.gen_per_round",
         [](ExperimentConfig& c, const std::string& v) {
             c.selftrain.gen_per_round = parse_int_in(v, 0, 1 << 30, ">= 0");
         },
         [](const ExperimentConfig& c) { return std::to_string(c.selftrain.gen_per_round); }},
        {"selftrain.keep_added_in_unlabelled",
         [](ExperimentConfig& c, const std::string& v) { c.selftrain.keep_added_in_unlabelled = parse_bool(v); },
         [](const ExperimentConfig& c) { return std::string(c.selftrain.keep_added_in_unlabelled ? "true" : "false"); }},
        {"selftrain.seed", [](ExperimentConfig& c, const std::string& v) { c.selftrain.seed = parse_uint(v); },
         [](const ExperimentConfig& c) { return std::to_string(c.selftrain.seed); }},
        {"experiment.seeds",
         [](ExperimentConfig& c, const std::string& v) {
             std::vector<std::uint64_t> seeds;
             for (const auto& item : split_list(v)) seeds.push_back(parse_uint(item));
             if (seeds.empty()) bad_value("needs at least one seed");
             if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) bad_value("has duplicates");
             c.seeds = seeds;
         },
         [](const ExperimentConfig& c) { return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }); }},
        {"experiment.output_dir",
         [](ExperimentConfig& c, const std::string& v) {
             if (v.empty()) bad_value("must not be empty");
             c.output_dir = v;
         },
         [](const ExperimentConfig& c) { return c.output_dir.string(); }},
        {"experiment.name",
         [](ExperimentConfig& c, const std::string& v) {
             if (v.empty() || v.find('/') != std::string::npos || v == "." || v == "..")
                 bad_value("must be a plain directory name");
             c.name = v;
         },
         [](const ExperimentConfig& c) { return c.name; }},
        {"experiment.workers",
         [](ExperimentConfig& c, const std::string& v) { c.workers = parse_int_in(v, 1, 256, "in [1, 256]"); },
         [](const ExperimentConfig& c) { return std::to_string(c.workers); }},
    };
    return specs;
}

const KeySpec* find_key(const std::string& name) {
    for (const auto& k : key_specs())
        if (name == k.name) return &k;
    return nullptr;
}

const std::map<std::string, std::vector<std::pair<std::string, std::string>>>& presets() {
    static const std::map<std::string, std::vector<std::pair<std::string, std::string>>> p = {
        {"desk",
         {{"split.count_per_class", "10"},
          {"data.pad_to_32", "false"},
          {"data.unlabelled_limit", "5000"},
          {"gan.arch", "small"},
          {"gan.epochs", "40"},
          {"gan.batch_size", "50"},
          {"gan.lr", "0.001"},
          {"selftrain.scheme", "vanilla,basic,rejection"},
          {"selftrain.rounds", "2"},
          {"selftrain.n_subsets", "2"},
          {"selftrain.sample_frac", "0.2"},
          {"selftrain.gen_per_round", "500"},
          {"experiment.seeds", "1,2,3"}}},
        {"paper",
         {{"split.count_per_class", "5,10,20"},
          {"data.unlabelled_limit", "0"},
          {"gan.arch", "paper"},
          {"gan.epochs", "550"},
          {"gan.batch_size", "100"},
          {"gan.lr", "0.003"},
          {"selftrain.scheme", "vanilla,basic,rejection"},
          {"selftrain.rounds", "2"},
          {"selftrain.n_subsets", "4"},
          {"selftrain.sample_frac", "0.2"},
          {"selftrain.gen_per_round", "10000"},
          {"experiment.seeds", "1,2,3"}}},
    };
    return p;
}

void apply(ExperimentConfig& cfg, const std::string& key, const std::string& value, std::vector<std::string>& errors) {
    const KeySpec* spec = find_key(key);
    if (!spec) {
        errors.push_back(key + ": unknown key");
        return;
    }
    try {
        spec->set(cfg, value);
    } catch (const Error& e) {
        errors.push_back(key + ": " + e.what());
    }
}

void write_json_atomic(const std::filesystem::path& path, const json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

struct LoadedData {
    Dataset train;
    Dataset validation;
    Dataset test;
};

LoadedData load_data(const ExperimentConfig& cfg) {
    const auto& dir = cfg.data.path;
    LoadedData d;
    d.train = load_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
    d.test = load_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
    if (cfg.data.pad_to_32) {
        d.train = pad_to(d.train, 32);
        d.test = pad_to(d.test, 32);
    }
    if (cfg.data.test_limit > 0) d.test = random_subset(d.test, cfg.data.test_limit, derive_seed(cfg.split_seed, "test"));
    if (cfg.data.validation_fraction > 0.0) {
        auto [rest, held] = holdout_split(d.train, cfg.data.validation_fraction, derive_seed(cfg.split_seed, "validation"));
        d.train = std::move(rest);
        d.validation = std::move(held);
    }
    return d;
}

std::uint64_t selftrain_seed(const ExperimentConfig& cfg, int count, std::uint64_t seed_value) {
    return derive_seed(cfg.selftrain.seed, static_cast<std::uint64_t>(count), seed_value);
}

std::uint64_t split_seed(const ExperimentConfig& cfg, int count, std::uint64_t seed_value) {
    return derive_seed(cfg.split_seed, static_cast<std::uint64_t>(count), seed_value);
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& lines) {
    std::string text;
    for (const auto& l : lines) text += l.dump() + "\n";
    write_text_atomic(path, text);
}

CellMetrics run_cell(const ExperimentConfig& cfg, const CellEntry& cell, const LoadedData& data,
                     const std::filesystem::path& cell_dir, const std::shared_ptr<TrainingCache>& cache) {
    const std::uint64_t seed_value = cfg.seeds.at(static_cast<std::size_t>(cell.key.seed_index));
    Split split = stratified_split(data.train, {cell.key.count, split_seed(cfg, cell.key.count, seed_value)});
    Dataset unlabelled = split.unlabelled;
    if (cfg.data.unlabelled_limit > 0)
        unlabelled = random_subset(unlabelled, cfg.data.unlabelled_limit,
                                   derive_seed(split_seed(cfg, cell.key.count, seed_value), "unlabelled"));

    SelfTrainConfig st = cfg.selftrain;
    st.scheme = cell.key.scheme;
    st.seed = cell.seed;
    GanBackend backend(cfg.gan, cache);
    EvalSets eval{&data.test, data.validation.empty() ? nullptr : &data.validation, &split.shadow};

    const auto rounds_path = cell_dir / "rounds.jsonl";
    std::ofstream rounds(rounds_path, std::ios::trunc);
    require(rounds.good(), ErrorCode::io, "cannot write " + rounds_path.string());
    auto on_round = [&](const RoundRecord& r, const PoolState&) {
        rounds << json(RoundRow::from_record(cell.key, r)).dump() << '\n';
        rounds.flush();
    };
    const SelfTrainResult result = self_train(split.labelled, unlabelled, backend, st, eval, on_round);
    rounds.close();

    std::vector<json> added;
    for (const auto& [id, rec] : result.pool.added)
        added.push_back({{"id", id},
                         {"label", rec.label},
                         {"round", rec.round},
                         {"source", source_name(rec.source)},
                         {"confidence", rec.confidence}});
    write_lines(cell_dir / "added.jsonl", added);
    save_checkpoint(as_gan(*result.best_model), cell_dir / "best_model.json");

    const CellMetrics metrics = cell_metrics(cell.key, cell.seed, result, unlabelled.size());
    write_json_atomic(cell_dir / "metrics.json", json(metrics));
    return metrics;
}

std::vector<std::pair<std::string, std::string>> comparable(std::vector<std::pair<std::string, std::string>> v) {
    std::erase_if(v, [](const auto& kv) { return kv.first == "experiment.workers" || kv.first == "experiment.output_dir"; });
    return v;
}

}  // namespace

std::vector<std::pair<std::string, std::string>> ExperimentConfig::snapshot() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& k : key_specs()) out.emplace_back(k.name, k.get(*this));
    return out;
}

std::vector<std::string> preset_names() {
    std::vector<std::string> out;
    for (const auto& [name, values] : presets()) out.push_back(name);
    return out;
}

std::vector<std::pair<std::string, std::string>> preset_values(const std::string& name) {
    const auto it = presets().find(name);
    require(it != presets().end(), ErrorCode::validation, "preset: unknown preset '" + name + "' (expected desk|paper)");
    return it->second;
}

ConfigCheck check_config(const std::string& text, const std::optional<std::string>& preset) {
    ConfigCheck out;
    auto& cfg = out.config;
    if (preset) {
        try {
            for (const auto& [k, v] : preset_values(*preset)) apply(cfg, k, v, out.errors);
        } catch (const Error& e) {
            out.errors.push_back(e.what());
        }
    }

    std::set<std::string> seen;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            out.errors.push_back("line " + std::to_string(line_no) + ": expected 'key = value'");
            continue;
        }
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (!seen.insert(key).second) {
            out.errors.push_back(key + ": given more than once");
            continue;
        }
        apply(cfg, key, value, out.errors);
    }

    if (cfg.data.path.empty()) out.errors.push_back("data.path: required key missing");
    try {
        cfg.gan.validate();
    } catch (const Error& e) {
        out.errors.push_back(e.what());
    }
    try {
        cfg.selftrain.validate();
    } catch (const Error& e) {
        out.errors.push_back(e.what());
    }
    return out;
}

ExperimentConfig validate_config(const std::string& text, const std::optional<std::string>& preset) {
    ConfigCheck c = check_config(text, preset);
    if (!c.errors.empty()) {
        std::string msg = "invalid config:";
        for (const auto& e : c.errors) msg += "\n  " + e;
        fail(ErrorCode::validation, msg);
    }
    return c.config;
}

ExperimentConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& preset) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::validation, "cannot read config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    ExperimentConfig cfg = validate_config(buf.str(), preset);
    // A relative data path is taken relative to the config file.
    if (cfg.data.path.is_relative()) cfg.data.path = std::filesystem::absolute(path).parent_path() / cfg.data.path;
    return cfg;
}

const char* cell_status_name(CellStatus s) {
    switch (s) {
        case CellStatus::pending: return "pending";
        case CellStatus::running: return "running";
        case CellStatus::done: return "done";
        case CellStatus::failed: return "failed";
    }
    return "pending";
}

CellStatus parse_cell_status(const std::string& s) {
    for (CellStatus c : {CellStatus::pending, CellStatus::running, CellStatus::done, CellStatus::failed})
        if (s == cell_status_name(c)) return c;
    fail(ErrorCode::format, "unknown cell status '" + s + "'");
}

std::size_t RunManifest::count(CellStatus s) const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [&](const CellEntry& c) { return c.status == s; }));
}

void to_json(json& j, const RunManifest& m) {
    json config = json::array();
    for (const auto& [k, v] : m.config) config.push_back({k, v});
    json cells = json::array();
    for (const auto& c : m.cells) {
        json e{{"scheme", scheme_name(c.key.scheme)},
               {"count", c.key.count},
               {"seed_index", c.key.seed_index},
               {"seed", c.seed},
               {"status", cell_status_name(c.status)},
               {"dir", c.dir}};
        if (!c.error.empty()) e["error"] = c.error;
        cells.push_back(std::move(e));
    }
    j = json{{"format", "ssgan-run-manifest"},
             {"version", kManifestVersion},
             {"config", config},
             {"seed_rule", m.seed_rule},
             {"cells", cells}};
}

void from_json(const json& j, RunManifest& m) {
    require(j.value("format", "") == "ssgan-run-manifest", ErrorCode::format, "not a run manifest");
    require(j.value("version", 0) == kManifestVersion, ErrorCode::format, "unsupported manifest version");
    m.config.clear();
    for (const auto& kv : j.at("config")) m.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
    m.seed_rule = j.at("seed_rule").get<std::string>();
    m.cells.clear();
    for (const auto& e : j.at("cells")) {
        CellEntry c;
        c.key.scheme = parse_scheme(e.at("scheme").get<std::string>());
        c.key.count = e.at("count").get<int>();
        c.key.seed_index = e.at("seed_index").get<int>();
        c.seed = e.at("seed").get<std::uint64_t>();
        c.status = parse_cell_status(e.at("status").get<std::string>());
        c.dir = e.at("dir").get<std::string>();
        c.error = e.value("error", "");
        m.cells.push_back(std::move(c));
    }
}

RunManifest read_manifest(const std::filesystem::path& run_dir) {
    const auto path = run_dir / "manifest.json";
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open " + path.string());
    try {
        return json::parse(in).get<RunManifest>();
    } catch (const json::exception& e) {
        fail(ErrorCode::format, "malformed " + path.string() + ": " + e.what());
    }
}

std::uint64_t cell_seed(const ExperimentConfig& cfg, int count, std::uint64_t seed_value) {
    return selftrain_seed(cfg, count, seed_value);
}

std::vector<CellEntry> plan_cells(const ExperimentConfig& cfg) {
    std::vector<CellEntry> cells;
    for (Scheme s : cfg.schemes)
        for (int count : cfg.counts)
            for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
                CellEntry c;
                c.key = {s, count, static_cast<int>(i)};
                c.seed = cell_seed(cfg, count, cfg.seeds[i]);
                c.dir = "cells/" + c.key.dir_name();
                cells.push_back(std::move(c));
            }
    return cells;
}

std::filesystem::path run_directory(const ExperimentConfig& cfg) {
    const char* env = std::getenv(kOutputRootEnv);
    const std::filesystem::path root = (env && *env) ? std::filesystem::path(env) : cfg.output_dir;
    return root / cfg.name;
}

RunOutcome run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    cfg.gan.validate();
    cfg.selftrain.validate();
    require(!cfg.seeds.empty() && !cfg.counts.empty() && !cfg.schemes.empty(), ErrorCode::validation,
            "experiment grid is empty");
    auto log = [&](const std::string& s) {
        if (options.log) options.log(s);
    };

    RunOutcome outcome;
    outcome.run_dir = run_directory(cfg);
    const auto& run_dir = outcome.run_dir;
    const auto manifest_path = run_dir / "manifest.json";

    RunManifest& manifest = outcome.manifest;
    manifest.config = comparable(cfg.snapshot());
    manifest.seed_rule = kSeedRule;
    manifest.cells = plan_cells(cfg);

    if (std::filesystem::exists(manifest_path)) {
        require(options.resume, ErrorCode::validation,
                "run directory " + run_dir.string() + " already holds a run; pass --resume to continue it");
        const RunManifest previous = read_manifest(run_dir);
        require(previous.config == manifest.config && previous.cells.size() == manifest.cells.size(),
                ErrorCode::validation, "cannot resume " + run_dir.string() + ": the config differs from the original run");
        for (std::size_t i = 0; i < manifest.cells.size(); ++i) {
            require(previous.cells[i].key == manifest.cells[i].key, ErrorCode::validation,
                    "cannot resume " + run_dir.string() + ": cell layout differs");
            // Only finished cells survive; anything interrupted starts over.
            if (previous.cells[i].status == CellStatus::done &&
                std::filesystem::exists(run_dir / previous.cells[i].dir / "metrics.json"))
                manifest.cells[i].status = CellStatus::done;
        }
    }

    std::error_code ec;
    std::filesystem::create_directories(run_dir / "cells", ec);
    require(!ec, ErrorCode::io, "cannot create " + run_dir.string() + ": " + ec.message());
    {
        std::string text;
        for (const auto& [k, v] : cfg.snapshot()) text += k + " = " + v + "\n";
        write_text_atomic(run_dir / "config.resolved", text);
    }
    std::mutex mu;
    write_json_atomic(manifest_path, json(manifest));

    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < manifest.cells.size(); ++i)
        if (manifest.cells[i].status != CellStatus::done) todo.push_back(i);
    if (options.max_cells && *options.max_cells < todo.size()) todo.resize(*options.max_cells);
    log(std::to_string(manifest.count(CellStatus::done)) + " of " + std::to_string(manifest.cells.size()) +
        " cells already done; running " + std::to_string(todo.size()));

    LoadedData data;
    if (!todo.empty()) data = load_data(cfg);

    const auto cache = std::make_shared<TrainingCache>();
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < todo.size(); k = next++) {
            const std::size_t i = todo[k];
            CellEntry cell;
            {
                std::lock_guard lock(mu);
                manifest.cells[i].status = CellStatus::running;
                manifest.cells[i].error.clear();
                write_json_atomic(manifest_path, json(manifest));
                cell = manifest.cells[i];
            }
            const auto cell_dir = run_dir / cell.dir;
            const auto start = std::chrono::steady_clock::now();
            std::string error;
            std::optional<CellMetrics> metrics;
            try {
                std::filesystem::remove_all(cell_dir);
                std::filesystem::create_directories(cell_dir);
                metrics = run_cell(cfg, cell, data, cell_dir, cache);
            } catch (const std::exception& e) {
                error = e.what();
            }
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            std::lock_guard lock(mu);
            manifest.cells[i].status = metrics ? CellStatus::done : CellStatus::failed;
            manifest.cells[i].error = error;
            write_json_atomic(manifest_path, json(manifest));
            std::ostringstream msg;
            msg.precision(4);
            msg << cell.key.dir_name() << ": ";
            if (metrics)
                msg << "done, best error " << metrics->best_error << " (round " << metrics->best_round << "), " << secs << " s";
            else
                msg << "FAILED: " << error;
            log(msg.str());
        }
    };
    const int workers = std::max(1, options.workers > 0 ? options.workers : cfg.workers);
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(workers), std::max<std::size_t>(1, todo.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    outcome.complete = manifest.count(CellStatus::done) == manifest.cells.size();
    if (manifest.count(CellStatus::done) > 0 && manifest.count(CellStatus::pending) == 0) write_report(run_dir);
    return outcome;
}

std::vector<MetricsRow> write_report(const std::filesystem::path& run_dir,
                                     const std::optional<std::filesystem::path>& plot) {
    const auto rows = summarize(run_dir);
    write_text_atomic(run_dir / "metrics.csv", format_csv(rows));
    std::string notes;
    for (const auto& n : summary_notes(rows)) notes += n + "\n";
    write_text_atomic(run_dir / "notes.txt", notes);
    plot_error_vs_round(run_dir, plot.value_or(run_dir / "error_vs_round.svg"));
    return rows;
}

}  // namespace ssgan
