#include "selftrain.hpp"

#include "reporting.hpp"
#include "ssgan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace ssgan {

namespace {

double error_rate(const ClassifierBackend& backend, const Model& model, const Dataset& d) {
    const auto pred = argmax_rows(backend.predict_proba(model, d));
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != (*d.labels)[i];
    return d.empty() ? 0.0 : static_cast<double>(wrong) / static_cast<double>(d.size());
}

// Trains the round's main hypothesis and fills the evaluation fields.
RoundRecord evaluate_round(int round, ModelPtr model, const ClassifierBackend& backend, const PoolState& pool,
                           const EvalSets& eval) {
    RoundRecord rec;
    rec.round = round;
    rec.model = std::move(model);
    if (eval.test) rec.test_error = error_rate(backend, *rec.model, *eval.test);
    if (eval.validation) rec.validation_error = error_rate(backend, *rec.model, *eval.validation);
    rec.train_error = error_rate(backend, *rec.model, pool.base);
    rec.candidates_before = pool.candidates.size();
    return rec;
}

void finish_round(RoundRecord& rec, const PoolState& pool, const EvalSets& eval) {
    rec.labelled_size = pool.base.size() + pool.added.size();
    rec.unlabelled_size = pool.unlabelled.size();
    if (eval.shadow) rec.pseudo_label_accuracy = pseudo_label_accuracy(pool.added, *eval.shadow);
}

// Independent of the scheme, so round 0 of every scheme reproduces the
// vanilla model and comparisons across schemes are paired.
std::uint64_t round_seed(const SelfTrainConfig& cfg, int round, std::string_view role, std::uint64_t index = 0) {
    return derive_seed(cfg.seed, static_cast<std::uint64_t>(round), role, index);
}

// Generates the round's images with fresh ids and grows U and the candidates.
void grow_with_generated(PoolState& pool, const ClassifierBackend& backend, const Model& model,
                         const SelfTrainConfig& cfg, int round) {
    if (cfg.gen_per_round <= 0) return;
    Dataset gen = backend.generate(model, static_cast<std::size_t>(cfg.gen_per_round), round_seed(cfg, round, "generate"));
    if (!gen.empty()) pool.append_unlabelled(gen);
}

RoundRecord final_round(PoolState& pool, const ClassifierBackend& backend, const SelfTrainConfig& cfg,
                        const EvalSets& eval) {
    ModelPtr model = backend.train_on(pool.labelled_set(), pool.training_unlabelled(cfg.keep_added_in_unlabelled),
                                      round_seed(cfg, cfg.num_rounds, "h"));
    RoundRecord rec = evaluate_round(cfg.num_rounds, std::move(model), backend, pool, eval);
    rec.final = true;
    finish_round(rec, pool, eval);
    return rec;
}

void pick_best(SelfTrainResult& result, const EvalSets& eval) {
    result.selected_by_train_error = eval.validation == nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < result.rounds.size(); ++i) {
        const auto& r = result.rounds[i];
        const double score = eval.validation ? *r.validation_error : r.train_error;
        if (score < best) {
            best = score;
            result.best_index = i;
        }
    }
    result.best_model = result.rounds.at(result.best_index).model;
}

void emit(const RoundCallback& cb, const RoundRecord& rec, const PoolState& pool) {
    if (cb) cb(rec, pool);
}

template <typename Fn>
auto with_round_context(int round, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        throw Error(e.code(), "self-training round " + std::to_string(round) + ": " + e.what());
    }
}

}  // namespace

const char* scheme_name(Scheme s) {
    switch (s) {
        case Scheme::vanilla: return "vanilla";
        case Scheme::basic: return "basic";
        case Scheme::rejection: return "rejection";
    }
    return "vanilla";
}

Scheme parse_scheme(const std::string& name) {
    if (name == "vanilla") return Scheme::vanilla;
    if (name == "basic") return Scheme::basic;
    if (name == "rejection") return Scheme::rejection;
    fail(ErrorCode::validation, "unknown scheme '" + name + "' (expected vanilla|basic|rejection)");
}

void SelfTrainConfig::validate() const {
    require(threshold > 0.0 && threshold < 1.0, ErrorCode::validation, "selftrain.threshold must be in (0, 1)");
    require(num_rounds >= 0, ErrorCode::validation, "selftrain.rounds must be >= 0");
    require(n_subsets >= 1, ErrorCode::validation, "selftrain.n_subsets must be >= 1");
    require(sample_frac > 0.0 && sample_frac <= 1.0, ErrorCode::validation, "selftrain.sample_frac must be in (0, 1]");
    require(gen_per_round >= 0, ErrorCode::validation, "selftrain.gen_per_round must be >= 0");
}

PoolState PoolState::initial(const Dataset& labelled, const Dataset& unlabelled) {
    require(labelled.has_labels(), ErrorCode::invalid_argument, "labelled set has no labels");
    PoolState pool;
    pool.base = labelled;
    pool.unlabelled = unlabelled.without_labels();
    const std::set<ExampleId> in_l(labelled.ids.begin(), labelled.ids.end());
    for (ExampleId id : pool.unlabelled.ids)
        if (!in_l.contains(id)) pool.candidates.push_back(id);
    ExampleId max_id = -1;
    for (ExampleId id : labelled.ids) max_id = std::max(max_id, id);
    for (ExampleId id : unlabelled.ids) max_id = std::max(max_id, id);
    pool.next_id = max_id + 1;
    pool.rebuild_index();
    return pool;
}

void PoolState::rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < unlabelled.size(); ++i) index_.emplace(unlabelled.ids[i], i);
}

std::size_t PoolState::row_of(ExampleId id) const {
    const auto it = index_.find(id);
    require(it != index_.end(), ErrorCode::consistency, "id " + std::to_string(id) + " is not in U");
    return it->second;
}

Dataset PoolState::labelled_set() const {
    std::vector<std::size_t> rows;
    std::vector<int> labels;
    rows.reserve(added.size());
    for (const auto& [id, rec] : added) {
        rows.push_back(row_of(id));
        labels.push_back(rec.label);
    }
    return concat(base, unlabelled.subset(rows).with_labels(std::move(labels)));
}

Dataset PoolState::candidate_set() const {
    std::vector<std::size_t> rows;
    rows.reserve(candidates.size());
    for (ExampleId id : candidates) rows.push_back(row_of(id));
    return unlabelled.subset(rows);
}

Dataset PoolState::training_unlabelled(bool keep_added) const {
    if (keep_added || added.empty()) return unlabelled;
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < unlabelled.size(); ++i)
        if (!added.contains(unlabelled.ids[i])) rows.push_back(i);
    return unlabelled.subset(rows);
}

void PoolState::append_unlabelled(const Dataset& extra) {
    Dataset fresh = extra.without_labels();
    for (auto& id : fresh.ids) id = next_id++;
    const std::size_t offset = unlabelled.size();
    unlabelled = concat(unlabelled, fresh);
    for (std::size_t i = 0; i < fresh.size(); ++i) {
        index_.emplace(fresh.ids[i], offset + i);
        candidates.push_back(fresh.ids[i]);
    }
}

void PoolState::check_invariants() const {
    require(index_.size() == unlabelled.size(), ErrorCode::consistency, "pool index out of sync with U");
    std::set<ExampleId> seen;
    for (ExampleId id : candidates) {
        require(index_.contains(id), ErrorCode::consistency, "candidate " + std::to_string(id) + " not in U");
        require(!added.contains(id), ErrorCode::consistency, "candidate " + std::to_string(id) + " already added");
        require(seen.insert(id).second, ErrorCode::consistency, "duplicate candidate " + std::to_string(id));
    }
    const std::set<ExampleId> base_ids(base.ids.begin(), base.ids.end());
    for (const auto& [id, rec] : added) {
        require(rec.id == id, ErrorCode::consistency, "pseudo-label record keyed by the wrong id");
        require(index_.contains(id), ErrorCode::consistency, "added example " + std::to_string(id) + " not in U");
        require(!base_ids.contains(id), ErrorCode::consistency, "added example shadows a human label");
        require(rec.label >= 0 && rec.label < base.num_classes, ErrorCode::consistency, "pseudo-label out of range");
        require(rec.round >= 1, ErrorCode::consistency, "pseudo-label round must be >= 1");
    }
}

double negative_entropy(std::span<const double> p, double tolerance) {
    require(!p.empty(), ErrorCode::invalid_distribution, "negative_entropy: empty distribution");
    double sum = 0.0;
    double value = 0.0;
    for (double v : p) {
        require(v >= -tolerance && std::isfinite(v), ErrorCode::invalid_distribution,
                "negative_entropy: negative probability");
        sum += v;
        if (v > 0.0) value += v * std::log(v);
    }
    require(std::abs(sum - 1.0) <= tolerance, ErrorCode::invalid_distribution,
            "negative_entropy: probabilities sum to " + std::to_string(sum));
    return value;
}

std::vector<ExampleId> confident_half(const std::map<ExampleId, double>& scores) {
    require(!scores.empty(), ErrorCode::empty_input, "confident_half: no scores");
    std::vector<double> values;
    values.reserve(scores.size());
    for (const auto& [id, s] : scores) values.push_back(s);
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size();
    const double median = m % 2 == 1 ? values[m / 2] : 0.5 * (values[m / 2 - 1] + values[m / 2]);
    std::vector<ExampleId> out;
    for (const auto& [id, s] : scores)
        if (s > median) out.push_back(id);
    return out;
}

std::map<ExampleId, int> corrupt_labels(const std::map<ExampleId, int>& subset, int num_classes, std::uint64_t seed) {
    require(num_classes >= 2, ErrorCode::no_alternative, "corrupt_labels: need at least 2 classes");
    Rng rng(derive_seed(seed, "corrupt"));
    std::map<ExampleId, int> out;
    for (const auto& [id, label] : subset) {
        require(label >= 0 && label < num_classes, ErrorCode::invalid_argument, "corrupt_labels: label out of range");
        // Draw from the K-1 other labels by skipping over the original.
        const auto r = static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(num_classes - 1)));
        out.emplace(id, r < label ? r : r + 1);
    }
    return out;
}

double calculate_disagreement(const Matrix& probs_a, const Matrix& probs_b) {
    require(probs_a.rows() > 0, ErrorCode::empty_input, "calculate_disagreement: empty set");
    require(probs_a.rows() == probs_b.rows(), ErrorCode::consistency, "calculate_disagreement: row count mismatch");
    const auto a = argmax_rows(probs_a);
    const auto b = argmax_rows(probs_b);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) agree += a[i] == b[i];
    return static_cast<double>(a.size() - agree) / static_cast<double>(a.size());
}

double calculate_disagreement(const ClassifierBackend& backend, const Model& h1, const Model& h2, const Dataset& s) {
    require(!s.empty(), ErrorCode::empty_input, "calculate_disagreement: empty set");
    return calculate_disagreement(backend.predict_proba(h1, s), backend.predict_proba(h2, s));
}

std::size_t relabel_added(PoolState& pool, const ClassifierBackend& backend, const Model& model) {
    if (pool.added.empty()) return 0;
    std::vector<std::size_t> rows;
    for (const auto& [id, rec] : pool.added) rows.push_back(pool.row_of(id));
    const auto labels = argmax_rows(backend.predict_proba(model, pool.unlabelled.subset(rows)));
    std::size_t changed = 0;
    std::size_t i = 0;
    for (auto& [id, rec] : pool.added) {
        changed += rec.label != labels[i];
        rec.label = labels[i++];
    }
    return changed;
}

SelfTrainResult vanilla_train(const Dataset& labelled, const Dataset& unlabelled, const ClassifierBackend& backend,
                              const SelfTrainConfig& cfg, const EvalSets& eval, const RoundCallback& on_round) {
    SelfTrainResult result;
    result.pool = PoolState::initial(labelled, unlabelled);
    ModelPtr model = with_round_context(0, [&] {
        return backend.train_on(result.pool.labelled_set(), result.pool.unlabelled, round_seed(cfg, 0, "h"));
    });
    RoundRecord rec = evaluate_round(0, std::move(model), backend, result.pool, eval);
    rec.final = true;
    finish_round(rec, result.pool, eval);
    emit(on_round, rec, result.pool);
    result.rounds.push_back(std::move(rec));
    pick_best(result, eval);
    return result;
}

SelfTrainResult basic_self_train(const Dataset& labelled, const Dataset& unlabelled, const ClassifierBackend& backend,
                                 const SelfTrainConfig& cfg, const EvalSets& eval, const RoundCallback& on_round) {
    cfg.validate();
    SelfTrainResult result;
    PoolState& pool = result.pool;
    pool = PoolState::initial(labelled, unlabelled);

    for (int round = 1; round <= cfg.num_rounds; ++round) {
        with_round_context(round, [&] {
            ModelPtr h = backend.train_on(pool.labelled_set(), pool.training_unlabelled(cfg.keep_added_in_unlabelled),
                                          round_seed(cfg, round - 1, "h"));
            RoundRecord rec = evaluate_round(round - 1, h, backend, pool, eval);

            if (!pool.candidates.empty()) {
                const Dataset cand = pool.candidate_set();
                const Matrix probs = backend.predict_proba(*h, cand);
                std::vector<ExampleId> remaining;
                for (std::size_t i = 0; i < cand.size(); ++i) {
                    Eigen::Index best = 0;
                    const double top = probs.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);
                    if (top > cfg.threshold) {
                        pool.added.emplace(cand.ids[i], PseudoLabelRecord{cand.ids[i], static_cast<int>(best), round,
                                                                          cand.sources[i], top});
                        ++rec.added;
                    } else {
                        remaining.push_back(cand.ids[i]);
                    }
                }
                pool.candidates = std::move(remaining);
            }
            const std::size_t flipped = relabel_added(pool, backend, *h);
            if (flipped > 0) rec.events.push_back("relabelled " + std::to_string(flipped) + " added examples");
            grow_with_generated(pool, backend, *h, cfg, round);
            finish_round(rec, pool, eval);
            emit(on_round, rec, pool);
            result.rounds.push_back(std::move(rec));
            return 0;
        });
    }

    RoundRecord last = with_round_context(cfg.num_rounds + 1, [&] { return final_round(pool, backend, cfg, eval); });
    emit(on_round, last, pool);
    result.rounds.push_back(std::move(last));
    pick_best(result, eval);
    return result;
}

SelfTrainResult rejection_self_train(const Dataset& labelled, const Dataset& unlabelled,
                                     const ClassifierBackend& backend, const SelfTrainConfig& cfg,
                                     const EvalSets& eval, const RoundCallback& on_round) {
    cfg.validate();
    SelfTrainResult result;
    PoolState& pool = result.pool;
    pool = PoolState::initial(labelled, unlabelled);
    const int num_classes = labelled.num_classes;

    for (int round = 1; round <= cfg.num_rounds; ++round) {
        with_round_context(round, [&] {
            const Dataset train_unl = pool.training_unlabelled(cfg.keep_added_in_unlabelled);
            const Dataset current_l = pool.labelled_set();
            ModelPtr h = backend.train_on(current_l, train_unl, round_seed(cfg, round - 1, "h"));
            RoundRecord rec = evaluate_round(round - 1, h, backend, pool, eval);

            // h's view of the whole of U: pseudo-labels and confidences.
            const Matrix u_probs = backend.predict_proba(*h, pool.unlabelled);
            const std::vector<int> u_labels = argmax_rows(u_probs);
            const Dataset u_by_h = pool.unlabelled.with_labels(u_labels);

            ModelPtr h_hat = backend.train_on(concat(current_l, u_by_h), train_unl, round_seed(cfg, round, "h_hat"));

            std::map<ExampleId, double> scores;
            for (ExampleId id : pool.candidates) {
                const auto row = static_cast<Eigen::Index>(pool.row_of(id));
                const RowVector p = u_probs.row(row);
                scores.emplace(id, negative_entropy(std::span<const double>(p.data(), static_cast<std::size_t>(p.size()))));
            }
            const std::vector<ExampleId> confident = scores.empty() ? std::vector<ExampleId>{} : confident_half(scores);
            rec.confident_count = confident.size();

            std::vector<ExampleId> chosen;
            if (confident.empty()) {
                rec.events.push_back("empty U_delta: no addition this round");
            } else {
                const auto take = std::max<std::size_t>(
                    1, static_cast<std::size_t>(std::llround(cfg.sample_frac * static_cast<double>(confident.size()))));
                const Matrix h_hat_probs = backend.predict_proba(*h_hat, pool.unlabelled);
                std::vector<std::vector<ExampleId>> subsets;
                for (int i = 0; i < cfg.n_subsets; ++i) {
                    // Independent uniform draws without replacement; subsets may overlap.
                    std::vector<ExampleId> pool_ids = confident;
                    Rng rng(round_seed(cfg, round, "subset", static_cast<std::uint64_t>(i)));
                    for (std::size_t k = 0; k < take; ++k)
                        std::swap(pool_ids[k], pool_ids[k + uniform_index(rng, pool_ids.size() - k)]);
                    pool_ids.resize(take);
                    std::sort(pool_ids.begin(), pool_ids.end());

                    std::map<ExampleId, int> subset_labels;
                    for (ExampleId id : pool_ids) subset_labels.emplace(id, u_labels[pool.row_of(id)]);
                    const auto corrupted = corrupt_labels(subset_labels, num_classes,
                                                          round_seed(cfg, round, "corrupt", static_cast<std::uint64_t>(i)));
                    // L + (U \ U_i) labelled by h + U_i' with corrupted labels.
                    std::vector<int> probe_labels = u_labels;
                    for (const auto& [id, y] : corrupted) probe_labels[pool.row_of(id)] = y;
                    ModelPtr h_i = backend.train_on(concat(current_l, pool.unlabelled.with_labels(probe_labels)), train_unl,
                                                    round_seed(cfg, round, "h_i", static_cast<std::uint64_t>(i)));
                    rec.disagreements.push_back(
                        calculate_disagreement(h_hat_probs, backend.predict_proba(*h_i, pool.unlabelled)));
                    subsets.push_back(std::move(pool_ids));
                }
                // Strict > keeps the lowest index on ties.
                std::size_t best = 0;
                for (std::size_t i = 1; i < rec.disagreements.size(); ++i)
                    if (rec.disagreements[i] > rec.disagreements[best]) best = i;
                rec.selected_subset = static_cast<int>(best);
                chosen = std::move(subsets[best]);
            }

            const std::size_t flipped = relabel_added(pool, backend, *h);
            if (flipped > 0) rec.events.push_back("relabelled " + std::to_string(flipped) + " added examples");

            const std::set<ExampleId> chosen_set(chosen.begin(), chosen.end());
            for (ExampleId id : chosen) {
                const std::size_t row = pool.row_of(id);
                pool.added.emplace(id, PseudoLabelRecord{id, u_labels[row], round, pool.unlabelled.sources[row],
                                                         u_probs.row(static_cast<Eigen::Index>(row)).maxCoeff()});
            }
            rec.added = chosen.size();
            std::erase_if(pool.candidates, [&](ExampleId id) { return chosen_set.contains(id); });

            grow_with_generated(pool, backend, *h, cfg, round);
            finish_round(rec, pool, eval);
            emit(on_round, rec, pool);
            result.rounds.push_back(std::move(rec));
            return 0;
        });
    }

    RoundRecord last = with_round_context(cfg.num_rounds + 1, [&] { return final_round(pool, backend, cfg, eval); });
    emit(on_round, last, pool);
    result.rounds.push_back(std::move(last));
    pick_best(result, eval);
    return result;
}

SelfTrainResult self_train(const Dataset& labelled, const Dataset& unlabelled, const ClassifierBackend& backend,
                           const SelfTrainConfig& cfg, const EvalSets& eval, const RoundCallback& on_round) {
    switch (cfg.scheme) {
        case Scheme::vanilla: return vanilla_train(labelled, unlabelled, backend, cfg, eval, on_round);
        case Scheme::basic: return basic_self_train(labelled, unlabelled, backend, cfg, eval, on_round);
        case Scheme::rejection: return rejection_self_train(labelled, unlabelled, backend, cfg, eval, on_round);
    }
    fail(ErrorCode::internal, "unhandled scheme");
}

}  // namespace ssgan
