#pragma once

#include "datasets.hpp"

#include <functional>
#include <span>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ssgan {

// Opaque trained hypothesis produced by a ClassifierBackend.
class Model {
public:
    virtual ~Model() = default;
};

using ModelPtr = std::shared_ptr<const Model>;

// What the self-training loops need from a learner. predict_proba rows are
// K-simplices; generate may return an empty dataset for non-generative
// backends. Implementations must be deterministic in their seed.
class ClassifierBackend {
public:
    virtual ~ClassifierBackend() = default;

    virtual ModelPtr train_on(const Dataset& labelled, const Dataset& unlabelled, std::uint64_t seed) const = 0;
    virtual Matrix predict_proba(const Model& model, const Dataset& x) const = 0;
    virtual Dataset generate(const Model& model, std::size_t n, std::uint64_t seed) const = 0;
};

enum class Scheme { vanilla, basic, rejection };

const char* scheme_name(Scheme s);
Scheme parse_scheme(const std::string& name);

struct SelfTrainConfig {
    Scheme scheme = Scheme::basic;
    double threshold = 0.95;
    int num_rounds = 2;
    int n_subsets = 4;
    double sample_frac = 0.2;
    int gen_per_round = 10000;
    std::uint64_t seed = 0;
    // When false, examples moved into L stop serving as unlabelled data.
    bool keep_added_in_unlabelled = true;

    void validate() const;
};

struct PseudoLabelRecord {
    ExampleId id = 0;
    int label = 0;
    int round = 1;
    Source source = Source::real;
    double confidence = 0.0;
};

// L = base (human labels) plus every pseudo-labelled example in `added`;
// U is every unlabelled example seen so far (real and generated); candidates
// is the still-unselected part of U.
struct PoolState {
    Dataset base;
    Dataset unlabelled;
    std::vector<ExampleId> candidates;
    std::map<ExampleId, PseudoLabelRecord> added;
    ExampleId next_id = 0;

    static PoolState initial(const Dataset& labelled, const Dataset& unlabelled);

    std::size_t row_of(ExampleId id) const;
    Dataset labelled_set() const;
    Dataset candidate_set() const;
    // U minus added examples when keep_added is false.
    Dataset training_unlabelled(bool keep_added) const;
    void append_unlabelled(const Dataset& extra);
    void rebuild_index();

    // Throws a consistency error when an invariant is broken.
    void check_invariants() const;

private:
    std::map<ExampleId, std::size_t> index_;
};

struct RoundRecord {
    int round = 0;
    bool final = false;
    ModelPtr model;
    std::optional<double> test_error;
    std::optional<double> validation_error;
    double train_error = 0.0;  // on the human-labelled base set
    std::size_t candidates_before = 0;
    std::size_t confident_count = 0;  // |U_delta|, rejection scheme only
    std::size_t added = 0;
    std::size_t labelled_size = 0;
    std::size_t unlabelled_size = 0;
    std::optional<double> pseudo_label_accuracy;
    std::vector<double> disagreements;
    std::optional<int> selected_subset;
    std::vector<std::string> events;
};

struct EvalSets {
    const Dataset* test = nullptr;
    const Dataset* validation = nullptr;
    const ShadowLabels* shadow = nullptr;
};

struct SelfTrainResult {
    ModelPtr best_model;
    std::size_t best_index = 0;
    // True when no validation split existed and the base-set error chose.
    bool selected_by_train_error = false;
    std::vector<RoundRecord> rounds;
    PoolState pool;
};

using RoundCallback = std::function<void(const RoundRecord&, const PoolState&)>;

double negative_entropy(std::span<const double> p, double tolerance = 1e-6);

// Ids whose score is strictly above the median of all scores.
std::vector<ExampleId> confident_half(const std::map<ExampleId, double>& scores);

std::map<ExampleId, int> corrupt_labels(const std::map<ExampleId, int>& subset, int num_classes, std::uint64_t seed);

double calculate_disagreement(const Matrix& probs_a, const Matrix& probs_b);
double calculate_disagreement(const ClassifierBackend& backend, const Model& h1, const Model& h2,
                              const Dataset& s);

// Relabels every pseudo-labelled example with the model's argmax; returns
// how many labels changed.
std::size_t relabel_added(PoolState& pool, const ClassifierBackend& backend, const Model& model);

SelfTrainResult vanilla_train(const Dataset& labelled, const Dataset& unlabelled, const ClassifierBackend& backend,
                              const SelfTrainConfig& cfg, const EvalSets& eval, const RoundCallback& on_round = {});

SelfTrainResult basic_self_train(const Dataset& labelled, const Dataset& unlabelled, const ClassifierBackend& backend,
                                 const SelfTrainConfig& cfg, const EvalSets& eval,
                                 const RoundCallback& on_round = {});

SelfTrainResult rejection_self_train(const Dataset& labelled, const Dataset& unlabelled,
                                     const ClassifierBackend& backend, const SelfTrainConfig& cfg,
                                     const EvalSets& eval, const RoundCallback& on_round = {});

// Dispatches on cfg.scheme.
SelfTrainResult self_train(const Dataset& labelled, const Dataset& unlabelled, const ClassifierBackend& backend,
                           const SelfTrainConfig& cfg, const EvalSets& eval, const RoundCallback& on_round = {});

}  // namespace ssgan
