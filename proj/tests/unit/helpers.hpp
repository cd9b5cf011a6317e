#pragma once

#include "selftrain.hpp"
#include "ssgan.hpp"

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include <unistd.h>

namespace testkit {

using namespace ssgan;

// A labelled dataset of 1x1 "images" with the given ids and labels.
inline Dataset tiny(const std::vector<ExampleId>& ids, std::vector<int> labels, int k) {
    Dataset d;
    d.height = 1;
    d.width = 1;
    d.num_classes = k;
    d.pixels = Matrix::Zero(static_cast<Eigen::Index>(ids.size()), 1);
    for (std::size_t i = 0; i < ids.size(); ++i) d.pixels(static_cast<Eigen::Index>(i), 0) = 0.001 * static_cast<double>(ids[i] % 1000);
    d.ids = ids;
    d.sources.assign(ids.size(), Source::real);
    d.labels = std::move(labels);
    return d;
}

inline Dataset tiny_unlabelled(const std::vector<ExampleId>& ids, int k) {
    return tiny(ids, std::vector<int>(ids.size(), 0), k).without_labels();
}

inline std::vector<ExampleId> id_range(ExampleId first, std::size_t n) {
    std::vector<ExampleId> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = first + static_cast<ExampleId>(i);
    return v;
}

// Model returned by the table stub: a probability row per id, with a
// fallback for ids it has no entry for.
struct TableModel : Model {
    int call = 0;
    std::map<ExampleId, std::vector<double>> rows;
    std::vector<double> fallback;
};

// What train_on saw, for assertions.
struct TrainCall {
    std::uint64_t seed = 0;
    std::map<ExampleId, int> labels;  // every labelled row, last one wins on duplicates
    std::vector<ExampleId> labelled_ids;
    std::vector<ExampleId> unlabelled_ids;
};

// Stub whose n-th trained model is the n-th table (the last table repeats).
// Generated images are 1x1 zeros.
class TableBackend : public ClassifierBackend {
public:
    TableBackend(int k, std::vector<std::map<ExampleId, std::vector<double>>> tables)
        : k_(k), tables_(std::move(tables)) {}

    ModelPtr train_on(const Dataset& labelled, const Dataset& unlabelled, std::uint64_t seed) const override {
        std::lock_guard lock(mu_);
        TrainCall c;
        c.seed = seed;
        c.labelled_ids = labelled.ids;
        c.unlabelled_ids = unlabelled.ids;
        for (std::size_t i = 0; i < labelled.size(); ++i) c.labels[labelled.ids[i]] = (*labelled.labels)[i];
        calls_.push_back(std::move(c));
        auto m = std::make_shared<TableModel>();
        m->call = static_cast<int>(calls_.size()) - 1;
        if (!tables_.empty()) m->rows = tables_[std::min<std::size_t>(static_cast<std::size_t>(m->call), tables_.size() - 1)];
        m->fallback.assign(static_cast<std::size_t>(k_), 1.0 / k_);
        return m;
    }

    Matrix predict_proba(const Model& model, const Dataset& x) const override {
        const auto& m = dynamic_cast<const TableModel&>(model);
        Matrix out(static_cast<Eigen::Index>(x.size()), k_);
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto it = m.rows.find(x.ids[i]);
            const auto& row = it == m.rows.end() ? m.fallback : it->second;
            for (int k = 0; k < k_; ++k) out(static_cast<Eigen::Index>(i), k) = row[static_cast<std::size_t>(k)];
        }
        return out;
    }

    Dataset generate(const Model&, std::size_t n, std::uint64_t) const override {
        Dataset d = tiny_unlabelled(id_range(0, n), k_);
        d.pixels.setZero();
        d.sources.assign(n, Source::generated);
        return d;
    }

    const std::vector<TrainCall>& calls() const { return calls_; }

private:
    int k_;
    std::vector<std::map<ExampleId, std::vector<double>>> tables_;
    mutable std::mutex mu_;
    mutable std::vector<TrainCall> calls_;
};

// Deterministic pseudo-random simplex per (model, id); a stand-in learner
// for property tests.
class HashBackend : public ClassifierBackend {
public:
    HashBackend(int k, double sharpness) : k_(k), sharpness_(sharpness) {}

    struct HashModel : Model {
        std::uint64_t seed = 0;
    };

    ModelPtr train_on(const Dataset& labelled, const Dataset&, std::uint64_t seed) const override {
        auto m = std::make_shared<HashModel>();
        std::uint64_t h = seed;
        for (std::size_t i = 0; i < labelled.size(); ++i)
            h = derive_seed(h, static_cast<std::uint64_t>(labelled.ids[i]), static_cast<std::uint64_t>((*labelled.labels)[i]));
        m->seed = h;
        return m;
    }

    Matrix predict_proba(const Model& model, const Dataset& x) const override {
        const auto& m = dynamic_cast<const HashModel&>(model);
        Matrix out(static_cast<Eigen::Index>(x.size()), k_);
        for (std::size_t i = 0; i < x.size(); ++i) {
            Rng rng(derive_seed(m.seed, static_cast<std::uint64_t>(x.ids[i])));
            double total = 0.0;
            for (int k = 0; k < k_; ++k) {
                const double v = std::exp(sharpness_ * uniform_real(rng));
                out(static_cast<Eigen::Index>(i), k) = v;
                total += v;
            }
            out.row(static_cast<Eigen::Index>(i)) /= total;
        }
        return out;
    }

    Dataset generate(const Model&, std::size_t n, std::uint64_t) const override {
        Dataset d = tiny_unlabelled(id_range(0, n), k_);
        d.sources.assign(n, Source::generated);
        return d;
    }

private:
    int k_;
    double sharpness_;
};

// A fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    static std::atomic<int> counter{0};
    auto dir = std::filesystem::temp_directory_path() /
               ("ssgan-test-" + name + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// A network small enough for exhaustive finite differences.
inline GanConfig tiny_gan_config(int k, bool with_norms) {
    GanConfig c;
    c.num_classes = k;
    c.latent_dim = 3;
    c.seed = 5;
    ArchitectureSpec a;
    a.discriminator_hidden = {{6, nn::Activation::softplus, 0.0, false, with_norms},
                              {5, nn::Activation::tanh, 0.0, false, with_norms}};
    a.generator_hidden = {{6, nn::Activation::softplus, 0.0, with_norms, false}};
    a.weight_norm_outputs = with_norms;
    c.layers_override = a;
    return c;
}

}  // namespace testkit
