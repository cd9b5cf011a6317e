#pragma once

#include "selftrain.hpp"
#include "ssgan.hpp"

#include <list>
#include <memory>
#include <mutex>
#include <utility>

namespace ssgan {

class GanModelHandle : public Model {
public:
    explicit GanModelHandle(GanModel model) : model_(std::move(model)) {}
    const GanModel& gan() const { return model_; }

private:
    GanModel model_;
};

// Trained models keyed by a fingerprint of everything training reads. The
// schemes share their round-0 training with the vanilla cell of the same
// seed, so a grid run retrains nothing twice. Least recently used entries go
// first once capacity is reached.
class TrainingCache {
public:
    using Key = std::pair<std::uint64_t, std::uint64_t>;

    explicit TrainingCache(std::size_t capacity = 16) : capacity_(capacity) {}

    ModelPtr find(const Key& key);
    void insert(const Key& key, ModelPtr model);
    std::size_t hits() const;

private:
    mutable std::mutex mu_;
    std::size_t capacity_;
    std::size_t hits_ = 0;
    std::list<std::pair<Key, ModelPtr>> entries_;  // most recent first
};

// Self-training backend around the K+1 GAN. Every train_on call starts from
// a fresh initialisation seeded by mixing config.seed with the call's seed.
class GanBackend : public ClassifierBackend {
public:
    explicit GanBackend(GanConfig config, std::shared_ptr<TrainingCache> cache = nullptr)
        : config_(std::move(config)), cache_(std::move(cache)) {
        config_.validate();
    }

    ModelPtr train_on(const Dataset& labelled, const Dataset& unlabelled, std::uint64_t seed) const override;
    Matrix predict_proba(const Model& model, const Dataset& x) const override;
    Dataset generate(const Model& model, std::size_t n, std::uint64_t seed) const override;

    const GanConfig& config() const { return config_; }

private:
    GanConfig config_;
    std::shared_ptr<TrainingCache> cache_;
};

const GanModel& as_gan(const Model& model);

}  // namespace ssgan
