#include "gan_backend.hpp"

#include <nlohmann/json.hpp>

#include <cstring>

namespace ssgan {

namespace {

// Two independent 64-bit FNV-1a style streams over the raw bytes.
struct Fingerprint {
    std::uint64_t a = 0xcbf29ce484222325ULL;
    std::uint64_t b = 0x84222325cbf29ce4ULL;

    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            a = (a ^ p[i]) * 0x100000001b3ULL;
            b = (b ^ p[i]) * 0x00000100000001b3ULL + 0x9e3779b97f4a7c15ULL;
        }
    }
    template <typename T>
    void value(const T& v) {
        bytes(&v, sizeof v);
    }
    void dataset(const Dataset& d) {
        value(d.height);
        value(d.width);
        value(d.num_classes);
        value(d.size());
        bytes(d.pixels.data(), static_cast<std::size_t>(d.pixels.size()) * sizeof(double));
        bytes(d.ids.data(), d.ids.size() * sizeof(ExampleId));
        value(d.has_labels());
        if (d.has_labels()) bytes(d.labels->data(), d.labels->size() * sizeof(int));
    }
};

}  // namespace

ModelPtr TrainingCache::find(const Key& key) {
    std::lock_guard lock(mu_);
    for (auto it = entries_.begin(); it != entries_.end(); ++it) {
        if (it->first != key) continue;
        entries_.splice(entries_.begin(), entries_, it);
        ++hits_;
        return entries_.front().second;
    }
    return nullptr;
}

void TrainingCache::insert(const Key& key, ModelPtr model) {
    std::lock_guard lock(mu_);
    for (const auto& e : entries_)
        if (e.first == key) return;
    entries_.emplace_front(key, std::move(model));
    while (entries_.size() > capacity_) entries_.pop_back();
}

std::size_t TrainingCache::hits() const {
    std::lock_guard lock(mu_);
    return hits_;
}

const GanModel& as_gan(const Model& model) {
    const auto* handle = dynamic_cast<const GanModelHandle*>(&model);
    require(handle != nullptr, ErrorCode::invalid_argument, "model was not produced by the GAN backend");
    return handle->gan();
}

ModelPtr GanBackend::train_on(const Dataset& labelled, const Dataset& unlabelled, std::uint64_t seed) const {
    GanConfig cfg = config_;
    cfg.seed = derive_seed(config_.seed, seed);
    TrainingCache::Key key;
    if (cache_) {
        Fingerprint f;
        const std::string c = nlohmann::json(cfg).dump();
        f.bytes(c.data(), c.size());
        f.dataset(labelled);
        f.dataset(unlabelled);
        key = {f.a, f.b};
        if (ModelPtr hit = cache_->find(key)) return hit;
    }
    ModelPtr model = std::make_shared<GanModelHandle>(train(labelled, unlabelled, cfg));
    if (cache_) cache_->insert(key, model);
    return model;
}

Matrix GanBackend::predict_proba(const Model& model, const Dataset& x) const {
    return predict(as_gan(model), x);
}

Dataset GanBackend::generate(const Model& model, std::size_t n, std::uint64_t seed) const {
    return ssgan::generate(as_gan(model), n, seed);
}

}  // namespace ssgan
