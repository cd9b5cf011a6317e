#pragma once

#include "datasets.hpp"
#include "nn.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ssgan {

enum class Architecture { small, paper };

const char* architecture_name(Architecture a);
Architecture parse_architecture(const std::string& name);

// Hidden layers of both networks. The discriminator always ends in a
// K+1-wide identity layer and the generator in a tanh layer of image size.
struct ArchitectureSpec {
    std::vector<nn::LayerSpec> discriminator_hidden;
    std::vector<nn::LayerSpec> generator_hidden;
    double head_input_noise = 0.0;  // noise on the K+1 head's input
    bool weight_norm_outputs = false;  // weight-normalise both output layers
};

ArchitectureSpec architecture_preset(Architecture a);

struct GanConfig {
    int num_classes = 10;
    int latent_dim = 100;
    int epochs = 50;
    int batch_size = 64;
    double learning_rate = 3e-4;
    Architecture arch = Architecture::small;
    // Index of the discriminator layer whose activation is f(x); -1 picks
    // the last hidden layer.
    int feature_layer = -1;
    std::uint64_t seed = 0;
    double log_epsilon = 1e-7;
    // Replaces the preset layer lists when set (tests, tiny models).
    std::optional<ArchitectureSpec> layers_override;

    void validate() const;
    ArchitectureSpec resolved_layers() const;
};

void to_json(nlohmann::json& j, const GanConfig& c);
void from_json(const nlohmann::json& j, GanConfig& c);

// Per-example view of the K+1 discriminator head.
struct DiscriminatorOutput {
    Matrix logits;       // n x (K+1)
    Matrix probs;        // softmax over all K+1
    Matrix class_probs;  // softmax over the first K, i.e. p(y | x, y < K+1)
    Vector fake_prob;    // probs(:, K)
};

DiscriminatorOutput discriminator_output(const Matrix& logits);

// Loss value together with its gradient w.r.t. the logits it was given.
struct LogitLoss {
    double value = 0.0;
    Matrix d_logits;
};

// Values floor every log argument at eps. Gradients are those of the
// unfloored log-softmax expressions, so saturated rows still get a signal.
// mean -log max(class_probs[y], eps)
LogitLoss supervised_loss_from_logits(const Matrix& logits, std::span<const int> labels, double log_epsilon);
// mean -log max(1 - fake_prob, eps)
LogitLoss real_term_from_logits(const Matrix& logits, double log_epsilon);
// mean -log max(fake_prob, eps)
LogitLoss fake_term_from_logits(const Matrix& logits, double log_epsilon);
// ||mean(real) - mean(generated)||^2, with the gradient w.r.t. generated rows
// written to d_generated when non-null.
double feature_matching_from_features(const Matrix& real, const Matrix& generated, Matrix* d_generated);

struct EpochLosses {
    double supervised = 0.0;
    double unsupervised = 0.0;
    double feature_matching = 0.0;
};

class GanModel {
public:
    GanModel() = default;
    // Freshly initialised networks for images of the given geometry.
    GanModel(const GanConfig& config, std::size_t height, std::size_t width);

    const GanConfig& config() const { return config_; }
    std::size_t height() const { return height_; }
    std::size_t width() const { return width_; }
    std::size_t feature_layer_index() const;

    const nn::Mlp& discriminator() const { return discriminator_; }
    const nn::Mlp& generator() const { return generator_; }
    nn::Mlp& discriminator() { return discriminator_; }
    nn::Mlp& generator() { return generator_; }

    const std::vector<EpochLosses>& history() const { return history_; }
    std::vector<EpochLosses>& history() { return history_; }

    DiscriminatorOutput discriminate(const Matrix& x) const;
    Matrix features(const Matrix& x) const;
    // z ~ U[0, 1)^latent_dim
    Matrix sample_latent(std::size_t n, Rng& rng) const;
    Matrix generate_pixels(const Matrix& latent) const;

private:
    GanConfig config_;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    nn::Mlp discriminator_;
    nn::Mlp generator_;
    std::vector<EpochLosses> history_;
};

// Model-level losses. Parameter gradients are accumulated into grads (the
// discriminator's for the first two, the generator's for feature matching)
// when non-null; noise_rng enables the discriminator's training noise.
double supervised_loss(const GanModel& model, const Dataset& batch, nn::Gradients* grads = nullptr,
                       Rng* noise_rng = nullptr);
double unsupervised_loss(const GanModel& model, const Dataset& real_batch, const Dataset& gen_batch,
                         nn::Gradients* grads = nullptr, Rng* noise_rng = nullptr);
double feature_matching_loss(const GanModel& model, const Dataset& real_batch, const Matrix& noise_batch,
                             nn::Gradients* grads = nullptr, Rng* noise_rng = nullptr);

// Fresh initialisation every call; deterministic in (inputs, config).
GanModel train(const Dataset& labelled, const Dataset& unlabelled, const GanConfig& config);

// class_probs per example.
Matrix predict(const GanModel& model, const Dataset& x);

std::vector<int> argmax_rows(const Matrix& probs);

Dataset generate(const GanModel& model, std::size_t n, std::uint64_t seed, ExampleId first_id = 0);

double evaluate_error(const GanModel& model, const Dataset& test);

void save_checkpoint(const GanModel& model, const std::filesystem::path& path);
GanModel load_checkpoint(const std::filesystem::path& path);

}  // namespace ssgan
