#pragma once

#include "common.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ssgan::nn {

enum class Activation { identity, relu, leaky_relu, softplus, tanh };

const char* activation_name(Activation a);
Activation parse_activation(const std::string& name);

struct DenseLayer {
    Matrix weights;  // fan_in x fan_out; the direction v when weight-normalised
    RowVector bias;
    // Weight normalisation: column j of the effective matrix is
    // scale_j * v_j / ||v_j||.
    bool weight_norm = false;
    RowVector scale;
    bool train_scale = true;  // false keeps the scale set by init_from_data
    Activation activation = Activation::identity;
    double input_noise = 0.0;  // std of Gaussian noise added to the input while training
    // Batch-normalised pre-activations; bias then acts as the shift.
    bool batch_norm = false;
    RowVector population_mean;
    RowVector population_var;

    std::size_t fan_in() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t fan_out() const { return static_cast<std::size_t>(weights.cols()); }
};

struct LayerSpec {
    std::size_t width = 0;
    Activation activation = Activation::identity;
    double input_noise = 0.0;
    bool batch_norm = false;
    bool weight_norm = false;
    bool train_scale = true;
};

// The matrix a layer actually multiplies by.
Matrix effective_weights(const DenseLayer& layer);

// Activations recorded by a forward pass; outputs[l] is layer l's
// post-activation value, inputs[l] what layer l saw (noise included).
struct Trace {
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre;
    std::vector<Matrix> outputs;
    std::vector<Matrix> normed;        // batch-norm layers only
    std::vector<RowVector> inv_std;    // batch-norm layers only
};

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<RowVector> bias;
    std::vector<RowVector> scale;  // empty for layers without weight norm

    void zero();
    double squared_norm() const;
};

class Mlp {
public:
    Mlp() = default;
    Mlp(std::size_t input_dim, const std::vector<LayerSpec>& layers, Rng& init_rng);

    std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().fan_in(); }
    std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().fan_out(); }
    std::size_t depth() const { return layers_.size(); }
    std::size_t parameter_count() const;

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }

    // Noise is only injected when noise_rng is non-null. Stops after
    // layer `last` when given (inclusive). Batch-norm layers normalise with
    // the batch's own statistics when batch_stats is set and with the stored
    // population statistics otherwise.
    Matrix forward(const Matrix& x, Trace* trace = nullptr, Rng* noise_rng = nullptr,
                   std::size_t last = static_cast<std::size_t>(-1), bool batch_stats = false) const;

    // Back-propagates d_top, the gradient w.r.t. outputs[top], down to the
    // input. Parameter gradients are accumulated into grads when non-null.
    // Returns the input gradient, or an empty matrix when want_input is false.
    Matrix backward(const Trace& trace, const Matrix& d_top, std::size_t top, Gradients* grads,
                    bool want_input = true) const;

    Gradients make_gradients() const;

    // Data-dependent initialisation: rescales each layer in turn so that its
    // pre-activations on x have zero mean and unit variance per unit.
    void init_from_data(const Matrix& x);

    // Sets every batch-norm layer's population statistics from the batch x.
    void refresh_population_stats(const Matrix& x);

    // Flat views over every parameter, in a fixed layer-major order.
    std::vector<std::span<double>> parameter_blocks();
    std::vector<std::size_t> block_sizes() const;
    static std::vector<std::span<double>> gradient_blocks(Gradients& g);

private:
    struct BatchStats {
        RowVector mean;
        RowVector var;
    };
    Matrix forward_impl(const Matrix& x, Trace* trace, Rng* noise_rng, std::size_t last, bool batch_stats,
                        std::vector<BatchStats>* stats_out) const;

    std::vector<DenseLayer> layers_;
};

class Adam {
public:
    Adam() = default;
    Adam(const Mlp& net, double learning_rate, double beta1 = 0.5, double beta2 = 0.999, double eps = 1e-8);

    void step(Mlp& net, Gradients& grads);
    void set_learning_rate(double lr) { lr_ = lr; }

private:
    double lr_ = 0.0;
    double beta1_ = 0.5;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long t_ = 0;
    std::vector<Vector> m_;
    std::vector<Vector> v_;
};

}  // namespace ssgan::nn
