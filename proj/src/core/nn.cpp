#include "nn.hpp"

#include <cmath>

namespace ssgan::nn {

namespace {

constexpr double kLeakySlope = 0.2;
constexpr double kBatchNormEps = 1e-5;

void apply(Activation a, const Matrix& z, Matrix& out) {
    switch (a) {
        case Activation::identity: out = z; break;
        case Activation::relu: out = z.cwiseMax(0.0); break;
        case Activation::leaky_relu:
            out = z.unaryExpr([](double v) { return v > 0.0 ? v : kLeakySlope * v; });
            break;
        case Activation::softplus:
            out = z.unaryExpr([](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); });
            break;
        case Activation::tanh: out = z.array().tanh().matrix(); break;
    }
}

// d_out (gradient w.r.t. the activation output) -> gradient w.r.t. z.
Matrix activation_backward(Activation a, const Matrix& z, const Matrix& out, const Matrix& d_out) {
    switch (a) {
        case Activation::identity: return d_out;
        case Activation::relu: return (z.array() > 0.0).select(d_out, 0.0);
        case Activation::leaky_relu: return (z.array() > 0.0).select(d_out, kLeakySlope * d_out);
        case Activation::softplus:
            return d_out.cwiseProduct(z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); }));
        case Activation::tanh: return d_out.array() * (1.0 - out.array().square());
    }
    return d_out;
}

}  // namespace

Matrix effective_weights(const DenseLayer& layer) {
    if (!layer.weight_norm) return layer.weights;
    const RowVector factor = layer.scale.array() / layer.weights.colwise().norm().array();
    return layer.weights.array().rowwise() * factor.array();
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::identity: return "identity";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::softplus: return "softplus";
        case Activation::tanh: return "tanh";
    }
    return "identity";
}

Activation parse_activation(const std::string& name) {
    for (Activation a : {Activation::identity, Activation::relu, Activation::leaky_relu, Activation::softplus,
                         Activation::tanh})
        if (name == activation_name(a)) return a;
    fail(ErrorCode::format, "unknown activation '" + name + "'");
}

void Gradients::zero() {
    for (auto& w : weights) w.setZero();
    for (auto& b : bias) b.setZero();
    for (auto& g : scale) g.setZero();
}

double Gradients::squared_norm() const {
    double s = 0.0;
    for (const auto& w : weights) s += w.squaredNorm();
    for (const auto& b : bias) s += b.squaredNorm();
    for (const auto& g : scale) s += g.squaredNorm();
    return s;
}

Mlp::Mlp(std::size_t input_dim, const std::vector<LayerSpec>& layers, Rng& init_rng) {
    require(input_dim > 0 && !layers.empty(), ErrorCode::invalid_argument, "empty network");
    std::size_t fan_in = input_dim;
    for (const auto& spec : layers) {
        require(spec.width > 0, ErrorCode::invalid_argument, "zero-width layer");
        DenseLayer layer;
        layer.activation = spec.activation;
        layer.input_noise = spec.input_noise;
        layer.batch_norm = spec.batch_norm;
        layer.weight_norm = spec.weight_norm;
        layer.train_scale = spec.train_scale;
        const double scale = std::sqrt((spec.activation == Activation::tanh ? 1.0 : 2.0) / static_cast<double>(fan_in));
        layer.weights.resize(static_cast<Eigen::Index>(fan_in), static_cast<Eigen::Index>(spec.width));
        for (Eigen::Index i = 0; i < layer.weights.size(); ++i)
            layer.weights.data()[i] = scale * standard_normal(init_rng);
        layer.bias = RowVector::Zero(static_cast<Eigen::Index>(spec.width));
        if (spec.weight_norm) {
            // Same expected column norm as the plain initialisation.
            layer.scale = RowVector::Constant(static_cast<Eigen::Index>(spec.width),
                                              scale * std::sqrt(static_cast<double>(fan_in)));
        }
        if (spec.batch_norm) {
            layer.population_mean = RowVector::Zero(static_cast<Eigen::Index>(spec.width));
            layer.population_var = RowVector::Ones(static_cast<Eigen::Index>(spec.width));
        }
        layers_.push_back(std::move(layer));
        fan_in = spec.width;
    }
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size() + l.scale.size());
    return n;
}

Matrix Mlp::forward(const Matrix& x, Trace* trace, Rng* noise_rng, std::size_t last, bool batch_stats) const {
    return forward_impl(x, trace, noise_rng, last, batch_stats, nullptr);
}

void Mlp::init_from_data(const Matrix& x) {
    require(x.rows() > 1, ErrorCode::invalid_argument, "data-dependent init needs at least 2 rows");
    Matrix h = x;
    for (auto& layer : layers_) {
        Matrix z = h * effective_weights(layer);
        const RowVector mean = z.colwise().mean();
        const RowVector inv_std =
            ((z.rowwise() - mean).array().square().colwise().mean() + kBatchNormEps).rsqrt().matrix();
        if (!layer.batch_norm) {
            if (layer.weight_norm)
                layer.scale.array() *= inv_std.array();
            else
                layer.weights.array().rowwise() *= inv_std.array();
            layer.bias = -mean.cwiseProduct(inv_std);
            z = (z.rowwise() - mean).array().rowwise() * inv_std.array();
        } else {
            z = (z.rowwise() - mean).array().rowwise() * inv_std.array();
            z.rowwise() += layer.bias;
        }
        Matrix out;
        apply(layer.activation, z, out);
        h = std::move(out);
    }
}

void Mlp::refresh_population_stats(const Matrix& x) {
    require(x.rows() > 1, ErrorCode::invalid_argument, "population statistics need at least 2 rows");
    std::vector<BatchStats> stats;
    forward_impl(x, nullptr, nullptr, static_cast<std::size_t>(-1), true, &stats);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        if (!layers_[l].batch_norm) continue;
        layers_[l].population_mean = stats[l].mean;
        layers_[l].population_var = stats[l].var;
    }
}

Matrix Mlp::forward_impl(const Matrix& x, Trace* trace, Rng* noise_rng, std::size_t last, bool batch_stats,
                         std::vector<BatchStats>* stats_out) const {
    require(static_cast<std::size_t>(x.cols()) == input_dim(), ErrorCode::consistency,
            "network input has " + std::to_string(x.cols()) + " columns, expected " + std::to_string(input_dim()));
    const std::size_t stop = std::min(last, layers_.size() - 1);
    if (trace) {
        trace->inputs.assign(stop + 1, Matrix());
        trace->pre.assign(stop + 1, Matrix());
        trace->outputs.assign(stop + 1, Matrix());
        trace->normed.assign(stop + 1, Matrix());
        trace->inv_std.assign(stop + 1, RowVector());
    }
    if (stats_out) stats_out->assign(stop + 1, BatchStats{});
    Matrix h = x;
    Matrix z;
    Matrix out;
    for (std::size_t l = 0; l <= stop; ++l) {
        const auto& layer = layers_[l];
        if (noise_rng && layer.input_noise > 0.0) {
            Matrix noise(h.rows(), h.cols());
            fill_standard_normal(*noise_rng, noise.data(), static_cast<std::size_t>(noise.size()));
            h += layer.input_noise * noise;
        }
        if (layer.weight_norm)
            z.noalias() = h * effective_weights(layer);
        else
            z.noalias() = h * layer.weights;
        if (layer.batch_norm) {
            RowVector mean;
            RowVector var;
            if (batch_stats) {
                require(z.rows() > 1, ErrorCode::invalid_argument, "batch normalisation needs at least 2 rows");
                mean = z.colwise().mean();
                var = (z.rowwise() - mean).array().square().colwise().mean().matrix();
            } else {
                require(layer.population_mean.size() == z.cols(), ErrorCode::consistency,
                        "batch-norm layer has no population statistics");
                mean = layer.population_mean;
                var = layer.population_var;
            }
            const RowVector inv_std = (var.array() + kBatchNormEps).rsqrt().matrix();
            z = (z.rowwise() - mean).array().rowwise() * inv_std.array();
            if (trace) {
                trace->normed[l] = z;
                trace->inv_std[l] = inv_std;
            }
            if (stats_out) (*stats_out)[l] = {std::move(mean), std::move(var)};
        }
        z.rowwise() += layer.bias;
        apply(layer.activation, z, out);
        if (trace) {
            trace->inputs[l] = std::move(h);
            trace->pre[l] = z;
            trace->outputs[l] = out;
        }
        h = std::move(out);
    }
    return h;
}

Matrix Mlp::backward(const Trace& trace, const Matrix& d_top, std::size_t top, Gradients* grads,
                     bool want_input) const {
    require(top < trace.outputs.size(), ErrorCode::internal, "backward from a layer the trace did not reach");
    Matrix d = d_top;
    for (std::size_t l = top + 1; l-- > 0;) {
        const auto& layer = layers_[l];
        Matrix dz = activation_backward(layer.activation, trace.pre[l], trace.outputs[l], d);
        if (grads) grads->bias[l] += dz.colwise().sum();
        if (layer.batch_norm) {
            const Matrix& xhat = trace.normed[l];
            const RowVector mean_d = dz.colwise().mean();
            const RowVector mean_dx = dz.cwiseProduct(xhat).colwise().mean();
            dz = ((dz.rowwise() - mean_d).array() - xhat.array().rowwise() * mean_dx.array()).rowwise() *
                 trace.inv_std[l].array();
        }
        if (layer.weight_norm) {
            const RowVector norms = layer.weights.colwise().norm();
            const Matrix dir = layer.weights.array().rowwise() / norms.array();
            if (grads) {
                const Matrix d_eff = trace.inputs[l].transpose() * dz;
                const RowVector d_scale = d_eff.cwiseProduct(dir).colwise().sum();
                if (layer.train_scale) grads->scale[l] += d_scale;
                const RowVector factor = layer.scale.array() / norms.array();
                const Matrix radial = dir.array().rowwise() * d_scale.array();
                grads->weights[l].array() += (d_eff - radial).array().rowwise() * factor.array();
            }
            if (l == 0 && !want_input) return Matrix();
            d.noalias() = dz * (dir.array().rowwise() * layer.scale.array()).matrix().transpose();
            continue;
        }
        if (grads) grads->weights[l].noalias() += trace.inputs[l].transpose() * dz;
        if (l == 0 && !want_input) return Matrix();
        d.noalias() = dz * layer.weights.transpose();
    }
    return d;
}

Gradients Mlp::make_gradients() const {
    Gradients g;
    for (const auto& l : layers_) {
        g.weights.push_back(Matrix::Zero(l.weights.rows(), l.weights.cols()));
        g.bias.push_back(RowVector::Zero(l.bias.size()));
        g.scale.push_back(RowVector::Zero(l.scale.size()));
    }
    return g;
}

std::vector<std::span<double>> Mlp::parameter_blocks() {
    std::vector<std::span<double>> blocks;
    for (auto& l : layers_) {
        blocks.emplace_back(l.weights.data(), static_cast<std::size_t>(l.weights.size()));
        blocks.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
        if (l.weight_norm) blocks.emplace_back(l.scale.data(), static_cast<std::size_t>(l.scale.size()));
    }
    return blocks;
}

std::vector<std::size_t> Mlp::block_sizes() const {
    std::vector<std::size_t> sizes;
    for (const auto& l : layers_) {
        sizes.push_back(static_cast<std::size_t>(l.weights.size()));
        sizes.push_back(static_cast<std::size_t>(l.bias.size()));
        if (l.weight_norm) sizes.push_back(static_cast<std::size_t>(l.scale.size()));
    }
    return sizes;
}

std::vector<std::span<double>> Mlp::gradient_blocks(Gradients& g) {
    std::vector<std::span<double>> blocks;
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
        blocks.emplace_back(g.weights[l].data(), static_cast<std::size_t>(g.weights[l].size()));
        blocks.emplace_back(g.bias[l].data(), static_cast<std::size_t>(g.bias[l].size()));
        if (g.scale[l].size() > 0) blocks.emplace_back(g.scale[l].data(), static_cast<std::size_t>(g.scale[l].size()));
    }
    return blocks;
}

Adam::Adam(const Mlp& net, double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (std::size_t n : net.block_sizes()) {
        m_.push_back(Vector::Zero(static_cast<Eigen::Index>(n)));
        v_.push_back(Vector::Zero(static_cast<Eigen::Index>(n)));
    }
}

void Adam::step(Mlp& net, Gradients& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const double step = lr_ * std::sqrt(c2) / c1;
    auto params = net.parameter_blocks();
    auto g = Mlp::gradient_blocks(grads);
    for (std::size_t b = 0; b < params.size(); ++b) {
        Eigen::Map<Vector> p(params[b].data(), static_cast<Eigen::Index>(params[b].size()));
        Eigen::Map<const Vector> gb(g[b].data(), static_cast<Eigen::Index>(g[b].size()));
        m_[b] = beta1_ * m_[b] + (1.0 - beta1_) * gb;
        v_[b] = beta2_ * v_[b] + (1.0 - beta2_) * gb.cwiseAbs2();
        p.array() -= step * m_[b].array() / (v_[b].array().sqrt() + eps_);
    }
}

}  // namespace ssgan::nn
