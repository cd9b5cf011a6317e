#include "ssgan.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace ssgan {

namespace {

constexpr int kCheckpointVersion = 1;
constexpr Eigen::Index kPredictChunk = 1024;
constexpr std::size_t kPopulationBatch = 2000;
constexpr std::size_t kInitBatch = 500;

using nlohmann::json;

Matrix softmax_rows(const Matrix& logits) {
    Matrix p = logits;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double m = p.row(i).maxCoeff();
        p.row(i) = (p.row(i).array() - m).exp().matrix();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

double log_sum_exp(const RowVector& v) {
    const double m = v.maxCoeff();
    return m + std::log((v.array() - m).exp().sum());
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> rows) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), src.cols());
    for (std::size_t k = 0; k < rows.size(); ++k)
        out.row(static_cast<Eigen::Index>(k)) = src.row(static_cast<Eigen::Index>(rows[k]));
    return out;
}

void check_batch(const Dataset& batch, const char* what) {
    require(!batch.empty(), ErrorCode::empty_input, std::string(what) + ": empty batch");
}

json layer_to_json(const nn::DenseLayer& l) {
    return json{{"fan_in", l.fan_in()},
                {"fan_out", l.fan_out()},
                {"activation", nn::activation_name(l.activation)},
                {"input_noise", l.input_noise},
                {"batch_norm", l.batch_norm},
                {"weight_norm", l.weight_norm},
                {"train_scale", l.train_scale},
                {"scale", std::vector<double>(l.scale.data(), l.scale.data() + l.scale.size())},
                {"population_mean", std::vector<double>(l.population_mean.data(), l.population_mean.data() + l.population_mean.size())},
                {"population_var", std::vector<double>(l.population_var.data(), l.population_var.data() + l.population_var.size())},
                {"weights", std::vector<double>(l.weights.data(), l.weights.data() + l.weights.size())},
                {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}};
}

nn::DenseLayer layer_from_json(const json& j) {
    nn::DenseLayer l;
    const auto fan_in = j.at("fan_in").get<Eigen::Index>();
    const auto fan_out = j.at("fan_out").get<Eigen::Index>();
    l.activation = nn::parse_activation(j.at("activation").get<std::string>());
    l.input_noise = j.at("input_noise").get<double>();
    const auto w = j.at("weights").get<std::vector<double>>();
    const auto b = j.at("bias").get<std::vector<double>>();
    require(static_cast<Eigen::Index>(w.size()) == fan_in * fan_out && static_cast<Eigen::Index>(b.size()) == fan_out,
            ErrorCode::format, "checkpoint layer size mismatch");
    l.weights = Eigen::Map<const Matrix>(w.data(), fan_in, fan_out);
    l.bias = Eigen::Map<const RowVector>(b.data(), fan_out);
    l.weight_norm = j.at("weight_norm").get<bool>();
    l.train_scale = j.value("train_scale", true);
    if (l.weight_norm) {
        const auto g = j.at("scale").get<std::vector<double>>();
        require(static_cast<Eigen::Index>(g.size()) == fan_out, ErrorCode::format, "checkpoint scale size mismatch");
        l.scale = Eigen::Map<const RowVector>(g.data(), fan_out);
    }
    l.batch_norm = j.at("batch_norm").get<bool>();
    if (l.batch_norm) {
        const auto m = j.at("population_mean").get<std::vector<double>>();
        const auto v = j.at("population_var").get<std::vector<double>>();
        require(static_cast<Eigen::Index>(m.size()) == fan_out && static_cast<Eigen::Index>(v.size()) == fan_out,
                ErrorCode::format, "checkpoint batch-norm size mismatch");
        l.population_mean = Eigen::Map<const RowVector>(m.data(), fan_out);
        l.population_var = Eigen::Map<const RowVector>(v.data(), fan_out);
    }
    return l;
}

json layers_to_json(const std::vector<nn::LayerSpec>& v) {
    json out = json::array();
    for (const auto& s : v)
        out.push_back({{"width", s.width},
                       {"activation", nn::activation_name(s.activation)},
                       {"input_noise", s.input_noise},
                       {"batch_norm", s.batch_norm},
                       {"weight_norm", s.weight_norm},
                       {"train_scale", s.train_scale}});
    return out;
}

std::vector<nn::LayerSpec> layers_from_json(const json& j) {
    std::vector<nn::LayerSpec> out;
    for (const auto& e : j)
        out.push_back({e.at("width").get<std::size_t>(), nn::parse_activation(e.at("activation").get<std::string>()),
                       e.at("input_noise").get<double>(), e.value("batch_norm", false), e.value("weight_norm", false),
                       e.value("train_scale", true)});
    return out;
}

}  // namespace

const char* architecture_name(Architecture a) {
    return a == Architecture::small ? "small" : "paper";
}

Architecture parse_architecture(const std::string& name) {
    if (name == "small") return Architecture::small;
    if (name == "paper") return Architecture::paper;
    fail(ErrorCode::validation, "unknown architecture '" + name + "' (expected small|paper)");
}

ArchitectureSpec architecture_preset(Architecture a) {
    using nn::Activation;
    ArchitectureSpec s;
    if (a == Architecture::small) {
        // Weight-normalized with the scales fixed at their data-dependent
        // init; a trainable scale lets D overpower G within a few epochs.
        s.discriminator_hidden = {{192, Activation::relu, 0.6, false, true, false},
                                  {96, Activation::relu, 0.5, false, true, false}};
        s.head_input_noise = 0.5;
        s.generator_hidden = {{256, Activation::softplus, 0.0, true}, {256, Activation::softplus, 0.0, true}};
    } else {
        // Fully connected MNIST networks of the Improved-GAN reference model.
        s.head_input_noise = 0.5;
        s.discriminator_hidden = {{1000, Activation::relu, 0.3},
                                  {500, Activation::relu, 0.5},
                                  {250, Activation::relu, 0.5},
                                  {250, Activation::relu, 0.5},
                                  {250, Activation::relu, 0.5}};
        s.generator_hidden = {{500, Activation::softplus, 0.0, true}, {500, Activation::softplus, 0.0, true}};
    }
    return s;
}

void GanConfig::validate() const {
    require(num_classes >= 2, ErrorCode::validation, "gan: num_classes must be >= 2");
    require(latent_dim >= 1, ErrorCode::validation, "gan.latent_dim must be >= 1");
    require(epochs >= 1, ErrorCode::validation, "gan.epochs must be >= 1");
    require(batch_size >= 1, ErrorCode::validation, "gan.batch_size must be >= 1");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::validation, "gan.lr must be > 0");
    require(log_epsilon > 0.0 && log_epsilon < 1.0, ErrorCode::validation, "gan.log_eps must be in (0, 1)");
    const auto hidden = static_cast<int>(resolved_layers().discriminator_hidden.size());
    require(hidden >= 1, ErrorCode::validation, "discriminator needs a hidden layer for f(x)");
    require(feature_layer >= -1 && feature_layer < hidden, ErrorCode::validation,
            "gan.feature_layer must index a hidden discriminator layer (or be -1)");
}

ArchitectureSpec GanConfig::resolved_layers() const {
    return layers_override ? *layers_override : architecture_preset(arch);
}

void to_json(json& j, const GanConfig& c) {
    j = json{{"num_classes", c.num_classes},   {"latent_dim", c.latent_dim}, {"epochs", c.epochs},
             {"batch_size", c.batch_size},     {"lr", c.learning_rate},      {"arch", architecture_name(c.arch)},
             {"feature_layer", c.feature_layer}, {"seed", c.seed},           {"log_eps", c.log_epsilon}};
    if (c.layers_override) {
        j["layers_override"] = {{"discriminator", layers_to_json(c.layers_override->discriminator_hidden)},
                                {"generator", layers_to_json(c.layers_override->generator_hidden)},
                                {"head_input_noise", c.layers_override->head_input_noise},
                                {"weight_norm_outputs", c.layers_override->weight_norm_outputs}};
    }
}

void from_json(const json& j, GanConfig& c) {
    c.num_classes = j.at("num_classes").get<int>();
    c.latent_dim = j.at("latent_dim").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("lr").get<double>();
    c.arch = parse_architecture(j.at("arch").get<std::string>());
    c.feature_layer = j.at("feature_layer").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.log_epsilon = j.at("log_eps").get<double>();
    c.layers_override.reset();
    if (j.contains("layers_override")) {
        const auto& o = j.at("layers_override");
        c.layers_override = ArchitectureSpec{layers_from_json(o.at("discriminator")), layers_from_json(o.at("generator")),
                                             o.at("head_input_noise").get<double>(),
                                             o.value("weight_norm_outputs", false)};
    }
}

DiscriminatorOutput discriminator_output(const Matrix& logits) {
    require(logits.cols() >= 3, ErrorCode::consistency, "discriminator head needs K+1 >= 3 logits");
    const Eigen::Index k = logits.cols() - 1;
    DiscriminatorOutput out;
    out.logits = logits;
    out.probs = softmax_rows(logits);
    out.class_probs = softmax_rows(logits.leftCols(k));
    out.fake_prob = out.probs.col(k);
    return out;
}

LogitLoss supervised_loss_from_logits(const Matrix& logits, std::span<const int> labels, double log_epsilon) {
    require(logits.rows() > 0, ErrorCode::empty_input, "supervised loss: empty batch");
    require(static_cast<std::size_t>(logits.rows()) == labels.size(), ErrorCode::consistency,
            "supervised loss: label count mismatch");
    const Eigen::Index k = logits.cols() - 1;
    const Matrix c = softmax_rows(logits.leftCols(k));
    const auto n = static_cast<double>(logits.rows());
    const double cap = -std::log(log_epsilon);
    LogitLoss out;
    out.d_logits = Matrix::Zero(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        require(y >= 0 && y < k, ErrorCode::invalid_argument, "supervised loss: label out of range");
        out.value += std::min(log_sum_exp(logits.row(i).head(k)) - logits(i, y), cap);
        out.d_logits.row(i).head(k) = c.row(i) / n;
        out.d_logits(i, y) -= 1.0 / n;
    }
    out.value /= n;
    return out;
}

LogitLoss real_term_from_logits(const Matrix& logits, double log_epsilon) {
    require(logits.rows() > 0, ErrorCode::empty_input, "unsupervised loss: empty real batch");
    const Eigen::Index k = logits.cols() - 1;
    const Matrix p = softmax_rows(logits);
    const Matrix c = softmax_rows(logits.leftCols(k));
    const auto n = static_cast<double>(logits.rows());
    const double cap = -std::log(log_epsilon);
    LogitLoss out;
    out.d_logits = Matrix::Zero(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        // -log(1 - fake_prob) = lse(all logits) - lse(class logits)
        out.value += std::min(log_sum_exp(logits.row(i)) - log_sum_exp(logits.row(i).head(k)), cap);
        out.d_logits.row(i).head(k) = (p.row(i).head(k) - c.row(i)) / n;
        out.d_logits(i, k) = p(i, k) / n;
    }
    out.value /= n;
    return out;
}

LogitLoss fake_term_from_logits(const Matrix& logits, double log_epsilon) {
    require(logits.rows() > 0, ErrorCode::empty_input, "unsupervised loss: empty generated batch");
    const Eigen::Index k = logits.cols() - 1;
    const Matrix p = softmax_rows(logits);
    const auto n = static_cast<double>(logits.rows());
    const double cap = -std::log(log_epsilon);
    LogitLoss out;
    out.d_logits = Matrix::Zero(logits.rows(), logits.cols());
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        out.value += std::min(log_sum_exp(logits.row(i)) - logits(i, k), cap);
        out.d_logits.row(i) = p.row(i) / n;
        out.d_logits(i, k) -= 1.0 / n;
    }
    out.value /= n;
    return out;
}

double feature_matching_from_features(const Matrix& real, const Matrix& generated, Matrix* d_generated) {
    require(real.rows() > 0 && generated.rows() > 0, ErrorCode::empty_input, "feature matching: empty batch");
    require(real.cols() == generated.cols(), ErrorCode::consistency, "feature matching: feature dimension mismatch");
    const RowVector diff = real.colwise().mean() - generated.colwise().mean();
    if (d_generated) {
        // d/dg_i of ||m_r - mean(g)||^2 = -2 (m_r - m_g) / n_g
        *d_generated = (-2.0 / static_cast<double>(generated.rows()) * diff).replicate(generated.rows(), 1);
    }
    return diff.squaredNorm();
}

GanModel::GanModel(const GanConfig& config, std::size_t height, std::size_t width)
    : config_(config), height_(height), width_(width) {
    config_.validate();
    const ArchitectureSpec arch = config_.resolved_layers();
    Rng init(derive_seed(config_.seed, "init"));

    std::vector<nn::LayerSpec> d_layers = arch.discriminator_hidden;
    d_layers.push_back({static_cast<std::size_t>(config_.num_classes + 1), nn::Activation::identity,
                        arch.head_input_noise, false, arch.weight_norm_outputs});
    discriminator_ = nn::Mlp(height * width, d_layers, init);

    std::vector<nn::LayerSpec> g_layers = arch.generator_hidden;
    g_layers.push_back({height * width, nn::Activation::tanh, 0.0, false, arch.weight_norm_outputs});
    generator_ = nn::Mlp(static_cast<std::size_t>(config_.latent_dim), g_layers, init);
}

std::size_t GanModel::feature_layer_index() const {
    const std::size_t hidden = discriminator_.depth() - 1;
    return config_.feature_layer < 0 ? hidden - 1 : static_cast<std::size_t>(config_.feature_layer);
}

DiscriminatorOutput GanModel::discriminate(const Matrix& x) const {
    return discriminator_output(discriminator_.forward(x));
}

Matrix GanModel::features(const Matrix& x) const {
    return discriminator_.forward(x, nullptr, nullptr, feature_layer_index());
}

Matrix GanModel::sample_latent(std::size_t n, Rng& rng) const {
    Matrix z(static_cast<Eigen::Index>(n), config_.latent_dim);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = uniform_real(rng);
    return z;
}

Matrix GanModel::generate_pixels(const Matrix& latent) const {
    return generator_.forward(latent).cwiseMax(-1.0).cwiseMin(1.0);
}

double supervised_loss(const GanModel& model, const Dataset& batch, nn::Gradients* grads, Rng* noise_rng) {
    check_batch(batch, "supervised loss");
    require(batch.has_labels(), ErrorCode::invalid_argument, "supervised loss: batch has no labels");
    nn::Trace trace;
    const Matrix logits = model.discriminator().forward(batch.pixels, grads ? &trace : nullptr, noise_rng);
    LogitLoss l = supervised_loss_from_logits(logits, *batch.labels, model.config().log_epsilon);
    if (grads) model.discriminator().backward(trace, l.d_logits, model.discriminator().depth() - 1, grads, false);
    return l.value;
}

double unsupervised_loss(const GanModel& model, const Dataset& real_batch, const Dataset& gen_batch,
                         nn::Gradients* grads, Rng* noise_rng) {
    check_batch(real_batch, "unsupervised loss");
    check_batch(gen_batch, "unsupervised loss");
    const auto& d = model.discriminator();
    const double eps = model.config().log_epsilon;
    nn::Trace trace;
    LogitLoss real = real_term_from_logits(d.forward(real_batch.pixels, grads ? &trace : nullptr, noise_rng), eps);
    if (grads) d.backward(trace, real.d_logits, d.depth() - 1, grads, false);
    LogitLoss fake = fake_term_from_logits(d.forward(gen_batch.pixels, grads ? &trace : nullptr, noise_rng), eps);
    if (grads) d.backward(trace, fake.d_logits, d.depth() - 1, grads, false);
    return real.value + fake.value;
}

double feature_matching_loss(const GanModel& model, const Dataset& real_batch, const Matrix& noise_batch,
                             nn::Gradients* grads, Rng* noise_rng) {
    check_batch(real_batch, "feature matching");
    require(noise_batch.rows() > 0, ErrorCode::empty_input, "feature matching: empty noise batch");
    const auto& d = model.discriminator();
    const auto& g = model.generator();
    const std::size_t top = model.feature_layer_index();

    nn::Trace g_trace;
    nn::Trace d_trace;
    const Matrix gen = g.forward(noise_batch, grads ? &g_trace : nullptr, nullptr, g.depth() - 1, true);
    const Matrix real_feat = d.forward(real_batch.pixels, nullptr, noise_rng, top);
    const Matrix gen_feat = d.forward(gen, grads ? &d_trace : nullptr, noise_rng, top);
    Matrix d_feat;
    const double value = feature_matching_from_features(real_feat, gen_feat, grads ? &d_feat : nullptr);
    if (grads) {
        const Matrix d_images = d.backward(d_trace, d_feat, top, nullptr);
        g.backward(g_trace, d_images, g.depth() - 1, grads, false);
    }
    return value;
}

GanModel train(const Dataset& labelled, const Dataset& unlabelled, const GanConfig& config) {
    config.validate();
    require(!labelled.empty(), ErrorCode::empty_input, "train: labelled set is empty");
    require(labelled.has_labels(), ErrorCode::invalid_argument, "train: labelled set has no labels");
    require(!unlabelled.empty(), ErrorCode::empty_input, "train: unlabelled set is empty");
    require(labelled.num_classes == config.num_classes, ErrorCode::consistency,
            "train: dataset classes do not match gan config");
    require(labelled.dim() == unlabelled.dim(), ErrorCode::consistency, "train: image geometry differs");
    for (int y : *labelled.labels)
        require(y >= 0 && y < config.num_classes, ErrorCode::invalid_argument, "train: label out of range");

    GanModel model(config, labelled.height, labelled.width);
    nn::Mlp& disc = model.discriminator();
    nn::Mlp& gen = model.generator();
    {
        Rng init_rng(derive_seed(config.seed, "data_init"));
        std::vector<std::size_t> rows(std::min(kInitBatch, unlabelled.size()));
        for (auto& r : rows) r = uniform_index(init_rng, unlabelled.size());
        if (rows.size() > 1) disc.init_from_data(gather_rows(unlabelled.pixels, rows));
        gen.init_from_data(model.sample_latent(kInitBatch, init_rng));
    }
    nn::Adam d_opt(disc, config.learning_rate);
    nn::Adam g_opt(gen, config.learning_rate);
    nn::Gradients d_grads = disc.make_gradients();
    nn::Gradients g_grads = gen.make_gradients();

    Rng shuffle_rng(derive_seed(config.seed, "shuffle"));
    Rng noise_rng(derive_seed(config.seed, "noise"));
    Rng latent_rng(derive_seed(config.seed, "latent"));

    const auto bs = static_cast<std::size_t>(config.batch_size);
    const std::size_t n_unl = unlabelled.size();
    const std::size_t n_batches = std::max<std::size_t>(1, n_unl / bs);
    const std::size_t unl_batch = std::min(bs, n_unl);
    const double eps = config.log_epsilon;
    const std::size_t top = model.feature_layer_index();

    std::vector<std::size_t> unl_order(n_unl);
    std::iota(unl_order.begin(), unl_order.end(), std::size_t{0});
    std::vector<std::size_t> lab_order(labelled.size());
    std::iota(lab_order.begin(), lab_order.end(), std::size_t{0});
    std::size_t lab_cursor = lab_order.size();

    auto shuffle = [&](std::vector<std::size_t>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(shuffle_rng, i)]);
    };

    nn::Trace trace;
    nn::Trace g_trace;
    std::vector<std::size_t> lab_rows(bs);
    std::vector<int> lab_labels(bs);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        // Flat for the first two thirds, then linearly down towards zero.
        const double lr = config.learning_rate *
                          std::min(1.0, 3.0 * (1.0 - static_cast<double>(epoch) / static_cast<double>(config.epochs)));
        d_opt.set_learning_rate(lr);
        g_opt.set_learning_rate(lr);
        shuffle(unl_order);
        EpochLosses sums;
        for (std::size_t b = 0; b < n_batches; ++b) {
            for (std::size_t i = 0; i < bs; ++i) {
                if (lab_cursor == lab_order.size()) {
                    shuffle(lab_order);
                    lab_cursor = 0;
                }
                lab_rows[i] = lab_order[lab_cursor++];
                lab_labels[i] = (*labelled.labels)[lab_rows[i]];
            }
            const Matrix x_lab = gather_rows(labelled.pixels, lab_rows);
            const Matrix x_unl =
                gather_rows(unlabelled.pixels, std::span<const std::size_t>(unl_order).subspan(b * unl_batch, unl_batch));

            // The generator is not touched by the discriminator step, so one
            // forward pass serves both steps.
            const Matrix x_gen = gen.forward(model.sample_latent(unl_batch, latent_rng), &g_trace, nullptr, gen.depth() - 1, true);

            // Discriminator: L_supervised + L_unsupervised.
            d_grads.zero();
            LogitLoss sup = supervised_loss_from_logits(disc.forward(x_lab, &trace, &noise_rng), lab_labels, eps);
            disc.backward(trace, sup.d_logits, disc.depth() - 1, &d_grads, false);
            LogitLoss real = real_term_from_logits(disc.forward(x_unl, &trace, &noise_rng), eps);
            disc.backward(trace, real.d_logits, disc.depth() - 1, &d_grads, false);
            LogitLoss fake = fake_term_from_logits(disc.forward(x_gen, &trace, &noise_rng), eps);
            disc.backward(trace, fake.d_logits, disc.depth() - 1, &d_grads, false);
            d_opt.step(disc, d_grads);

            // Generator: feature matching against the updated discriminator.
            g_grads.zero();
            const Matrix real_feat = disc.forward(x_unl, nullptr, &noise_rng, top);
            const Matrix gen_feat = disc.forward(x_gen, &trace, &noise_rng, top);
            Matrix d_feat;
            const double fm = feature_matching_from_features(real_feat, gen_feat, &d_feat);
            gen.backward(g_trace, disc.backward(trace, d_feat, top, nullptr), gen.depth() - 1, &g_grads, false);
            g_opt.step(gen, g_grads);

            const double unsup = real.value + fake.value;
            if (!std::isfinite(sup.value) || !std::isfinite(unsup) || !std::isfinite(fm) ||
                !std::isfinite(d_grads.squared_norm()) || !std::isfinite(g_grads.squared_norm()))
                fail(ErrorCode::diverged, "training diverged at epoch " + std::to_string(epoch + 1));
            sums.supervised += sup.value;
            sums.unsupervised += unsup;
            sums.feature_matching += fm;
        }
        const auto nb = static_cast<double>(n_batches);
        model.history().push_back({sums.supervised / nb, sums.unsupervised / nb, sums.feature_matching / nb});
    }
    Rng stats_rng(derive_seed(config.seed, "population"));
    gen.refresh_population_stats(model.sample_latent(kPopulationBatch, stats_rng));
    return model;
}

Matrix predict(const GanModel& model, const Dataset& x) {
    Matrix out(static_cast<Eigen::Index>(x.size()), model.config().num_classes);
    for (Eigen::Index start = 0; start < out.rows(); start += kPredictChunk) {
        const Eigen::Index len = std::min(kPredictChunk, out.rows() - start);
        out.middleRows(start, len) = model.discriminate(x.pixels.middleRows(start, len)).class_probs;
    }
    return out;
}

std::vector<int> argmax_rows(const Matrix& probs) {
    std::vector<int> out(static_cast<std::size_t>(probs.rows()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < probs.cols(); ++k)
            if (probs(i, k) > probs(i, best)) best = k;  // lowest index wins ties
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

Dataset generate(const GanModel& model, std::size_t n, std::uint64_t seed, ExampleId first_id) {
    Dataset d;
    d.height = model.height();
    d.width = model.width();
    d.num_classes = model.config().num_classes;
    d.pixels.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d.height * d.width));
    if (n == 0) return d;
    Rng rng(derive_seed(seed, "generate"));
    d.pixels = model.generate_pixels(model.sample_latent(n, rng));
    for (std::size_t i = 0; i < n; ++i) {
        d.ids.push_back(first_id + static_cast<ExampleId>(i));
        d.sources.push_back(Source::generated);
    }
    return d;
}

double evaluate_error(const GanModel& model, const Dataset& test) {
    require(!test.empty(), ErrorCode::empty_input, "evaluate_error: empty test set");
    require(test.has_labels(), ErrorCode::invalid_argument, "evaluate_error: test set has no labels");
    const auto pred = argmax_rows(predict(model, test));
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != (*test.labels)[i];
    return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

void save_checkpoint(const GanModel& model, const std::filesystem::path& path) {
    json j;
    j["format"] = "ssgan-checkpoint";
    j["version"] = kCheckpointVersion;
    j["config"] = model.config();
    j["image"] = {{"height", model.height()}, {"width", model.width()}};
    j["discriminator"] = json::array();
    for (const auto& l : model.discriminator().layers()) j["discriminator"].push_back(layer_to_json(l));
    j["generator"] = json::array();
    for (const auto& l : model.generator().layers()) j["generator"].push_back(layer_to_json(l));
    j["history"] = json::array();
    for (const auto& h : model.history())
        j["history"].push_back({{"supervised", h.supervised}, {"unsupervised", h.unsupervised},
                                {"feature_matching", h.feature_matching}});
    std::ofstream out(path);
    require(out.good(), ErrorCode::io, "cannot write checkpoint " + path.string());
    out << j.dump() << '\n';
    require(out.good(), ErrorCode::io, "failed writing checkpoint " + path.string());
}

GanModel load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, "cannot open checkpoint " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorCode::format, "checkpoint " + path.string() + " is not valid JSON: " + e.what());
    }
    require(j.value("format", "") == "ssgan-checkpoint", ErrorCode::format, "not an ssgan checkpoint: " + path.string());
    require(j.value("version", 0) == kCheckpointVersion, ErrorCode::format,
            "unsupported checkpoint version in " + path.string());
    try {
        const auto config = j.at("config").get<GanConfig>();
        GanModel model(config, j.at("image").at("height").get<std::size_t>(), j.at("image").at("width").get<std::size_t>());
        auto load_layers = [&](const json& arr, nn::Mlp& net) {
            require(arr.size() == net.depth(), ErrorCode::format, "checkpoint layer count mismatch");
            for (std::size_t l = 0; l < arr.size(); ++l) {
                nn::DenseLayer layer = layer_from_json(arr[l]);
                require(layer.weights.rows() == net.layers()[l].weights.rows() &&
                            layer.weights.cols() == net.layers()[l].weights.cols(),
                        ErrorCode::format, "checkpoint layer shape mismatch");
                net.layers()[l] = std::move(layer);
            }
        };
        load_layers(j.at("discriminator"), model.discriminator());
        load_layers(j.at("generator"), model.generator());
        for (const auto& h : j.at("history"))
            model.history().push_back({h.at("supervised").get<double>(), h.at("unsupervised").get<double>(),
                                       h.at("feature_matching").get<double>()});
        return model;
    } catch (const json::exception& e) {
        fail(ErrorCode::format, "malformed checkpoint " + path.string() + ": " + e.what());
    }
}

}  // namespace ssgan
