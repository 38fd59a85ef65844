#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mlpsd/dataset.hpp"
#include "mlpsd/error.hpp"
#include "mlpsd/json_util.hpp"
#include "mlpsd/rng.hpp"

namespace mlpsd {

struct ModelConfig {
    int input_dim = 1;
    std::vector<int> hidden_dims;
    int output_dim = 1;
    std::uint64_t init_seed = 0;

    void validate() const {
        if (input_dim < 1 || output_dim < 1) throw ConfigError("model dimensions must be >= 1");
        for (int h : hidden_dims)
            if (h < 1) throw ConfigError("hidden dimensions must be >= 1");
    }
    /// Layer widths from input to output.
    std::vector<int> widths() const {
        std::vector<int> w{input_dim};
        w.insert(w.end(), hidden_dims.begin(), hidden_dims.end());
        w.push_back(output_dim);
        return w;
    }
    bool operator==(const ModelConfig&) const = default;
};

/// Affine map x -> x W + b on row-major batches; weight is fan_in x fan_out.
template <typename Scalar>
struct DenseLayer {
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> weight;
    Eigen::Matrix<Scalar, 1, Eigen::Dynamic> bias;
};

/// Feed-forward net with ReLU between hidden layers and a linear output
/// layer producing one logit per category in `category_subset`.
template <typename Scalar>
struct MultiLabelModel {
    ModelConfig config;
    std::vector<DenseLayer<Scalar>> layers;
    IndexList category_subset;
};

using Model = MultiLabelModel<double>;

template <typename Scalar>
using Gradients = std::vector<DenseLayer<Scalar>>;

/// Glorot-uniform weights, zero biases.
template <typename Scalar = double>
MultiLabelModel<Scalar> init_model(const ModelConfig& config, IndexList category_subset) {
    config.validate();
    if (static_cast<int>(category_subset.size()) != config.output_dim)
        throw ConfigError("category subset size must equal output_dim");
    MultiLabelModel<Scalar> model{config, {}, std::move(category_subset)};
    Rng rng = make_rng(config.init_seed, {stream::init});
    const auto widths = config.widths();
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const int fan_in = widths[l];
        const int fan_out = widths[l + 1];
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        DenseLayer<Scalar> layer;
        layer.weight.resize(fan_in, fan_out);
        for (int c = 0; c < fan_out; ++c)
            for (int r = 0; r < fan_in; ++r) layer.weight(r, c) = Scalar((2.0 * uniform01(rng) - 1.0) * bound);
        layer.bias = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>::Zero(fan_out);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

/// Per-layer inputs and pre-activations kept for the backward pass.
template <typename Scalar>
struct ForwardTrace {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    std::vector<Matrix> inputs;
    std::vector<Matrix> pre_activations;
    Matrix logits;
};

template <typename Scalar, typename Derived>
ForwardTrace<Scalar> forward_trace(const MultiLabelModel<Scalar>& model, const Eigen::MatrixBase<Derived>& features) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (features.cols() != model.config.input_dim) throw ConfigError("feature width does not match model input_dim");
    if (!features.allFinite()) throw NumericError("non-finite model input");
    ForwardTrace<Scalar> trace;
    Matrix x = features.template cast<Scalar>();
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const auto& layer = model.layers[l];
        Matrix z = x * layer.weight;
        z.rowwise() += layer.bias;
        trace.inputs.push_back(std::move(x));
        if (l + 1 < model.layers.size()) {
            x = z.cwiseMax(Scalar(0));
            trace.pre_activations.push_back(std::move(z));
        } else {
            trace.logits = std::move(z);
        }
    }
    return trace;
}

/// Pre-sigmoid logits, n x output_dim.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> forward(const MultiLabelModel<Scalar>& model,
                                                              const Eigen::MatrixBase<Derived>& features) {
    return forward_trace(model, features).logits;
}

/// Gradient of sum(upstream .* logits) with respect to every parameter.
template <typename Scalar, typename Derived>
Gradients<Scalar> backward(const MultiLabelModel<Scalar>& model, const ForwardTrace<Scalar>& trace,
                           const Eigen::MatrixBase<Derived>& upstream) {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    if (upstream.rows() != trace.logits.rows() || upstream.cols() != trace.logits.cols())
        throw ConfigError("upstream gradient shape does not match logits");
    Gradients<Scalar> grads(model.layers.size());
    Matrix delta = upstream.template cast<Scalar>();
    for (std::size_t l = model.layers.size(); l-- > 0;) {
        grads[l].weight = trace.inputs[l].transpose() * delta;
        grads[l].bias = delta.colwise().sum();
        if (l > 0) {
            Matrix back = delta * model.layers[l].weight.transpose();
            delta = (trace.pre_activations[l - 1].array() > Scalar(0)).select(back, Scalar(0));
        }
    }
    return grads;
}

template <typename Scalar, typename DerivedX, typename DerivedU>
Gradients<Scalar> backward(const MultiLabelModel<Scalar>& model, const Eigen::MatrixBase<DerivedX>& features,
                           const Eigen::MatrixBase<DerivedU>& upstream) {
    return backward(model, forward_trace(model, features), upstream);
}

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 1e-4;
};

template <typename Scalar>
struct OptimizerState {
    Gradients<Scalar> first_moment;
    Gradients<Scalar> second_moment;
    std::int64_t step = 0;
    AdamOptions options;
};

template <typename Scalar>
OptimizerState<Scalar> make_optimizer(const MultiLabelModel<Scalar>& model, const AdamOptions& options = {}) {
    OptimizerState<Scalar> state;
    state.options = options;
    for (const auto& layer : model.layers) {
        DenseLayer<Scalar> zero{decltype(layer.weight)::Zero(layer.weight.rows(), layer.weight.cols()),
                                decltype(layer.bias)::Zero(layer.bias.size())};
        state.first_moment.push_back(zero);
        state.second_moment.push_back(std::move(zero));
    }
    return state;
}

/// One Adam step with bias correction. Weight decay is decoupled and applied
/// first: theta <- theta - lr * wd * theta.
template <typename Scalar>
void adam_step(MultiLabelModel<Scalar>& model, const Gradients<Scalar>& grads, OptimizerState<Scalar>& state) {
    if (grads.size() != model.layers.size() || state.first_moment.size() != model.layers.size())
        throw ConfigError("optimizer state does not match model");
    const auto& o = state.options;
    state.step += 1;
    const Scalar lr = Scalar(o.learning_rate);
    const Scalar decay = Scalar(1) - lr * Scalar(o.weight_decay);
    const Scalar b1 = Scalar(o.beta1), b2 = Scalar(o.beta2), eps = Scalar(o.epsilon);
    const Scalar c1 = Scalar(1) - std::pow(b1, Scalar(state.step));
    const Scalar c2 = Scalar(1) - std::pow(b2, Scalar(state.step));

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        param *= decay;
        m = b1 * m + (Scalar(1) - b1) * grad;
        v = b2 * v + (Scalar(1) - b2) * grad.cwiseAbs2();
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& layer = model.layers[l];
        if (grads[l].weight.rows() != layer.weight.rows() || grads[l].weight.cols() != layer.weight.cols() ||
            grads[l].bias.size() != layer.bias.size())
            throw ConfigError("gradient shape does not match model");
        update(layer.weight, grads[l].weight, state.first_moment[l].weight, state.second_moment[l].weight);
        update(layer.bias, grads[l].bias, state.first_moment[l].bias, state.second_moment[l].bias);
    }
}

inline constexpr const char* kModelSchema = "mlpsd-model-v1";

Json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);
Json model_to_json(const Model& model);
Model model_from_json(const Json& j);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

} // namespace mlpsd
