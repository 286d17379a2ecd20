#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sls/matrix.hpp"

namespace sls {

enum class Activation { relu, sigmoid, tanh, identity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

enum class InitScheme { uniform_pm1, uniform_scaled };

const char* init_scheme_name(InitScheme s);
InitScheme init_scheme_from_name(const std::string& name);

// Provenance of a layer's parameters: freshly initialized, or copied verbatim
// from hidden layer `layer_index` of trained edge model `model_id`.
struct LayerOrigin {
    enum class Kind : uint8_t { fresh = 0, edge = 1 };
    Kind kind = Kind::fresh;
    uint32_t model_id = 0;
    uint32_t layer_index = 0;

    static LayerOrigin fresh_origin() { return {}; }
    static LayerOrigin edge_origin(uint32_t model, uint32_t layer) {
        return {Kind::edge, model, layer};
    }
    bool is_edge() const { return kind == Kind::edge; }
    std::string describe() const;
};

struct DenseLayer {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights; // row-major out_dim x in_dim
    std::vector<double> biases;  // out_dim
    Activation activation = Activation::identity;
    LayerOrigin origin;

    DenseLayer() = default;
    DenseLayer(std::size_t in, std::size_t out, Activation act);

    double& w(std::size_t o, std::size_t i) { return weights[o * in_dim + i]; }
    double w(std::size_t o, std::size_t i) const { return weights[o * in_dim + i]; }

    std::size_t param_count() const { return weights.size() + biases.size(); }
    uint64_t param_hash() const;
};

// Hyperparameters for initialization and training.
struct TrainConfig {
    int epochs = 40;
    double learning_rate = 0.005;
    double beta1 = 0.8;   // Adam first-moment decay
    double beta2 = 0.9;   // Adam second-moment decay
    double adam_eps = 1e-8;
    double lambda = 1e-8; // L2 factor on weights; adds lambda*w to each weight gradient
    double sparsity = 0.2; // recorded in configs and model files; applies no penalty
    std::size_t batch_size = 32; // 0 = full batch
    uint64_t seed = 1;
    InitScheme init = InitScheme::uniform_pm1;

    void validate() const; // throws ConfigError
};

// A stack of dense layers. Mutating entry points bump `revision` so cached
// forward activations can detect staleness.
struct Network {
    std::vector<DenseLayer> layers;
    uint64_t net_id = 0;
    uint64_t revision = 0;

    Network();
    Network(const Network& other);
    Network& operator=(const Network& other);
    Network(Network&&) = default;
    Network& operator=(Network&&) = default;

    std::size_t depth() const { return layers.size(); }
    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }
    // Hidden layers are all dense layers except the final (output) one.
    std::size_t hidden_count() const { return layers.empty() ? 0 : layers.size() - 1; }
    std::size_t code_size() const;
    std::size_t param_count() const;
    std::vector<std::size_t> shape() const; // widths: input, hidden..., output

    void touch() { ++revision; }
    void validate() const; // dimension chain + autoencoder contract
    uint64_t param_hash() const;
};

// Activations cached by forward() for exact backprop.
struct ForwardCache {
    uint64_t net_id = 0;
    uint64_t net_revision = 0;
    Matrix input;
    std::vector<Matrix> post; // post-activation per layer; post.back() is the output
};

struct Gradients {
    std::vector<Matrix> weight_grads;             // per layer, out x in
    std::vector<std::vector<double>> bias_grads;  // per layer
};

// Adam accumulators; shapes mirror the network's parameters.
struct AdamState {
    std::vector<std::vector<double>> m_w, v_w;
    std::vector<std::vector<double>> m_b, v_b;
    uint64_t step = 0;

    static AdamState zeros_like(const Network& net);
    bool mirrors(const Network& net) const;
};

// Fresh network: weights i.i.d. uniform per `config.init`, biases all zero,
// deterministic in config.seed. `hidden_activation` applies to every layer
// except the last, which gets `output_activation` (identity by default, the
// usual choice for reconstruction outputs).
Network init_network(const std::vector<std::size_t>& shape,
                     Activation hidden_activation,
                     const TrainConfig& config,
                     Activation output_activation = Activation::identity);

Matrix forward(const Network& net, const Matrix& batch);
ForwardCache forward_cached(const Network& net, const Matrix& batch);

// Batch-level root-mean-square error over all elements.
double rmse_loss(const Matrix& outputs, const Matrix& targets);

// Gradients of rmse_loss(outputs, targets) + (lambda/2)*sum(w^2) w.r.t. all
// parameters. The RMSE chain factor is 1/(2*rmse*count) applied to d(sum of
// squares); at zero error the subgradient 0 is used. Biases carry no L2 term.
Gradients backward(const Network& net, const ForwardCache& cache,
                   const Matrix& targets, double lambda);

// One Adam update with bias correction. Deterministic.
void adam_step(Network& net, const Gradients& grads, AdamState& state,
               const TrainConfig& config);

// One plain SGD step: p -= lr * g. Used by the federated baseline.
void sgd_step(Network& net, const Gradients& grads, double lr);

// Per-layer sum of signed weights and of |weights| (biases excluded).
struct LayerWeightSums {
    std::vector<double> signed_sum;
    std::vector<double> l1_sum;
};
LayerWeightSums layer_weight_sums(const Network& net);

} // namespace sls
