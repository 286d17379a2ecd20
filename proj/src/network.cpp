#include "sls/network.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "sls/errors.hpp"
#include "sls/hash.hpp"
#include "sls/rng.hpp"

namespace sls {

namespace {

std::atomic<uint64_t> g_next_net_id{1};

double apply_activation(Activation act, double z) {
    switch (act) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::tanh: return std::tanh(z);
        case Activation::identity: return z;
    }
    return z;
}

// Derivative expressed through the post-activation value a = f(z).
// relu uses the subgradient 0 at z == 0.
double activation_deriv_from_post(Activation act, double a) {
    switch (act) {
        case Activation::relu: return a > 0.0 ? 1.0 : 0.0;
        case Activation::sigmoid: return a * (1.0 - a);
        case Activation::tanh: return 1.0 - a * a;
        case Activation::identity: return 1.0;
    }
    return 1.0;
}

} // namespace

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::tanh: return "tanh";
        case Activation::identity: return "identity";
    }
    return "identity";
}

Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::relu;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "tanh") return Activation::tanh;
    if (name == "identity") return Activation::identity;
    throw ConfigError("unknown activation: " + name);
}

const char* init_scheme_name(InitScheme s) {
    return s == InitScheme::uniform_pm1 ? "uniform_pm1" : "uniform_scaled";
}

InitScheme init_scheme_from_name(const std::string& name) {
    if (name == "uniform_pm1") return InitScheme::uniform_pm1;
    if (name == "uniform_scaled") return InitScheme::uniform_scaled;
    throw ConfigError("unknown init scheme: " + name);
}

std::string LayerOrigin::describe() const {
    if (kind == Kind::fresh) return "fresh";
    std::ostringstream os;
    os << "edge(" << model_id << "," << layer_index << ")";
    return os.str();
}

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation act)
    : in_dim(in), out_dim(out), weights(in * out, 0.0), biases(out, 0.0),
      activation(act) {}

uint64_t DenseLayer::param_hash() const {
    Fnv64 h;
    h.update_u64(in_dim);
    h.update_u64(out_dim);
    h.update_doubles(weights);
    h.update_doubles(biases);
    return h.value();
}

Network::Network() : net_id(g_next_net_id.fetch_add(1)) {}

Network::Network(const Network& other)
    : layers(other.layers), net_id(g_next_net_id.fetch_add(1)), revision(0) {}

Network& Network::operator=(const Network& other) {
    if (this != &other) {
        layers = other.layers;
        net_id = g_next_net_id.fetch_add(1);
        revision = 0;
    }
    return *this;
}

std::size_t Network::code_size() const {
    std::size_t best = 0;
    bool first = true;
    for (std::size_t t = 0; t + 1 < layers.size(); ++t) {
        if (first || layers[t].out_dim < best) {
            best = layers[t].out_dim;
            first = false;
        }
    }
    return best;
}

std::size_t Network::param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
}

std::vector<std::size_t> Network::shape() const {
    std::vector<std::size_t> s;
    if (layers.empty()) return s;
    s.push_back(layers.front().in_dim);
    for (const auto& l : layers) s.push_back(l.out_dim);
    return s;
}

void Network::validate() const {
    if (layers.empty()) throw ShapeError("network has no layers");
    for (std::size_t t = 0; t < layers.size(); ++t) {
        const auto& l = layers[t];
        if (l.in_dim == 0 || l.out_dim == 0)
            throw ShapeError("layer " + std::to_string(t + 1) + " has zero dimension");
        if (l.weights.size() != l.in_dim * l.out_dim ||
            l.biases.size() != l.out_dim)
            throw ShapeError("layer " + std::to_string(t + 1) + " parameter storage mismatch");
        if (t + 1 < layers.size() && l.out_dim != layers[t + 1].in_dim)
            throw ShapeError("layer " + std::to_string(t + 1) + " out_dim " +
                             std::to_string(l.out_dim) + " != layer " +
                             std::to_string(t + 2) + " in_dim " +
                             std::to_string(layers[t + 1].in_dim));
    }
    if (input_dim() != output_dim())
        throw ShapeError("autoencoder contract violated: input width " +
                         std::to_string(input_dim()) + " != output width " +
                         std::to_string(output_dim()));
}

uint64_t Network::param_hash() const {
    Fnv64 h;
    for (const auto& l : layers) h.update_u64(l.param_hash());
    return h.value();
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in (0,1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in (0,1)");
    if (!(lambda >= 0.0) || !std::isfinite(lambda))
        throw ConfigError("lambda must be finite and >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning_rate must be finite and > 0");
    if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
}

AdamState AdamState::zeros_like(const Network& net) {
    AdamState s;
    for (const auto& l : net.layers) {
        s.m_w.emplace_back(l.weights.size(), 0.0);
        s.v_w.emplace_back(l.weights.size(), 0.0);
        s.m_b.emplace_back(l.biases.size(), 0.0);
        s.v_b.emplace_back(l.biases.size(), 0.0);
    }
    return s;
}

bool AdamState::mirrors(const Network& net) const {
    if (m_w.size() != net.layers.size()) return false;
    for (std::size_t t = 0; t < net.layers.size(); ++t) {
        if (m_w[t].size() != net.layers[t].weights.size()) return false;
        if (m_b[t].size() != net.layers[t].biases.size()) return false;
    }
    return true;
}

Network init_network(const std::vector<std::size_t>& shape,
                     Activation hidden_activation,
                     const TrainConfig& config,
                     Activation output_activation) {
    if (shape.size() < 3)
        throw ConfigError("network shape needs at least 3 widths (input, hidden..., output)");
    for (std::size_t w : shape)
        if (w == 0) throw ConfigError("network shape contains a zero width");
    if (shape.front() != shape.back())
        throw ConfigError("autoencoder shape must have equal input and output widths");
    config.validate();

    Rng rng(config.seed);
    Network net;
    net.layers.reserve(shape.size() - 1);
    for (std::size_t t = 0; t + 1 < shape.size(); ++t) {
        const bool is_output = (t + 2 == shape.size());
        DenseLayer layer(shape[t], shape[t + 1],
                         is_output ? output_activation : hidden_activation);
        const double bound = config.init == InitScheme::uniform_pm1
                                 ? 1.0
                                 : 1.0 / std::sqrt(static_cast<double>(layer.in_dim));
        for (double& w : layer.weights) w = rng.uniform(-bound, bound);
        // biases stay exactly 0
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

ForwardCache forward_cached(const Network& net, const Matrix& batch) {
    net.validate();
    if (batch.cols != net.input_dim())
        throw ShapeError("batch has " + std::to_string(batch.cols) +
                         " features but layer 1 expects " +
                         std::to_string(net.input_dim()));

    ForwardCache cache;
    cache.net_id = net.net_id;
    cache.net_revision = net.revision;
    cache.input = batch;
    cache.post.reserve(net.layers.size());

    const Matrix* cur = &batch;
    for (const auto& layer : net.layers) {
        Matrix next(cur->rows, layer.out_dim);
        for (std::size_t r = 0; r < cur->rows; ++r) {
            const double* x = cur->row_ptr(r);
            double* y = next.row_ptr(r);
            for (std::size_t o = 0; o < layer.out_dim; ++o) {
                const double* wrow = layer.weights.data() + o * layer.in_dim;
                double z = layer.biases[o];
                for (std::size_t i = 0; i < layer.in_dim; ++i) z += wrow[i] * x[i];
                y[o] = apply_activation(layer.activation, z);
            }
        }
        cache.post.push_back(std::move(next));
        cur = &cache.post.back();
    }
    return cache;
}

Matrix forward(const Network& net, const Matrix& batch) {
    return forward_cached(net, batch).post.back();
}

double rmse_loss(const Matrix& outputs, const Matrix& targets) {
    if (!outputs.same_shape(targets))
        throw ShapeError("rmse_loss: outputs " + std::to_string(outputs.rows) + "x" +
                         std::to_string(outputs.cols) + " vs targets " +
                         std::to_string(targets.rows) + "x" + std::to_string(targets.cols));
    if (outputs.data.empty()) throw ShapeError("rmse_loss: empty matrices");
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < outputs.data.size(); ++i) {
        const double d = outputs.data[i] - targets.data[i];
        sum_sq += d * d;
    }
    return std::sqrt(sum_sq / static_cast<double>(outputs.data.size()));
}

Gradients backward(const Network& net, const ForwardCache& cache,
                   const Matrix& targets, double lambda) {
    net.validate();
    if (cache.net_id != net.net_id || cache.net_revision != net.revision)
        throw ContractError("forward cache is stale: network parameters changed "
                            "since the cached forward pass");
    if (cache.post.size() != net.layers.size())
        throw ContractError("forward cache does not match network depth");
    const Matrix& out = cache.post.back();
    if (!out.same_shape(targets))
        throw ShapeError("backward: target shape mismatch");

    const double rmse = rmse_loss(out, targets);
    const double count = static_cast<double>(out.data.size());

    Gradients grads;
    grads.weight_grads.resize(net.layers.size());
    grads.bias_grads.resize(net.layers.size());

    // d(rmse)/d(out) = (out - target) / (rmse * count); 0 at zero error.
    Matrix delta(out.rows, out.cols);
    if (rmse > 0.0) {
        const double scale = 1.0 / (rmse * count);
        for (std::size_t i = 0; i < out.data.size(); ++i)
            delta.data[i] = (out.data[i] - targets.data[i]) * scale;
    }

    for (std::size_t t = net.layers.size(); t-- > 0;) {
        const DenseLayer& layer = net.layers[t];
        const Matrix& post = cache.post[t];
        const Matrix& prev = (t == 0) ? cache.input : cache.post[t - 1];

        // delta currently holds dL/d(post); fold in the activation derivative.
        for (std::size_t i = 0; i < delta.data.size(); ++i)
            delta.data[i] *= activation_deriv_from_post(layer.activation, post.data[i]);

        Matrix wg(layer.out_dim, layer.in_dim);
        std::vector<double> bg(layer.out_dim, 0.0);
        for (std::size_t r = 0; r < delta.rows; ++r) {
            const double* d = delta.row_ptr(r);
            const double* x = prev.row_ptr(r);
            for (std::size_t o = 0; o < layer.out_dim; ++o) {
                const double dv = d[o];
                bg[o] += dv;
                double* wrow = wg.row_ptr(o);
                for (std::size_t i = 0; i < layer.in_dim; ++i) wrow[i] += dv * x[i];
            }
        }
        if (lambda != 0.0) {
            for (std::size_t k = 0; k < wg.data.size(); ++k)
                wg.data[k] += lambda * layer.weights[k];
        }

        if (t > 0) {
            Matrix delta_prev(delta.rows, layer.in_dim, 0.0);
            for (std::size_t r = 0; r < delta.rows; ++r) {
                const double* d = delta.row_ptr(r);
                double* dp = delta_prev.row_ptr(r);
                for (std::size_t o = 0; o < layer.out_dim; ++o) {
                    const double dv = d[o];
                    if (dv == 0.0) continue;
                    const double* wrow = layer.weights.data() + o * layer.in_dim;
                    for (std::size_t i = 0; i < layer.in_dim; ++i) dp[i] += dv * wrow[i];
                }
            }
            delta = std::move(delta_prev);
        }

        grads.weight_grads[t] = std::move(wg);
        grads.bias_grads[t] = std::move(bg);
    }
    return grads;
}

void adam_step(Network& net, const Gradients& grads, AdamState& state,
               const TrainConfig& config) {
    if (!state.mirrors(net))
        throw ShapeError("adam state does not mirror network parameters");
    if (grads.weight_grads.size() != net.layers.size())
        throw ShapeError("gradient layer count mismatch");

    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(config.beta1, t);
    const double bc2 = 1.0 - std::pow(config.beta2, t);

    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        DenseLayer& layer = net.layers[l];
        const Matrix& wg = grads.weight_grads[l];
        if (wg.data.size() != layer.weights.size() ||
            grads.bias_grads[l].size() != layer.biases.size())
            throw ShapeError("gradient shape mismatch at layer " + std::to_string(l + 1));

        auto update = [&](double& p, double g, double& m, double& v) {
            m = config.beta1 * m + (1.0 - config.beta1) * g;
            v = config.beta2 * v + (1.0 - config.beta2) * g * g;
            const double m_hat = m / bc1;
            const double v_hat = v / bc2;
            p -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_eps);
        };

        for (std::size_t k = 0; k < layer.weights.size(); ++k)
            update(layer.weights[k], wg.data[k], state.m_w[l][k], state.v_w[l][k]);
        for (std::size_t k = 0; k < layer.biases.size(); ++k)
            update(layer.biases[k], grads.bias_grads[l][k], state.m_b[l][k], state.v_b[l][k]);
    }
    net.touch();
}

void sgd_step(Network& net, const Gradients& grads, double lr) {
    if (grads.weight_grads.size() != net.layers.size())
        throw ShapeError("gradient layer count mismatch");
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        DenseLayer& layer = net.layers[l];
        const Matrix& wg = grads.weight_grads[l];
        for (std::size_t k = 0; k < layer.weights.size(); ++k)
            layer.weights[k] -= lr * wg.data[k];
        for (std::size_t k = 0; k < layer.biases.size(); ++k)
            layer.biases[k] -= lr * grads.bias_grads[l][k];
    }
    net.touch();
}

LayerWeightSums layer_weight_sums(const Network& net) {
    LayerWeightSums sums;
    sums.signed_sum.reserve(net.layers.size());
    sums.l1_sum.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        double s = 0.0, a = 0.0;
        for (double w : layer.weights) {
            s += w;
            a += std::abs(w);
        }
        sums.signed_sum.push_back(s);
        sums.l1_sum.push_back(a);
    }
    return sums;
}

} // namespace sls
