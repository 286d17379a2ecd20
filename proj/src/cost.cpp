#include "sls/cost.hpp"

#include "sls/errors.hpp"

namespace sls {

CostEstimate estimate_cost(const std::vector<std::size_t>& shape, std::size_t n_samples) {
    if (shape.size() < 2) throw ConfigError("estimate_cost: shape needs >= 2 widths");
    for (std::size_t w : shape)
        if (w == 0) throw ConfigError("estimate_cost: zero width in shape");

    CostEstimate est;
    est.n_samples = n_samples;

    bool uniform = true;
    for (std::size_t t = 0; t + 1 < shape.size(); ++t) {
        const uint64_t in = shape[t];
        const uint64_t out = shape[t + 1];
        est.mult_forward_per_sample += in * out;
        est.activation_ops += out;
        // backward: one out*in for the weight gradient of every layer, plus
        // one out*in to propagate delta through every layer but the first
        est.backward_ops += in * out;
        if (t > 0) est.backward_ops += in * out;
        if (shape[t + 1] != shape[0]) uniform = false;
    }
    est.mult_forward_total = est.mult_forward_per_sample * n_samples;
    if (uniform) {
        const uint64_t w = shape[0];
        est.uniform_closed_form = static_cast<uint64_t>(shape.size() - 1) * w * w * w;
    }
    est.asymptotic_exponent = 5;
    return est;
}

} // namespace sls
