#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace sls {

// Analytic operation counts for a dense network.
//
// `mult_forward_per_sample` is the exact scalar-multiplication count of one
// forward pass on one sample (sum over layers of out*in). The
// `uniform_closed_form` field reports the conventional n_layers*width^3
// figure for networks whose widths are all equal; it is a coarser batch-style
// bound, kept separate from the exact count on purpose.
struct CostEstimate {
    std::size_t n_samples = 0;
    uint64_t mult_forward_per_sample = 0;
    uint64_t mult_forward_total = 0; // per_sample * n_samples
    uint64_t activation_ops = 0;     // per sample: one evaluation per neuron
    uint64_t backward_ops = 0;       // per sample: weight grads + delta propagation
    std::optional<uint64_t> uniform_closed_form;
    int asymptotic_exponent = 5;

    // forward + backward multiplications for one epoch over n_samples
    uint64_t mults_per_epoch() const {
        return (mult_forward_per_sample + backward_ops) * n_samples;
    }
};

CostEstimate estimate_cost(const std::vector<std::size_t>& shape, std::size_t n_samples);

} // namespace sls
