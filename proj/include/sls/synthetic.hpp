#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sls/dataset.hpp"

#include <json.hpp>

namespace sls {

// Synthetic flow-metadata generator. Normal rows are per-feature Gaussian;
// attack rows shift each feature mean by attack_shift[f] standard deviations
// (integrity-violation style tampering). With regions > 0 the rows are laid
// out as consecutive region blocks whose feature means get an extra jitter,
// emulating heterogeneity between edge catchment areas.
struct SynthConfig {
    std::size_t n_normal = 1000;
    std::size_t n_attack = 0;
    std::size_t dim = 16;
    std::vector<double> mean;         // broadcast to dim when size()==1
    std::vector<double> stddev;       // broadcast to dim when size()==1
    std::vector<double> attack_shift; // sigma units; broadcast when size()==1
    std::size_t regions = 0;          // 0 = homogeneous
    double region_jitter = 0.0;       // sigma units
    uint64_t seed = 1;

    void validate() const;
};

struct SyntheticData {
    Dataset dataset;
    nlohmann::json manifest; // full generation record, written as a sidecar
};

SyntheticData generate_synthetic(const SynthConfig& cfg);

} // namespace sls
