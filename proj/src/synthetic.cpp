#include "sls/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "sls/errors.hpp"
#include "sls/rng.hpp"

namespace sls {

namespace {

std::vector<double> broadcast(const std::vector<double>& v, std::size_t dim,
                              double fallback, const char* what) {
    if (v.empty()) return std::vector<double>(dim, fallback);
    if (v.size() == 1) return std::vector<double>(dim, v[0]);
    if (v.size() != dim)
        throw ConfigError(std::string(what) + " must have 1 or dim entries");
    return v;
}

} // namespace

void SynthConfig::validate() const {
    if (dim == 0) throw ConfigError("synthetic dim must be positive");
    if (n_normal + n_attack == 0) throw ConfigError("synthetic row count is zero");
    for (double s : stddev)
        if (!(s > 0.0)) throw ConfigError("synthetic stddev entries must be > 0");
}

SyntheticData generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const std::size_t dim = cfg.dim;
    const auto mean = broadcast(cfg.mean, dim, 0.0, "mean");
    const auto stddev = broadcast(cfg.stddev, dim, 1.0, "stddev");
    const auto shift = broadcast(cfg.attack_shift, dim, 0.0, "attack_shift");

    const std::size_t total = cfg.n_normal + cfg.n_attack;
    const std::size_t regions = cfg.regions == 0 ? 1 : cfg.regions;

    // Per-region mean offsets, in sigma units.
    Rng jitter_rng(derive_seed(cfg.seed, 0x524547ULL));
    std::vector<std::vector<double>> region_offset(regions, std::vector<double>(dim, 0.0));
    if (cfg.regions > 0 && cfg.region_jitter != 0.0) {
        for (auto& offs : region_offset)
            for (double& o : offs)
                o = jitter_rng.uniform(-cfg.region_jitter, cfg.region_jitter);
    }

    Dataset ds;
    ds.features = Matrix(total, dim);
    std::vector<int> labels(total, 0);
    for (std::size_t c = 0; c < dim; ++c)
        ds.feature_names.push_back("f" + std::to_string(c + 1));

    // Region blocks are consecutive; within a block, normals come first.
    std::vector<std::size_t> region_rows(regions, total / regions);
    region_rows.back() += total % regions;
    const double attack_fraction =
        static_cast<double>(cfg.n_attack) / static_cast<double>(total);

    Rng rng(cfg.seed);
    std::size_t row = 0;
    std::size_t attacks_emitted = 0;
    std::vector<std::size_t> region_begin(regions, 0);
    for (std::size_t g = 0; g < regions; ++g) {
        region_begin[g] = row;
        std::size_t n_attack_g =
            (g + 1 == regions)
                ? cfg.n_attack - attacks_emitted
                : static_cast<std::size_t>(
                      std::llround(attack_fraction * static_cast<double>(region_rows[g])));
        n_attack_g = std::min(n_attack_g, region_rows[g]);
        attacks_emitted += n_attack_g;
        const std::size_t n_normal_g = region_rows[g] - n_attack_g;

        for (std::size_t i = 0; i < region_rows[g]; ++i, ++row) {
            const bool attack = i >= n_normal_g;
            labels[row] = attack ? 1 : 0;
            double* dst = ds.features.row_ptr(row);
            for (std::size_t c = 0; c < dim; ++c) {
                double mu = mean[c] + region_offset[g][c] * stddev[c];
                if (attack) mu += shift[c] * stddev[c];
                dst[c] = mu + stddev[c] * rng.normal();
            }
        }
    }
    ds.labels = std::move(labels);
    ds.validate();

    nlohmann::json manifest;
    manifest["generator"] = "sls-synthetic";
    manifest["seed"] = cfg.seed;
    manifest["n_normal"] = cfg.n_normal;
    manifest["n_attack"] = cfg.n_attack;
    manifest["dim"] = dim;
    manifest["mean"] = mean;
    manifest["stddev"] = stddev;
    manifest["attack_shift_sigma"] = shift;
    manifest["regions"] = cfg.regions;
    manifest["region_jitter_sigma"] = cfg.region_jitter;
    if (cfg.regions > 0) {
        manifest["region_begin_row"] = region_begin;
        manifest["region_mean_offsets_sigma"] = region_offset;
    }

    return {std::move(ds), std::move(manifest)};
}

} // namespace sls
