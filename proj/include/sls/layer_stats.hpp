#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sls/train.hpp"

#include <json.hpp>

namespace sls {

// Per-epoch weight-sum statistics over the hidden layers of one model.
// Hidden layer l (1-based) is dense layer l; the final dense layer is the
// output layer and is excluded from the ratios.
//
// alpha[l] = sum(layer l) / sum(all hidden layers)
// beta[l]  = sum(layer l) / sum(last hidden layer)
//
// Both are computed on signed sums (which can cancel and cross zero, hence
// the optional values) and on L1 sums (nonnegative, used for scoring).
struct LayerStatsEpoch {
    int epoch = 0;
    std::vector<double> signed_sum; // hidden layers only
    std::vector<double> l1_sum;
    double signed_total = 0.0; // over hidden layers
    double l1_total = 0.0;
    std::vector<std::optional<double>> alpha_signed; // empty when denominator == 0
    std::vector<double> alpha_l1;
    std::vector<std::optional<double>> beta_signed;
    std::vector<std::optional<double>> beta_l1; // empty only if last-hidden L1 sum == 0
    bool signed_alpha_undefined = false;
    bool signed_beta_undefined = false;
};

struct LayerStats {
    std::size_t model_id = 0;
    std::size_t hidden_layers = 0;
    std::vector<LayerStatsEpoch> epochs; // includes the epoch-0 snapshot
};

enum class RatioVariant { signed_sums, l1 };

LayerStats compute_layer_stats(const TrainTrace& trace, std::size_t model_id = 0);

// Contribution of each hidden layer to training: the absolute change of its
// alpha ratio between the first training epoch and the final epoch. Undefined
// endpoints (signed variant) fall back to the nearest defined epoch.
struct ContributionScores {
    std::vector<double> score;          // per hidden layer
    std::vector<bool> endpoint_fallback; // true if an endpoint was substituted
    RatioVariant variant = RatioVariant::l1;
};

ContributionScores contribution_score(const LayerStats& stats, RatioVariant variant);

// Which layers to select. top_k policies use k; threshold uses tau.
struct SelectionPolicy {
    enum class Kind { top_k_per_model, top_k_global, threshold, all, bottom_k_per_model };
    Kind kind = Kind::all;
    std::size_t k = 0;
    double tau = 0.0;

    std::string to_string() const;
    static SelectionPolicy parse(const std::string& text);
};

struct LayerRef {
    uint32_t model_id = 0;    // 1-based edge model id
    uint32_t layer_index = 0; // 1-based hidden layer index

    bool operator==(const LayerRef&) const = default;
    bool operator<(const LayerRef& o) const {
        return model_id != o.model_id ? model_id < o.model_id
                                      : layer_index < o.layer_index;
    }
};

struct ScoredLayer {
    LayerRef ref;
    double score = 0.0;
};

// Binary selection over (edge model, hidden layer) plus the scores and rule
// that produced it.
struct SelectionMask {
    std::vector<LayerRef> selected; // sorted (model, layer)
    std::vector<ScoredLayer> scores;
    std::string rule;   // scoring rule identifier
    std::string policy; // policy echo

    bool contains(const LayerRef& ref) const;
    nlohmann::json to_json() const;
    static SelectionMask from_json(const nlohmann::json& j);
};

// Apply `policy` to per-model contribution scores. scores_per_model[k-1] is
// the score list of edge model k. Ties break toward lower model id, then
// lower layer index. Throws ConfigError if the policy selects nothing.
SelectionMask select_layers(const std::vector<ContributionScores>& scores_per_model,
                            const SelectionPolicy& policy);

// CSV export of per-epoch ratios: the data behind the layer-analysis curves.
// Columns: epoch,layer,signed_sum,l1_sum,alpha_signed,alpha_l1,beta_signed,
// beta_l1,flags. Undefined ratios leave the cell empty and set a flag.
void write_layer_stats_csv(const LayerStats& stats, const std::filesystem::path& path);

} // namespace sls
