#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sls/edge.hpp"
#include "sls/layer_stats.hpp"

#include <json.hpp>

namespace sls {

enum class SynthStrategy { stack, widen };
enum class GlueInit { uniform_pm1, uniform_scaled, near_zero };

const char* synth_strategy_name(SynthStrategy s);
SynthStrategy synth_strategy_from_name(const std::string& name);
const char* glue_init_name(GlueInit g);
GlueInit glue_init_from_name(const std::string& name);

// How to build a central model from selected trained edge layers.
//
// stack: the selected layers are concatenated in `layer_order`; a fresh glue
// layer is inserted wherever adjacent widths disagree (including between the
// input and the first selected layer), and a fresh output head closes the
// autoencoder back to the input width.
//
// widen: selected layers sharing the same hidden index are placed
// block-diagonally into one wider layer per position; cross-block weights get
// cross_scale * U[-1,1]. Glue/head handling is as in stack.
struct SynthesisPlan {
    SelectionMask mask;
    std::vector<LayerRef> layer_order; // exactly the mask's layers, each once
    SynthStrategy strategy = SynthStrategy::stack;
    GlueInit glue_init = GlueInit::uniform_scaled;
    double cross_scale = 0.0; // widen cross-block init scale
    std::vector<std::size_t> output_head; // widths of fresh trailing layers
    uint64_t seed = 1;                    // fresh-parameter stream

    void validate() const;
    nlohmann::json to_json() const;
    static SynthesisPlan from_json(const nlohmann::json& j);
    static SynthesisPlan from_mask(const SelectionMask& mask,
                                   SynthStrategy strategy = SynthStrategy::stack);
};

// A central model assembled from edge layers. Copied layers carry edge origin
// tags and their source parameter hashes for later fidelity checks.
struct SynthesizedModel {
    Network net;
    SynthesisPlan plan;
    double fraction_pretrained = 0.0;
    std::size_t copied_params = 0;
    std::vector<std::pair<LayerRef, uint64_t>> source_hashes;
};

SynthesizedModel synthesize(const EdgeModelSet& edges, const SynthesisPlan& plan,
                            std::size_t input_dim, const TrainConfig& config);

// Continue training the whole synthesized model (copied layers included) on
// central data. config.epochs == 0 is allowed here and leaves the model
// untouched, returning an empty trace.
TrainTrace fine_tune(SynthesizedModel& model, const Matrix& central_train,
                     const Matrix& central_val, const TrainConfig& config);

// Human-readable per-layer provenance table.
struct ModelDescription {
    struct Row {
        std::size_t index = 0;
        std::size_t in_dim = 0, out_dim = 0;
        std::string activation;
        std::string origin;
        std::size_t params = 0;
    };
    std::vector<Row> rows;
    std::size_t total_params = 0;
    std::size_t copied_params = 0;
    double fraction_pretrained = 0.0;
    std::string text; // formatted table
};

ModelDescription describe(const Network& net);

} // namespace sls
