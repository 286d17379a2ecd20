#include "sls/synthesis.hpp"

#include <algorithm>
#include <map>
#include <sstream>

#include "sls/errors.hpp"
#include "sls/rng.hpp"

namespace sls {

namespace {

constexpr uint64_t kGlueTag = 0x474C5545ULL;

double glue_bound(GlueInit init, std::size_t in_dim) {
    switch (init) {
        case GlueInit::uniform_pm1: return 1.0;
        case GlueInit::uniform_scaled:
            return 1.0 / std::sqrt(static_cast<double>(in_dim));
        case GlueInit::near_zero: return 0.0;
    }
    return 0.0;
}

DenseLayer fresh_layer(std::size_t in, std::size_t out, Activation act,
                       GlueInit init, Rng& rng) {
    DenseLayer layer(in, out, act);
    const double bound = glue_bound(init, in);
    for (double& w : layer.weights) w = rng.uniform(-bound, bound);
    return layer;
}

// Dense layer `ref` of edge model k. Selection policies only produce hidden
// layers (1..hidden_count), but a hand-written plan may also reference the
// output layer at index hidden_count+1 to reuse an edge's decoder closure.
const DenseLayer& source_layer(const EdgeModelSet& edges, const LayerRef& ref) {
    if (ref.model_id == 0 || ref.model_id > edges.models.size())
        throw SynthesisError("plan references edge model " +
                             std::to_string(ref.model_id) + " but only " +
                             std::to_string(edges.models.size()) + " exist");
    const Network& model = edges.models[ref.model_id - 1];
    if (ref.layer_index == 0 || ref.layer_index > model.depth())
        throw SynthesisError("plan references layer " +
                             std::to_string(ref.layer_index) + " of edge model " +
                             std::to_string(ref.model_id) + " which has " +
                             std::to_string(model.depth()) + " layers");
    return model.layers[ref.layer_index - 1];
}

DenseLayer copy_layer(const DenseLayer& src, const LayerRef& ref) {
    DenseLayer layer = src;
    layer.origin = LayerOrigin::edge_origin(ref.model_id, ref.layer_index);
    return layer;
}

} // namespace

const char* synth_strategy_name(SynthStrategy s) {
    return s == SynthStrategy::stack ? "stack" : "widen";
}

SynthStrategy synth_strategy_from_name(const std::string& name) {
    if (name == "stack") return SynthStrategy::stack;
    if (name == "widen") return SynthStrategy::widen;
    throw ConfigError("unknown synthesis strategy: " + name);
}

const char* glue_init_name(GlueInit g) {
    switch (g) {
        case GlueInit::uniform_pm1: return "uniform_pm1";
        case GlueInit::uniform_scaled: return "uniform_scaled";
        case GlueInit::near_zero: return "near_zero";
    }
    return "uniform_scaled";
}

GlueInit glue_init_from_name(const std::string& name) {
    if (name == "uniform_pm1") return GlueInit::uniform_pm1;
    if (name == "uniform_scaled") return GlueInit::uniform_scaled;
    if (name == "near_zero") return GlueInit::near_zero;
    throw ConfigError("unknown glue init: " + name);
}

void SynthesisPlan::validate() const {
    if (layer_order.empty())
        throw SynthesisError("synthesis plan selects no layers");
    // layer_order must be exactly the mask's selection, each ref once
    std::vector<LayerRef> a = layer_order;
    std::vector<LayerRef> b = mask.selected;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (std::adjacent_find(a.begin(), a.end()) != a.end())
        throw SynthesisError("synthesis plan lists a layer twice");
    if (a != b)
        throw SynthesisError("plan layer_order does not match the selection mask");
    if (cross_scale < 0.0)
        throw SynthesisError("cross_scale must be >= 0");
}

nlohmann::json SynthesisPlan::to_json() const {
    nlohmann::json j;
    j["strategy"] = synth_strategy_name(strategy);
    j["glue_init"] = glue_init_name(glue_init);
    j["cross_scale"] = cross_scale;
    j["seed"] = seed;
    j["output_head"] = output_head;
    j["layers"] = nlohmann::json::array();
    for (const auto& r : layer_order)
        j["layers"].push_back({{"model", r.model_id}, {"layer", r.layer_index}});
    j["mask"] = mask.to_json();
    return j;
}

SynthesisPlan SynthesisPlan::from_json(const nlohmann::json& j) {
    SynthesisPlan plan;
    plan.strategy = synth_strategy_from_name(j.value("strategy", "stack"));
    plan.glue_init = glue_init_from_name(j.value("glue_init", "uniform_scaled"));
    plan.cross_scale = j.value("cross_scale", 0.0);
    plan.seed = j.value("seed", uint64_t{1});
    if (j.contains("output_head"))
        plan.output_head = j.at("output_head").get<std::vector<std::size_t>>();
    for (const auto& e : j.at("layers"))
        plan.layer_order.push_back({e.at("model").get<uint32_t>(),
                                    e.at("layer").get<uint32_t>()});
    if (j.contains("mask")) {
        plan.mask = SelectionMask::from_json(j.at("mask"));
    } else {
        plan.mask.selected = plan.layer_order;
        std::sort(plan.mask.selected.begin(), plan.mask.selected.end());
    }
    return plan;
}

SynthesisPlan SynthesisPlan::from_mask(const SelectionMask& mask, SynthStrategy strategy) {
    SynthesisPlan plan;
    plan.mask = mask;
    plan.layer_order = mask.selected; // already sorted (model, layer)
    plan.strategy = strategy;
    return plan;
}

SynthesizedModel synthesize(const EdgeModelSet& edges, const SynthesisPlan& plan,
                            std::size_t input_dim, const TrainConfig& config) {
    plan.validate();
    if (edges.models.empty()) throw SynthesisError("no trained edge models");
    if (input_dim == 0) throw SynthesisError("input_dim must be positive");

    Rng rng(derive_seed(plan.seed != 0 ? plan.seed : config.seed, kGlueTag));
    const Activation hidden_act =
        edges.models.front().layers.front().activation;
    const Activation output_act = edges.models.front().layers.back().activation;

    SynthesizedModel model;
    model.plan = plan;

    // Assemble the middle section: copied layers (stack) or block-diagonal
    // groups of copied layers (widen).
    std::vector<DenseLayer> middle;
    if (plan.strategy == SynthStrategy::stack) {
        for (const auto& ref : plan.layer_order) {
            const DenseLayer& src = source_layer(edges, ref);
            middle.push_back(copy_layer(src, ref));
            model.copied_params += src.param_count();
            model.source_hashes.emplace_back(ref, src.param_hash());
        }
    } else {
        // group by hidden index, positions in ascending index order
        std::map<uint32_t, std::vector<LayerRef>> groups;
        for (const auto& ref : plan.layer_order) groups[ref.layer_index].push_back(ref);
        for (auto& [index, refs] : groups) {
            std::sort(refs.begin(), refs.end());
            std::size_t in_total = 0, out_total = 0;
            Activation act = source_layer(edges, refs.front()).activation;
            for (const auto& ref : refs) {
                const DenseLayer& src = source_layer(edges, ref);
                if (src.activation != act)
                    throw SynthesisError("widen position " + std::to_string(index) +
                                         " mixes activations");
                in_total += src.in_dim;
                out_total += src.out_dim;
            }
            DenseLayer wide(in_total, out_total, act);
            // cross-block weights first, so blocks stay exact when scale is 0
            if (plan.cross_scale != 0.0) {
                for (double& w : wide.weights)
                    w = plan.cross_scale * rng.uniform(-1.0, 1.0);
            }
            std::size_t in_off = 0, out_off = 0;
            for (const auto& ref : refs) {
                const DenseLayer& src = source_layer(edges, ref);
                for (std::size_t o = 0; o < src.out_dim; ++o)
                    for (std::size_t i = 0; i < src.in_dim; ++i)
                        wide.w(out_off + o, in_off + i) = src.w(o, i);
                for (std::size_t o = 0; o < src.out_dim; ++o)
                    wide.biases[out_off + o] = src.biases[o];
                model.copied_params += src.param_count();
                model.source_hashes.emplace_back(ref, src.param_hash());
                in_off += src.in_dim;
                out_off += src.out_dim;
            }
            wide.origin = LayerOrigin::edge_origin(0, index); // composite block
            middle.push_back(std::move(wide));
        }
    }

    // Wire everything: input -> [glue] -> middle with glue at mismatches ->
    // head -> back to input_dim.
    Network net;
    std::size_t cur_width = input_dim;
    for (auto& layer : middle) {
        if (layer.in_dim != cur_width)
            net.layers.push_back(
                fresh_layer(cur_width, layer.in_dim, hidden_act, plan.glue_init, rng));
        cur_width = layer.out_dim;
        net.layers.push_back(std::move(layer));
    }
    for (std::size_t width : plan.output_head) {
        if (width == 0) throw SynthesisError("output head width must be positive");
        net.layers.push_back(
            fresh_layer(cur_width, width, hidden_act, plan.glue_init, rng));
        cur_width = width;
    }
    if (cur_width != input_dim) {
        net.layers.push_back(
            fresh_layer(cur_width, input_dim, output_act, plan.glue_init, rng));
        cur_width = input_dim;
    }

    try {
        net.validate();
    } catch (const ShapeError& e) {
        throw SynthesisError(std::string("synthesized model is inconsistent: ") + e.what());
    }

    model.net = std::move(net);
    model.fraction_pretrained =
        model.net.param_count()
            ? static_cast<double>(model.copied_params) /
                  static_cast<double>(model.net.param_count())
            : 0.0;
    return model;
}

TrainTrace fine_tune(SynthesizedModel& model, const Matrix& central_train,
                     const Matrix& central_val, const TrainConfig& config) {
    if (config.epochs == 0) {
        TrainTrace trace;
        trace.shape = model.net.shape();
        trace.seed = config.seed;
        trace.initial_sums = layer_weight_sums(model.net);
        return trace;
    }
    return train(model.net, central_train, central_val, config);
}

ModelDescription describe(const Network& net) {
    ModelDescription desc;
    std::ostringstream os;
    os << "layer  dims           activation  origin        params\n";
    for (std::size_t t = 0; t < net.layers.size(); ++t) {
        const auto& l = net.layers[t];
        ModelDescription::Row row;
        row.index = t + 1;
        row.in_dim = l.in_dim;
        row.out_dim = l.out_dim;
        row.activation = activation_name(l.activation);
        row.origin = l.origin.describe();
        row.params = l.param_count();
        desc.total_params += row.params;
        if (l.origin.is_edge()) desc.copied_params += row.params;
        os << row.index << "\t" << l.in_dim << "x" << l.out_dim << "\t"
           << row.activation << "\t" << row.origin << "\t" << row.params << "\n";
        desc.rows.push_back(std::move(row));
    }
    desc.fraction_pretrained =
        desc.total_params ? static_cast<double>(desc.copied_params) /
                                static_cast<double>(desc.total_params)
                          : 0.0;
    os << "total params: " << desc.total_params
       << "  copied from edges: " << desc.copied_params << "  fraction pretrained: "
       << desc.fraction_pretrained << "\n";
    desc.text = os.str();
    return desc;
}

} // namespace sls
