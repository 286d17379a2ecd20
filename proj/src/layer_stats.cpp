#include "sls/layer_stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sls/errors.hpp"

namespace sls {

namespace {

LayerStatsEpoch make_epoch_stats(int epoch, const LayerWeightSums& sums,
                                 std::size_t hidden) {
    LayerStatsEpoch st;
    st.epoch = epoch;
    st.signed_sum.assign(sums.signed_sum.begin(), sums.signed_sum.begin() + hidden);
    st.l1_sum.assign(sums.l1_sum.begin(), sums.l1_sum.begin() + hidden);
    for (double v : st.signed_sum) st.signed_total += v;
    for (double v : st.l1_sum) st.l1_total += v;

    const double signed_last = st.signed_sum.back();
    const double l1_last = st.l1_sum.back();

    st.alpha_signed.resize(hidden);
    st.beta_signed.resize(hidden);
    st.alpha_l1.resize(hidden);
    st.beta_l1.resize(hidden);
    for (std::size_t l = 0; l < hidden; ++l) {
        if (st.signed_total != 0.0)
            st.alpha_signed[l] = st.signed_sum[l] / st.signed_total;
        else
            st.signed_alpha_undefined = true;
        if (signed_last != 0.0)
            st.beta_signed[l] = st.signed_sum[l] / signed_last;
        else
            st.signed_beta_undefined = true;
        st.alpha_l1[l] = st.l1_total != 0.0 ? st.l1_sum[l] / st.l1_total : 0.0;
        if (l1_last != 0.0) st.beta_l1[l] = st.l1_sum[l] / l1_last;
    }
    return st;
}

} // namespace

LayerStats compute_layer_stats(const TrainTrace& trace, std::size_t model_id) {
    if (trace.initial_sums.signed_sum.size() < 2)
        throw DataError("layer stats need a network with at least one hidden layer");
    if (trace.epochs.empty())
        throw DataError("layer stats need at least one trained epoch");

    const std::size_t hidden = trace.initial_sums.signed_sum.size() - 1;
    LayerStats stats;
    stats.model_id = model_id;
    stats.hidden_layers = hidden;
    stats.epochs.push_back(make_epoch_stats(0, trace.initial_sums, hidden));
    for (const auto& e : trace.epochs)
        stats.epochs.push_back(make_epoch_stats(e.epoch, e.sums, hidden));
    return stats;
}

ContributionScores contribution_score(const LayerStats& stats, RatioVariant variant) {
    // endpoints: first entry with epoch >= 1, and the final entry
    std::vector<const LayerStatsEpoch*> trained;
    for (const auto& e : stats.epochs)
        if (e.epoch >= 1) trained.push_back(&e);
    if (trained.size() < 2)
        throw DataError("contribution score needs at least 2 trained epochs");

    auto alpha_at = [&](const LayerStatsEpoch& e, std::size_t l) -> std::optional<double> {
        if (variant == RatioVariant::l1) return e.alpha_l1[l];
        return e.alpha_signed[l];
    };

    ContributionScores out;
    out.variant = variant;
    out.score.resize(stats.hidden_layers, 0.0);
    out.endpoint_fallback.resize(stats.hidden_layers, false);

    for (std::size_t l = 0; l < stats.hidden_layers; ++l) {
        // walk forward from the first epoch / backward from the last until the
        // ratio is defined
        std::optional<double> first, last;
        bool fell_back = false;
        for (std::size_t i = 0; i < trained.size(); ++i) {
            first = alpha_at(*trained[i], l);
            if (first) {
                fell_back = fell_back || (i != 0);
                break;
            }
            fell_back = true;
        }
        for (std::size_t i = trained.size(); i-- > 0;) {
            last = alpha_at(*trained[i], l);
            if (last) {
                fell_back = fell_back || (i + 1 != trained.size());
                break;
            }
            fell_back = true;
        }
        if (!first || !last)
            throw DataError("alpha ratio undefined at every epoch for layer " +
                            std::to_string(l + 1));
        out.score[l] = std::abs(*last - *first);
        out.endpoint_fallback[l] = fell_back;
    }
    return out;
}

std::string SelectionPolicy::to_string() const {
    switch (kind) {
        case Kind::all: return "all";
        case Kind::top_k_per_model: return "top" + std::to_string(k) + "_per_model";
        case Kind::top_k_global: return "top" + std::to_string(k) + "_global";
        case Kind::bottom_k_per_model: return "bottom" + std::to_string(k) + "_per_model";
        case Kind::threshold: {
            std::ostringstream os;
            os << "threshold:" << tau;
            return os.str();
        }
    }
    return "all";
}

SelectionPolicy SelectionPolicy::parse(const std::string& text) {
    SelectionPolicy p;
    if (text == "all") {
        p.kind = Kind::all;
        return p;
    }
    auto parse_k = [&](const std::string& prefix, const std::string& suffix,
                       Kind kind) -> bool {
        if (text.rfind(prefix, 0) != 0) return false;
        if (text.size() <= prefix.size() + suffix.size()) return false;
        if (text.substr(text.size() - suffix.size()) != suffix) return false;
        const std::string num =
            text.substr(prefix.size(), text.size() - prefix.size() - suffix.size());
        try {
            p.k = static_cast<std::size_t>(std::stoul(num));
        } catch (...) {
            return false;
        }
        p.kind = kind;
        return p.k > 0;
    };
    if (parse_k("top", "_per_model", Kind::top_k_per_model)) return p;
    if (parse_k("top", "_global", Kind::top_k_global)) return p;
    if (parse_k("bottom", "_per_model", Kind::bottom_k_per_model)) return p;
    if (text.rfind("threshold:", 0) == 0) {
        try {
            p.tau = std::stod(text.substr(10));
            p.kind = Kind::threshold;
            return p;
        } catch (...) {
        }
    }
    throw ConfigError("unknown selection policy: " + text);
}

bool SelectionMask::contains(const LayerRef& ref) const {
    return std::find(selected.begin(), selected.end(), ref) != selected.end();
}

nlohmann::json SelectionMask::to_json() const {
    nlohmann::json j;
    j["rule"] = rule;
    j["policy"] = policy;
    j["selected"] = nlohmann::json::array();
    for (const auto& r : selected)
        j["selected"].push_back({{"model", r.model_id}, {"layer", r.layer_index}});
    j["scores"] = nlohmann::json::array();
    for (const auto& s : scores)
        j["scores"].push_back({{"model", s.ref.model_id},
                               {"layer", s.ref.layer_index},
                               {"score", s.score}});
    return j;
}

SelectionMask SelectionMask::from_json(const nlohmann::json& j) {
    SelectionMask mask;
    mask.rule = j.value("rule", "");
    mask.policy = j.value("policy", "");
    for (const auto& e : j.at("selected"))
        mask.selected.push_back({e.at("model").get<uint32_t>(),
                                 e.at("layer").get<uint32_t>()});
    if (j.contains("scores"))
        for (const auto& e : j.at("scores"))
            mask.scores.push_back({{e.at("model").get<uint32_t>(),
                                    e.at("layer").get<uint32_t>()},
                                   e.at("score").get<double>()});
    return mask;
}

SelectionMask select_layers(const std::vector<ContributionScores>& scores_per_model,
                            const SelectionPolicy& policy) {
    if (scores_per_model.empty())
        throw ConfigError("select_layers: no model scores given");

    std::vector<ScoredLayer> all;
    for (std::size_t k = 0; k < scores_per_model.size(); ++k) {
        const auto& s = scores_per_model[k];
        for (std::size_t l = 0; l < s.score.size(); ++l)
            all.push_back({{static_cast<uint32_t>(k + 1),
                            static_cast<uint32_t>(l + 1)},
                           s.score[l]});
    }

    // Stable ranking: higher score first, ties toward lower (model, layer).
    auto ranked = all;
    std::sort(ranked.begin(), ranked.end(), [](const ScoredLayer& a, const ScoredLayer& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.ref < b.ref;
    });

    SelectionMask mask;
    mask.scores = all;
    mask.policy = policy.to_string();
    mask.rule = "endpoint_alpha_delta";

    switch (policy.kind) {
        case SelectionPolicy::Kind::all:
            for (const auto& s : all) mask.selected.push_back(s.ref);
            break;
        case SelectionPolicy::Kind::top_k_global:
            for (std::size_t i = 0; i < std::min(policy.k, ranked.size()); ++i)
                mask.selected.push_back(ranked[i].ref);
            break;
        case SelectionPolicy::Kind::top_k_per_model:
        case SelectionPolicy::Kind::bottom_k_per_model: {
            const bool bottom = policy.kind == SelectionPolicy::Kind::bottom_k_per_model;
            for (std::size_t k = 0; k < scores_per_model.size(); ++k) {
                std::vector<ScoredLayer> model_layers;
                for (const auto& s : all)
                    if (s.ref.model_id == k + 1) model_layers.push_back(s);
                std::sort(model_layers.begin(), model_layers.end(),
                          [bottom](const ScoredLayer& a, const ScoredLayer& b) {
                              if (a.score != b.score)
                                  return bottom ? a.score < b.score : a.score > b.score;
                              return a.ref < b.ref;
                          });
                for (std::size_t i = 0; i < std::min(policy.k, model_layers.size()); ++i)
                    mask.selected.push_back(model_layers[i].ref);
            }
            break;
        }
        case SelectionPolicy::Kind::threshold:
            for (const auto& s : all)
                if (s.score >= policy.tau) mask.selected.push_back(s.ref);
            break;
    }

    if (mask.selected.empty())
        throw ConfigError("selection policy '" + policy.to_string() +
                          "' selected zero layers");
    std::sort(mask.selected.begin(), mask.selected.end());
    return mask;
}

void write_layer_stats_csv(const LayerStats& stats, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open stats file for writing: " + path.string());
    out.precision(17);
    out << "epoch,layer,signed_sum,l1_sum,alpha_signed,alpha_l1,beta_signed,beta_l1,flags\n";
    for (const auto& e : stats.epochs) {
        for (std::size_t l = 0; l < stats.hidden_layers; ++l) {
            out << e.epoch << "," << (l + 1) << "," << e.signed_sum[l] << ","
                << e.l1_sum[l] << ",";
            std::string flags;
            if (e.alpha_signed[l])
                out << *e.alpha_signed[l];
            else
                flags += "alpha_signed_undefined;";
            out << "," << e.alpha_l1[l] << ",";
            if (e.beta_signed[l])
                out << *e.beta_signed[l];
            else
                flags += "beta_signed_undefined;";
            out << ",";
            if (e.beta_l1[l])
                out << *e.beta_l1[l];
            else
                flags += "beta_l1_undefined;";
            out << "," << flags << "\n";
        }
    }
    if (!out) throw IoError("stats write failed: " + path.string());
}

} // namespace sls
