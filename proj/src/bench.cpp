#include "sls/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "sls/errors.hpp"
#include "sls/hash.hpp"
#include "sls/rng.hpp"

namespace sls {

namespace {

constexpr uint64_t kDataTag = 0xDA7AULL;
constexpr uint64_t kPlanTagBase = 100;
constexpr uint64_t kFineTuneTagBase = 200;
constexpr uint64_t kFreshTag = 300;
constexpr uint64_t kFlTag = 400;

double now_sec() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

std::string hex64(uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

uint64_t parse_hex64(const std::string& s) {
    return std::stoull(s, nullptr, 16);
}

Dataset concat_datasets(const std::vector<const Dataset*>& parts) {
    if (parts.empty()) throw DataError("concat: no datasets");
    Dataset out;
    out.feature_names = parts.front()->feature_names;
    const std::size_t dim = parts.front()->dim();
    std::size_t rows = 0;
    bool labeled = true;
    for (const auto* p : parts) {
        if (p->dim() != dim) throw ShapeError("concat: dimension mismatch");
        rows += p->rows();
        labeled = labeled && p->labels.has_value();
    }
    out.features = Matrix(rows, dim);
    std::vector<int> labels;
    std::size_t r0 = 0;
    for (const auto* p : parts) {
        for (std::size_t r = 0; r < p->rows(); ++r)
            for (std::size_t c = 0; c < dim; ++c)
                out.features.at(r0 + r, c) = p->features.at(r, c);
        if (labeled)
            labels.insert(labels.end(), p->labels->begin(), p->labels->end());
        r0 += p->rows();
    }
    if (labeled) out.labels = std::move(labels);
    return out;
}

std::optional<double> median_of(std::vector<double> v) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    const double med = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    if (!std::isfinite(med)) return std::nullopt;
    return med;
}

std::optional<double> quantile_of(std::vector<double> v, double p) {
    if (v.empty()) return std::nullopt;
    std::sort(v.begin(), v.end());
    const double h = p * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(h));
    const double q = v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
    if (!std::isfinite(q)) return std::nullopt;
    return q;
}

nlohmann::json opt_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
}

nlohmann::json opt_json(const std::optional<int>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
}

nlohmann::json opt_json(const std::optional<uint64_t>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
}

struct DetectOutcome {
    double accuracy = 0.0;
    std::optional<double> fpr;
};

// Calibrate on the central validation block's normal rows and classify the
// held-out evaluation set.
std::optional<DetectOutcome> try_detect(const Network& net, const Dataset& calib_source,
                                        const Dataset& eval_set,
                                        CalibrationMethod method, double percentile) {
    if (!calib_source.labels || !eval_set.labels) return std::nullopt;
    if (eval_set.rows() == 0) return std::nullopt;

    const auto calib_scores_all = score_rows(net, calib_source.features);
    std::vector<double> normal_scores;
    for (std::size_t r = 0; r < calib_scores_all.size(); ++r)
        if ((*calib_source.labels)[r] == 0) normal_scores.push_back(calib_scores_all[r]);
    if (method == CalibrationMethod::percentile && normal_scores.size() < 20)
        return std::nullopt;
    if (normal_scores.empty()) return std::nullopt;

    Threshold th;
    if (method == CalibrationMethod::roc_opt) {
        th = calibrate(calib_scores_all, method, percentile, calib_source.labels);
    } else {
        th = calibrate(normal_scores, method, percentile);
    }
    const auto report =
        classify(score_rows(net, eval_set.features), th.value, *eval_set.labels);
    DetectOutcome out;
    out.accuracy = report.accuracy;
    out.fpr = report.fpr;
    return out;
}

} // namespace

void ConvergenceCriterion::validate() const {
    if (!(delta > 0.0)) throw ConfigError("criterion delta must be > 0");
    if (patience < 1) throw ConfigError("criterion patience must be >= 1");
}

std::optional<int> epochs_to_converge(const std::vector<double>& val_losses,
                                      const ConvergenceCriterion& criterion) {
    criterion.validate();
    if (val_losses.empty()) throw DataError("epochs_to_converge: empty trace");

    const double vmin = *std::min_element(val_losses.begin(), val_losses.end());
    const double band = (1.0 + criterion.delta) * vmin;
    const std::size_t window = static_cast<std::size_t>(criterion.patience);
    if (val_losses.size() < window) return std::nullopt;

    for (std::size_t e = 0; e + window <= val_losses.size(); ++e) {
        bool ok = true;
        for (std::size_t i = e; i < e + window; ++i) {
            if (!(val_losses[i] <= band)) {
                ok = false;
                break;
            }
        }
        if (ok) return static_cast<int>(e + 1);
    }
    return std::nullopt;
}

ExperimentConfig ExperimentConfig::from_config(const ConfigFile& file) {
    ExperimentConfig cfg;

    cfg.data_source = file.get_string("data.source", "synthetic");
    if (cfg.data_source != "synthetic" && cfg.data_source != "csv")
        throw ConfigError("data.source must be 'synthetic' or 'csv'");
    cfg.csv_path = file.get_string("data.csv.path", "");
    cfg.schema_path = file.get_string("data.csv.schema", "");
    if (cfg.data_source == "csv" && (cfg.csv_path.empty() || cfg.schema_path.empty()))
        throw ConfigError("csv source needs data.csv.path and data.csv.schema");

    const std::string norm = file.get_string("data.normalize", "minmax");
    if (norm == "minmax")
        cfg.norm = NormMethod::minmax;
    else if (norm == "zscore")
        cfg.norm = NormMethod::zscore;
    else if (norm == "none")
        cfg.norm = std::nullopt;
    else
        throw ConfigError("data.normalize must be minmax, zscore or none");

    cfg.synth.n_normal = file.get_uint("data.synthetic.normal_rows", 4000);
    cfg.synth.n_attack = file.get_uint("data.synthetic.attack_rows", 0);
    cfg.synth.dim = file.get_uint("data.synthetic.dim", 16);
    if (file.has("data.synthetic.mean"))
        cfg.synth.mean = file.get_double_list("data.synthetic.mean");
    if (file.has("data.synthetic.stddev"))
        cfg.synth.stddev = file.get_double_list("data.synthetic.stddev");
    if (file.has("data.synthetic.attack_shift"))
        cfg.synth.attack_shift = file.get_double_list("data.synthetic.attack_shift");
    cfg.synth.regions = file.get_uint("data.synthetic.regions", 0);
    cfg.synth.region_jitter = file.get_double("data.synthetic.region_jitter", 0.0);

    cfg.split_shuffle = file.get_bool("split.shuffle", true);
    cfg.partition_by_region = file.get_bool("partition.by_region", false);
    cfg.edges = file.get_uint("partition.edges", 2);
    cfg.edge_train_rows = file.get_uint("partition.edge_train_rows", 0);
    cfg.edge_test_rows = file.get_uint("partition.edge_test_rows", 0);

    if (file.has("model.hidden")) cfg.edge_hidden = file.get_size_list("model.hidden");
    if (cfg.edge_hidden.empty()) throw ConfigError("model.hidden lists no widths");
    cfg.hidden_activation =
        activation_from_name(file.get_string("model.activation", "tanh"));
    cfg.output_activation =
        activation_from_name(file.get_string("model.output_activation", "identity"));
    cfg.train.init = init_scheme_from_name(file.get_string("model.init", "uniform_pm1"));

    cfg.train.epochs = static_cast<int>(file.get_int("train.epochs", 40));
    cfg.train.learning_rate = file.get_double("train.learning_rate", 0.005);
    cfg.train.beta1 = file.get_double("train.beta1", 0.8);
    cfg.train.beta2 = file.get_double("train.beta2", 0.9);
    cfg.train.adam_eps = file.get_double("train.adam_eps", 1e-8);
    cfg.train.lambda = file.get_double("train.lambda", 1e-8);
    cfg.train.sparsity = file.get_double("train.sparsity", 0.2);
    cfg.train.batch_size = file.get_uint("train.batch_size", 32);
    cfg.train.validate();
    cfg.normal_only = file.get_bool("train.normal_only", true);

    cfg.fine_tune_epochs = static_cast<int>(file.get_int("ft.epochs", -1));
    cfg.fine_tune_lr = file.get_double("ft.learning_rate", -1.0);

    if (file.has("plans")) cfg.plans = file.get_list("plans");
    if (cfg.plans.empty()) throw ConfigError("plans lists no selection policies");
    for (const auto& p : cfg.plans) SelectionPolicy::parse(p); // validate early

    cfg.strategy = synth_strategy_from_name(file.get_string("synth.strategy", "stack"));
    cfg.glue_init = glue_init_from_name(file.get_string("synth.glue_init", "uniform_scaled"));
    cfg.cross_scale = file.get_double("synth.cross_scale", 0.0);
    if (file.has("synth.output_head"))
        cfg.output_head = file.get_size_list("synth.output_head");

    const std::string dm = file.get_string("detect.method", "percentile");
    if (dm == "percentile")
        cfg.detect_method = CalibrationMethod::percentile;
    else if (dm == "max_normal")
        cfg.detect_method = CalibrationMethod::max_normal;
    else if (dm == "roc_opt")
        cfg.detect_method = CalibrationMethod::roc_opt;
    else
        throw ConfigError("detect.method must be percentile, max_normal or roc_opt");
    cfg.detect_percentile = file.get_double("detect.percentile", 0.99);

    cfg.fl_enabled = file.get_bool("fl.enabled", false);
    cfg.fl.clients = file.get_uint("fl.clients", 4);
    cfg.fl.rounds = file.get_uint("fl.rounds", 50);
    cfg.fl.local_epochs = file.get_uint("fl.local_epochs", 20);
    cfg.fl.edge_lr = file.get_double("fl.edge_lr", 1e-8);
    cfg.fl.central_lr = file.get_double("fl.central_lr", 0.005);
    cfg.fl.l2_reg = file.get_double("fl.l2_reg", 1e-4);
    cfg.fl.batch_size = file.get_uint("fl.batch_size", 32);
    if (file.has("fl.lr_sweep")) cfg.fl_lr_sweep = file.get_double_list("fl.lr_sweep");

    cfg.criterion.delta = file.get_double("criterion.delta", 0.05);
    cfg.criterion.patience = static_cast<int>(file.get_int("criterion.patience", 3));
    cfg.criterion.validate();

    cfg.seeds = file.get_uint("seeds", 1);
    if (cfg.seeds == 0) throw ConfigError("seeds must be >= 1");
    cfg.master_seed = file.get_uint("seed", 1);
    cfg.threads = file.get_uint("threads", 1);
    return cfg;
}

nlohmann::json ExperimentConfig::echo_json() const {
    nlohmann::json j;
    j["data"]["source"] = data_source;
    if (data_source == "csv") {
        j["data"]["csv_path"] = csv_path.string();
        j["data"]["schema_path"] = schema_path.string();
    } else {
        j["data"]["synthetic"] = {{"normal_rows", synth.n_normal},
                                  {"attack_rows", synth.n_attack},
                                  {"dim", synth.dim},
                                  {"mean", synth.mean},
                                  {"stddev", synth.stddev},
                                  {"attack_shift", synth.attack_shift},
                                  {"regions", synth.regions},
                                  {"region_jitter", synth.region_jitter}};
    }
    j["data"]["normalize"] =
        norm ? (*norm == NormMethod::minmax ? "minmax" : "zscore") : "none";
    j["split"]["shuffle"] = split_shuffle;
    j["partition"] = {{"edges", edges},
                      {"edge_train_rows", edge_train_rows},
                      {"edge_test_rows", edge_test_rows},
                      {"by_region", partition_by_region}};
    j["model"] = {{"hidden", edge_hidden},
                  {"activation", activation_name(hidden_activation)},
                  {"output_activation", activation_name(output_activation)},
                  {"init", init_scheme_name(train.init)}};
    j["train"] = {{"epochs", train.epochs},
                  {"learning_rate", train.learning_rate},
                  {"beta1", train.beta1},
                  {"beta2", train.beta2},
                  {"adam_eps", train.adam_eps},
                  {"lambda", train.lambda},
                  {"sparsity", train.sparsity},
                  {"batch_size", train.batch_size},
                  {"normal_only", normal_only}};
    j["ft"] = {{"epochs", fine_tune_epochs}, {"learning_rate", fine_tune_lr}};
    j["plans"] = plans;
    j["synth"] = {{"strategy", synth_strategy_name(strategy)},
                  {"glue_init", glue_init_name(glue_init)},
                  {"cross_scale", cross_scale},
                  {"output_head", output_head}};
    j["detect"] = {{"method", calibration_method_name(detect_method)},
                   {"percentile", detect_percentile}};
    j["fl"] = {{"enabled", fl_enabled},
               {"clients", fl.clients},
               {"rounds", fl.rounds},
               {"local_epochs", fl.local_epochs},
               {"edge_lr", fl.edge_lr},
               {"central_lr", fl.central_lr},
               {"l2_reg", fl.l2_reg},
               {"batch_size", fl.batch_size},
               {"lr_sweep", fl_lr_sweep}};
    j["criterion"] = {{"delta", criterion.delta}, {"patience", criterion.patience}};
    j["seeds"] = seeds;
    j["seed"] = master_seed;
    return j;
}

PreparedData prepare_data(const ExperimentConfig& cfg, uint64_t run_seed) {
    Dataset raw;
    nlohmann::json manifest;
    if (cfg.data_source == "synthetic") {
        SynthConfig sc = cfg.synth;
        sc.seed = derive_seed(run_seed, kDataTag);
        auto generated = generate_synthetic(sc);
        raw = std::move(generated.dataset);
        manifest["synthetic"] = std::move(generated.manifest);
    } else {
        const Schema schema = parse_schema_file(cfg.schema_path);
        auto ingested = ingest_csv(cfg.csv_path, schema);
        raw = std::move(ingested.dataset);
        manifest["csv"] = {{"path", cfg.csv_path.string()},
                           {"schema", cfg.schema_path.string()},
                           {"dropped_rows", ingested.dropped_rows}};
    }

    PreparedData out;
    if (cfg.partition_by_region) {
        Dataset normalized = raw;
        if (cfg.norm) normalized = normalize(raw, *cfg.norm).first;
        out.partition = partition_from_regions(normalized, cfg.edges, run_seed);
        std::vector<const Dataset*> trains, tests;
        for (const auto& e : out.partition.edges) {
            trains.push_back(&e.train);
            tests.push_back(&e.test);
        }
        trains.push_back(&out.partition.central.train);
        tests.push_back(&out.partition.central.test);
        out.split.train = concat_datasets(trains);
        out.split.test = concat_datasets(tests);
    } else {
        SplitPair split = split_80_20(raw, run_seed, cfg.split_shuffle);
        if (cfg.norm) {
            auto [train_n, record] = normalize(split.train, *cfg.norm);
            split.train = std::move(train_n);
            split.test = apply_normalization(split.test, record);
        }
        const std::size_t m = cfg.edges;
        const std::size_t s_train =
            cfg.edge_train_rows ? cfg.edge_train_rows : split.train.rows() / (m + 1);
        const std::size_t s_test =
            cfg.edge_test_rows ? cfg.edge_test_rows : split.test.rows() / (m + 1);
        if (s_train == 0 || s_test == 0)
            throw PartitionError("not enough rows to give every edge a block");
        out.partition = partition_edges(split, m, s_train, s_test);
        out.split = std::move(split);
    }

    out.manifest = std::move(manifest);
    out.train_hash = out.split.train.content_hash();
    out.test_hash = out.split.test.content_hash();
    for (const auto& e : out.partition.edges)
        out.edge_train_hashes.push_back(e.train.content_hash());
    out.central_train_hash = out.partition.central.train.content_hash();
    out.central_val_hash = out.partition.central.test.content_hash();
    return out;
}

namespace {

struct ArmBuilder {
    const ExperimentConfig& cfg;
    const PreparedData& data;
    const Dataset& central_train; // possibly normal-only filtered
    const Dataset& central_val;
    const Dataset& eval_set;      // held-out, unfiltered
    uint64_t val_hash = 0;

    ArmResult from_trace(const std::string& name, const TrainTrace& trace,
                         const std::vector<std::size_t>& shape) const {
        ArmResult arm;
        arm.arm = name;
        arm.shape = shape;
        arm.train_curve = trace.train_losses();
        arm.val_curve = trace.val_losses();
        arm.final_train_rmse = arm.train_curve.empty() ? 0.0 : arm.train_curve.back();
        arm.final_val_rmse = arm.val_curve.empty() ? 0.0 : arm.val_curve.back();
        arm.epochs_to_converge = epochs_to_converge(arm.val_curve, cfg.criterion);
        arm.converged = arm.epochs_to_converge.has_value();
        arm.trace_hash = trace.hash();
        arm.val_data_hash = val_hash;
        arm.wall_sec = trace.total_wall_sec();
        arm.cost_per_epoch_mults =
            estimate_cost(shape, central_train.rows()).mults_per_epoch();
        return arm;
    }

    void attach_detection(ArmResult& arm, const Network& net) const {
        const auto outcome =
            try_detect(net, data.partition.central.test, eval_set, cfg.detect_method,
                       cfg.detect_percentile);
        if (outcome) {
            arm.accuracy = outcome->accuracy;
            arm.fpr = outcome->fpr;
        }
    }
};

SeedRun run_single(const ExperimentConfig& cfg, uint64_t run_seed) {
    const PreparedData data = prepare_data(cfg, run_seed);
    const std::size_t dim = data.split.train.dim();
    const bool labeled = data.split.train.labels.has_value();
    const bool filter = cfg.normal_only && labeled;

    std::vector<std::size_t> edge_shape;
    edge_shape.push_back(dim);
    for (std::size_t w : cfg.edge_hidden) edge_shape.push_back(w);
    edge_shape.push_back(dim);

    TrainConfig edge_cfg = cfg.train;
    edge_cfg.seed = run_seed;

    EdgeTrainOptions opts;
    opts.normal_only = filter;
    const EdgeModelSet edges =
        train_edges(data.partition, edge_shape, cfg.hidden_activation, edge_cfg, opts);

    SeedRun run;
    run.seed = run_seed;
    run.train_hash = data.train_hash;
    run.test_hash = data.test_hash;

    std::vector<ContributionScores> scores;
    std::vector<std::optional<int>> edge_conv;
    for (std::size_t k = 0; k < edges.m; ++k) {
        scores.push_back(contribution_score(
            compute_layer_stats(edges.traces[k], k + 1), RatioVariant::l1));
        edge_conv.push_back(epochs_to_converge(edges.traces[k].val_losses(), cfg.criterion));
    }
    run.edge_epochs_to_converge = edge_conv;

    Dataset central_train_storage, central_val_storage;
    const Dataset& central_train =
        filter ? (central_train_storage = data.partition.central.train.normal_rows())
               : data.partition.central.train;
    const Dataset& central_val =
        filter ? (central_val_storage = data.partition.central.test.normal_rows())
               : data.partition.central.test;
    if (central_train.rows() == 0 || central_val.rows() == 0)
        throw PartitionError("central reserve is empty; reduce edge block sizes "
                             "or the edge count");

    std::vector<const Dataset*> eval_parts;
    for (const auto& e : data.partition.edges) eval_parts.push_back(&e.test);
    const Dataset eval_set = concat_datasets(eval_parts);

    ArmBuilder builder{cfg, data, central_train, central_val, eval_set,
                       central_val.content_hash()};

    // analytic per-epoch cost of one edge, for the compute-at-convergence sums
    const uint64_t edge_epoch_cost =
        estimate_cost(edge_shape, data.partition.edges.front().train.rows())
            .mults_per_epoch();
    uint64_t edge_compute = 0;
    for (std::size_t k = 0; k < edges.m; ++k) {
        const int epochs = edge_conv[k] ? *edge_conv[k] : cfg.train.epochs;
        edge_compute += edge_epoch_cost * static_cast<uint64_t>(epochs);
    }

    std::vector<std::size_t> primary_shape;

    // synthesized arms, one per plan
    for (std::size_t p = 0; p < cfg.plans.size(); ++p) {
        const std::string arm_name = "synthesized:" + cfg.plans[p];
        try {
            const SelectionPolicy policy = SelectionPolicy::parse(cfg.plans[p]);
            const SelectionMask mask = select_layers(scores, policy);
            SynthesisPlan plan = SynthesisPlan::from_mask(mask, cfg.strategy);
            plan.glue_init = cfg.glue_init;
            plan.cross_scale = cfg.cross_scale;
            plan.output_head = cfg.output_head;
            plan.seed = derive_seed(run_seed, kPlanTagBase + p);

            SynthesizedModel synth = synthesize(edges, plan, dim, edge_cfg);
            if (p == 0) primary_shape = synth.net.shape();

            TrainConfig ft_cfg = cfg.train;
            ft_cfg.epochs = cfg.fine_tune_epochs >= 0 ? cfg.fine_tune_epochs
                                                      : cfg.train.epochs;
            if (cfg.fine_tune_lr > 0.0) ft_cfg.learning_rate = cfg.fine_tune_lr;
            ft_cfg.seed = derive_seed(run_seed, kFineTuneTagBase + p);

            const TrainTrace trace = fine_tune(synth, central_train.features,
                                               central_val.features, ft_cfg);
            ArmResult arm = builder.from_trace(arm_name, trace, synth.net.shape());
            arm.bytes_exchanged =
                static_cast<uint64_t>(synth.copied_params) * sizeof(double);
            if (arm.epochs_to_converge)
                arm.compute_mults_at_convergence =
                    edge_compute + arm.cost_per_epoch_mults *
                                       static_cast<uint64_t>(*arm.epochs_to_converge);
            builder.attach_detection(arm, synth.net);
            run.arms.push_back(std::move(arm));
        } catch (const Error& e) {
            ArmResult arm;
            arm.arm = arm_name;
            arm.error = e.what();
            run.arms.push_back(std::move(arm));
        }
    }

    if (primary_shape.empty())
        throw ConfigError("primary synthesis plan failed; no matched shape for the "
                          "fresh-central arm");

    // fresh central arm: identical architecture, fresh parameters, same data
    try {
        TrainConfig fresh_cfg = cfg.train;
        fresh_cfg.seed = derive_seed(run_seed, kFreshTag);
        Network fresh = init_network(primary_shape, cfg.hidden_activation, fresh_cfg,
                                     cfg.output_activation);
        const TrainTrace trace =
            train(fresh, central_train.features, central_val.features, fresh_cfg);
        ArmResult arm = builder.from_trace("fresh_central", trace, primary_shape);
        if (arm.epochs_to_converge)
            arm.compute_mults_at_convergence =
                arm.cost_per_epoch_mults * static_cast<uint64_t>(*arm.epochs_to_converge);
        builder.attach_detection(arm, fresh);
        run.arms.push_back(std::move(arm));
    } catch (const Error& e) {
        ArmResult arm;
        arm.arm = "fresh_central";
        arm.error = e.what();
        run.arms.push_back(std::move(arm));
    }

    // federated baseline on the same pool of training rows
    if (cfg.fl_enabled) {
        try {
            FLConfig fl = cfg.fl;
            fl.shape = primary_shape;
            fl.hidden_activation = cfg.hidden_activation;
            fl.output_activation = cfg.output_activation;
            fl.init = cfg.train.init;
            fl.seed = derive_seed(run_seed, kFlTag);

            const std::size_t per_client = data.split.train.rows() / fl.clients;
            if (per_client == 0) throw PartitionError("too few rows for FL clients");
            std::vector<Matrix> client_train;
            for (std::size_t c = 0; c < fl.clients; ++c) {
                std::vector<std::size_t> idx;
                for (std::size_t r = c * per_client; r < (c + 1) * per_client; ++r) idx.push_back(r);
                Dataset block = subset_rows(data.split.train, idx);
                if (filter) block = block.normal_rows();
                if (block.rows() == 0)
                    throw DataError("FL client " + std::to_string(c + 1) +
                                    " has no training rows");
                client_train.push_back(block.features);
            }

            std::vector<double> sweep =
                cfg.fl_lr_sweep.empty() ? std::vector<double>{fl.edge_lr} : cfg.fl_lr_sweep;

            std::optional<FLResult> best;
            std::optional<int> best_conv;
            double best_final = 0.0;
            double best_lr = fl.edge_lr;
            double wall = 0.0;
            for (double lr : sweep) {
                FLConfig trial = fl;
                trial.edge_lr = lr;
                const double t0 = now_sec();
                FLResult result =
                    fl_run(client_train, central_val.features, std::nullopt, trial);
                wall += now_sec() - t0;
                const auto conv = epochs_to_converge(result.trace.val_losses(), cfg.criterion);
                const double final_loss = result.trace.rounds.back().global_val_rmse;
                const bool better =
                    !best ||
                    (conv && !best_conv) ||
                    (conv && best_conv && (*conv < *best_conv ||
                                           (*conv == *best_conv && final_loss < best_final))) ||
                    (!conv && !best_conv && final_loss < best_final);
                if (better) {
                    best = std::move(result);
                    best_conv = conv;
                    best_final = final_loss;
                    best_lr = lr;
                }
            }

            ArmResult arm;
            arm.arm = "fl";
            arm.shape = primary_shape;
            arm.val_curve = best->trace.val_losses();
            arm.final_val_rmse = best->trace.rounds.back().global_val_rmse;
            arm.epochs_to_converge = best_conv; // rounds, by protocol
            arm.converged = best_conv.has_value();
            arm.trace_hash = best->trace.hash();
            arm.val_data_hash = builder.val_hash;
            arm.wall_sec = wall;
            arm.bytes_exchanged = best->trace.bytes_exchanged;
            arm.fl_edge_lr = best_lr;
            const uint64_t client_epoch_cost =
                estimate_cost(primary_shape, client_train.front().rows).mults_per_epoch();
            arm.cost_per_epoch_mults = client_epoch_cost;
            if (best_conv)
                arm.compute_mults_at_convergence =
                    client_epoch_cost * static_cast<uint64_t>(fl.local_epochs) *
                    static_cast<uint64_t>(fl.clients) * static_cast<uint64_t>(*best_conv);
            builder.attach_detection(arm, best->global);
            run.arms.push_back(std::move(arm));
        } catch (const Error& e) {
            ArmResult arm;
            arm.arm = "fl";
            arm.error = e.what();
            run.arms.push_back(std::move(arm));
        }
    }

    // paired fairness: every successful arm validated on the same rows
    for (const auto& arm : run.arms)
        if (!arm.error && arm.val_data_hash != builder.val_hash)
            throw ContractError("arm " + arm.arm + " validated on different data");

    return run;
}

} // namespace

ComparisonReport run_comparison(const ExperimentConfig& cfg) {
    ComparisonReport report;
    report.config_echo = cfg.echo_json();
    for (std::size_t i = 0; i < cfg.seeds; ++i)
        report.seeds.push_back(cfg.master_seed + i);

    report.runs.resize(cfg.seeds);
    std::vector<std::exception_ptr> errors(cfg.seeds);
    auto work = [&](std::size_t i) {
        try {
            report.runs[i] = run_single(cfg, report.seeds[i]);
        } catch (...) {
            errors[i] = std::current_exception();
        }
    };

    if (cfg.threads <= 1 || cfg.seeds == 1) {
        for (std::size_t i = 0; i < cfg.seeds; ++i) work(i);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (std::size_t t = 0; t < std::min(cfg.threads, cfg.seeds); ++t)
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < cfg.seeds;
                     i = next.fetch_add(1))
                    work(i);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);

    // aggregates, arm order as in the first run
    for (const auto& first_arm : report.runs.front().arms) {
        ArmAggregate agg;
        agg.arm = first_arm.arm;
        std::vector<double> epochs, accs, fprs, finals, computes;
        for (const auto& run : report.runs) {
            for (const auto& arm : run.arms) {
                if (arm.arm != agg.arm || arm.error) continue;
                ++agg.n_seeds;
                if (arm.converged) ++agg.n_converged;
                epochs.push_back(arm.epochs_to_converge
                                     ? static_cast<double>(*arm.epochs_to_converge)
                                     : std::numeric_limits<double>::infinity());
                if (arm.accuracy) accs.push_back(*arm.accuracy);
                if (arm.fpr) fprs.push_back(*arm.fpr);
                finals.push_back(arm.final_val_rmse);
                if (arm.compute_mults_at_convergence)
                    computes.push_back(static_cast<double>(*arm.compute_mults_at_convergence));
                agg.bytes_exchanged = arm.bytes_exchanged;
            }
        }
        agg.median_epochs = median_of(epochs);
        if (agg.n_seeds >= 2) {
            const auto q1 = quantile_of(epochs, 0.25);
            const auto q3 = quantile_of(epochs, 0.75);
            if (q1 && q3) agg.iqr_epochs = *q3 - *q1;
        }
        agg.median_accuracy = median_of(accs);
        agg.median_fpr = median_of(fprs);
        if (const auto m = median_of(finals)) agg.median_final_val_rmse = *m;
        agg.median_compute_mults = median_of(computes);
        report.aggregates.push_back(std::move(agg));
    }

    // relative improvements against the fresh-central arm / the FL arm
    const ArmAggregate* fresh = report.find_aggregate("fresh_central");
    nlohmann::json rel;
    for (const auto& agg : report.aggregates) {
        if (agg.arm.rfind("synthesized:", 0) != 0) continue;
        nlohmann::json entry;
        if (fresh && fresh->median_epochs && agg.median_epochs && *fresh->median_epochs > 0) {
            const double ratio = *agg.median_epochs / *fresh->median_epochs;
            entry["epochs_ratio_vs_fresh"] = ratio;
            entry["epochs_improvement_pct_vs_fresh"] = (1.0 - ratio) * 100.0;
        }
        const ArmAggregate* fl = report.find_aggregate("fl");
        if (fl && fl->median_compute_mults && agg.median_compute_mults &&
            *fl->median_compute_mults > 0) {
            entry["compute_ratio_vs_fl"] =
                *agg.median_compute_mults / *fl->median_compute_mults;
            if (fl->bytes_exchanged > 0)
                entry["bytes_ratio_vs_fl"] = static_cast<double>(agg.bytes_exchanged) /
                                             static_cast<double>(fl->bytes_exchanged);
        }
        if (!entry.empty()) rel[agg.arm] = entry;
    }
    report.relative = rel.is_null() ? nlohmann::json::object() : rel;
    return report;
}

const ArmAggregate* ComparisonReport::find_aggregate(const std::string& arm) const {
    for (const auto& a : aggregates)
        if (a.arm == arm) return &a;
    return nullptr;
}

namespace {

nlohmann::json arm_to_json(const ArmResult& arm) {
    nlohmann::json j;
    j["arm"] = arm.arm;
    j["shape"] = arm.shape;
    j["converged"] = arm.converged;
    j["epochs_to_converge"] = opt_json(arm.epochs_to_converge);
    j["final_train_rmse"] = arm.final_train_rmse;
    j["final_val_rmse"] = arm.final_val_rmse;
    j["accuracy"] = opt_json(arm.accuracy);
    j["fpr"] = opt_json(arm.fpr);
    j["bytes_exchanged"] = arm.bytes_exchanged;
    j["cost_per_epoch_mults"] = arm.cost_per_epoch_mults;
    j["compute_mults_at_convergence"] = opt_json(arm.compute_mults_at_convergence);
    j["trace_hash"] = hex64(arm.trace_hash);
    j["val_data_hash"] = hex64(arm.val_data_hash);
    j["wall_sec"] = arm.wall_sec;
    j["train_curve"] = arm.train_curve;
    j["val_curve"] = arm.val_curve;
    j["fl_edge_lr"] = opt_json(arm.fl_edge_lr);
    j["error"] = arm.error ? nlohmann::json(*arm.error) : nlohmann::json();
    return j;
}

ArmResult arm_from_json(const nlohmann::json& j) {
    ArmResult arm;
    arm.arm = j.at("arm").get<std::string>();
    arm.shape = j.at("shape").get<std::vector<std::size_t>>();
    arm.converged = j.at("converged").get<bool>();
    if (!j.at("epochs_to_converge").is_null())
        arm.epochs_to_converge = j.at("epochs_to_converge").get<int>();
    arm.final_train_rmse = j.at("final_train_rmse").get<double>();
    arm.final_val_rmse = j.at("final_val_rmse").get<double>();
    if (!j.at("accuracy").is_null()) arm.accuracy = j.at("accuracy").get<double>();
    if (!j.at("fpr").is_null()) arm.fpr = j.at("fpr").get<double>();
    arm.bytes_exchanged = j.at("bytes_exchanged").get<uint64_t>();
    arm.cost_per_epoch_mults = j.at("cost_per_epoch_mults").get<uint64_t>();
    if (!j.at("compute_mults_at_convergence").is_null())
        arm.compute_mults_at_convergence =
            j.at("compute_mults_at_convergence").get<uint64_t>();
    arm.trace_hash = parse_hex64(j.at("trace_hash").get<std::string>());
    arm.val_data_hash = parse_hex64(j.at("val_data_hash").get<std::string>());
    arm.wall_sec = j.at("wall_sec").get<double>();
    arm.train_curve = j.at("train_curve").get<std::vector<double>>();
    arm.val_curve = j.at("val_curve").get<std::vector<double>>();
    if (!j.at("fl_edge_lr").is_null()) arm.fl_edge_lr = j.at("fl_edge_lr").get<double>();
    if (!j.at("error").is_null()) arm.error = j.at("error").get<std::string>();
    return arm;
}

nlohmann::json aggregate_to_json(const ArmAggregate& agg) {
    nlohmann::json j;
    j["arm"] = agg.arm;
    j["n_seeds"] = agg.n_seeds;
    j["n_converged"] = agg.n_converged;
    j["median_epochs"] = opt_json(agg.median_epochs);
    j["iqr_epochs"] = opt_json(agg.iqr_epochs);
    j["median_accuracy"] = opt_json(agg.median_accuracy);
    j["median_fpr"] = opt_json(agg.median_fpr);
    j["median_final_val_rmse"] = agg.median_final_val_rmse;
    j["median_compute_mults"] = opt_json(agg.median_compute_mults);
    j["bytes_exchanged"] = agg.bytes_exchanged;
    return j;
}

ArmAggregate aggregate_from_json(const nlohmann::json& j) {
    ArmAggregate agg;
    agg.arm = j.at("arm").get<std::string>();
    agg.n_seeds = j.at("n_seeds").get<std::size_t>();
    agg.n_converged = j.at("n_converged").get<std::size_t>();
    if (!j.at("median_epochs").is_null())
        agg.median_epochs = j.at("median_epochs").get<double>();
    if (!j.at("iqr_epochs").is_null()) agg.iqr_epochs = j.at("iqr_epochs").get<double>();
    if (!j.at("median_accuracy").is_null())
        agg.median_accuracy = j.at("median_accuracy").get<double>();
    if (!j.at("median_fpr").is_null()) agg.median_fpr = j.at("median_fpr").get<double>();
    agg.median_final_val_rmse = j.at("median_final_val_rmse").get<double>();
    if (!j.at("median_compute_mults").is_null())
        agg.median_compute_mults = j.at("median_compute_mults").get<double>();
    agg.bytes_exchanged = j.at("bytes_exchanged").get<uint64_t>();
    return agg;
}

} // namespace

nlohmann::json ComparisonReport::to_json() const {
    nlohmann::json j;
    j["config"] = config_echo;
    j["seeds"] = seeds;
    j["runs"] = nlohmann::json::array();
    for (const auto& run : runs) {
        nlohmann::json r;
        r["seed"] = run.seed;
        r["train_hash"] = hex64(run.train_hash);
        r["test_hash"] = hex64(run.test_hash);
        r["edge_epochs_to_converge"] = nlohmann::json::array();
        for (const auto& e : run.edge_epochs_to_converge)
            r["edge_epochs_to_converge"].push_back(opt_json(e));
        r["arms"] = nlohmann::json::array();
        for (const auto& arm : run.arms) r["arms"].push_back(arm_to_json(arm));
        j["runs"].push_back(std::move(r));
    }
    j["aggregates"] = nlohmann::json::array();
    for (const auto& agg : aggregates) j["aggregates"].push_back(aggregate_to_json(agg));
    j["relative"] = relative;
    return j;
}

ComparisonReport ComparisonReport::from_json(const nlohmann::json& j) {
    ComparisonReport report;
    report.config_echo = j.at("config");
    report.seeds = j.at("seeds").get<std::vector<uint64_t>>();
    for (const auto& r : j.at("runs")) {
        SeedRun run;
        run.seed = r.at("seed").get<uint64_t>();
        run.train_hash = parse_hex64(r.at("train_hash").get<std::string>());
        run.test_hash = parse_hex64(r.at("test_hash").get<std::string>());
        for (const auto& e : r.at("edge_epochs_to_converge"))
            run.edge_epochs_to_converge.push_back(
                e.is_null() ? std::optional<int>{} : std::optional<int>{e.get<int>()});
        for (const auto& a : r.at("arms")) run.arms.push_back(arm_from_json(a));
        report.runs.push_back(std::move(run));
    }
    for (const auto& a : j.at("aggregates"))
        report.aggregates.push_back(aggregate_from_json(a));
    report.relative = j.at("relative");
    return report;
}

nlohmann::json ComparisonReport::manifest_json() const {
    nlohmann::json j;
    j["format"] = "sls-comparison-manifest";
    j["version"] = 1;
    j["config"] = config_echo;
    j["seeds"] = seeds;
    j["runs"] = nlohmann::json::array();
    for (const auto& run : runs) {
        nlohmann::json r;
        r["seed"] = run.seed;
        r["train_hash"] = hex64(run.train_hash);
        r["test_hash"] = hex64(run.test_hash);
        r["arms"] = nlohmann::json::array();
        for (const auto& arm : run.arms) {
            nlohmann::json a;
            a["arm"] = arm.arm;
            a["shape"] = arm.shape;
            a["trace_hash"] = hex64(arm.trace_hash);
            a["val_data_hash"] = hex64(arm.val_data_hash);
            a["epochs_to_converge"] = opt_json(arm.epochs_to_converge);
            a["final_val_rmse"] = arm.final_val_rmse;
            a["accuracy"] = opt_json(arm.accuracy);
            a["bytes_exchanged"] = arm.bytes_exchanged;
            a["compute_mults_at_convergence"] = opt_json(arm.compute_mults_at_convergence);
            a["error"] = arm.error ? nlohmann::json(*arm.error) : nlohmann::json();
            r["arms"].push_back(std::move(a));
        }
        j["runs"].push_back(std::move(r));
    }
    return j;
}

void emit_report(const ComparisonReport& report, const std::filesystem::path& dir,
                 const std::vector<ReportFormat>& formats) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory: " + dir.string());

    {
        std::ofstream out(dir / "manifest.json");
        if (!out) throw IoError("cannot write manifest under " + dir.string());
        out << report.manifest_json().dump(2) << "\n";
    }

    for (ReportFormat fmt : formats) {
        if (fmt == ReportFormat::json) {
            std::ofstream out(dir / "report.json");
            if (!out) throw IoError("cannot write report.json under " + dir.string());
            out << report.to_json().dump(2) << "\n";
        } else if (fmt == ReportFormat::csv) {
            std::ofstream out(dir / "report.csv");
            if (!out) throw IoError("cannot write report.csv under " + dir.string());
            out.precision(17);
            out << "seed,arm,shape,converged,epochs_to_converge,final_train_rmse,"
                   "final_val_rmse,accuracy,fpr,bytes_exchanged,cost_per_epoch_mults,"
                   "compute_mults_at_convergence,fl_edge_lr,wall_sec\n";
            for (const auto& run : report.runs) {
                for (const auto& arm : run.arms) {
                    out << run.seed << "," << arm.arm << ",";
                    for (std::size_t i = 0; i < arm.shape.size(); ++i)
                        out << (i ? "x" : "") << arm.shape[i];
                    out << "," << (arm.converged ? "true" : "false") << ",";
                    if (arm.epochs_to_converge) out << *arm.epochs_to_converge;
                    out << "," << arm.final_train_rmse << "," << arm.final_val_rmse << ",";
                    if (arm.accuracy) out << *arm.accuracy;
                    out << ",";
                    if (arm.fpr) out << *arm.fpr;
                    out << "," << arm.bytes_exchanged << "," << arm.cost_per_epoch_mults
                        << ",";
                    if (arm.compute_mults_at_convergence)
                        out << *arm.compute_mults_at_convergence;
                    out << ",";
                    if (arm.fl_edge_lr) out << *arm.fl_edge_lr;
                    out << "," << arm.wall_sec << "\n";
                }
            }
        } else {
            std::ofstream out(dir / "plotdata.csv");
            if (!out) throw IoError("cannot write plotdata.csv under " + dir.string());
            out.precision(17);
            out << "arm,seed,epoch,train_rmse,val_rmse\n";
            for (const auto& run : report.runs) {
                for (const auto& arm : run.arms) {
                    for (std::size_t e = 0; e < arm.val_curve.size(); ++e) {
                        out << arm.arm << "," << run.seed << "," << (e + 1) << ",";
                        if (e < arm.train_curve.size()) out << arm.train_curve[e];
                        out << "," << arm.val_curve[e] << "\n";
                    }
                }
            }
        }
    }
}

} // namespace sls
