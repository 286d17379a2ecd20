#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sls/config_file.hpp"
#include "sls/cost.hpp"
#include "sls/csv.hpp"
#include "sls/detector.hpp"
#include "sls/edge.hpp"
#include "sls/fedavg.hpp"
#include "sls/synthesis.hpp"
#include "sls/synthetic.hpp"

#include <json.hpp>

namespace sls {

// An arm "converges" at the first epoch whose validation loss stays within
// (1+delta) of the run's own minimum for `patience` consecutive epochs.
struct ConvergenceCriterion {
    double delta = 0.05;
    int patience = 3;

    void validate() const;
};

// 1-based epoch, or nullopt when no qualifying window exists.
std::optional<int> epochs_to_converge(const std::vector<double>& val_losses,
                                      const ConvergenceCriterion& criterion);

// Everything one experiment needs, assembled from a ConfigFile.
struct ExperimentConfig {
    // data
    std::string data_source = "synthetic"; // synthetic | csv
    SynthConfig synth;
    std::filesystem::path csv_path;
    std::filesystem::path schema_path;
    std::optional<NormMethod> norm = NormMethod::minmax;
    bool split_shuffle = true;
    bool partition_by_region = false;

    // partition
    std::size_t edges = 2;
    std::size_t edge_train_rows = 0; // 0 = auto: train_rows / (edges + 1)
    std::size_t edge_test_rows = 0;  // 0 = auto: test_rows / (edges + 1)

    // model
    std::vector<std::size_t> edge_hidden = {60, 60, 60, 60, 60, 60, 60};
    Activation hidden_activation = Activation::tanh;
    Activation output_activation = Activation::identity;

    // training
    TrainConfig train; // seed is overridden per run
    int fine_tune_epochs = -1;     // -1 = same as train.epochs
    double fine_tune_lr = -1.0;    // -1 = same as train.learning_rate
    bool normal_only = true;       // train on normal rows when labels exist

    // synthesis
    std::vector<std::string> plans = {"all"};
    SynthStrategy strategy = SynthStrategy::stack;
    GlueInit glue_init = GlueInit::uniform_scaled;
    double cross_scale = 0.0;
    std::vector<std::size_t> output_head;

    // detection
    CalibrationMethod detect_method = CalibrationMethod::percentile;
    double detect_percentile = 0.99;

    // federated baseline
    bool fl_enabled = false;
    FLConfig fl;
    std::vector<double> fl_lr_sweep; // empty = just fl.edge_lr

    // bench
    ConvergenceCriterion criterion;
    std::size_t seeds = 1;
    uint64_t master_seed = 1;
    std::size_t threads = 1;

    static ExperimentConfig from_config(const ConfigFile& file);
    nlohmann::json echo_json() const; // canonical config echo for manifests
};

// Data prepared for one run: normalized split plus the edge partition and the
// content hashes that let reports prove paired arms saw identical inputs.
struct PreparedData {
    SplitPair split;
    EdgePartition partition;
    nlohmann::json manifest;
    uint64_t train_hash = 0;
    uint64_t test_hash = 0;
    std::vector<uint64_t> edge_train_hashes;
    uint64_t central_train_hash = 0;
    uint64_t central_val_hash = 0;
};

PreparedData prepare_data(const ExperimentConfig& cfg, uint64_t run_seed);

struct ArmResult {
    std::string arm; // fresh_central | synthesized:<plan> | fl
    std::vector<std::size_t> shape;
    bool converged = false;
    std::optional<int> epochs_to_converge;
    double final_train_rmse = 0.0;
    double final_val_rmse = 0.0;
    std::optional<double> accuracy; // held-out detection accuracy
    std::optional<double> fpr;
    uint64_t bytes_exchanged = 0;
    uint64_t cost_per_epoch_mults = 0;
    std::optional<uint64_t> compute_mults_at_convergence;
    uint64_t trace_hash = 0;
    uint64_t val_data_hash = 0;
    double wall_sec = 0.0;
    std::vector<double> train_curve;
    std::vector<double> val_curve;
    std::optional<double> fl_edge_lr; // the swept learning rate FL settled on
    std::optional<std::string> error; // set when this arm failed
};

struct SeedRun {
    uint64_t seed = 0;
    uint64_t train_hash = 0;
    uint64_t test_hash = 0;
    std::vector<std::optional<int>> edge_epochs_to_converge;
    std::vector<ArmResult> arms;
};

struct ArmAggregate {
    std::string arm;
    std::size_t n_seeds = 0;
    std::size_t n_converged = 0;
    std::optional<double> median_epochs; // not-converged counts as +inf
    std::optional<double> iqr_epochs;    // absent with a single seed
    std::optional<double> median_accuracy;
    std::optional<double> median_fpr;
    double median_final_val_rmse = 0.0;
    std::optional<double> median_compute_mults;
    uint64_t bytes_exchanged = 0; // identical across seeds by construction
};

struct ComparisonReport {
    nlohmann::json config_echo;
    std::vector<uint64_t> seeds;
    std::vector<SeedRun> runs;
    std::vector<ArmAggregate> aggregates;
    nlohmann::json relative; // relative improvements between arms

    nlohmann::json to_json() const;        // full report, includes wall-clock
    nlohmann::json manifest_json() const;  // deterministic subset, no wall-clock
    static ComparisonReport from_json(const nlohmann::json& j);

    const ArmAggregate* find_aggregate(const std::string& arm) const;
};

// Run every arm (edges -> analysis -> synthesis per plan -> fine-tune, a
// fresh central model of the primary plan's shape, and optionally FedAvg)
// over `cfg.seeds` consecutive run seeds, on identical partitions per seed.
ComparisonReport run_comparison(const ExperimentConfig& cfg);

enum class ReportFormat { json, csv, plotdata };

// Write report files under `dir`: report.json / report.csv / plotdata.csv,
// plus manifest.json alongside every emission.
void emit_report(const ComparisonReport& report, const std::filesystem::path& dir,
                 const std::vector<ReportFormat>& formats);

} // namespace sls
