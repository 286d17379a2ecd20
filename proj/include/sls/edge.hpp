#pragma once

#include <optional>
#include <vector>

#include "sls/dataset.hpp"
#include "sls/detector.hpp"
#include "sls/train.hpp"

namespace sls {

struct EdgeTrainOptions {
    // Train each edge only on its normal-labeled rows (reconstruction models
    // should not learn to reproduce attacks). Ignored for unlabeled data.
    bool normal_only = false;
    // Worker threads for edge training; results are identical to serial.
    std::size_t threads = 1;
};

// The trained edge fleet: one model and one trace per partition block.
struct EdgeModelSet {
    std::vector<Network> models;
    std::vector<TrainTrace> traces;
    std::vector<TrainConfig> configs; // per-edge config echo (derived seeds)
    std::size_t m = 0;
};

// Algorithm: for every edge k, initialize a fresh autoencoder and train it on
// the edge's own train block, validating on its own test block. Edge k's seed
// is master_seed ^ k, so edges are reproducible and order-independent.
EdgeModelSet train_edges(const EdgePartition& partition,
                         const std::vector<std::size_t>& shape,
                         Activation hidden_activation,
                         const TrainConfig& config,
                         const EdgeTrainOptions& options = {});

struct EdgeEval {
    double rmse = 0.0;
    std::optional<double> accuracy;
    std::optional<DetectionReport> report;
    std::optional<Threshold> threshold;
};

// Reconstruction RMSE on the test set; when labels are present, also a
// detection accuracy at a percentile(0.99) threshold calibrated on the test
// set's own normal rows (a convenience diagnostic, not the full detector
// pipeline).
EdgeEval evaluate_edge(const Network& model, const Dataset& test);

} // namespace sls
