#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sls/network.hpp"

namespace sls {

struct EpochRecord {
    int epoch = 0; // 1-based training epoch
    double train_rmse = 0.0;
    double val_rmse = 0.0;
    LayerWeightSums sums;
    double wall_sec = 0.0; // not part of the trace hash
};

// Per-epoch record of a training run: losses plus per-layer weight sums.
// The initial snapshot (before any update) is kept separately and exported
// as epoch 0.
struct TrainTrace {
    std::vector<std::size_t> shape;
    uint64_t seed = 0;
    LayerWeightSums initial_sums;
    std::vector<EpochRecord> epochs;

    std::vector<double> val_losses() const;
    std::vector<double> train_losses() const;
    double total_wall_sec() const;
    uint64_t hash() const; // excludes wall-clock fields
};

// Train `net` in place for exactly config.epochs epochs of mini-batch Adam.
// Targets equal inputs (reconstruction). Batch order is drawn from a stream
// derived from config.seed, so a fixed seed reproduces the trace bit for bit.
// Throws DivergedError naming the epoch if a loss becomes non-finite.
TrainTrace train(Network& net, const Matrix& train_data, const Matrix& val_data,
                 const TrainConfig& config);

// Plain mini-batch SGD on the reconstruction loss; the local-update rule of
// the federated baseline. `l2` is applied to weights and biases.
// Returns the full-dataset RMSE measured after each epoch.
std::vector<double> train_sgd(Network& net, const Matrix& data, int epochs,
                              double lr, double l2, std::size_t batch_size,
                              uint64_t seed);

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path);
TrainTrace read_trace_csv(const std::filesystem::path& path);

} // namespace sls
