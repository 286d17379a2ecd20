#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "sls/dataset.hpp"
#include "sls/network.hpp"

namespace sls {

// Federated-averaging baseline: broadcast the global model, run local SGD at
// every client, aggregate by sample-weighted parameter averaging, repeat.
struct FLConfig {
    std::size_t clients = 4;
    std::size_t rounds = 50;
    std::size_t local_epochs = 20;
    double edge_lr = 1e-8;    // local SGD step size
    double central_lr = 0.005; // server step toward the aggregate:
                               // global += central_lr * (aggregate - global)
    double l2_reg = 1e-4;      // applied to weights and biases locally
    std::size_t batch_size = 32;
    std::vector<std::size_t> shape;
    Activation hidden_activation = Activation::tanh;
    Activation output_activation = Activation::identity;
    InitScheme init = InitScheme::uniform_pm1;
    uint64_t seed = 1;
    std::size_t threads = 1; // client updates per round; equals serial results

    void validate() const;
};

struct FLRound {
    std::size_t round = 0; // 1-based
    double global_val_rmse = 0.0;
    std::optional<double> global_val_accuracy;
    std::vector<double> client_final_loss;
    double wall_sec = 0.0;
};

struct FLTrace {
    std::vector<FLRound> rounds;
    std::size_t param_count = 0;
    uint64_t bytes_exchanged = 0; // 2 * params * rounds * clients * 8

    std::vector<double> val_losses() const;
    uint64_t hash() const; // excludes wall-clock
};

// Bit-identical copies of the global model for each client.
std::vector<Network> fl_broadcast(const Network& global, std::size_t n_clients);

// Local SGD on the client's own data per the FedAvg recurrence. Deterministic
// for a fixed seed. Returns the client's final full-data RMSE.
double fl_local_update(Network& client, const Matrix& data, double lr,
                       std::size_t local_epochs, double l2_reg,
                       std::size_t batch_size, uint64_t seed);

// Sample-weighted parameter average; weights are counts[i] / sum(counts).
Network fl_aggregate(const std::vector<Network>& clients,
                     const std::vector<std::size_t>& sample_counts);

struct FLResult {
    Network global;
    FLTrace trace;
};

// Full protocol: rounds of broadcast -> local update -> aggregate -> server
// step, evaluating on central validation data each round. Client k trains on
// client_train[k]. The per-round seed is shared by all clients so identical
// client datasets produce identical local updates.
FLResult fl_run(const std::vector<Matrix>& client_train, const Matrix& central_val,
                const std::optional<std::vector<int>>& central_val_labels,
                const FLConfig& cfg);

void write_fl_trace_csv(const FLTrace& trace, const std::filesystem::path& path);

} // namespace sls
