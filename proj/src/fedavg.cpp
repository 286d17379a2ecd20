#include "sls/fedavg.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "sls/detector.hpp"
#include "sls/errors.hpp"
#include "sls/hash.hpp"
#include "sls/rng.hpp"
#include "sls/train.hpp"

namespace sls {

namespace {

constexpr uint64_t kRoundTag = 0x464C524EULL;

double now_sec() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

} // namespace

void FLConfig::validate() const {
    if (clients < 1) throw ConfigError("fl: clients must be >= 1");
    if (rounds < 1) throw ConfigError("fl: rounds must be >= 1");
    if (local_epochs < 1) throw ConfigError("fl: local_epochs must be >= 1");
    if (!(edge_lr >= 0.0) || !std::isfinite(edge_lr))
        throw ConfigError("fl: edge_lr must be finite and >= 0");
    if (!(central_lr > 0.0) || !std::isfinite(central_lr))
        throw ConfigError("fl: central_lr must be finite and > 0");
    if (l2_reg < 0.0) throw ConfigError("fl: l2_reg must be >= 0");
    if (shape.size() < 3) throw ConfigError("fl: model shape needs >= 3 widths");
}

std::vector<double> FLTrace::val_losses() const {
    std::vector<double> v;
    v.reserve(rounds.size());
    for (const auto& r : rounds) v.push_back(r.global_val_rmse);
    return v;
}

uint64_t FLTrace::hash() const {
    Fnv64 h;
    h.update_u64(param_count);
    h.update_u64(bytes_exchanged);
    for (const auto& r : rounds) {
        h.update_u64(r.round);
        h.update_double(r.global_val_rmse);
        h.update_double(r.global_val_accuracy ? *r.global_val_accuracy : -1.0);
        h.update_doubles(r.client_final_loss);
    }
    return h.value();
}

std::vector<Network> fl_broadcast(const Network& global, std::size_t n_clients) {
    global.validate();
    std::vector<Network> copies;
    copies.reserve(n_clients);
    for (std::size_t i = 0; i < n_clients; ++i) copies.push_back(global);
    return copies;
}

double fl_local_update(Network& client, const Matrix& data, double lr,
                       std::size_t local_epochs, double l2_reg,
                       std::size_t batch_size, uint64_t seed) {
    if (local_epochs < 1) throw ConfigError("fl_local_update: local_epochs must be >= 1");
    const auto losses = train_sgd(client, data, static_cast<int>(local_epochs), lr,
                                  l2_reg, batch_size, seed);
    return losses.back();
}

Network fl_aggregate(const std::vector<Network>& clients,
                     const std::vector<std::size_t>& sample_counts) {
    if (clients.empty()) throw ConfigError("fl_aggregate: no clients");
    if (sample_counts.size() != clients.size())
        throw ConfigError("fl_aggregate: one sample count per client required");

    const auto ref_shape = clients.front().shape();
    double total = 0.0;
    for (std::size_t n : sample_counts) total += static_cast<double>(n);
    if (total <= 0.0) throw ConfigError("fl_aggregate: zero total samples");

    for (const auto& c : clients)
        if (c.shape() != ref_shape)
            throw ShapeError("fl_aggregate: client model shapes differ");

    Network agg = clients.front();
    for (auto& layer : agg.layers) {
        std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
        std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
    }
    for (std::size_t c = 0; c < clients.size(); ++c) {
        const double w = static_cast<double>(sample_counts[c]) / total;
        for (std::size_t l = 0; l < agg.layers.size(); ++l) {
            const auto& src = clients[c].layers[l];
            auto& dst = agg.layers[l];
            for (std::size_t k = 0; k < dst.weights.size(); ++k)
                dst.weights[k] += w * src.weights[k];
            for (std::size_t k = 0; k < dst.biases.size(); ++k)
                dst.biases[k] += w * src.biases[k];
        }
    }
    agg.touch();
    return agg;
}

FLResult fl_run(const std::vector<Matrix>& client_train, const Matrix& central_val,
                const std::optional<std::vector<int>>& central_val_labels,
                const FLConfig& cfg) {
    cfg.validate();
    if (client_train.size() != cfg.clients)
        throw ConfigError("fl_run: expected " + std::to_string(cfg.clients) +
                          " client blocks, got " + std::to_string(client_train.size()));
    for (const auto& block : client_train)
        if (block.rows == 0) throw DataError("fl_run: a client block is empty");
    if (central_val.rows == 0) throw DataError("fl_run: empty central validation data");

    TrainConfig init_cfg;
    init_cfg.seed = cfg.seed;
    init_cfg.init = cfg.init;
    Network global = init_network(cfg.shape, cfg.hidden_activation, init_cfg,
                                  cfg.output_activation);

    std::vector<std::size_t> counts;
    counts.reserve(cfg.clients);
    for (const auto& block : client_train) counts.push_back(block.rows);

    FLResult result;
    result.trace.param_count = global.param_count();

    for (std::size_t round = 1; round <= cfg.rounds; ++round) {
        const double t0 = now_sec();
        // one shared stream per round: clients with identical data stay identical
        const uint64_t round_seed = derive_seed(cfg.seed, kRoundTag + round);

        auto clients = fl_broadcast(global, cfg.clients);
        std::vector<double> final_losses(cfg.clients, 0.0);
        std::vector<std::exception_ptr> errors(cfg.clients);

        auto update_one = [&](std::size_t c) {
            try {
                final_losses[c] =
                    fl_local_update(clients[c], client_train[c], cfg.edge_lr,
                                    cfg.local_epochs, cfg.l2_reg, cfg.batch_size,
                                    round_seed);
            } catch (const DivergedError& e) {
                errors[c] = std::make_exception_ptr(DivergedError(
                    "fl client " + std::to_string(c + 1) + " diverged in round " +
                        std::to_string(round) + ": " + e.what(),
                    e.epoch));
            } catch (...) {
                errors[c] = std::current_exception();
            }
        };

        if (cfg.threads <= 1 || cfg.clients == 1) {
            for (std::size_t c = 0; c < cfg.clients; ++c) update_one(c);
        } else {
            std::vector<std::thread> pool;
            std::atomic<std::size_t> next{0};
            for (std::size_t t = 0; t < std::min(cfg.threads, cfg.clients); ++t)
                pool.emplace_back([&] {
                    for (std::size_t c = next.fetch_add(1); c < cfg.clients;
                         c = next.fetch_add(1))
                        update_one(c);
                });
            for (auto& th : pool) th.join();
        }
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);

        Network aggregate = fl_aggregate(clients, counts);
        // server step toward the aggregate
        for (std::size_t l = 0; l < global.layers.size(); ++l) {
            auto& g = global.layers[l];
            const auto& a = aggregate.layers[l];
            for (std::size_t k = 0; k < g.weights.size(); ++k)
                g.weights[k] += cfg.central_lr * (a.weights[k] - g.weights[k]);
            for (std::size_t k = 0; k < g.biases.size(); ++k)
                g.biases[k] += cfg.central_lr * (a.biases[k] - g.biases[k]);
        }
        global.touch();

        FLRound rec;
        rec.round = round;
        rec.global_val_rmse = rmse_loss(forward(global, central_val), central_val);
        if (!std::isfinite(rec.global_val_rmse))
            throw DivergedError("fl global model diverged in round " +
                                    std::to_string(round),
                                static_cast<int>(round));
        if (central_val_labels) {
            const auto scores = score_rows(global, central_val);
            std::vector<double> normal_scores;
            for (std::size_t i = 0; i < scores.size(); ++i)
                if ((*central_val_labels)[i] == 0) normal_scores.push_back(scores[i]);
            if (normal_scores.size() >= 20) {
                const auto th = calibrate(normal_scores, CalibrationMethod::percentile, 0.99);
                rec.global_val_accuracy =
                    classify(scores, th.value, *central_val_labels).accuracy;
            }
        }
        rec.client_final_loss = std::move(final_losses);
        rec.wall_sec = now_sec() - t0;
        result.trace.rounds.push_back(std::move(rec));
    }

    result.trace.bytes_exchanged = 2ULL * result.trace.param_count * cfg.rounds *
                                   cfg.clients * sizeof(double);
    result.global = std::move(global);
    return result;
}

void write_fl_trace_csv(const FLTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open FL trace for writing: " + path.string());
    out.precision(17);
    const std::size_t n_clients =
        trace.rounds.empty() ? 0 : trace.rounds.front().client_final_loss.size();
    out << "round,global_val_rmse,global_val_accuracy";
    for (std::size_t c = 1; c <= n_clients; ++c) out << ",client" << c << "_loss";
    out << "\n";
    for (const auto& r : trace.rounds) {
        out << r.round << "," << r.global_val_rmse << ",";
        if (r.global_val_accuracy) out << *r.global_val_accuracy;
        for (double loss : r.client_final_loss) out << "," << loss;
        out << "\n";
    }
    if (!out) throw IoError("FL trace write failed: " + path.string());
}

} // namespace sls
