#include "sls/edge.hpp"

#include <algorithm>
#include <atomic>
#include <thread>

#include "sls/errors.hpp"

namespace sls {

namespace {

const Dataset& training_view(const Dataset& ds, bool normal_only, Dataset& storage) {
    if (normal_only && ds.labels) {
        storage = ds.normal_rows();
        if (storage.rows() == 0)
            throw DataError("edge block has no normal rows to train on");
        return storage;
    }
    return ds;
}

} // namespace

EdgeModelSet train_edges(const EdgePartition& partition,
                         const std::vector<std::size_t>& shape,
                         Activation hidden_activation,
                         const TrainConfig& config,
                         const EdgeTrainOptions& options) {
    if (partition.edges.empty()) throw PartitionError("no edge blocks to train on");
    if (shape.empty() || shape.front() != partition.edges.front().train.dim())
        throw ShapeError("edge shape input width " +
                         std::to_string(shape.empty() ? 0 : shape.front()) +
                         " != feature count " +
                         std::to_string(partition.edges.front().train.dim()));

    const std::size_t m = partition.edges.size();
    EdgeModelSet set;
    set.m = m;
    set.models.resize(m);
    set.traces.resize(m);
    set.configs.resize(m);

    std::vector<std::exception_ptr> errors(m);
    auto train_one = [&](std::size_t k) {
        try {
            TrainConfig edge_cfg = config;
            edge_cfg.seed = config.seed ^ static_cast<uint64_t>(k + 1); // edge k is 1-based
            Dataset train_storage, test_storage;
            const Dataset& train_ds =
                training_view(partition.edges[k].train, options.normal_only, train_storage);
            const Dataset& test_ds =
                training_view(partition.edges[k].test, options.normal_only, test_storage);

            Network net = init_network(shape, hidden_activation, edge_cfg);
            try {
                set.traces[k] = train(net, train_ds.features, test_ds.features, edge_cfg);
            } catch (const DivergedError& e) {
                throw DivergedError("edge " + std::to_string(k + 1) + ": " + e.what(),
                                    e.epoch);
            }
            set.models[k] = std::move(net);
            set.configs[k] = edge_cfg;
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };

    const std::size_t threads = std::max<std::size_t>(1, options.threads);
    if (threads == 1 || m == 1) {
        for (std::size_t k = 0; k < m; ++k) train_one(k);
    } else {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (std::size_t t = 0; t < std::min(threads, m); ++t)
            pool.emplace_back([&] {
                for (std::size_t k = next.fetch_add(1); k < m; k = next.fetch_add(1))
                    train_one(k);
            });
        for (auto& th : pool) th.join();
    }
    for (auto& err : errors)
        if (err) std::rethrow_exception(err);
    return set;
}

EdgeEval evaluate_edge(const Network& model, const Dataset& test) {
    if (test.dim() != model.input_dim())
        throw ShapeError("test set feature count does not match model input width");

    EdgeEval eval;
    const Matrix recon = forward(model, test.features);
    eval.rmse = rmse_loss(recon, test.features);

    if (test.labels) {
        const auto scores = score_rows(model, test.features);
        std::vector<double> normal_scores;
        for (std::size_t r = 0; r < scores.size(); ++r)
            if ((*test.labels)[r] == 0) normal_scores.push_back(scores[r]);
        if (!normal_scores.empty()) {
            const auto method = normal_scores.size() >= 20 ? CalibrationMethod::percentile
                                                           : CalibrationMethod::max_normal;
            eval.threshold = calibrate(normal_scores, method, 0.99);
            eval.report = classify(scores, eval.threshold->value, *test.labels);
            eval.accuracy = eval.report->accuracy;
        }
    }
    return eval;
}

} // namespace sls
