#include "sls/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sls/errors.hpp"
#include "sls/hash.hpp"
#include "sls/rng.hpp"

namespace sls {

namespace {

constexpr uint64_t kShuffleTag = 0x53485546464C45ULL; // stream tag for batch order

double now_sec() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

void check_training_inputs(const Network& net, const Matrix& train_data,
                           const Matrix& val_data) {
    if (train_data.rows == 0 || val_data.rows == 0)
        throw DataError("training requires nonempty train and validation data");
    if (train_data.cols != net.input_dim() || val_data.cols != net.input_dim())
        throw ShapeError("data feature count " + std::to_string(train_data.cols) +
                         " does not match network input width " +
                         std::to_string(net.input_dim()));
}

std::vector<std::size_t> batch_starts(std::size_t rows, std::size_t batch) {
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s < rows; s += batch) starts.push_back(s);
    return starts;
}

} // namespace

std::vector<double> TrainTrace::val_losses() const {
    std::vector<double> v;
    v.reserve(epochs.size());
    for (const auto& e : epochs) v.push_back(e.val_rmse);
    return v;
}

std::vector<double> TrainTrace::train_losses() const {
    std::vector<double> v;
    v.reserve(epochs.size());
    for (const auto& e : epochs) v.push_back(e.train_rmse);
    return v;
}

double TrainTrace::total_wall_sec() const {
    double t = 0.0;
    for (const auto& e : epochs) t += e.wall_sec;
    return t;
}

uint64_t TrainTrace::hash() const {
    Fnv64 h;
    for (std::size_t w : shape) h.update_u64(w);
    h.update_u64(seed);
    h.update_doubles(initial_sums.signed_sum);
    h.update_doubles(initial_sums.l1_sum);
    for (const auto& e : epochs) {
        h.update_u64(static_cast<uint64_t>(e.epoch));
        h.update_double(e.train_rmse);
        h.update_double(e.val_rmse);
        h.update_doubles(e.sums.signed_sum);
        h.update_doubles(e.sums.l1_sum);
    }
    return h.value();
}

TrainTrace train(Network& net, const Matrix& train_data, const Matrix& val_data,
                 const TrainConfig& config) {
    config.validate();
    net.validate();
    check_training_inputs(net, train_data, val_data);

    const std::size_t rows = train_data.rows;
    const std::size_t batch =
        (config.batch_size == 0 || config.batch_size > rows) ? rows : config.batch_size;

    TrainTrace trace;
    trace.shape = net.shape();
    trace.seed = config.seed;
    trace.initial_sums = layer_weight_sums(net);

    AdamState state = AdamState::zeros_like(net);
    Rng shuffle_rng(derive_seed(config.seed, kShuffleTag));

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const double t0 = now_sec();
        const auto order = shuffle_rng.permutation(rows);
        for (std::size_t start : batch_starts(rows, batch)) {
            const std::size_t end = std::min(start + batch, rows);
            Matrix xb = take_rows(train_data,
                                  {order.data() + start, end - start});
            ForwardCache cache = forward_cached(net, xb);
            Gradients grads = backward(net, cache, xb, config.lambda);
            adam_step(net, grads, state, config);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_rmse = rmse_loss(forward(net, train_data), train_data);
        rec.val_rmse = rmse_loss(forward(net, val_data), val_data);
        rec.sums = layer_weight_sums(net);
        rec.wall_sec = now_sec() - t0;
        if (!std::isfinite(rec.train_rmse) || !std::isfinite(rec.val_rmse))
            throw DivergedError("training diverged at epoch " + std::to_string(epoch),
                                epoch);
        trace.epochs.push_back(std::move(rec));
    }
    return trace;
}

std::vector<double> train_sgd(Network& net, const Matrix& data, int epochs,
                              double lr, double l2, std::size_t batch_size,
                              uint64_t seed) {
    if (epochs < 1) throw ConfigError("train_sgd: epochs must be >= 1");
    if (data.rows == 0) throw DataError("train_sgd: empty data");
    if (data.cols != net.input_dim())
        throw ShapeError("train_sgd: data does not match network input width");

    const std::size_t rows = data.rows;
    const std::size_t batch = (batch_size == 0 || batch_size > rows) ? rows : batch_size;
    Rng shuffle_rng(derive_seed(seed, kShuffleTag));

    std::vector<double> epoch_rmse;
    epoch_rmse.reserve(static_cast<std::size_t>(epochs));
    for (int epoch = 1; epoch <= epochs; ++epoch) {
        const auto order = shuffle_rng.permutation(rows);
        for (std::size_t start = 0; start < rows; start += batch) {
            const std::size_t end = std::min(start + batch, rows);
            Matrix xb = take_rows(data, {order.data() + start, end - start});
            ForwardCache cache = forward_cached(net, xb);
            Gradients grads = backward(net, cache, xb, l2);
            if (l2 != 0.0) {
                for (std::size_t l = 0; l < net.layers.size(); ++l)
                    for (std::size_t k = 0; k < net.layers[l].biases.size(); ++k)
                        grads.bias_grads[l][k] += l2 * net.layers[l].biases[k];
            }
            sgd_step(net, grads, lr);
        }
        const double loss = rmse_loss(forward(net, data), data);
        if (!std::isfinite(loss))
            throw DivergedError("sgd training diverged at epoch " + std::to_string(epoch),
                                epoch);
        epoch_rmse.push_back(loss);
    }
    return epoch_rmse;
}

void write_trace_csv(const TrainTrace& trace, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open trace file for writing: " + path.string());
    const std::size_t n_layers = trace.initial_sums.signed_sum.size();

    out << "epoch,train_rmse,val_rmse";
    for (std::size_t l = 1; l <= n_layers; ++l) out << ",signed_sum_" << l;
    for (std::size_t l = 1; l <= n_layers; ++l) out << ",l1_sum_" << l;
    out << "\n";

    out.precision(17);
    auto write_sums = [&](const LayerWeightSums& sums) {
        for (double v : sums.signed_sum) out << "," << v;
        for (double v : sums.l1_sum) out << "," << v;
    };
    out << "0,,";
    write_sums(trace.initial_sums);
    out << "\n";
    for (const auto& e : trace.epochs) {
        out << e.epoch << "," << e.train_rmse << "," << e.val_rmse;
        write_sums(e.sums);
        out << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

TrainTrace read_trace_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace file: " + path.string());

    std::string header;
    if (!std::getline(in, header)) throw IoError("empty trace file: " + path.string());
    std::size_t n_layers = 0;
    {
        std::stringstream ss(header);
        std::string col;
        while (std::getline(ss, col, ','))
            if (col.rfind("signed_sum_", 0) == 0) ++n_layers;
    }
    if (n_layers == 0) throw IoError("trace file has no layer-sum columns: " + path.string());

    TrainTrace trace;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        // a trailing empty cell is dropped by getline; pad
        while (cells.size() < 3 + 2 * n_layers) cells.emplace_back();

        const int epoch = std::stoi(cells[0]);
        LayerWeightSums sums;
        for (std::size_t l = 0; l < n_layers; ++l)
            sums.signed_sum.push_back(std::stod(cells[3 + l]));
        for (std::size_t l = 0; l < n_layers; ++l)
            sums.l1_sum.push_back(std::stod(cells[3 + n_layers + l]));

        if (epoch == 0) {
            trace.initial_sums = std::move(sums);
        } else {
            EpochRecord rec;
            rec.epoch = epoch;
            rec.train_rmse = cells[1].empty() ? 0.0 : std::stod(cells[1]);
            rec.val_rmse = cells[2].empty() ? 0.0 : std::stod(cells[2]);
            rec.sums = std::move(sums);
            trace.epochs.push_back(std::move(rec));
        }
    }
    return trace;
}

} // namespace sls
