#include "sls/dataset.hpp"

#include <cmath>

#include "sls/errors.hpp"
#include "sls/hash.hpp"
#include "sls/rng.hpp"

namespace sls {

void Dataset::validate() const {
    if (!features.all_finite())
        throw DataError("dataset contains non-finite feature values");
    if (labels && labels->size() != features.rows)
        throw DataError("label count " + std::to_string(labels->size()) +
                        " != row count " + std::to_string(features.rows));
}

uint64_t Dataset::content_hash() const {
    Fnv64 h;
    h.update_u64(features.rows);
    h.update_u64(features.cols);
    h.update_doubles(features.data);
    if (labels) {
        for (int v : *labels) h.update_u64(static_cast<uint64_t>(v));
    }
    return h.value();
}

Dataset Dataset::normal_rows() const {
    if (!labels) return *this;
    std::vector<std::size_t> idx;
    for (std::size_t r = 0; r < rows(); ++r)
        if ((*labels)[r] == 0) idx.push_back(r);
    return subset_rows(*this, idx);
}

Dataset subset_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.features = take_rows(ds.features, idx);
    out.feature_names = ds.feature_names;
    out.normalization = ds.normalization;
    if (ds.labels) {
        std::vector<int> labels;
        labels.reserve(idx.size());
        for (std::size_t r : idx) labels.push_back((*ds.labels)[r]);
        out.labels = std::move(labels);
    }
    return out;
}

std::pair<Dataset, NormalizationRecord> normalize(const Dataset& ds, NormMethod method) {
    if (ds.rows() < 2) throw DataError("normalize requires at least 2 rows");
    ds.validate();

    const std::size_t dim = ds.dim();
    NormalizationRecord rec;
    rec.method = method;
    rec.a.resize(dim);
    rec.b.resize(dim);
    rec.constant.assign(dim, false);

    for (std::size_t c = 0; c < dim; ++c) {
        if (method == NormMethod::minmax) {
            double lo = ds.features.at(0, c), hi = lo;
            for (std::size_t r = 1; r < ds.rows(); ++r) {
                const double v = ds.features.at(r, c);
                if (v < lo) lo = v;
                if (v > hi) hi = v;
            }
            rec.a[c] = lo;
            rec.b[c] = hi;
            rec.constant[c] = (hi == lo);
        } else {
            double mean = 0.0;
            for (std::size_t r = 0; r < ds.rows(); ++r) mean += ds.features.at(r, c);
            mean /= static_cast<double>(ds.rows());
            double var = 0.0;
            for (std::size_t r = 0; r < ds.rows(); ++r) {
                const double d = ds.features.at(r, c) - mean;
                var += d * d;
            }
            var /= static_cast<double>(ds.rows());
            rec.a[c] = mean;
            rec.b[c] = std::sqrt(var);
            rec.constant[c] = (rec.b[c] == 0.0);
        }
    }
    return {apply_normalization(ds, rec), rec};
}

Dataset apply_normalization(const Dataset& ds, const NormalizationRecord& record) {
    if (record.a.size() != ds.dim())
        throw ShapeError("normalization record dimension mismatch");
    Dataset out = ds;
    for (std::size_t c = 0; c < ds.dim(); ++c) {
        for (std::size_t r = 0; r < ds.rows(); ++r) {
            double& v = out.features.at(r, c);
            if (record.constant[c]) {
                v = 0.0;
            } else if (record.method == NormMethod::minmax) {
                v = (v - record.a[c]) / (record.b[c] - record.a[c]);
            } else {
                v = (v - record.a[c]) / record.b[c];
            }
        }
    }
    out.normalization = record;
    return out;
}

SplitPair split_80_20(const Dataset& ds, uint64_t seed, bool shuffle) {
    if (ds.rows() < 5) throw DataError("split_80_20 requires at least 5 rows");
    ds.validate();

    std::vector<std::size_t> order(ds.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (shuffle) {
        Rng rng(derive_seed(seed, 0x53504C4954ULL)); // split stream
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[rng.below(i)]);
    }

    const std::size_t n_test = ds.rows() / 5; // floor(0.2*n)
    const std::size_t n_train = ds.rows() - n_test;

    SplitPair pair;
    pair.train = subset_rows(ds, {order.begin(), order.begin() + static_cast<long>(n_train)});
    pair.test = subset_rows(ds, {order.begin() + static_cast<long>(n_train), order.end()});
    return pair;
}

EdgePartition partition_edges(const SplitPair& split, std::size_t m,
                              std::size_t s_train, std::size_t s_test) {
    if (m == 0) throw PartitionError("partition requires m >= 1 edges");
    if (m * s_train > split.train.rows())
        throw PartitionError("partition needs " + std::to_string(m * s_train) +
                             " train rows but only " + std::to_string(split.train.rows()) +
                             " are available");
    if (m * s_test > split.test.rows())
        throw PartitionError("partition needs " + std::to_string(m * s_test) +
                             " test rows but only " + std::to_string(split.test.rows()) +
                             " are available");

    auto block = [](const Dataset& ds, std::size_t begin, std::size_t end) {
        std::vector<std::size_t> idx;
        idx.reserve(end - begin);
        for (std::size_t r = begin; r < end; ++r) idx.push_back(r);
        return subset_rows(ds, idx);
    };

    EdgePartition part;
    part.m = m;
    part.s_train = s_train;
    part.s_test = s_test;
    for (std::size_t k = 0; k < m; ++k) {
        SplitPair edge;
        edge.train = block(split.train, k * s_train, (k + 1) * s_train);
        edge.test = block(split.test, k * s_test, (k + 1) * s_test);
        part.edges.push_back(std::move(edge));
    }
    part.central.train = block(split.train, m * s_train, split.train.rows());
    part.central.test = block(split.test, m * s_test, split.test.rows());
    return part;
}

EdgePartition partition_from_regions(const Dataset& ds, std::size_t m, uint64_t seed) {
    if (m == 0) throw PartitionError("partition requires m >= 1 edges");
    const std::size_t regions = m + 1; // edges plus central
    if (ds.rows() < regions * 5)
        throw PartitionError("region partition needs at least " +
                             std::to_string(regions * 5) + " rows");

    const std::size_t per_region = ds.rows() / regions;
    EdgePartition part;
    part.m = m;

    for (std::size_t g = 0; g < regions; ++g) {
        const std::size_t begin = g * per_region;
        const std::size_t end = (g + 1 == regions) ? ds.rows() : begin + per_region;
        std::vector<std::size_t> idx;
        for (std::size_t r = begin; r < end; ++r) idx.push_back(r);
        SplitPair pair = split_80_20(subset_rows(ds, idx), derive_seed(seed, g));
        if (g < m) {
            part.edges.push_back(std::move(pair));
        } else {
            part.central = std::move(pair);
        }
    }
    part.s_train = part.edges.front().train.rows();
    part.s_test = part.edges.front().test.rows();
    return part;
}

} // namespace sls
