#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sls/matrix.hpp"

namespace sls {

enum class NormMethod { minmax, zscore };

// Per-feature transform fitted on one dataset and reusable on unseen data.
// minmax stores (min, max); zscore stores (mean, std). Constant features map
// to 0 and are flagged.
struct NormalizationRecord {
    NormMethod method = NormMethod::minmax;
    std::vector<double> a; // min or mean
    std::vector<double> b; // max or std
    std::vector<bool> constant;
};

struct Dataset {
    Matrix features;
    std::optional<std::vector<int>> labels; // 0 normal, 1 attack
    std::vector<std::string> feature_names;
    std::optional<NormalizationRecord> normalization; // set once normalized

    std::size_t rows() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    void validate() const; // finiteness + label length
    uint64_t content_hash() const;

    // Rows with label 0; the dataset unchanged when unlabeled.
    Dataset normal_rows() const;
};

struct SplitPair {
    Dataset train;
    Dataset test;
};

// Per-edge train/test blocks plus the leftover central reserve.
struct EdgePartition {
    std::vector<SplitPair> edges;
    SplitPair central; // rows beyond the edge blocks; may be empty
    std::size_t m = 0;
    std::size_t s_train = 0;
    std::size_t s_test = 0;
};

// Fit a normalization on `ds` and return the transformed dataset; the fitted
// record is embedded in the result and also returned for reuse.
std::pair<Dataset, NormalizationRecord> normalize(const Dataset& ds, NormMethod method);

// Apply a previously fitted record to unseen data.
Dataset apply_normalization(const Dataset& ds, const NormalizationRecord& record);

// Deterministic shuffle by seed, then first 80% train / last 20% test
// (test size floors). Set shuffle=false to split in row order.
SplitPair split_80_20(const Dataset& ds, uint64_t seed, bool shuffle = true);

// Consecutive non-overlapping blocks: edge k takes train rows
// [(k-1)*s_train, k*s_train) and test rows [(k-1)*s_test, k*s_test);
// whatever remains becomes the central reserve.
EdgePartition partition_edges(const SplitPair& split, std::size_t m,
                              std::size_t s_train, std::size_t s_test);

// Heterogeneous alternative: the dataset is treated as m+1 consecutive region
// blocks (edges then central, as laid out by the synthetic generator); each
// region is split 80:20 on its own.
EdgePartition partition_from_regions(const Dataset& ds, std::size_t m, uint64_t seed);

Dataset subset_rows(const Dataset& ds, const std::vector<std::size_t>& idx);

} // namespace sls
