#pragma once

#include <stdexcept>
#include <string>

namespace sls {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad user-supplied configuration (shapes, hyperparameters, policies).
struct ConfigError : Error {
    using Error::Error;
};

// Dimension mismatch between tensors/layers/datasets.
struct ShapeError : Error {
    using Error::Error;
};

// Malformed schema file or schema/CSV disagreement.
struct SchemaError : Error {
    using Error::Error;
};

// Unusable dataset contents (empty, non-finite, label mismatch).
struct DataError : Error {
    using Error::Error;
};

// Edge partitioning cannot be satisfied by the available rows.
struct PartitionError : Error {
    using Error::Error;
};

// A synthesis plan that cannot be realized.
struct SynthesisError : Error {
    using Error::Error;
};

// Training produced a non-finite loss.
struct DivergedError : Error {
    DivergedError(const std::string& what, int epoch_num)
        : Error(what), epoch(epoch_num) {}
    int epoch;
};

// API contract violated by the caller (e.g. stale forward cache).
struct ContractError : Error {
    using Error::Error;
};

// File I/O failure.
struct IoError : Error {
    using Error::Error;
};

} // namespace sls
