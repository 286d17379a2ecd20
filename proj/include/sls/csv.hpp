#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sls/dataset.hpp"

namespace sls {

// Column selection for CSV ingestion. Parsed from a plain-text schema file:
//
//   # lines starting with # are comments
//   features: duration, src_bytes, dst_bytes
//   label: class                # optional
//   normal_values: normal, benign   # label values mapped to 0; all else 1
//
struct Schema {
    std::vector<std::string> feature_columns;
    std::string label_column;                // empty = unlabeled
    std::vector<std::string> normal_values;  // defaults to {"normal"}
};

Schema parse_schema_file(const std::filesystem::path& path);
Schema parse_schema_text(const std::string& text);

struct IngestResult {
    Dataset dataset;
    std::size_t dropped_rows = 0; // rows with missing/unparseable selected cells
};

// RFC-4180-style CSV with a required header row. Quoted fields, embedded
// commas/newlines and doubled quotes are handled. Rows whose selected cells
// are missing or unparseable are dropped and counted.
IngestResult ingest_csv(const std::filesystem::path& path, const Schema& schema);

// Low-level reader used by ingest_csv; exposed for tests and tools.
std::vector<std::vector<std::string>> read_csv_records(const std::filesystem::path& path);

// Write a labeled/unlabeled dataset as CSV with a header row.
void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path,
                       const std::string& label_column = "label");

} // namespace sls
