#include "sls/csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sls/errors.hpp"

namespace sls {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    try {
        std::size_t pos = 0;
        out = std::stod(t, &pos);
        if (pos != t.size()) return false;
    } catch (...) {
        return false;
    }
    return std::isfinite(out);
}

} // namespace

Schema parse_schema_text(const std::string& text) {
    Schema schema;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw SchemaError("schema line has no 'key: value' form: " + line);
        const std::string key = trim(line.substr(0, colon));
        const std::string value = trim(line.substr(colon + 1));
        if (key == "features") {
            schema.feature_columns = split_list(value);
        } else if (key == "label") {
            schema.label_column = value;
        } else if (key == "normal_values") {
            schema.normal_values = split_list(value);
        } else {
            throw SchemaError("unknown schema key: " + key);
        }
    }
    if (schema.feature_columns.empty())
        throw SchemaError("schema lists no feature columns");
    if (schema.normal_values.empty()) schema.normal_values = {"normal"};
    return schema;
}

Schema parse_schema_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_schema_text(buf.str());
}

std::vector<std::vector<std::string>> read_csv_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open CSV file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();

    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    auto end_field = [&]() {
        record.push_back(field);
        field.clear();
        field_started = false;
    };
    auto end_record = [&]() {
        end_field();
        // skip records that are entirely empty (blank lines)
        if (!(record.size() == 1 && record[0].empty())) records.push_back(record);
        record.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"' && !field_started) {
            in_quotes = true;
            field_started = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            end_record();
        } else {
            field += c;
            field_started = true;
        }
    }
    if (!field.empty() && field.back() == '\r') field.pop_back();
    if (field_started || !record.empty()) end_record();

    return records;
}

IngestResult ingest_csv(const std::filesystem::path& path, const Schema& schema) {
    const auto records = read_csv_records(path);
    if (records.empty()) throw DataError("CSV file has no header row: " + path.string());

    const auto& header = records.front();
    auto column_index = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            throw SchemaError("column '" + name + "' not found in " + path.string());
        return static_cast<std::size_t>(it - header.begin());
    };

    std::vector<std::size_t> feature_idx;
    for (const auto& name : schema.feature_columns) feature_idx.push_back(column_index(name));
    const bool labeled = !schema.label_column.empty();
    const std::size_t label_idx = labeled ? column_index(schema.label_column) : 0;

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t dropped = 0;
    std::size_t kept = 0;

    for (std::size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        std::vector<double> row(feature_idx.size());
        bool ok = true;
        for (std::size_t c = 0; c < feature_idx.size(); ++c) {
            if (feature_idx[c] >= rec.size() || !parse_double(rec[feature_idx[c]], row[c])) {
                ok = false;
                break;
            }
        }
        int label = 0;
        if (ok && labeled) {
            if (label_idx >= rec.size() || trim(rec[label_idx]).empty()) {
                ok = false;
            } else {
                const std::string v = trim(rec[label_idx]);
                const bool normal =
                    std::find(schema.normal_values.begin(), schema.normal_values.end(), v) !=
                    schema.normal_values.end();
                label = normal ? 0 : 1;
            }
        }
        if (!ok) {
            ++dropped;
            continue;
        }
        values.insert(values.end(), row.begin(), row.end());
        if (labeled) labels.push_back(label);
        ++kept;
    }

    if (kept == 0) throw DataError("no usable rows in " + path.string());

    IngestResult result;
    result.dropped_rows = dropped;
    result.dataset.features.rows = kept;
    result.dataset.features.cols = feature_idx.size();
    result.dataset.features.data = std::move(values);
    result.dataset.feature_names = schema.feature_columns;
    if (labeled) result.dataset.labels = std::move(labels);
    result.dataset.validate();
    return result;
}

void write_dataset_csv(const Dataset& ds, const std::filesystem::path& path,
                       const std::string& label_column) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open CSV for writing: " + path.string());
    out.precision(17);

    for (std::size_t c = 0; c < ds.dim(); ++c) {
        if (c) out << ",";
        out << (c < ds.feature_names.size() ? ds.feature_names[c]
                                            : "f" + std::to_string(c + 1));
    }
    if (ds.labels) out << "," << label_column;
    out << "\n";

    for (std::size_t r = 0; r < ds.rows(); ++r) {
        for (std::size_t c = 0; c < ds.dim(); ++c) {
            if (c) out << ",";
            out << ds.features.at(r, c);
        }
        if (ds.labels) out << "," << ((*ds.labels)[r] ? "attack" : "normal");
        out << "\n";
    }
    if (!out) throw IoError("CSV write failed: " + path.string());
}

} // namespace sls
