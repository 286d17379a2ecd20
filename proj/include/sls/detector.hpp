#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sls/network.hpp"

#include <json.hpp>

namespace sls {

enum class CalibrationMethod { percentile, max_normal, roc_opt };

const char* calibration_method_name(CalibrationMethod m);

// Decision threshold on reconstruction RMSE. Instances scoring strictly above
// `value` are classified as attacks; ties count as normal, so max_normal
// calibration yields zero false positives on its own calibration set.
struct Threshold {
    double value = 0.0;
    CalibrationMethod method = CalibrationMethod::percentile;
    double percentile = 0.99; // only for the percentile method
    std::size_t calibration_size = 0;
};

// Confusion counts and derived metrics. Ratios are absent when their
// denominator is zero.
struct DetectionReport {
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
    std::size_t total = 0;
    double accuracy = 0.0;
    std::optional<double> precision; // tp / (tp + fp)
    std::optional<double> tpr;       // tp / (tp + fn)
    std::optional<double> fpr;       // fp / (fp + tn)

    nlohmann::json to_json() const;
    // One CSV row in confusion-table order: tp,fn,fp,tn,total,accuracy_pct
    std::string to_csv_row() const;
    static std::string csv_header();
};

// Per-row reconstruction RMSE: sqrt(mean over features of squared error).
std::vector<double> score_rows(const Network& model, const Matrix& instances);

// Calibrate a threshold from the scores of a normal-only calibration set.
//   percentile(p): nearest-rank, the ceil(p*n)-th order statistic (needs n>=20)
//   max_normal:    the maximum calibration score
//   roc_opt:       needs labels; maximizes Youden's J = TPR - FPR
Threshold calibrate(const std::vector<double>& scores, CalibrationMethod method,
                    double percentile = 0.99,
                    const std::optional<std::vector<int>>& labels = std::nullopt);

// Build a report from scores, a threshold and ground-truth labels.
DetectionReport classify(const std::vector<double>& scores, double threshold,
                         const std::vector<int>& labels);

// Label-free variant: the predicted 0/1 vector.
std::vector<int> classify_labels(const std::vector<double>& scores, double threshold);

// Build a report directly from raw confusion counts.
DetectionReport report_from_counts(std::size_t tp, std::size_t fn, std::size_t fp,
                                   std::size_t tn);

void write_report_json(const DetectionReport& report, const Threshold& threshold,
                       const std::filesystem::path& path);
void write_report_csv(const DetectionReport& report, const std::filesystem::path& path);

} // namespace sls
