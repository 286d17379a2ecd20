#include "sls/detector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sls/errors.hpp"

namespace sls {

const char* calibration_method_name(CalibrationMethod m) {
    switch (m) {
        case CalibrationMethod::percentile: return "percentile";
        case CalibrationMethod::max_normal: return "max_normal";
        case CalibrationMethod::roc_opt: return "roc_opt";
    }
    return "percentile";
}

std::vector<double> score_rows(const Network& model, const Matrix& instances) {
    const Matrix recon = forward(model, instances);
    std::vector<double> scores(instances.rows, 0.0);
    for (std::size_t r = 0; r < instances.rows; ++r) {
        const double* x = instances.row_ptr(r);
        const double* y = recon.row_ptr(r);
        double sum_sq = 0.0;
        for (std::size_t c = 0; c < instances.cols; ++c) {
            const double d = y[c] - x[c];
            sum_sq += d * d;
        }
        scores[r] = std::sqrt(sum_sq / static_cast<double>(instances.cols));
    }
    return scores;
}

Threshold calibrate(const std::vector<double>& scores, CalibrationMethod method,
                    double percentile, const std::optional<std::vector<int>>& labels) {
    if (scores.empty()) throw DataError("calibrate: no scores given");

    Threshold th;
    th.method = method;
    th.calibration_size = scores.size();

    switch (method) {
        case CalibrationMethod::percentile: {
            if (!(percentile > 0.0 && percentile <= 1.0))
                throw ConfigError("percentile must be in (0, 1]");
            if (scores.size() < 20)
                throw DataError("percentile calibration needs at least 20 scores, got " +
                                std::to_string(scores.size()));
            th.percentile = percentile;
            std::vector<double> sorted = scores;
            std::sort(sorted.begin(), sorted.end());
            // nearest-rank: the ceil(p*n)-th order statistic, 1-indexed
            const auto rank = static_cast<std::size_t>(
                std::ceil(percentile * static_cast<double>(sorted.size())));
            th.value = sorted[std::max<std::size_t>(rank, 1) - 1];
            break;
        }
        case CalibrationMethod::max_normal:
            th.value = *std::max_element(scores.begin(), scores.end());
            break;
        case CalibrationMethod::roc_opt: {
            if (!labels)
                throw ConfigError("roc_opt calibration requires labels");
            if (labels->size() != scores.size())
                throw DataError("roc_opt: label count != score count");
            // Sweep candidate thresholds (each distinct score); score > theta
            // means attack, so each candidate puts itself on the normal side.
            double best_j = -2.0;
            double best_theta = 0.0;
            std::vector<double> candidates = scores;
            std::sort(candidates.begin(), candidates.end());
            candidates.erase(std::unique(candidates.begin(), candidates.end()),
                             candidates.end());
            for (double theta : candidates) {
                std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
                for (std::size_t i = 0; i < scores.size(); ++i) {
                    const bool attack = scores[i] > theta;
                    if ((*labels)[i] == 1)
                        attack ? ++tp : ++fn;
                    else
                        attack ? ++fp : ++tn;
                }
                const double tpr = (tp + fn) ? static_cast<double>(tp) / (tp + fn) : 0.0;
                const double fpr = (fp + tn) ? static_cast<double>(fp) / (fp + tn) : 0.0;
                const double j = tpr - fpr;
                if (j > best_j) {
                    best_j = j;
                    best_theta = theta;
                }
            }
            th.value = best_theta;
            break;
        }
    }
    if (!(th.value >= 0.0))
        throw DataError("calibration produced a negative threshold");
    return th;
}

DetectionReport report_from_counts(std::size_t tp, std::size_t fn, std::size_t fp,
                                   std::size_t tn) {
    DetectionReport r;
    r.tp = tp;
    r.fn = fn;
    r.fp = fp;
    r.tn = tn;
    r.total = tp + fn + fp + tn;
    if (r.total == 0) throw DataError("detection report over zero instances");
    r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(r.total);
    if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (tp + fn > 0) r.tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (fp + tn > 0) r.fpr = static_cast<double>(fp) / static_cast<double>(fp + tn);
    return r;
}

std::vector<int> classify_labels(const std::vector<double>& scores, double threshold) {
    if (std::isnan(threshold)) throw ConfigError("classify: threshold is NaN");
    std::vector<int> out(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i)
        out[i] = scores[i] > threshold ? 1 : 0;
    return out;
}

DetectionReport classify(const std::vector<double>& scores, double threshold,
                         const std::vector<int>& labels) {
    if (labels.size() != scores.size())
        throw DataError("classify: label count != score count");
    const auto predicted = classify_labels(scores, threshold);
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] == 1)
            predicted[i] ? ++tp : ++fn;
        else
            predicted[i] ? ++fp : ++tn;
    }
    return report_from_counts(tp, fn, fp, tn);
}

nlohmann::json DetectionReport::to_json() const {
    nlohmann::json j;
    j["tp"] = tp;
    j["fn"] = fn;
    j["fp"] = fp;
    j["tn"] = tn;
    j["total"] = total;
    j["accuracy"] = accuracy;
    j["precision"] = precision ? nlohmann::json(*precision) : nlohmann::json();
    j["tpr"] = tpr ? nlohmann::json(*tpr) : nlohmann::json();
    j["fpr"] = fpr ? nlohmann::json(*fpr) : nlohmann::json();
    return j;
}

std::string DetectionReport::csv_header() {
    return "tp,fn,fp,tn,total,accuracy_pct";
}

std::string DetectionReport::to_csv_row() const {
    std::ostringstream os;
    os << tp << "," << fn << "," << fp << "," << tn << "," << total << ",";
    os.setf(std::ios::fixed);
    os.precision(2);
    os << accuracy * 100.0;
    return os.str();
}

void write_report_json(const DetectionReport& report, const Threshold& threshold,
                       const std::filesystem::path& path) {
    nlohmann::json j = report.to_json();
    j["threshold"] = {{"value", threshold.value},
                      {"method", calibration_method_name(threshold.method)},
                      {"percentile", threshold.percentile},
                      {"calibration_size", threshold.calibration_size}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot open report file for writing: " + path.string());
    out << j.dump(2) << "\n";
}

void write_report_csv(const DetectionReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open report file for writing: " + path.string());
    out << DetectionReport::csv_header() << "\n" << report.to_csv_row() << "\n";
}

} // namespace sls
