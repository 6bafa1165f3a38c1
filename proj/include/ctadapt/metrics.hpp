#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace ctadapt {

/// counts[true][predicted] over n classes.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int n_classes = 3);

    int n_classes() const { return n_; }
    void add(int truth, int predicted, long count = 1);
    long at(int truth, int predicted) const;
    long row_total(int truth) const;
    long total() const;
    long trace() const;
    double accuracy() const;

    bool operator==(const ConfusionMatrix&) const = default;

private:
    int n_;
    std::vector<long> counts_;
};

/// Diagonal over row total. Throws RecallUndefinedError on an empty row.
double recall(const ConfusionMatrix& confusion, int cls);

struct AccuracyCI {
    double accuracy = 0.0;
    double half_width = 0.0;
};

/// Wald interval: half_width = 1.96 * sqrt(p (1 - p) / n), p = correct / n.
AccuracyCI accuracy_ci(long correct, long n);

/// Rounds half away from zero at the given number of decimals.
double round_half_away(double x, int decimals);
/// round_half_away followed by fixed formatting ("0.107").
std::string format_fixed(double x, int decimals = 3);

enum class Method { Baseline, OnlineUnsupervised };
const char* to_string(Method m);
Method parse_method(const std::string& s);

/// Online-loop bookkeeping for one quarter.
struct QuarterLog {
    int batch_index = 0;
    int patients = 0;
    /// Harvested slices keyed as A/Healthy, A/Unhealthy, B/Covid, B/Cap.
    std::array<int, 4> harvest_counts{};
    int pool_size = 0;
    double mult_healthy = 1.0;
    double mult_b = 1.0;
    std::optional<double> accuracy;

    bool operator==(const QuarterLog&) const = default;
};

struct ExperimentReport {
    std::string experiment_id;
    std::string test_set;
    Method method = Method::Baseline;
    double accuracy = 0.0;
    double ci_half_width = 0.0;
    int n_patients = 0;
    std::optional<std::vector<double>> per_quarter_accuracy;
    ConfusionMatrix confusion{3};
    std::optional<std::vector<QuarterLog>> harvest_log;

    bool operator==(const ExperimentReport&) const = default;
};

/// Assembles a report from a 3-class confusion matrix.
ExperimentReport build_report(std::string experiment_id, std::string test_set, Method method,
                              const ConfusionMatrix& confusion,
                              std::optional<std::vector<double>> per_quarter_accuracy = std::nullopt,
                              std::optional<std::vector<QuarterLog>> harvest_log = std::nullopt);

nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);
void write_report(const ExperimentReport& r, const std::filesystem::path& path);
ExperimentReport read_report(const std::filesystem::path& path);

/// Text table with columns Exp, Test set, Model, Accuracy (value +- half-width).
std::string render_table(std::span<const ExperimentReport> reports);

/// Fixed columns: experiment_id,test_set,method,n_patients,accuracy,ci_half_width,ci_low,ci_high
inline constexpr int kCsvColumns = 8;
std::string render_csv(std::span<const ExperimentReport> reports);

}  // namespace ctadapt
