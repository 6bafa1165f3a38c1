#include "ctadapt/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ctadapt/errors.hpp"

namespace ctadapt {

using nlohmann::json;

ConfusionMatrix::ConfusionMatrix(int n_classes) : n_(n_classes) {
    if (n_classes < 1) throw InputError("confusion matrix needs at least one class");
    counts_.assign(static_cast<std::size_t>(n_classes) * n_classes, 0);
}

void ConfusionMatrix::add(int truth, int predicted, long count) {
    if (truth < 0 || truth >= n_ || predicted < 0 || predicted >= n_) {
        throw InputError("confusion matrix index out of range");
    }
    counts_[static_cast<std::size_t>(truth) * n_ + predicted] += count;
}

long ConfusionMatrix::at(int truth, int predicted) const {
    return counts_.at(static_cast<std::size_t>(truth) * n_ + predicted);
}

long ConfusionMatrix::row_total(int truth) const {
    long s = 0;
    for (int p = 0; p < n_; ++p) s += at(truth, p);
    return s;
}

long ConfusionMatrix::total() const {
    long s = 0;
    for (long c : counts_) s += c;
    return s;
}

long ConfusionMatrix::trace() const {
    long s = 0;
    for (int i = 0; i < n_; ++i) s += at(i, i);
    return s;
}

double ConfusionMatrix::accuracy() const {
    const long t = total();
    return t == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(t);
}

double recall(const ConfusionMatrix& confusion, int cls) {
    const long row = confusion.row_total(cls);
    if (row <= 0) throw RecallUndefinedError("recall undefined: no samples of class " + std::to_string(cls));
    return static_cast<double>(confusion.at(cls, cls)) / static_cast<double>(row);
}

AccuracyCI accuracy_ci(long correct, long n) {
    if (n <= 0) throw InputError("accuracy_ci requires n >= 1");
    if (correct < 0 || correct > n) throw InputError("accuracy_ci requires 0 <= correct <= n");
    const double p = static_cast<double>(correct) / static_cast<double>(n);
    return {p, 1.96 * std::sqrt(p * (1.0 - p) / static_cast<double>(n))};
}

double round_half_away(double x, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::round(x * scale) / scale;
}

std::string format_fixed(double x, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_away(x, decimals));
    return buf;
}

const char* to_string(Method m) {
    return m == Method::Baseline ? "Baseline" : "OnlineUnsupervised";
}

Method parse_method(const std::string& s) {
    if (s == "Baseline") return Method::Baseline;
    if (s == "OnlineUnsupervised") return Method::OnlineUnsupervised;
    throw InputError("unknown method '" + s + "'");
}

ExperimentReport build_report(std::string experiment_id, std::string test_set, Method method,
                              const ConfusionMatrix& confusion,
                              std::optional<std::vector<double>> per_quarter_accuracy,
                              std::optional<std::vector<QuarterLog>> harvest_log) {
    if (confusion.n_classes() != 3) throw InputError("experiment reports use a 3-class confusion matrix");
    ExperimentReport r;
    r.experiment_id = std::move(experiment_id);
    r.test_set = std::move(test_set);
    r.method = method;
    r.n_patients = static_cast<int>(confusion.total());
    const AccuracyCI ci = accuracy_ci(confusion.trace(), confusion.total());
    r.accuracy = ci.accuracy;
    r.ci_half_width = ci.half_width;
    r.per_quarter_accuracy = std::move(per_quarter_accuracy);
    r.confusion = confusion;
    r.harvest_log = std::move(harvest_log);
    return r;
}

namespace {

json quarter_to_json(const QuarterLog& q) {
    json j = {{"batch_index", q.batch_index},
              {"patients", q.patients},
              {"harvest",
               {{"A_Healthy", q.harvest_counts[0]},
                {"A_Unhealthy", q.harvest_counts[1]},
                {"B_Covid", q.harvest_counts[2]},
                {"B_Cap", q.harvest_counts[3]}}},
              {"pool_size", q.pool_size},
              {"mult_healthy", q.mult_healthy},
              {"mult_b", q.mult_b}};
    j["accuracy"] = q.accuracy ? json(*q.accuracy) : json(nullptr);
    return j;
}

QuarterLog quarter_from_json(const json& j) {
    QuarterLog q;
    q.batch_index = j.at("batch_index").get<int>();
    q.patients = j.at("patients").get<int>();
    const json& h = j.at("harvest");
    q.harvest_counts = {h.at("A_Healthy").get<int>(), h.at("A_Unhealthy").get<int>(),
                        h.at("B_Covid").get<int>(), h.at("B_Cap").get<int>()};
    q.pool_size = j.at("pool_size").get<int>();
    q.mult_healthy = j.at("mult_healthy").get<double>();
    q.mult_b = j.at("mult_b").get<double>();
    if (!j.at("accuracy").is_null()) q.accuracy = j.at("accuracy").get<double>();
    return q;
}

}  // namespace

json to_json(const ExperimentReport& r) {
    json confusion = json::array();
    for (int t = 0; t < r.confusion.n_classes(); ++t) {
        json row = json::array();
        for (int p = 0; p < r.confusion.n_classes(); ++p) row.push_back(r.confusion.at(t, p));
        confusion.push_back(row);
    }
    json j = {{"experiment_id", r.experiment_id},
              {"test_set", r.test_set},
              {"method", to_string(r.method)},
              {"accuracy", r.accuracy},
              {"ci_half_width", r.ci_half_width},
              {"n_patients", r.n_patients},
              {"confusion", confusion}};
    j["per_quarter_accuracy"] = r.per_quarter_accuracy ? json(*r.per_quarter_accuracy) : json(nullptr);
    if (r.harvest_log) {
        json log = json::array();
        for (const auto& q : *r.harvest_log) log.push_back(quarter_to_json(q));
        j["harvest_log"] = log;
    } else {
        j["harvest_log"] = nullptr;
    }
    return j;
}

ExperimentReport report_from_json(const json& j) {
    try {
        ExperimentReport r;
        r.experiment_id = j.at("experiment_id").get<std::string>();
        r.test_set = j.at("test_set").get<std::string>();
        r.method = parse_method(j.at("method").get<std::string>());
        r.accuracy = j.at("accuracy").get<double>();
        r.ci_half_width = j.at("ci_half_width").get<double>();
        r.n_patients = j.at("n_patients").get<int>();
        const json& c = j.at("confusion");
        r.confusion = ConfusionMatrix(static_cast<int>(c.size()));
        for (std::size_t t = 0; t < c.size(); ++t) {
            if (c[t].size() != c.size()) throw InputError("confusion matrix is not square");
            for (std::size_t p = 0; p < c.size(); ++p) {
                r.confusion.add(static_cast<int>(t), static_cast<int>(p), c[t][p].get<long>());
            }
        }
        if (j.contains("per_quarter_accuracy") && !j["per_quarter_accuracy"].is_null()) {
            r.per_quarter_accuracy = j["per_quarter_accuracy"].get<std::vector<double>>();
        }
        if (j.contains("harvest_log") && !j["harvest_log"].is_null()) {
            std::vector<QuarterLog> log;
            for (const auto& q : j["harvest_log"]) log.push_back(quarter_from_json(q));
            r.harvest_log = std::move(log);
        }
        if (r.confusion.total() != r.n_patients) throw InputError("confusion total != n_patients");
        return r;
    } catch (const json::exception& e) {
        throw InputError(std::string("malformed report JSON: ") + e.what());
    }
}

void write_report(const ExperimentReport& r, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report: " + path.string());
    out << to_json(r).dump(2) << '\n';
    if (!out) throw DataError("failed writing report: " + path.string());
}

ExperimentReport read_report(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open report: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError("report is not valid JSON: " + path.string() + ": " + e.what());
    }
    return report_from_json(j);
}

std::string render_table(std::span<const ExperimentReport> reports) {
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-8s %-10s %-20s %s\n", "Exp", "Test set", "Model", "Accuracy");
    os << line;
    for (const auto& r : reports) {
        const std::string acc = format_fixed(r.accuracy) + " +- " + format_fixed(r.ci_half_width);
        std::snprintf(line, sizeof line, "%-8s %-10s %-20s %s\n", r.experiment_id.c_str(),
                      r.test_set.c_str(), to_string(r.method), acc.c_str());
        os << line;
    }
    return os.str();
}

std::string render_csv(std::span<const ExperimentReport> reports) {
    std::ostringstream os;
    os << "experiment_id,test_set,method,n_patients,accuracy,ci_half_width,ci_low,ci_high\n";
    for (const auto& r : reports) {
        os << r.experiment_id << ',' << r.test_set << ',' << to_string(r.method) << ','
           << r.n_patients << ',' << format_fixed(r.accuracy) << ',' << format_fixed(r.ci_half_width)
           << ',' << format_fixed(r.accuracy - r.ci_half_width) << ','
           << format_fixed(r.accuracy + r.ci_half_width) << '\n';
    }
    return os.str();
}

}  // namespace ctadapt
