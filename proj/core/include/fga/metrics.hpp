#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fga/errors.hpp"

namespace fga {

/// C x C integer counts, rows = true class, columns = predicted class.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<std::int64_t> counts;

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int c) : classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    std::int64_t& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth) * classes + pred]; }
    std::int64_t at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth) * classes + pred]; }
    std::int64_t total() const;
};

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted, int classes);

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::int64_t support = 0;
    bool degenerate = false;  // some 0/0 ratio was defined as 0
};

struct MetricsReport {
    double accuracy = 0.0;
    std::vector<ClassMetrics> per_class;
    double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
    double weighted_precision = 0.0, weighted_recall = 0.0, weighted_f1 = 0.0;
    bool any_degenerate = false;
};

/// One-vs-rest precision/recall/F1 per class plus macro (unweighted) and
/// support-weighted averages. 0/0 ratios are defined as 0 and flagged.
MetricsReport classification_metrics(const ConfusionMatrix& cm);

/// One-vs-rest ROC curve for a single class: (FPR, TPR) points from a
/// threshold sweep over the sorted distinct scores, equal scores grouped
/// into one step, trapezoidal AUC.
struct RocCurve {
    int class_index = 0;
    bool defined = false;  // false when the class has no positives or no negatives
    std::vector<double> fpr, tpr, thresholds;
    double auc = 0.0;
};

std::vector<RocCurve> roc_auc(const std::vector<std::vector<double>>& scores, const std::vector<int>& labels,
                              int classes);

/// Everything the eval pipeline emits; serializable to JSON and CSV.
struct EvalReport {
    std::vector<std::string> class_names;
    ConfusionMatrix confusion;
    MetricsReport metrics;
    std::vector<RocCurve> roc;
    int skipped_files = 0;

    std::string to_json() const;
    void write_json(const std::string& path) const;
    void write_confusion_csv(const std::string& path) const;
    void write_roc_csv(const std::string& path) const;
};

EvalReport evaluate(const std::vector<int>& truth, const std::vector<std::vector<double>>& probs,
                    std::vector<std::string> class_names);

/// Fixed-width float formatting used by every CSV writer (17 significant
/// digits, round-trip exact).
std::string format_double(double v);

} // namespace fga
