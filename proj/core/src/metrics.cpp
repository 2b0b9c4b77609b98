#include "fga/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace fga {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::int64_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& predicted, int classes) {
    if (classes < 1) throw ValueError("confusion_matrix needs classes >= 1");
    if (truth.size() != predicted.size()) {
        throw ValueError("confusion_matrix: label vectors differ in length");
    }
    ConfusionMatrix cm(classes);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes) {
            throw ValueError("label out of range at sample " + std::to_string(i));
        }
        cm.at(truth[i], predicted[i]) += 1;
    }
    return cm;
}

MetricsReport classification_metrics(const ConfusionMatrix& cm) {
    const std::int64_t total = cm.total();
    if (total == 0) throw ValueError("classification_metrics: empty confusion matrix");
    MetricsReport r;
    std::int64_t diag = 0;
    const std::int64_t c = cm.classes;
    for (int k = 0; k < c; ++k) {
        const std::int64_t tp = cm.at(k, k);
        diag += tp;
        std::int64_t fp = 0, fn = 0, support = 0;
        for (int i = 0; i < c; ++i) {
            if (i != k) {
                fp += cm.at(i, k);
                fn += cm.at(k, i);
            }
            support += cm.at(k, i);
        }
        ClassMetrics m;
        m.support = support;
        if (tp + fp == 0) {
            m.precision = 0.0;
            m.degenerate = true;
        } else {
            m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
        }
        if (tp + fn == 0) {
            m.recall = 0.0;
            m.degenerate = true;
        } else {
            m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
        }
        if (m.precision + m.recall == 0.0) {
            m.f1 = 0.0;
            m.degenerate = true;
        } else {
            m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
        }
        r.any_degenerate = r.any_degenerate || m.degenerate;
        r.per_class.push_back(m);
    }
    r.accuracy = static_cast<double>(diag) / static_cast<double>(total);
    double wsum = 0.0;
    for (const ClassMetrics& m : r.per_class) {
        r.macro_precision += m.precision;
        r.macro_recall += m.recall;
        r.macro_f1 += m.f1;
        r.weighted_precision += m.precision * static_cast<double>(m.support);
        r.weighted_recall += m.recall * static_cast<double>(m.support);
        r.weighted_f1 += m.f1 * static_cast<double>(m.support);
        wsum += static_cast<double>(m.support);
    }
    r.macro_precision /= static_cast<double>(c);
    r.macro_recall /= static_cast<double>(c);
    r.macro_f1 /= static_cast<double>(c);
    r.weighted_precision /= wsum;
    r.weighted_recall /= wsum;
    r.weighted_f1 /= wsum;
    return r;
}

std::vector<RocCurve> roc_auc(const std::vector<std::vector<double>>& scores, const std::vector<int>& labels,
                              int classes) {
    if (scores.size() != labels.size()) throw ValueError("roc_auc: scores and labels differ in length");
    const std::size_t n = labels.size();
    std::vector<RocCurve> curves;
    for (int k = 0; k < classes; ++k) {
        RocCurve c;
        c.class_index = k;
        std::int64_t pos = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == k) ++pos;
        }
        const std::int64_t neg = static_cast<std::int64_t>(n) - pos;
        if (pos == 0 || neg == 0) {
            c.defined = false;
            curves.push_back(std::move(c));
            continue;
        }
        c.defined = true;
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return scores[a][static_cast<std::size_t>(k)] > scores[b][static_cast<std::size_t>(k)];
        });
        c.fpr.push_back(0.0);
        c.tpr.push_back(0.0);
        c.thresholds.push_back(std::numeric_limits<double>::infinity());
        std::int64_t tp = 0, fp = 0;
        std::size_t i = 0;
        while (i < n) {
            const double s = scores[order[i]][static_cast<std::size_t>(k)];
            // Consume the whole tie group at this threshold.
            while (i < n && scores[order[i]][static_cast<std::size_t>(k)] == s) {
                if (labels[order[i]] == k) ++tp;
                else ++fp;
                ++i;
            }
            c.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
            c.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
            c.thresholds.push_back(s);
        }
        for (std::size_t j = 1; j < c.fpr.size(); ++j) {
            c.auc += (c.fpr[j] - c.fpr[j - 1]) * (c.tpr[j] + c.tpr[j - 1]) * 0.5;
        }
        curves.push_back(std::move(c));
    }
    return curves;
}

EvalReport evaluate(const std::vector<int>& truth, const std::vector<std::vector<double>>& probs,
                    std::vector<std::string> class_names) {
    const int classes = static_cast<int>(class_names.size());
    std::vector<int> predicted(truth.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        int best = 0;
        for (int c = 1; c < classes; ++c) {
            if (probs[i][static_cast<std::size_t>(c)] > probs[i][static_cast<std::size_t>(best)]) best = c;
        }
        predicted[i] = best;
    }
    EvalReport r;
    r.class_names = std::move(class_names);
    r.confusion = confusion_matrix(truth, predicted, classes);
    r.metrics = classification_metrics(r.confusion);
    r.roc = roc_auc(probs, truth, classes);
    return r;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["class_names"] = class_names;
    nlohmann::json cmj = nlohmann::json::array();
    for (int t = 0; t < confusion.classes; ++t) {
        nlohmann::json row = nlohmann::json::array();
        for (int p = 0; p < confusion.classes; ++p) row.push_back(confusion.at(t, p));
        cmj.push_back(row);
    }
    j["confusion"] = cmj;
    j["accuracy"] = metrics.accuracy;
    nlohmann::json pc = nlohmann::json::array();
    for (std::size_t k = 0; k < metrics.per_class.size(); ++k) {
        const ClassMetrics& m = metrics.per_class[k];
        pc.push_back({{"name", class_names[k]},
                      {"precision", m.precision},
                      {"recall", m.recall},
                      {"f1", m.f1},
                      {"support", m.support},
                      {"degenerate", m.degenerate}});
    }
    j["per_class"] = pc;
    j["macro"] = {{"precision", metrics.macro_precision},
                  {"recall", metrics.macro_recall},
                  {"f1", metrics.macro_f1}};
    j["weighted"] = {{"precision", metrics.weighted_precision},
                     {"recall", metrics.weighted_recall},
                     {"f1", metrics.weighted_f1}};
    j["any_degenerate"] = metrics.any_degenerate;
    nlohmann::json rj = nlohmann::json::array();
    for (const RocCurve& c : roc) {
        nlohmann::json one;
        one["class"] = class_names[static_cast<std::size_t>(c.class_index)];
        one["defined"] = c.defined;
        one["auc"] = c.auc;
        nlohmann::json pts = nlohmann::json::array();
        for (std::size_t i = 0; i < c.fpr.size(); ++i) pts.push_back({c.fpr[i], c.tpr[i]});
        one["points"] = pts;
        rj.push_back(one);
    }
    j["roc"] = rj;
    j["skipped_files"] = skipped_files;
    return j.dump(2);
}

void EvalReport::write_json(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << to_json() << "\n";
}

void EvalReport::write_confusion_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "true\\pred";
    for (const auto& n : class_names) f << "," << n;
    f << "\n";
    for (int t = 0; t < confusion.classes; ++t) {
        f << class_names[static_cast<std::size_t>(t)];
        for (int p = 0; p < confusion.classes; ++p) f << "," << confusion.at(t, p);
        f << "\n";
    }
}

void EvalReport::write_roc_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "class,threshold,fpr,tpr\n";
    for (const RocCurve& c : roc) {
        if (!c.defined) continue;
        for (std::size_t i = 0; i < c.fpr.size(); ++i) {
            f << class_names[static_cast<std::size_t>(c.class_index)] << "," << format_double(c.thresholds[i]) << ","
              << format_double(c.fpr[i]) << "," << format_double(c.tpr[i]) << "\n";
        }
    }
}

} // namespace fga
