#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitewise/core/error.hpp"
#include "sitewise/learn/classifier.hpp"

namespace sitewise::learn {

struct BinaryMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Accuracy, precision, recall and F1 from binary counts; 0/0 ratios are reported as 0.
inline BinaryMetrics binary_metrics(double tp, double fp, double fn, double tn) {
    auto ratio = [](double a, double b) { return b > 0.0 ? a / b : 0.0; };
    BinaryMetrics m;
    m.accuracy = ratio(tp + tn, tp + fp + fn + tn);
    m.precision = ratio(tp, tp + fp);
    m.recall = ratio(tp, tp + fn);
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    return m;
}

/// ROC AUC of scores for binary labels via the rank statistic (ties count one half).
/// Undefined (nullopt) when either class is absent.
inline std::optional<double> binary_auc(const std::vector<double>& scores, const std::vector<int>& positive) {
    if (scores.size() != positive.size()) throw Error("binary_auc: length mismatch");
    const std::size_t n = scores.size();
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && scores[idx[j]] == scores[idx[i]]) ++j;
        double mid_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0; // 1-based average rank
        for (std::size_t t = i; t < j; ++t)
            if (positive[idx[t]]) {
                rank_sum += mid_rank;
                ++n_pos;
            }
        i = j;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) return std::nullopt;
    double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
    return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

using ConfusionMatrix = std::array<std::array<std::size_t, kClasses>, kClasses>; // [true][predicted]

struct EvaluationReport {
    ConfusionMatrix confusion{};
    std::size_t n = 0;
    double accuracy = 0.0;
    double precision = 0.0; // support-weighted
    double recall = 0.0;    // support-weighted
    double f1 = 0.0;        // support-weighted
    std::array<std::optional<double>, kClasses> class_accuracy{}; // recall of each class; nullopt if absent
    std::array<std::optional<double>, kClasses> class_auc{};
    double auc = 0.0; // mean over classes with a defined one-vs-rest AUC
};

inline EvaluationReport evaluate_predictions(const std::vector<int>& truth, const std::vector<int>& predicted,
                                             const std::vector<Proba>& proba) {
    if (truth.empty()) throw Error("evaluate: empty test set");
    if (truth.size() != predicted.size() || truth.size() != proba.size()) throw Error("evaluate: length mismatch");
    EvaluationReport r;
    r.n = truth.size();
    for (std::size_t i = 0; i < r.n; ++i) ++r.confusion[truth[i]][predicted[i]];
    double correct = 0.0;
    for (int c = 0; c < kClasses; ++c) correct += static_cast<double>(r.confusion[c][c]);
    r.accuracy = correct / static_cast<double>(r.n);

    int auc_count = 0;
    for (int c = 0; c < kClasses; ++c) {
        double tp = static_cast<double>(r.confusion[c][c]), fp = 0.0, fn = 0.0;
        for (int o = 0; o < kClasses; ++o) {
            if (o == c) continue;
            fp += static_cast<double>(r.confusion[o][c]);
            fn += static_cast<double>(r.confusion[c][o]);
        }
        double tn = static_cast<double>(r.n) - tp - fp - fn;
        double support = tp + fn;
        auto m = binary_metrics(tp, fp, fn, tn);
        double share = support / static_cast<double>(r.n);
        r.precision += share * m.precision;
        r.recall += share * m.recall;
        r.f1 += share * m.f1;
        if (support > 0.0) r.class_accuracy[c] = m.recall;

        std::vector<double> s(r.n);
        std::vector<int> pos(r.n);
        for (std::size_t i = 0; i < r.n; ++i) {
            s[i] = proba[i][c];
            pos[i] = truth[i] == c;
        }
        r.class_auc[c] = binary_auc(s, pos);
        if (r.class_auc[c]) {
            r.auc += *r.class_auc[c];
            ++auc_count;
        }
    }
    r.auc = auc_count ? r.auc / auc_count : 0.0;
    return r;
}

inline EvaluationReport evaluate(const TrainedClassifier& model, const Dataset& raw_test) {
    return evaluate_predictions(raw_test.y, model.predict(raw_test.x), model.predict_proba(raw_test.x));
}

inline nlohmann::json to_json(const EvaluationReport& r) {
    nlohmann::json j;
    j["n"] = r.n;
    j["confusion"] = r.confusion;
    j["accuracy"] = r.accuracy;
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    j["auc"] = r.auc;
    nlohmann::json ca = nlohmann::json::array(), cu = nlohmann::json::array();
    for (int c = 0; c < kClasses; ++c) {
        ca.push_back(r.class_accuracy[c] ? nlohmann::json(*r.class_accuracy[c]) : nlohmann::json(nullptr));
        cu.push_back(r.class_auc[c] ? nlohmann::json(*r.class_auc[c]) : nlohmann::json(nullptr));
    }
    j["class_accuracy"] = ca;
    j["class_auc"] = cu;
    return j;
}

} // namespace sitewise::learn
