#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/learn/classifier.hpp"

namespace sitewise::explain {

/// Mean drop in accuracy when one column of the held-out rows is shuffled, over `repeats`
/// seeded shuffles per column.
inline std::vector<double> permutation_importance(const learn::TrainedClassifier& model, const learn::Dataset& test,
                                                  int repeats, std::uint64_t seed) {
    if (test.size() == 0) throw Error("permutation importance: empty test set");
    auto accuracy = [&](const learn::Matrix& x) {
        std::size_t hit = 0;
        for (std::size_t i = 0; i < x.rows(); ++i) hit += model.predict(x.row(i)) == test.y[i];
        return static_cast<double>(hit) / static_cast<double>(x.rows());
    };
    const double base = accuracy(test.x);
    std::vector<double> out(test.n_features(), 0.0);
    for (std::size_t j = 0; j < test.n_features(); ++j) {
        Rng rng = make_rng(seed, 0x1000 + j);
        for (int r = 0; r < repeats; ++r) {
            learn::Matrix x = test.x;
            std::vector<double> col(x.rows());
            for (std::size_t i = 0; i < x.rows(); ++i) col[i] = x(i, j);
            shuffle(col, rng);
            for (std::size_t i = 0; i < x.rows(); ++i) x(i, j) = col[i];
            out[j] += base - accuracy(x);
        }
        out[j] /= repeats;
    }
    return out;
}

/// Per-feature importance by model family: impurity or gain decrease for tree ensembles,
/// mean |coefficient| for logistic regression, permutation importance (10 shuffles) for the
/// kernel SVC and KNN. Built-in importances are normalized to sum to one.
inline std::vector<double> model_importance(const learn::TrainedClassifier& model, const learn::Dataset& test,
                                            std::uint64_t seed) {
    if (auto intrinsic = model.model().intrinsic_importance()) {
        auto v = *intrinsic;
        double total = 0.0;
        for (double x : v) total += x;
        if (total > 0.0)
            for (double& x : v) x /= total;
        return v;
    }
    return permutation_importance(model, test, 10, seed);
}

struct PruneResult {
    std::vector<std::string> retained;
    std::vector<std::string> dropped;
    std::vector<double> mean_normalized; // per feature, averaged over models
    double threshold = 0.0;
};

/// Drops features whose importance, normalized within each model (negatives clipped to zero)
/// and averaged across models, falls below `fraction` of the uniform share 1/K.
inline PruneResult prune_features(const std::vector<std::vector<double>>& per_model, const std::vector<std::string>& names,
                                  double fraction = 0.25) {
    const std::size_t k = names.size();
    if (per_model.empty()) throw Error("prune_features: no importance scores");
    PruneResult r;
    r.mean_normalized.assign(k, 0.0);
    for (const auto& scores : per_model) {
        if (scores.size() != k) throw Error("prune_features: score count does not match feature count");
        std::vector<double> v(k);
        double total = 0.0;
        for (std::size_t i = 0; i < k; ++i) total += v[i] = std::max(0.0, scores[i]);
        for (std::size_t i = 0; i < k; ++i)
            r.mean_normalized[i] += (total > 0.0 ? v[i] / total : 1.0 / static_cast<double>(k)) / static_cast<double>(per_model.size());
    }
    r.threshold = fraction / static_cast<double>(k);
    for (std::size_t i = 0; i < k; ++i) (r.mean_normalized[i] < r.threshold ? r.dropped : r.retained).push_back(names[i]);
    if (r.retained.empty()) throw Error("prune_features: policy would drop every feature");
    return r;
}

inline std::string format_importance(const std::vector<std::string>& names,
                                     const std::vector<std::pair<std::string, std::vector<double>>>& per_model) {
    std::string out = "model,criterion,importance\n";
    for (const auto& [model, scores] : per_model)
        for (std::size_t i = 0; i < names.size(); ++i) out += (CsvLine() << model << names[i] << scores[i]).str() + "\n";
    return out;
}

inline std::string format_pruning(const std::vector<std::string>& names, const PruneResult& r) {
    std::string out = "criterion,mean_normalized_importance,threshold,retained\n";
    for (std::size_t i = 0; i < names.size(); ++i)
        out += (CsvLine() << names[i] << r.mean_normalized[i] << r.threshold << (r.mean_normalized[i] >= r.threshold)).str() + "\n";
    return out;
}

} // namespace sitewise::explain
