#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitewise/core/error.hpp"
#include "sitewise/learn/dataset.hpp"

namespace sitewise::learn {

enum class ModelKind { random_forest, gradient_boosted_trees, svc_rbf, logistic_regression, knn };

/// Fixed order used for reporting and for the final tie-break in model selection.
inline constexpr std::array<ModelKind, 5> kAllKinds = {ModelKind::random_forest, ModelKind::gradient_boosted_trees,
                                                       ModelKind::svc_rbf, ModelKind::logistic_regression,
                                                       ModelKind::knn};

inline const char* to_string(ModelKind k) {
    switch (k) {
    case ModelKind::random_forest: return "random-forest";
    case ModelKind::gradient_boosted_trees: return "gradient-boosted-trees";
    case ModelKind::svc_rbf: return "svc-rbf";
    case ModelKind::logistic_regression: return "logistic-regression";
    case ModelKind::knn: return "knn";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    for (ModelKind k : kAllKinds)
        if (s == to_string(k)) return k;
    if (s == "rf") return ModelKind::random_forest;
    if (s == "gbt" || s == "xgb") return ModelKind::gradient_boosted_trees;
    if (s == "svc" || s == "svm") return ModelKind::svc_rbf;
    if (s == "lr") return ModelKind::logistic_regression;
    throw Error("unknown model kind '" + s + "'");
}

/// Named numeric hyperparameters; ordered so serialization is canonical.
using Hyperparameters = std::map<std::string, double>;

inline double hp(const Hyperparameters& h, const std::string& key, double fallback) {
    auto it = h.find(key);
    return it == h.end() ? fallback : it->second;
}

using Proba = std::array<double, kClasses>;

inline int argmax(const Proba& p) {
    return static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
}

/// Mode of class votes; ties go to the lowest class index.
inline int majority_vote(std::span<const int> votes) {
    std::array<int, kClasses> count{};
    for (int v : votes) ++count[static_cast<std::size_t>(v)];
    return static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
}

/// Numerically stable softmax over the classes flagged present; absent classes get 0.
inline Proba softmax(const std::array<double, kClasses>& z, const std::array<bool, kClasses>& present) {
    double m = -INFINITY;
    for (int c = 0; c < kClasses; ++c)
        if (present[c]) m = std::max(m, z[c]);
    Proba p{};
    double s = 0.0;
    for (int c = 0; c < kClasses; ++c)
        if (present[c]) s += p[c] = std::exp(z[c] - m);
    for (double& v : p) v /= s;
    return p;
}

inline std::array<bool, kClasses> classes_present(const std::vector<int>& y) {
    std::array<bool, kClasses> present{};
    for (int l : y) present[static_cast<std::size_t>(l)] = true;
    return present;
}

/// A fitted classifier over standardized features.
class Model {
public:
    virtual ~Model() = default;
    virtual ModelKind kind() const = 0;
    virtual Proba proba(std::span<const double> x) const = 0;
    virtual int predict(std::span<const double> x) const { return argmax(proba(x)); }
    virtual nlohmann::json to_json() const = 0;
    /// Built-in per-feature importance (unnormalized), when the model family has one.
    virtual std::optional<std::vector<double>> intrinsic_importance() const { return std::nullopt; }
};

} // namespace sitewise::learn
