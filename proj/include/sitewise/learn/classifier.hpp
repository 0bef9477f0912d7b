#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitewise/core/csv.hpp"
#include "sitewise/learn/boosting.hpp"
#include "sitewise/learn/forest.hpp"
#include "sitewise/learn/knn.hpp"
#include "sitewise/learn/logistic.hpp"
#include "sitewise/learn/model.hpp"
#include "sitewise/learn/svc.hpp"

namespace sitewise::learn {

/// Default hyperparameters of each kind.
inline Hyperparameters default_hyperparameters(ModelKind kind) {
    switch (kind) {
    case ModelKind::random_forest: return {{"n_trees", 100}, {"max_depth", 0}};
    case ModelKind::gradient_boosted_trees: return {{"rounds", 100}, {"learning_rate", 0.1}, {"max_depth", 3}};
    case ModelKind::svc_rbf: return {{"c", 1.0}, {"gamma_mode", 0}};
    case ModelKind::logistic_regression: return {{"lambda", 0.01}};
    case ModelKind::knn: return {{"k", 5}};
    }
    return {};
}

/// Validates keys so that typos in configs fail loudly.
inline void check_hyperparameters(ModelKind kind, const Hyperparameters& h) {
    auto allowed = default_hyperparameters(kind);
    if (kind == ModelKind::random_forest) allowed["max_features"] = 0;
    if (kind == ModelKind::gradient_boosted_trees) allowed["lambda"] = 1;
    for (const auto& [key, v] : h) {
        if (!allowed.count(key)) throw Error(std::string(to_string(kind)) + ": unknown hyperparameter '" + key + "'");
        if (!std::isfinite(v)) throw Error(std::string(to_string(kind)) + ": hyperparameter '" + key + "' is not finite");
    }
}

/// Fits one model on standardized training data. For the SVC, gamma_mode 0 means 1/K and
/// gamma_mode 1 means 1/(K * var) with var the variance of all training feature values.
inline std::shared_ptr<const Model> fit_model(ModelKind kind, const Dataset& train, const Hyperparameters& h,
                                              std::uint64_t seed, unsigned threads = 1) {
    check_hyperparameters(kind, h);
    switch (kind) {
    case ModelKind::random_forest: {
        ForestParams p;
        p.n_trees = static_cast<int>(hp(h, "n_trees", 100));
        p.max_depth = static_cast<int>(hp(h, "max_depth", 0));
        p.max_features = static_cast<int>(hp(h, "max_features", 0));
        return RandomForest::fit(train, p, seed, threads);
    }
    case ModelKind::gradient_boosted_trees: {
        BoostParams p;
        p.rounds = static_cast<int>(hp(h, "rounds", 100));
        p.learning_rate = hp(h, "learning_rate", 0.1);
        p.max_depth = static_cast<int>(hp(h, "max_depth", 3));
        p.lambda = hp(h, "lambda", 1.0);
        return GradientBoostedTrees::fit(train, p, threads);
    }
    case ModelKind::svc_rbf: {
        SvcParams p;
        p.c = hp(h, "c", 1.0);
        const double k = static_cast<double>(train.n_features());
        if (hp(h, "gamma_mode", 0) != 0) {
            const auto& v = train.x.data();
            double mean = 0.0, var = 0.0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            for (double x : v) var += (x - mean) * (x - mean);
            var /= static_cast<double>(v.size());
            p.gamma = 1.0 / (k * (var > 0.0 ? var : 1.0));
        } else {
            p.gamma = 1.0 / k;
        }
        return SvcRbf::fit(train, p, threads);
    }
    case ModelKind::logistic_regression: {
        LogisticParams p;
        p.lambda = hp(h, "lambda", 0.01);
        return LogisticRegression::fit(train, p);
    }
    case ModelKind::knn: return Knn::fit(train, static_cast<int>(hp(h, "k", 5)));
    }
    throw Error("fit_model: unknown kind");
}

/// A fitted model bundled with the scaler learned on its raw training rows; all public
/// entry points take raw (unscaled) feature vectors.
class TrainedClassifier {
public:
    TrainedClassifier() = default;
    TrainedClassifier(ModelKind kind, Hyperparameters params, StandardScaler scaler, std::shared_ptr<const Model> model)
        : kind_(kind), params_(std::move(params)), scaler_(std::move(scaler)), model_(std::move(model)) {}

    ModelKind kind() const { return kind_; }
    const Hyperparameters& params() const { return params_; }
    const StandardScaler& scaler() const { return scaler_; }
    const Model& model() const { return *model_; }
    std::size_t n_features() const { return scaler_.size(); }

    Proba predict_proba(std::span<const double> raw) const {
        std::vector<double> z(raw.size());
        scaler_.transform_row(raw, z);
        return model_->proba(z);
    }

    int predict(std::span<const double> raw) const {
        std::vector<double> z(raw.size());
        scaler_.transform_row(raw, z);
        return model_->predict(z);
    }

    std::vector<int> predict(const Matrix& raw) const {
        std::vector<int> out(raw.rows());
        for (std::size_t i = 0; i < raw.rows(); ++i) out[i] = predict(raw.row(i));
        return out;
    }

    std::vector<Proba> predict_proba(const Matrix& raw) const {
        std::vector<Proba> out(raw.rows());
        for (std::size_t i = 0; i < raw.rows(); ++i) out[i] = predict_proba(raw.row(i));
        return out;
    }

    nlohmann::json to_json() const {
        return {{"kind", to_string(kind_)},
                {"hyperparameters", params_},
                {"scaler", {{"mean", scaler_.mean}, {"scale", scaler_.scale}}},
                {"model", model_->to_json()}};
    }

    static TrainedClassifier from_json(const nlohmann::json& j) {
        ModelKind kind = parse_model_kind(j.at("kind").get<std::string>());
        StandardScaler s;
        s.mean = j.at("scaler").at("mean").get<std::vector<double>>();
        s.scale = j.at("scaler").at("scale").get<std::vector<double>>();
        const auto& m = j.at("model");
        std::shared_ptr<const Model> model;
        switch (kind) {
        case ModelKind::random_forest: model = RandomForest::from_json(m); break;
        case ModelKind::gradient_boosted_trees: model = GradientBoostedTrees::from_json(m); break;
        case ModelKind::svc_rbf: model = SvcRbf::from_json(m); break;
        case ModelKind::logistic_regression: model = LogisticRegression::from_json(m); break;
        case ModelKind::knn: model = Knn::from_json(m); break;
        }
        return TrainedClassifier(kind, j.at("hyperparameters").get<Hyperparameters>(), std::move(s), std::move(model));
    }

    void save(const std::filesystem::path& path) const { write_text_file(path, to_json().dump()); }

    static TrainedClassifier load(const std::filesystem::path& path) {
        try {
            return from_json(nlohmann::json::parse(read_text_file(path)));
        } catch (const nlohmann::json::exception& e) {
            throw Error("model file " + path.string() + ": " + e.what());
        }
    }

private:
    ModelKind kind_ = ModelKind::random_forest;
    Hyperparameters params_;
    StandardScaler scaler_;
    std::shared_ptr<const Model> model_;
};

/// Fits the scaler on `raw_train`, then the model on the scaled rows.
inline TrainedClassifier train_classifier(ModelKind kind, const Dataset& raw_train, const Hyperparameters& h,
                                          std::uint64_t seed, unsigned threads = 1) {
    StandardScaler scaler = StandardScaler::fit(raw_train.x);
    auto model = fit_model(kind, scaler.transform(raw_train), h, seed, threads);
    return TrainedClassifier(kind, h, std::move(scaler), std::move(model));
}

} // namespace sitewise::learn
