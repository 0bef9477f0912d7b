#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "sitewise/core/parallel.hpp"
#include "sitewise/learn/model.hpp"
#include "sitewise/learn/tree.hpp"

namespace sitewise::learn {

struct BoostParams {
    int rounds = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    double lambda = 1.0;           // L2 penalty on leaf weights
    double min_child_weight = 1.0; // minimum hessian sum per leaf
};

/// Multiclass gradient boosting on the softmax cross-entropy: each round adds one
/// second-order regression tree per class.
class GradientBoostedTrees final : public Model {
public:
    std::array<double, kClasses> base{};
    std::array<bool, kClasses> present{};
    std::vector<DecisionTree> trees; // round-major: trees[r * kClasses + c]
    std::vector<double> importance;

    static std::shared_ptr<GradientBoostedTrees> fit(const Dataset& d, const BoostParams& p, unsigned threads = 1) {
        d.validate();
        if (d.size() == 0) throw Error("gradient boosting: empty training set");
        if (p.rounds < 1 || p.max_depth < 1 || !(p.learning_rate > 0.0) || p.lambda < 0.0)
            throw Error("gradient boosting: invalid hyperparameters");
        const std::size_t n = d.size(), k = d.n_features();
        auto m = std::make_shared<GradientBoostedTrees>();
        m->present = classes_present(d.y);
        auto counts = d.class_counts();
        for (int c = 0; c < kClasses; ++c)
            m->base[c] = counts[c] ? std::log(static_cast<double>(counts[c]) / static_cast<double>(n)) : 0.0;

        TreeParams tp;
        tp.max_depth = p.max_depth;
        tp.min_leaf_weight = p.min_child_weight;
        SortedColumns sorted(d.x);
        std::vector<double> ones(n, 1.0);
        std::vector<std::array<double, kClasses>> margin(n, m->base);
        std::vector<std::vector<double>> grad(kClasses, std::vector<double>(n)), hess(kClasses, std::vector<double>(n));
        std::vector<std::vector<double>> imp(kClasses, std::vector<double>(k, 0.0));
        m->trees.resize(static_cast<std::size_t>(p.rounds) * kClasses);

        std::vector<int> active;
        for (int c = 0; c < kClasses; ++c)
            if (m->present[c]) active.push_back(c);

        for (int r = 0; r < p.rounds; ++r) {
            for (std::size_t i = 0; i < n; ++i) {
                Proba pr = softmax(margin[i], m->present);
                for (int c : active) {
                    double target = d.y[i] == c ? 1.0 : 0.0;
                    grad[c][i] = pr[c] - target;
                    hess[c][i] = std::max(pr[c] * (1.0 - pr[c]), 1e-16);
                }
            }
            parallel_for(active.size(), threads, [&](std::size_t a) {
                int c = active[a];
                GradientPolicy policy{&grad[c], &hess[c], p.lambda, p.learning_rate};
                m->trees[static_cast<std::size_t>(r) * kClasses + static_cast<std::size_t>(c)] =
                    grow_tree(d.x, sorted, ones, policy, tp, nullptr, &imp[c]);
            });
            for (int c : active) {
                const auto& t = m->trees[static_cast<std::size_t>(r) * kClasses + static_cast<std::size_t>(c)];
                for (std::size_t i = 0; i < n; ++i) margin[i][c] += t.leaf(d.x.row(i)).value[0];
            }
        }
        m->importance.assign(k, 0.0);
        for (const auto& v : imp)
            for (std::size_t j = 0; j < k; ++j) m->importance[j] += v[j];
        return m;
    }

    std::array<double, kClasses> margin(std::span<const double> x) const {
        auto z = base;
        for (std::size_t t = 0; t < trees.size(); ++t) {
            int c = static_cast<int>(t % kClasses);
            if (present[c]) z[c] += trees[t].leaf(x).value[0];
        }
        return z;
    }

    ModelKind kind() const override { return ModelKind::gradient_boosted_trees; }
    Proba proba(std::span<const double> x) const override { return softmax(margin(x), present); }

    nlohmann::json to_json() const override {
        nlohmann::json trees_json = nlohmann::json::array();
        for (const auto& t : trees) trees_json.push_back(tree_to_json(t, true));
        return {{"base", base}, {"present", present}, {"trees", trees_json}, {"importance", importance}};
    }

    static std::shared_ptr<GradientBoostedTrees> from_json(const nlohmann::json& j) {
        auto m = std::make_shared<GradientBoostedTrees>();
        m->base = j.at("base").get<std::array<double, kClasses>>();
        m->present = j.at("present").get<std::array<bool, kClasses>>();
        for (const auto& t : j.at("trees")) m->trees.push_back(tree_from_json(t, true));
        m->importance = j.at("importance").get<std::vector<double>>();
        return m;
    }

    std::optional<std::vector<double>> intrinsic_importance() const override { return importance; }
};

} // namespace sitewise::learn
