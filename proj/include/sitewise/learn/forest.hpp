#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "sitewise/core/parallel.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/learn/model.hpp"
#include "sitewise/learn/tree.hpp"

namespace sitewise::learn {

struct ForestParams {
    int n_trees = 100;
    int max_depth = 0;    // 0: unlimited
    int max_features = 0; // 0: floor(sqrt(K))
};

/// Bagged CART trees with per-node feature subsampling; predicts by majority vote of the
/// trees' individual class predictions.
class RandomForest final : public Model {
public:
    std::vector<DecisionTree> trees;
    std::vector<double> importance;

    static std::shared_ptr<RandomForest> fit(const Dataset& d, const ForestParams& p, std::uint64_t seed,
                                             unsigned threads = 1) {
        d.validate();
        if (d.size() == 0) throw Error("random forest: empty training set");
        if (p.n_trees < 1) throw Error("random forest: n_trees must be >= 1");
        if (p.max_depth < 0) throw Error("random forest: max_depth must be >= 0");
        const std::size_t k = d.n_features();
        TreeParams tp;
        tp.max_depth = p.max_depth;
        tp.max_features = p.max_features > 0 ? p.max_features
                                              : std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(k)))));
        SortedColumns sorted(d.x);
        GiniPolicy policy{&d.y};

        auto forest = std::make_shared<RandomForest>();
        forest->trees.resize(static_cast<std::size_t>(p.n_trees));
        std::vector<std::vector<double>> imp(static_cast<std::size_t>(p.n_trees), std::vector<double>(k, 0.0));
        parallel_for(forest->trees.size(), threads, [&](std::size_t t) {
            Rng rng = make_rng(seed, 0x7EE0000 + t);
            std::vector<double> weight(d.size(), 0.0);
            for (std::size_t i = 0; i < d.size(); ++i) weight[uniform_index(rng, d.size())] += 1.0;
            forest->trees[t] = grow_tree(d.x, sorted, weight, policy, tp, &rng, &imp[t]);
        });
        forest->importance.assign(k, 0.0);
        for (const auto& v : imp)
            for (std::size_t j = 0; j < k; ++j) forest->importance[j] += v[j];
        return forest;
    }

    ModelKind kind() const override { return ModelKind::random_forest; }

    Proba proba(std::span<const double> x) const override {
        Proba p{};
        for (const auto& t : trees) {
            const auto& v = t.leaf(x).value;
            for (int c = 0; c < kClasses; ++c) p[c] += v[c];
        }
        for (double& v : p) v /= static_cast<double>(trees.size());
        return p;
    }

    int predict(std::span<const double> x) const override {
        std::vector<int> votes;
        votes.reserve(trees.size());
        for (const auto& t : trees) votes.push_back(argmax(t.leaf(x).value));
        return majority_vote(votes);
    }

    nlohmann::json to_json() const override {
        nlohmann::json trees_json = nlohmann::json::array();
        for (const auto& t : trees) trees_json.push_back(tree_to_json(t, false));
        return {{"trees", trees_json}, {"importance", importance}};
    }

    static std::shared_ptr<RandomForest> from_json(const nlohmann::json& j) {
        auto f = std::make_shared<RandomForest>();
        for (const auto& t : j.at("trees")) f->trees.push_back(tree_from_json(t, false));
        f->importance = j.at("importance").get<std::vector<double>>();
        return f;
    }

    std::optional<std::vector<double>> intrinsic_importance() const override { return importance; }
};

} // namespace sitewise::learn
