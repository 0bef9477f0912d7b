#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "sitewise/core/error.hpp"
#include "sitewise/core/parallel.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/learn/classifier.hpp"
#include "sitewise/learn/metrics.hpp"

namespace sitewise::learn {

using Grid = std::vector<Hyperparameters>;

/// Cartesian product of per-key value lists, keys varying slowest in map order.
inline Grid grid_product(const std::map<std::string, std::vector<double>>& axes) {
    Grid out{{}};
    for (const auto& [key, values] : axes) {
        Grid next;
        for (const auto& base : out)
            for (double v : values) {
                auto h = base;
                h[key] = v;
                next.push_back(std::move(h));
            }
        out = std::move(next);
    }
    return out;
}

/// Default search spaces. max_depth 0 is "unlimited"; gamma_mode 0 is 1/K, 1 is 1/(K var).
inline Grid default_grid(ModelKind kind) {
    switch (kind) {
    case ModelKind::random_forest: return grid_product({{"n_trees", {100, 300}}, {"max_depth", {0, 12}}});
    case ModelKind::gradient_boosted_trees:
        return grid_product({{"rounds", {100, 300}}, {"learning_rate", {0.1, 0.3}}, {"max_depth", {3, 6}}});
    case ModelKind::svc_rbf: return grid_product({{"c", {1, 10}}, {"gamma_mode", {0, 1}}});
    case ModelKind::logistic_regression: return grid_product({{"lambda", {0.01, 1.0}}});
    case ModelKind::knn: return grid_product({{"k", {3, 5, 11}}});
    }
    return {};
}

/// Stratified fold assignment: each class's rows are shuffled and dealt round-robin.
inline std::vector<int> stratified_folds(const std::vector<int>& y, int folds, std::uint64_t seed) {
    if (folds < 2) throw Error("grid_search: need at least 2 folds");
    std::array<std::vector<std::size_t>, kClasses> by_class;
    for (std::size_t i = 0; i < y.size(); ++i) by_class[static_cast<std::size_t>(y[i])].push_back(i);
    for (int c = 0; c < kClasses; ++c)
        if (!by_class[c].empty() && by_class[c].size() < static_cast<std::size_t>(folds))
            throw Error("grid_search: " + std::to_string(folds) + " folds exceed the " + std::to_string(by_class[c].size()) +
                        " rows of class " + std::to_string(c));
    Rng rng = make_rng(seed, 0xF01D);
    std::vector<int> fold(y.size(), 0);
    int next = 0;
    for (auto& idx : by_class) {
        shuffle(idx, rng);
        for (std::size_t i : idx) {
            fold[i] = next;
            next = (next + 1) % folds;
        }
    }
    return fold;
}

struct GridSearchResult {
    Hyperparameters best;
    std::vector<double> scores; // mean weighted F1 per grid point
    std::size_t best_index = 0;
};

/// k-fold cross-validated weighted F1 for every grid point on (already scaled) data; the first
/// grid point with the highest mean wins.
inline GridSearchResult grid_search(ModelKind kind, const Dataset& train, const Grid& grid, int folds,
                                    std::uint64_t seed, unsigned threads = 1) {
    if (grid.empty()) throw Error("grid_search: empty grid");
    for (const auto& h : grid) check_hyperparameters(kind, h);
    GridSearchResult result;
    result.scores.assign(grid.size(), 0.0);
    if (grid.size() == 1) {
        result.best = grid.front();
        return result;
    }
    auto fold = stratified_folds(train.y, folds, seed);
    std::vector<Dataset> fit_sets(static_cast<std::size_t>(folds)), held(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> in, out;
        for (std::size_t i = 0; i < train.size(); ++i) (fold[i] == f ? out : in).push_back(i);
        fit_sets[f] = train.subset(in);
        held[f] = train.subset(out);
    }
    const std::size_t cells = grid.size() * static_cast<std::size_t>(folds);
    std::vector<double> f1(cells, 0.0);
    parallel_for(cells, threads, [&](std::size_t cell) {
        std::size_t g = cell / static_cast<std::size_t>(folds);
        int f = static_cast<int>(cell % static_cast<std::size_t>(folds));
        auto model = fit_model(kind, fit_sets[f], grid[g], derive_seed(seed, cell), 1);
        std::vector<int> pred(held[f].size());
        std::vector<Proba> proba(held[f].size());
        for (std::size_t i = 0; i < held[f].size(); ++i) {
            pred[i] = model->predict(held[f].x.row(i));
            proba[i] = model->proba(held[f].x.row(i));
        }
        f1[cell] = evaluate_predictions(held[f].y, pred, proba).f1;
    });
    for (std::size_t g = 0; g < grid.size(); ++g) {
        for (int f = 0; f < folds; ++f) result.scores[g] += f1[g * static_cast<std::size_t>(folds) + static_cast<std::size_t>(f)];
        result.scores[g] /= folds;
        if (result.scores[g] > result.scores[result.best_index]) result.best_index = g;
    }
    result.best = grid[result.best_index];
    return result;
}

} // namespace sitewise::learn
