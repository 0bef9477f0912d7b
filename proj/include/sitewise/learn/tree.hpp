#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitewise/core/random.hpp"
#include "sitewise/learn/dataset.hpp"

namespace sitewise::learn {

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::array<double, kClasses> value{}; // class distribution, or value[0] for regression leaves
};

/// Binary tree with axis-aligned splits: x[feature] <= threshold goes left.
struct DecisionTree {
    std::vector<TreeNode> nodes;

    const TreeNode& leaf(std::span<const double> x) const {
        int i = 0;
        while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
            const TreeNode& n = nodes[static_cast<std::size_t>(i)];
            i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
        }
        return nodes[static_cast<std::size_t>(i)];
    }

    int depth() const {
        std::vector<int> d(nodes.size(), 0);
        int best = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i].feature < 0) continue;
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
            best = std::max(best, d[i] + 1);
        }
        return best;
    }
};

inline nlohmann::json tree_to_json(const DecisionTree& t, bool regression) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes) {
        if (n.feature < 0) {
            if (regression) nodes.push_back({{"leaf", n.value[0]}});
            else nodes.push_back({{"leaf", n.value}});
        } else {
            nodes.push_back({{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
        }
    }
    return nodes;
}

inline DecisionTree tree_from_json(const nlohmann::json& j, bool regression) {
    DecisionTree t;
    for (const auto& n : j) {
        TreeNode node;
        if (n.contains("leaf")) {
            if (regression) node.value[0] = n.at("leaf").get<double>();
            else node.value = n.at("leaf").get<std::array<double, kClasses>>();
        } else {
            node.feature = n.at("f").get<int>();
            node.threshold = n.at("t").get<double>();
            node.left = n.at("l").get<int>();
            node.right = n.at("r").get<int>();
        }
        t.nodes.push_back(node);
    }
    return t;
}

/// Row indices of each feature column in ascending value order (ties by row index).
struct SortedColumns {
    std::vector<std::vector<std::uint32_t>> order;

    explicit SortedColumns(const Matrix& x) : order(x.cols()) {
        for (std::size_t f = 0; f < x.cols(); ++f) {
            auto& o = order[f];
            o.resize(x.rows());
            std::iota(o.begin(), o.end(), 0u);
            std::stable_sort(o.begin(), o.end(), [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
        }
    }
};

struct TreeParams {
    int max_depth = 0;              // 0: grow until pure / unsplittable
    int max_features = 0;           // features examined per node; 0: all
    double min_leaf_weight = 1.0;   // per-child minimum of the policy's weight measure
    double min_gain = 1e-12;        // splits must improve the objective by more than this
};

/// Gini splitting: maximizes sum_c L_c^2/|L| + sum_c R_c^2/|R|, which is equivalent to the
/// largest weighted impurity decrease. Leaves hold class frequencies.
struct GiniPolicy {
    struct Stats {
        std::array<double, kClasses> count{};
        double total = 0.0;
    };
    const std::vector<int>* y = nullptr;

    void add(Stats& s, std::size_t row, double w) const {
        s.count[static_cast<std::size_t>((*y)[row])] += w;
        s.total += w;
    }
    static Stats subtract(const Stats& a, const Stats& b) {
        Stats s;
        for (int c = 0; c < kClasses; ++c) s.count[c] = a.count[c] - b.count[c];
        s.total = a.total - b.total;
        return s;
    }
    static double term(const Stats& s) {
        if (s.total <= 0.0) return 0.0;
        double q = 0.0;
        for (double c : s.count) q += c * c;
        return q / s.total;
    }
    static double weight(const Stats& s) { return s.total; }
    static bool pure(const Stats& s) {
        int nonzero = 0;
        for (double c : s.count) nonzero += c > 0.0;
        return nonzero <= 1;
    }
    static std::array<double, kClasses> leaf(const Stats& s) {
        std::array<double, kClasses> v{};
        for (int c = 0; c < kClasses; ++c) v[c] = s.total > 0.0 ? s.count[c] / s.total : 0.25;
        return v;
    }
};

/// Second-order gradient splitting with L2 leaf regularization: gain terms G^2 / (H + lambda),
/// leaf weight -G / (H + lambda) scaled by the learning rate.
struct GradientPolicy {
    struct Stats {
        double g = 0.0;
        double h = 0.0;
    };
    const std::vector<double>* grad = nullptr;
    const std::vector<double>* hess = nullptr;
    double lambda = 1.0;
    double learning_rate = 0.1;

    void add(Stats& s, std::size_t row, double w) const {
        s.g += w * (*grad)[row];
        s.h += w * (*hess)[row];
    }
    static Stats subtract(const Stats& a, const Stats& b) { return {a.g - b.g, a.h - b.h}; }
    double term(const Stats& s) const { return 0.5 * s.g * s.g / (s.h + lambda); }
    static double weight(const Stats& s) { return s.h; }
    static bool pure(const Stats&) { return false; }
    std::array<double, kClasses> leaf(const Stats& s) const {
        std::array<double, kClasses> v{};
        v[0] = -learning_rate * s.g / (s.h + lambda);
        return v;
    }
};

/// Level-wise exact greedy tree growth over presorted columns. `row_weight[i]` is the
/// multiplicity of row i in this tree's sample (0 excludes it). Adds the objective
/// improvement of every split to `importance[feature]` when given.
template <class Policy>
DecisionTree grow_tree(const Matrix& x, const SortedColumns& sorted, std::span<const double> row_weight,
                       const Policy& policy, const TreeParams& params, Rng* rng, std::vector<double>* importance) {
    using Stats = typename Policy::Stats;
    const std::size_t n = x.rows();
    const std::size_t k = x.cols();
    const std::size_t max_features =
        params.max_features <= 0 ? k : std::min<std::size_t>(k, static_cast<std::size_t>(params.max_features));
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();

    DecisionTree tree;
    std::vector<int> node_of(n, -1);
    Stats root;
    for (std::size_t i = 0; i < n; ++i) {
        if (row_weight[i] > 0.0) {
            node_of[i] = 0;
            policy.add(root, i, row_weight[i]);
        }
    }
    tree.nodes.push_back({});
    std::vector<Stats> stats{root};
    std::vector<int> frontier{0};
    int depth = 0;

    struct Best {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
    };

    while (!frontier.empty()) {
        // Which frontier nodes try to split, and on which features.
        std::vector<int> slot(tree.nodes.size(), -1);
        std::vector<int> active;
        std::vector<std::vector<bool>> uses;
        for (int id : frontier) {
            const Stats& s = stats[static_cast<std::size_t>(id)];
            bool can_split = (params.max_depth <= 0 || depth < params.max_depth) && !Policy::pure(s) &&
                             Policy::weight(s) >= 2.0 * params.min_leaf_weight;
            if (!can_split) {
                tree.nodes[static_cast<std::size_t>(id)].value = policy.leaf(s);
                continue;
            }
            slot[static_cast<std::size_t>(id)] = static_cast<int>(active.size());
            active.push_back(id);
            std::vector<bool> use(k, max_features == k);
            if (max_features < k) {
                std::vector<std::size_t> feats(k);
                std::iota(feats.begin(), feats.end(), 0);
                for (std::size_t t = 0; t < max_features; ++t) {
                    std::size_t j = t + static_cast<std::size_t>(uniform_index(*rng, k - t));
                    std::swap(feats[t], feats[j]);
                    use[feats[t]] = true;
                }
            }
            uses.push_back(std::move(use));
        }
        if (active.empty()) break;

        std::vector<Best> best(active.size());
        std::vector<Stats> left(active.size());
        std::vector<double> last(active.size());
        for (std::size_t f = 0; f < k; ++f) {
            std::fill(left.begin(), left.end(), Stats{});
            std::fill(last.begin(), last.end(), nan);
            for (std::uint32_t r : sorted.order[f]) {
                int node = node_of[r];
                if (node < 0) continue;
                int a = slot[static_cast<std::size_t>(node)];
                if (a < 0 || !uses[static_cast<std::size_t>(a)][f]) continue;
                const double v = x(r, f);
                double& prev = last[static_cast<std::size_t>(a)];
                if (!std::isnan(prev) && v > prev) {
                    const Stats& parent = stats[static_cast<std::size_t>(node)];
                    const Stats& l = left[static_cast<std::size_t>(a)];
                    Stats rgt = Policy::subtract(parent, l);
                    if (Policy::weight(l) >= params.min_leaf_weight && Policy::weight(rgt) >= params.min_leaf_weight) {
                        double gain = policy.term(l) + policy.term(rgt) - policy.term(parent);
                        Best& b = best[static_cast<std::size_t>(a)];
                        if (gain > b.gain + params.min_gain || (b.feature < 0 && gain > params.min_gain)) {
                            double thr = prev + (v - prev) * 0.5;
                            if (!(thr < v)) thr = prev;
                            b = {gain, static_cast<int>(f), thr};
                        }
                    }
                }
                policy.add(left[static_cast<std::size_t>(a)], r, row_weight[r]);
                prev = v;
            }
        }

        std::vector<int> next;
        std::vector<int> child_left(tree.nodes.size(), -1);
        for (std::size_t a = 0; a < active.size(); ++a) {
            int id = active[a];
            const Best& b = best[a];
            if (b.feature < 0) {
                tree.nodes[static_cast<std::size_t>(id)].value = policy.leaf(stats[static_cast<std::size_t>(id)]);
                slot[static_cast<std::size_t>(id)] = -1;
                continue;
            }
            int l = static_cast<int>(tree.nodes.size());
            tree.nodes.push_back({});
            tree.nodes.push_back({});
            stats.push_back({});
            stats.push_back({});
            TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
            node.feature = b.feature;
            node.threshold = b.threshold;
            node.left = l;
            node.right = l + 1;
            child_left[static_cast<std::size_t>(id)] = l;
            next.push_back(l);
            next.push_back(l + 1);
            if (importance) (*importance)[static_cast<std::size_t>(b.feature)] += b.gain;
        }
        for (std::size_t i = 0; i < n; ++i) {
            int node = node_of[i];
            if (node < 0 || node >= static_cast<int>(child_left.size())) continue;
            int l = child_left[static_cast<std::size_t>(node)];
            if (l < 0) {
                node_of[i] = -1; // finished leaf
                continue;
            }
            const TreeNode& tn = tree.nodes[static_cast<std::size_t>(node)];
            int child = x(i, static_cast<std::size_t>(tn.feature)) <= tn.threshold ? l : l + 1;
            node_of[i] = child;
            policy.add(stats[static_cast<std::size_t>(child)], i, row_weight[i]);
        }
        frontier = std::move(next);
        ++depth;
    }
    return tree;
}

} // namespace sitewise::learn
