#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles/brute_force.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/learn/grid_search.hpp"
#include "sitewise/learn/metrics.hpp"
#include "sitewise/learn/smote_enn.hpp"

using namespace sitewise;
using namespace sitewise::learn;

namespace {

// Four Gaussian blobs at the corners of a square, one per class, with uneven class sizes.
Dataset blobs(std::uint64_t seed, std::array<int, 4> sizes, double spread = 0.15) {
    Rng rng = make_rng(seed);
    std::normal_distribution<double> noise(0.0, spread);
    const double cx[4] = {0, 1, 0, 1}, cy[4] = {0, 0, 1, 1};
    Dataset d;
    d.x = Matrix(0, 3);
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < sizes[c]; ++i) {
            double row[3] = {cx[c] + noise(rng), cy[c] + noise(rng),
                             uniform01(rng)};
            d.add(row, c);
        }
    return d;
}

bool on_segment(std::span<const double> p, std::span<const double> a, std::span<const double> b) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) {
        num += (p[j] - a[j]) * (b[j] - a[j]);
        den += (b[j] - a[j]) * (b[j] - a[j]);
    }
    double t = den > 0.0 ? num / den : 0.0;
    if (t < -1e-12 || t > 1 + 1e-12) return false;
    for (std::size_t j = 0; j < p.size(); ++j)
        if (std::abs(a[j] + t * (b[j] - a[j]) - p[j]) > 1e-9) return false;
    return true;
}

} // namespace

TEST(Metrics, BinaryFixture) {
    auto m = binary_metrics(40, 10, 20, 30);
    EXPECT_NEAR(m.accuracy, 0.7, 1e-12);
    EXPECT_NEAR(m.precision, 0.8, 1e-12);
    EXPECT_NEAR(m.recall, 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(m.f1, 2 * 0.8 * (2.0 / 3.0) / (0.8 + 2.0 / 3.0), 1e-12);
    EXPECT_NEAR(m.f1, 0.7273, 5e-5);
    auto empty = binary_metrics(0, 0, 0, 5);
    EXPECT_EQ(empty.precision, 0.0);
    EXPECT_EQ(empty.f1, 0.0);
}

TEST(Metrics, AucMatchesPairwiseCount) {
    Rng rng = make_rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t n = 2 + uniform_index(rng, 60);
        std::vector<double> s(n);
        std::vector<int> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(uniform_index(rng, 8)); // plenty of ties
            pos[i] = uniform01(rng) < 0.4;
        }
        pos[0] = 1;
        pos[1] = 0;
        auto got = binary_auc(s, pos);
        ASSERT_TRUE(got);
        EXPECT_NEAR(*got, oracle::pairwise_auc(s, pos), 1e-12);
    }
    EXPECT_FALSE(binary_auc({0.1, 0.2}, {1, 1}));
}

TEST(Metrics, MulticlassReportFromConfusion) {
    std::vector<int> truth, pred;
    std::vector<Proba> proba;
    auto push = [&](int t, int p, int count) {
        for (int i = 0; i < count; ++i) {
            truth.push_back(t);
            pred.push_back(p);
            Proba q{};
            q[static_cast<std::size_t>(p)] = 1.0;
            proba.push_back(q);
        }
    };
    push(0, 0, 8);
    push(0, 1, 2);
    push(1, 1, 5);
    push(2, 2, 4);
    push(2, 3, 1);
    push(3, 3, 10);
    auto r = evaluate_predictions(truth, pred, proba);
    EXPECT_EQ(r.n, 30u);
    EXPECT_EQ(r.confusion[0][1], 2u);
    EXPECT_NEAR(r.accuracy, 27.0 / 30.0, 1e-12);
    EXPECT_NEAR(r.recall, r.accuracy, 1e-12); // support-weighted recall equals accuracy
    EXPECT_NEAR(*r.class_accuracy[0], 0.8, 1e-12);
    EXPECT_NEAR(*r.class_accuracy[2], 0.8, 1e-12);
    double p1 = 5.0 / 7.0, p3 = 10.0 / 11.0;
    EXPECT_NEAR(r.precision, (10 * 1.0 + 5 * p1 + 5 * 1.0 + 10 * p3) / 30.0, 1e-12);
}

TEST(Metrics, AbsentClassHasNoAccuracyOrAuc) {
    std::vector<int> truth = {0, 0, 1, 1};
    std::vector<Proba> proba = {{0.9, 0.1, 0, 0}, {0.6, 0.4, 0, 0}, {0.3, 0.7, 0, 0}, {0.2, 0.8, 0, 0}};
    auto r = evaluate_predictions(truth, {0, 0, 1, 1}, proba);
    EXPECT_FALSE(r.class_accuracy[3]);
    EXPECT_FALSE(r.class_auc[3]);
    EXPECT_NEAR(r.auc, 1.0, 1e-12);
}

TEST(Metrics, WeightedRecallEqualsAccuracyOnRandomPredictions) {
    Rng rng = make_rng(4);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t n = 10 + uniform_index(rng, 100);
        std::vector<int> t(n), p(n);
        std::vector<Proba> q(n);
        for (std::size_t i = 0; i < n; ++i) {
            t[i] = static_cast<int>(uniform_index(rng, 4));
            p[i] = static_cast<int>(uniform_index(rng, 4));
            for (double& v : q[i]) v = uniform01(rng);
        }
        auto r = evaluate_predictions(t, p, q);
        EXPECT_NEAR(r.recall, r.accuracy, 1e-12);
        EXPECT_GE(r.f1, 0.0);
        EXPECT_LE(r.f1, 1.0);
    }
}

TEST(Smote, SynthesizedPointsLieOnSameClassSegments) {
    Dataset d = blobs(3, {40, 12, 7, 25});
    SmoteEnnStats stats;
    Dataset out = smote(d, 5, 99, &stats);
    auto counts = out.class_counts();
    for (int c = 0; c < 4; ++c) EXPECT_EQ(counts[c], 40u);
    EXPECT_EQ(stats.synthesized[2], 33u);
    for (std::size_t i = 0; i < d.size(); ++i) ASSERT_EQ(out.y[i], d.y[i]); // originals kept in place
    for (std::size_t i = d.size(); i < out.size(); ++i) {
        bool found = false;
        for (std::size_t a = 0; a < d.size() && !found; ++a)
            for (std::size_t b = 0; b < d.size() && !found; ++b)
                if (a != b && d.y[a] == out.y[i] && d.y[b] == out.y[i]) found = on_segment(out.x.row(i), d.x.row(a), d.x.row(b));
        ASSERT_TRUE(found) << "synthetic row " << i;
    }
}

TEST(Smote, SingletonClassIsRejected) {
    Dataset d = blobs(3, {10, 1, 5, 5});
    EXPECT_THROW(smote(d, 5, 1), Error);
}

TEST(Enn, DropsRowsOutvotedByNeighbours) {
    Dataset d;
    d.x = Matrix(0, 1);
    for (double v : {0.0, 0.1, 0.2, 0.3}) d.add(std::vector<double>{v}, 0);
    d.add(std::vector<double>{0.15}, 1); // lone class-1 point inside class 0
    for (double v : {5.0, 5.1, 5.2}) d.add(std::vector<double>{v}, 1);
    SmoteEnnStats stats;
    auto out = edited_nearest_neighbours(d, 3, &stats);
    EXPECT_EQ(out.size(), 7u);
    EXPECT_EQ(stats.removed[1], 1u);
    EXPECT_EQ(stats.removed[0], 0u);
}

TEST(Smote, SameSeedSameOutput) {
    Dataset d = blobs(8, {30, 10, 6, 20});
    EXPECT_EQ(smote_enn(d, {}, 5).x, smote_enn(d, {}, 5).x);
    EXPECT_NE(smote(d, 5, 5).x, smote(d, 5, 6).x);
}

class EveryKind : public ::testing::TestWithParam<ModelKind> {};

TEST_P(EveryKind, SeparatesBlobs) {
    Dataset train = blobs(1, {60, 60, 60, 60});
    Dataset test = blobs(2, {30, 30, 30, 30});
    auto h = default_hyperparameters(GetParam());
    if (GetParam() == ModelKind::random_forest) h["n_trees"] = 30;
    if (GetParam() == ModelKind::gradient_boosted_trees) h["rounds"] = 30;
    auto model = train_classifier(GetParam(), train, h, 7);
    auto r = evaluate(model, test);
    EXPECT_GE(r.accuracy, 0.95) << to_string(GetParam());
    for (std::size_t i = 0; i < test.size(); ++i) {
        auto p = model.predict_proba(test.x.row(i));
        double s = 0.0;
        for (double v : p) {
            EXPECT_GE(v, 0.0);
            s += v;
        }
        EXPECT_NEAR(s, 1.0, 1e-9);
    }
}

TEST_P(EveryKind, SaveLoadPreservesPredictions) {
    Dataset train = blobs(5, {40, 30, 20, 30}, 0.3);
    auto h = default_hyperparameters(GetParam());
    if (GetParam() == ModelKind::random_forest) h["n_trees"] = 10;
    if (GetParam() == ModelKind::gradient_boosted_trees) h["rounds"] = 10;
    auto model = train_classifier(GetParam(), train, h, 3);
    auto path = std::filesystem::temp_directory_path() / (std::string("sitewise_model_") + to_string(GetParam()) + ".json");
    model.save(path);
    auto back = TrainedClassifier::load(path);
    EXPECT_EQ(back.kind(), GetParam());
    EXPECT_EQ(back.params(), h);
    Dataset probe = blobs(6, {10, 10, 10, 10}, 0.5);
    for (std::size_t i = 0; i < probe.size(); ++i) {
        auto a = model.predict_proba(probe.x.row(i)), b = back.predict_proba(probe.x.row(i));
        for (int c = 0; c < 4; ++c) EXPECT_NEAR(a[c], b[c], 1e-12);
    }
}

TEST_P(EveryKind, SameSeedSameModel) {
    Dataset train = blobs(9, {30, 20, 20, 30}, 0.4);
    auto h = default_hyperparameters(GetParam());
    if (GetParam() == ModelKind::random_forest) h["n_trees"] = 10;
    if (GetParam() == ModelKind::gradient_boosted_trees) h["rounds"] = 10;
    auto a = train_classifier(GetParam(), train, h, 11, 1);
    auto b = train_classifier(GetParam(), train, h, 11, 3);
    EXPECT_EQ(a.to_json().dump(), b.to_json().dump());
}

INSTANTIATE_TEST_SUITE_P(Models, EveryKind, ::testing::ValuesIn(kAllKinds),
                         [](const auto& info) {
                             std::string s = to_string(info.param);
                             std::replace(s.begin(), s.end(), '-', '_');
                             return s;
                         });

TEST(Hyperparameters, UnknownKeyIsRejected) {
    EXPECT_THROW(check_hyperparameters(ModelKind::knn, {{"kk", 3}}), Error);
    EXPECT_NO_THROW(check_hyperparameters(ModelKind::random_forest, {{"max_features", 2}}));
    EXPECT_EQ(parse_model_kind("xgb"), ModelKind::gradient_boosted_trees);
    EXPECT_THROW(parse_model_kind("perceptron"), Error);
}

TEST(GridSearch, FoldsAreStratified) {
    std::vector<int> y;
    for (int c = 0; c < 4; ++c)
        for (int i = 0; i < 10 + 5 * c; ++i) y.push_back(c);
    auto fold = stratified_folds(y, 5, 1);
    for (int c = 0; c < 4; ++c) {
        std::array<int, 5> per{};
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == c) ++per[static_cast<std::size_t>(fold[i])];
        auto [mn, mx] = std::minmax_element(per.begin(), per.end());
        EXPECT_LE(*mx - *mn, 1);
    }
    EXPECT_THROW(stratified_folds({0, 0, 1}, 2, 1), Error);
}

TEST(GridSearch, TiesKeepFirstPointAndBestIsArgmax) {
    Dataset d = blobs(12, {20, 20, 20, 20}, 0.35);
    Grid same = {{{"k", 3}}, {{"k", 3}}};
    auto tie = grid_search(ModelKind::knn, d, same, 3, 1);
    EXPECT_EQ(tie.best_index, 0u);
    EXPECT_EQ(tie.scores[0], tie.scores[1]);

    auto r = grid_search(ModelKind::knn, d, default_grid(ModelKind::knn), 4, 2);
    for (std::size_t g = 0; g < r.scores.size(); ++g) {
        EXPECT_LE(r.scores[g], r.scores[r.best_index]);
        if (g < r.best_index) EXPECT_LT(r.scores[g], r.scores[r.best_index]);
    }
    EXPECT_EQ(r.best, default_grid(ModelKind::knn)[r.best_index]);
}

TEST(GridSearch, ProductEnumeratesEveryCombination) {
    auto g = grid_product({{"a", {1, 2}}, {"b", {10, 20, 30}}});
    EXPECT_EQ(g.size(), 6u);
    std::set<std::pair<double, double>> seen;
    for (const auto& h : g) seen.insert({h.at("a"), h.at("b")});
    EXPECT_EQ(seen.size(), 6u);
}
