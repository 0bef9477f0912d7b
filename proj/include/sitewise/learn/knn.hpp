#pragma once

#include <algorithm>
#include <memory>
#include <vector>

#include "sitewise/learn/model.hpp"

namespace sitewise::learn {

/// k-nearest-neighbour classifier over stored exemplars. Prediction is the neighbourhood
/// mode; among tied classes the one owning the nearest neighbour wins.
class Knn final : public Model {
public:
    int k = 5;
    Dataset exemplars;

    static std::shared_ptr<Knn> fit(const Dataset& d, int k) {
        d.validate();
        if (k < 1) throw Error("knn: k must be >= 1");
        if (static_cast<std::size_t>(k) > d.size())
            throw Error("knn: k = " + std::to_string(k) + " exceeds " + std::to_string(d.size()) + " training rows");
        auto m = std::make_shared<Knn>();
        m->k = k;
        m->exemplars = d;
        return m;
    }

    ModelKind kind() const override { return ModelKind::knn; }

    Proba proba(std::span<const double> x) const override {
        Proba p{};
        auto nn = nearest_rows(exemplars.x, x, static_cast<std::size_t>(k));
        for (std::size_t i : nn) p[static_cast<std::size_t>(exemplars.y[i])] += 1.0;
        for (double& v : p) v /= static_cast<double>(nn.size());
        return p;
    }

    int predict(std::span<const double> x) const override {
        auto nn = nearest_rows(exemplars.x, x, static_cast<std::size_t>(k));
        std::array<int, kClasses> count{};
        for (std::size_t i : nn) ++count[static_cast<std::size_t>(exemplars.y[i])];
        int top = *std::max_element(count.begin(), count.end());
        // nn is ordered by distance, so the first tied class met is the nearest one.
        for (std::size_t i : nn)
            if (count[static_cast<std::size_t>(exemplars.y[i])] == top) return exemplars.y[i];
        return 0;
    }

    nlohmann::json to_json() const override {
        return {{"k", k}, {"n_features", exemplars.n_features()}, {"x", exemplars.x.data()}, {"y", exemplars.y}};
    }

    static std::shared_ptr<Knn> from_json(const nlohmann::json& j) {
        auto m = std::make_shared<Knn>();
        m->k = j.at("k").get<int>();
        auto nf = j.at("n_features").get<std::size_t>();
        auto flat = j.at("x").get<std::vector<double>>();
        auto y = j.at("y").get<std::vector<int>>();
        m->exemplars.x = Matrix(0, nf);
        for (std::size_t i = 0; i < y.size(); ++i) m->exemplars.add(std::span<const double>(flat.data() + i * nf, nf), y[i]);
        return m;
    }
};

} // namespace sitewise::learn
