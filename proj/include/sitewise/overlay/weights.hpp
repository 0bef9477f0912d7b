#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"

namespace sitewise {

/// Named non-negative criterion weights summing to one, in criteria order.
class WeightVector {
public:
    static constexpr double kSumTolerance = 1e-9;

    WeightVector() = default;

    WeightVector(std::vector<std::string> names, std::vector<double> weights)
        : names_(std::move(names)), weights_(std::move(weights)) {
        validate();
    }

    static WeightVector equal(const std::vector<std::string>& names) {
        if (names.empty()) throw Error("WeightVector: no criteria");
        return WeightVector(names, std::vector<double>(names.size(), 1.0 / static_cast<double>(names.size())));
    }

    /// Normalizes non-negative raw scores to sum to one.
    static WeightVector normalized(std::vector<std::string> names, std::vector<double> raw) {
        double total = 0.0;
        for (double v : raw) {
            if (v < 0.0 || !std::isfinite(v)) throw Error("WeightVector: raw weights must be finite and non-negative");
            total += v;
        }
        if (!(total > 0.0)) throw Error("WeightVector: all raw weights are zero");
        for (double& v : raw) v /= total;
        return WeightVector(std::move(names), std::move(raw));
    }

    std::size_t size() const { return weights_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<double>& values() const { return weights_; }
    double operator[](std::size_t i) const { return weights_[i]; }

    double get(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return weights_[i];
        throw Error("WeightVector: unknown criterion '" + name + "'");
    }

    /// Indices sorted by descending weight, ties by position.
    std::vector<std::size_t> ranking() const {
        std::vector<std::size_t> idx(weights_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return weights_[a] > weights_[b]; });
        return idx;
    }

    double max_abs_difference(const WeightVector& o) const {
        if (o.size() != size()) throw Error("WeightVector: size mismatch");
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i) m = std::max(m, std::abs(weights_[i] - o.weights_[i]));
        return m;
    }

    friend bool operator==(const WeightVector&, const WeightVector&) = default;

private:
    void validate() const {
        if (names_.size() != weights_.size()) throw Error("WeightVector: names and weights differ in length");
        if (weights_.empty()) throw Error("WeightVector: no criteria");
        double total = 0.0;
        for (double w : weights_) {
            if (!(w >= 0.0) || !std::isfinite(w)) throw Error("WeightVector: weights must be finite and non-negative");
            total += w;
        }
        if (std::abs(total - 1.0) > kSumTolerance) throw Error("WeightVector: weights must sum to 1");
    }

    std::vector<std::string> names_;
    std::vector<double> weights_;
};

inline std::string format_weights(const WeightVector& w) {
    std::string out = "criterion,weight\n";
    for (std::size_t i = 0; i < w.size(); ++i) out += (CsvLine() << w.names()[i] << w[i]).str() + "\n";
    return out;
}

inline WeightVector load_weights(const std::filesystem::path& path) {
    CsvTable t = load_csv(path);
    int cn = t.require_column("criterion"), cw = t.require_column("weight");
    std::vector<std::string> names;
    std::vector<double> weights;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        names.push_back(t.rows[r][static_cast<std::size_t>(cn)]);
        weights.push_back(t.number(r, cw));
    }
    return WeightVector(std::move(names), std::move(weights));
}

/// Parses "name:weight,name:weight,..." and normalizes to sum one.
inline WeightVector parse_weight_spec(const std::string& spec) {
    std::vector<std::string> names;
    std::vector<double> raw;
    std::size_t pos = 0;
    while (pos <= spec.size()) {
        auto comma = spec.find(',', pos);
        std::string item = spec.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        auto colon = item.find(':');
        if (colon == std::string::npos) throw Error("weight spec item '" + item + "' is not name:weight");
        auto v = parse_double(item.substr(colon + 1));
        if (!v) throw Error("weight spec item '" + item + "' has a non-numeric weight");
        names.push_back(std::string(trim(item.substr(0, colon))));
        raw.push_back(*v);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return WeightVector::normalized(std::move(names), std::move(raw));
}

} // namespace sitewise
