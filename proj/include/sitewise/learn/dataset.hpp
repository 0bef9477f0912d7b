#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sitewise/core/error.hpp"
#include "sitewise/overlay/overlay.hpp"
#include "sitewise/overlay/sampling.hpp"

namespace sitewise::learn {

inline constexpr int kClasses = kNumClasses;

/// Dense row-major feature matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

    void append_row(std::span<const double> r) {
        if (rows_ == 0 && cols_ == 0) cols_ = r.size();
        if (r.size() != cols_) throw Error("Matrix: row length mismatch");
        data_.insert(data_.end(), r.begin(), r.end());
        ++rows_;
    }

    const std::vector<double>& data() const { return data_; }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Features plus 4-class labels.
struct Dataset {
    Matrix x;
    std::vector<int> y;

    std::size_t size() const { return y.size(); }
    std::size_t n_features() const { return x.cols(); }

    void add(std::span<const double> features, int label) {
        x.append_row(features);
        y.push_back(label);
    }

    std::array<std::size_t, kClasses> class_counts() const {
        std::array<std::size_t, kClasses> c{};
        for (int l : y) ++c[static_cast<std::size_t>(l)];
        return c;
    }

    Dataset subset(const std::vector<std::size_t>& idx) const {
        Dataset d;
        d.x = Matrix(0, x.cols());
        for (std::size_t i : idx) d.add(x.row(i), y[i]);
        return d;
    }

    void validate() const {
        if (x.rows() != y.size()) throw Error("Dataset: feature/label row mismatch");
        for (int l : y)
            if (l < 0 || l >= kClasses) throw Error("Dataset: label outside {0,1,2,3}");
    }
};

inline Dataset dataset_from_samples(const SampleSet& s, Split only) {
    Dataset d;
    d.x = Matrix(0, s.feature_names.size());
    for (const auto& r : s.rows)
        if (only == Split::none || r.split == only) d.add(r.features, r.label);
    return d;
}

/// Per-column standardization fitted on training rows only.
struct StandardScaler {
    std::vector<double> mean;
    std::vector<double> scale; // standard deviation; 1 for constant columns

    static StandardScaler fit(const Matrix& x) {
        if (x.rows() == 0) throw Error("StandardScaler: no rows");
        StandardScaler s;
        const std::size_t k = x.cols();
        s.mean.assign(k, 0.0);
        s.scale.assign(k, 0.0);
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < k; ++j) s.mean[j] += x(i, j);
        for (double& m : s.mean) m /= static_cast<double>(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i)
            for (std::size_t j = 0; j < k; ++j) s.scale[j] += (x(i, j) - s.mean[j]) * (x(i, j) - s.mean[j]);
        for (double& v : s.scale) {
            v = std::sqrt(v / static_cast<double>(x.rows()));
            if (!(v > 1e-12)) v = 1.0;
        }
        return s;
    }

    void transform_row(std::span<const double> in, std::span<double> out) const {
        for (std::size_t j = 0; j < in.size(); ++j) out[j] = (in[j] - mean[j]) / scale[j];
    }

    Matrix transform(const Matrix& x) const {
        Matrix out(x.rows(), x.cols());
        for (std::size_t i = 0; i < x.rows(); ++i) transform_row(x.row(i), out.row(i));
        return out;
    }

    Dataset transform(const Dataset& d) const { return {transform(d.x), d.y}; }

    std::size_t size() const { return mean.size(); }
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

/// Indices of the k nearest rows of `x` to `q` (ties by row index), skipping `exclude`.
inline std::vector<std::size_t> nearest_rows(const Matrix& x, std::span<const double> q, std::size_t k,
                                             std::size_t exclude = static_cast<std::size_t>(-1),
                                             const std::vector<std::size_t>* candidates = nullptr) {
    std::vector<std::pair<double, std::size_t>> d;
    auto consider = [&](std::size_t i) {
        if (i != exclude) d.emplace_back(squared_distance(x.row(i), q), i);
    };
    if (candidates) {
        d.reserve(candidates->size());
        for (std::size_t i : *candidates) consider(i);
    } else {
        d.reserve(x.rows());
        for (std::size_t i = 0; i < x.rows(); ++i) consider(i);
    }
    k = std::min(k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<std::size_t> out(k);
    for (std::size_t i = 0; i < k; ++i) out[i] = d[i].second;
    return out;
}

} // namespace sitewise::learn
