#pragma once

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/core/parallel.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/learn/classifier.hpp"
#include "sitewise/overlay/weights.hpp"

namespace sitewise::explain {

using learn::kClasses;
using learn::Matrix;
using learn::Proba;

inline constexpr int kMaxExactFeatures = 12;

/// Shapley values from a table of coalition values v[S], S a bitmask over k features:
/// phi_i = sum over S without i of |S|! (k - |S| - 1)! / k! * (v[S + i] - v[S]).
inline std::vector<double> shapley_from_values(const std::vector<double>& v, int k) {
    if (k < 1 || k > 30 || v.size() != (std::size_t{1} << k)) throw Error("shapley: value table must have 2^k entries");
    std::vector<double> weight(static_cast<std::size_t>(k));
    for (int s = 0; s < k; ++s) {
        // s! (k - s - 1)! / k! computed as 1 / (k * C(k - 1, s)).
        double binom = 1.0;
        for (int t = 1; t <= s; ++t) binom = binom * (k - 1 - s + t) / t;
        weight[static_cast<std::size_t>(s)] = 1.0 / (k * binom);
    }
    std::vector<double> phi(static_cast<std::size_t>(k), 0.0);
    const std::uint32_t full = (std::uint32_t{1} << k);
    for (int i = 0; i < k; ++i) {
        const std::uint32_t bit = std::uint32_t{1} << i;
        double acc = 0.0;
        for (std::uint32_t s = 0; s < full; ++s) {
            if (s & bit) continue;
            acc += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
        }
        phi[static_cast<std::size_t>(i)] = acc;
    }
    return phi;
}

/// Exact Shapley values of a set function, evaluating it once per coalition.
template <class ValueFn>
std::vector<double> exact_shapley(int k, ValueFn&& value) {
    if (k < 1) throw Error("shapley: need at least one feature");
    if (k > kMaxExactFeatures)
        throw Error("shapley: " + std::to_string(k) + " features exceed the exact limit of " +
                    std::to_string(kMaxExactFeatures) + "; use the sampling estimator");
    std::vector<double> v(std::size_t{1} << k);
    for (std::uint32_t s = 0; s < v.size(); ++s) v[s] = value(s);
    return shapley_from_values(v, k);
}

struct SampledShapley {
    std::vector<double> phi;
    std::vector<double> std_error;
};

/// Antithetic permutation estimator: each random ordering is paired with its reverse, and
/// the standard error is taken over the pair means. Efficiency holds exactly per ordering.
template <class ValueFn>
SampledShapley sampled_shapley(int k, ValueFn&& value, int n_pairs, std::uint64_t seed) {
    if (k < 1 || n_pairs < 1) throw Error("sampled shapley: need k >= 1 and n_pairs >= 1");
    Rng rng = make_rng(seed, 0x5A);
    std::vector<int> order(static_cast<std::size_t>(k));
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0), sum2(static_cast<std::size_t>(k), 0.0);
    std::vector<double> pair(static_cast<std::size_t>(k));
    auto walk = [&](const std::vector<int>& ord, std::vector<double>& contrib) {
        std::uint64_t s = 0;
        double prev = value(s);
        for (int f : ord) {
            s |= std::uint64_t{1} << f;
            double cur = value(s);
            contrib[static_cast<std::size_t>(f)] += cur - prev;
            prev = cur;
        }
    };
    for (int p = 0; p < n_pairs; ++p) {
        std::iota(order.begin(), order.end(), 0);
        shuffle(order, rng);
        std::fill(pair.begin(), pair.end(), 0.0);
        walk(order, pair);
        std::vector<int> rev(order.rbegin(), order.rend());
        walk(rev, pair);
        for (std::size_t i = 0; i < pair.size(); ++i) {
            double m = pair[i] / 2.0;
            sum[i] += m;
            sum2[i] += m * m;
        }
    }
    SampledShapley out;
    for (std::size_t i = 0; i < sum.size(); ++i) {
        double mean = sum[i] / n_pairs;
        out.phi.push_back(mean);
        double var = n_pairs > 1 ? std::max(0.0, (sum2[i] - n_pairs * mean * mean) / (n_pairs - 1)) : 0.0;
        out.std_error.push_back(std::sqrt(var / n_pairs));
    }
    return out;
}

/// Per (sample, feature, class) attributions of a classifier's class probabilities.
struct ShapleyReport {
    std::vector<std::string> feature_names;
    std::vector<int> sample_ids;
    std::vector<double> phi;        // [(sample * K + feature) * kClasses + class]
    std::vector<double> std_error;  // same layout; empty when exact
    Proba base_value{};             // f(empty set) per class
    std::vector<Proba> full_value;  // f(all features) per sample
    bool exact = true;

    std::size_t n_samples() const { return sample_ids.size(); }
    std::size_t n_features() const { return feature_names.size(); }

    double at(std::size_t s, std::size_t i, int c) const {
        return phi[(s * n_features() + i) * kClasses + static_cast<std::size_t>(c)];
    }

    /// Mean |phi| per feature over samples and all classes.
    std::vector<double> mean_abs() const {
        std::vector<double> m(n_features(), 0.0);
        if (n_samples() == 0) return m;
        for (std::size_t s = 0; s < n_samples(); ++s)
            for (std::size_t i = 0; i < n_features(); ++i)
                for (int c = 0; c < kClasses; ++c) m[i] += std::abs(at(s, i, c));
        for (double& v : m) v /= static_cast<double>(n_samples() * kClasses);
        return m;
    }
};

struct ExplainOptions {
    unsigned threads = 1;
    int n_permutation_pairs = 64; // sampling estimator, used only above the exact limit
    std::uint64_t seed = 0;
};

/// Interventional value function: f_c(S) = mean over background rows b of the model's class-c
/// probability at the point taking features in S from x and the others from b.
inline ShapleyReport explain_model(const learn::TrainedClassifier& model, const Matrix& rows,
                                   const std::vector<int>& ids, const Matrix& background,
                                   const std::vector<std::string>& names, const ExplainOptions& opt = {}) {
    const std::size_t k = names.size();
    if (background.rows() == 0) throw Error("explain: empty background sample");
    if (rows.cols() != k || background.cols() != k || model.n_features() != k) throw Error("explain: feature count mismatch");
    if (ids.size() != rows.rows()) throw Error("explain: sample id count mismatch");

    ShapleyReport rep;
    rep.feature_names = names;
    rep.sample_ids = ids;
    rep.phi.assign(rows.rows() * k * kClasses, 0.0);
    rep.full_value.resize(rows.rows());
    rep.exact = static_cast<int>(k) <= kMaxExactFeatures;
    if (!rep.exact) rep.std_error.assign(rep.phi.size(), 0.0);

    auto coalition = [&](std::span<const double> x, std::uint64_t mask, std::vector<double>& point) {
        Proba acc{};
        for (std::size_t b = 0; b < background.rows(); ++b) {
            auto bg = background.row(b);
            for (std::size_t j = 0; j < k; ++j) point[j] = (mask >> j) & 1u ? x[j] : bg[j];
            Proba p = model.predict_proba(point);
            for (int c = 0; c < kClasses; ++c) acc[c] += p[c];
        }
        for (double& a : acc) a /= static_cast<double>(background.rows());
        return acc;
    };
    {
        std::vector<double> point(k);
        rep.base_value = coalition(background.row(0), 0, point);
    }

    parallel_for(rows.rows(), opt.threads, [&](std::size_t s) {
        auto x = rows.row(s);
        std::vector<double> point(k);
        if (rep.exact) {
            const std::size_t n_masks = std::size_t{1} << k;
            std::array<std::vector<double>, kClasses> v;
            for (auto& t : v) t.resize(n_masks);
            for (int c = 0; c < kClasses; ++c) v[c][0] = rep.base_value[c];
            for (std::uint64_t m = 1; m < n_masks; ++m) {
                Proba p = coalition(x, m, point);
                for (int c = 0; c < kClasses; ++c) v[c][m] = p[c];
            }
            for (int c = 0; c < kClasses; ++c) {
                auto phi = shapley_from_values(v[c], static_cast<int>(k));
                for (std::size_t i = 0; i < k; ++i) rep.phi[(s * k + i) * kClasses + static_cast<std::size_t>(c)] = phi[i];
                rep.full_value[s][c] = v[c][n_masks - 1];
            }
        } else {
            for (int c = 0; c < kClasses; ++c) {
                auto value = [&](std::uint64_t m) { return m == 0 ? rep.base_value[c] : coalition(x, m, point)[c]; };
                auto est = sampled_shapley(static_cast<int>(k), value, opt.n_permutation_pairs, derive_seed(opt.seed, s));
                for (std::size_t i = 0; i < k; ++i) {
                    rep.phi[(s * k + i) * kClasses + static_cast<std::size_t>(c)] = est.phi[i];
                    rep.std_error[(s * k + i) * kClasses + static_cast<std::size_t>(c)] = est.std_error[i];
                }
                rep.full_value[s][c] = coalition(x, (std::uint64_t{1} << k) - 1, point)[c];
            }
        }
    });
    return rep;
}

/// Weights proportional to mean |phi| over samples and classes.
inline WeightVector shap_to_weights(const ShapleyReport& rep) {
    auto m = rep.mean_abs();
    double total = 0.0;
    for (double v : m) total += v;
    if (!(total > 0.0)) throw Error("shap_to_weights: all attributions are zero");
    return WeightVector::normalized(rep.feature_names, m);
}

/// Cross-model mode: mean |phi| averaged over models, then normalized.
inline WeightVector shap_to_weights(const std::vector<ShapleyReport>& reports) {
    if (reports.empty()) throw Error("shap_to_weights: no reports");
    std::vector<double> acc(reports.front().n_features(), 0.0);
    for (const auto& r : reports) {
        if (r.feature_names != reports.front().feature_names) throw Error("shap_to_weights: reports disagree on features");
        auto m = r.mean_abs();
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += m[i] / static_cast<double>(reports.size());
    }
    double total = 0.0;
    for (double v : acc) total += v;
    if (!(total > 0.0)) throw Error("shap_to_weights: all attributions are zero");
    return WeightVector::normalized(reports.front().feature_names, acc);
}

/// shap_report.csv: sample_id,class,<feature phi columns>,base_value
inline std::string format_shap_report(const ShapleyReport& rep) {
    std::string out = "sample_id,class";
    for (const auto& n : rep.feature_names) out += "," + csv_escape(n);
    out += ",base_value\n";
    for (std::size_t s = 0; s < rep.n_samples(); ++s)
        for (int c = 0; c < kClasses; ++c) {
            CsvLine line;
            line << rep.sample_ids[s] << c;
            for (std::size_t i = 0; i < rep.n_features(); ++i) line << rep.at(s, i, c);
            line << rep.base_value[c];
            out += line.str() + "\n";
        }
    return out;
}

inline std::string format_mean_abs(const std::vector<std::string>& names, const std::vector<double>& m) {
    std::string out = "criterion,mean_abs_shap\n";
    for (std::size_t i = 0; i < names.size(); ++i) out += (CsvLine() << names[i] << m[i]).str() + "\n";
    return out;
}

} // namespace sitewise::explain
