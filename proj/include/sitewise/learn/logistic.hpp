#pragma once

#include <cmath>
#include <memory>
#include <vector>

#include "sitewise/learn/model.hpp"

namespace sitewise::learn {

struct LogisticParams {
    double lambda = 0.01; // L2 penalty on coefficients (not the intercept)
    int max_iterations = 2000;
    double tolerance = 1e-8; // stop when the gradient norm falls below this
};

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

/// One-vs-rest L2-regularized logistic models trained by Nesterov-accelerated gradient
/// descent. Class probabilities are the per-class sigmoids renormalized to sum to one.
class LogisticRegression final : public Model {
public:
    std::vector<std::vector<double>> w; // per class, K coefficients
    std::array<double, kClasses> q{};   // per class intercept
    std::array<bool, kClasses> present{};

    static std::shared_ptr<LogisticRegression> fit(const Dataset& d, const LogisticParams& p) {
        d.validate();
        const std::size_t n = d.size(), k = d.n_features();
        if (n == 0) throw Error("logistic regression: empty training set");
        if (p.lambda < 0.0 || p.max_iterations < 1) throw Error("logistic regression: invalid hyperparameters");
        auto m = std::make_shared<LogisticRegression>();
        m->present = classes_present(d.y);
        m->w.assign(kClasses, std::vector<double>(k, 0.0));

        // Lipschitz bound of the mean log-loss gradient: 1/4 trace of the (bias-augmented) Gram matrix.
        double trace = 1.0;
        for (double v : d.x.data()) trace += v * v / static_cast<double>(n);
        const double step = 1.0 / (0.25 * trace + p.lambda);

        for (int c = 0; c < kClasses; ++c) {
            if (!m->present[c]) continue;
            std::vector<double> theta(k + 1, 0.0), prev = theta, look(k + 1), g(k + 1);
            for (int it = 1; it <= p.max_iterations; ++it) {
                double mom = (it - 1.0) / (it + 2.0);
                for (std::size_t j = 0; j <= k; ++j) look[j] = theta[j] + mom * (theta[j] - prev[j]);
                std::fill(g.begin(), g.end(), 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    auto x = d.x.row(i);
                    double z = look[k];
                    for (std::size_t j = 0; j < k; ++j) z += look[j] * x[j];
                    double r = sigmoid(z) - (d.y[i] == c ? 1.0 : 0.0);
                    for (std::size_t j = 0; j < k; ++j) g[j] += r * x[j];
                    g[k] += r;
                }
                double norm = 0.0;
                for (std::size_t j = 0; j <= k; ++j) {
                    g[j] /= static_cast<double>(n);
                    if (j < k) g[j] += p.lambda * look[j];
                    norm += g[j] * g[j];
                }
                prev = theta;
                for (std::size_t j = 0; j <= k; ++j) theta[j] = look[j] - step * g[j];
                if (std::sqrt(norm) < p.tolerance) break;
            }
            for (std::size_t j = 0; j < k; ++j) m->w[c][j] = theta[j];
            m->q[c] = theta[k];
        }
        return m;
    }

    /// Sigmoid output of class c's one-vs-rest model.
    double ovr_sigmoid(int c, std::span<const double> x) const {
        double z = q[c];
        for (std::size_t j = 0; j < x.size(); ++j) z += w[c][j] * x[j];
        return sigmoid(z);
    }

    ModelKind kind() const override { return ModelKind::logistic_regression; }

    Proba proba(std::span<const double> x) const override {
        Proba p{};
        double s = 0.0;
        for (int c = 0; c < kClasses; ++c)
            if (present[c]) s += p[c] = ovr_sigmoid(c, x);
        if (s > 0.0) {
            for (double& v : p) v /= s;
        } else {
            int n = 0;
            for (bool b : present) n += b;
            for (int c = 0; c < kClasses; ++c) p[c] = present[c] ? 1.0 / n : 0.0;
        }
        return p;
    }

    std::vector<double> mean_abs_coef() const {
        std::vector<double> out(w.empty() ? 0 : w[0].size(), 0.0);
        int n = 0;
        for (int c = 0; c < kClasses; ++c) {
            if (!present[c]) continue;
            ++n;
            for (std::size_t j = 0; j < out.size(); ++j) out[j] += std::abs(w[c][j]);
        }
        for (double& v : out) v /= std::max(n, 1);
        return out;
    }

    nlohmann::json to_json() const override { return {{"w", w}, {"q", q}, {"present", present}}; }

    static std::shared_ptr<LogisticRegression> from_json(const nlohmann::json& j) {
        auto m = std::make_shared<LogisticRegression>();
        m->w = j.at("w").get<std::vector<std::vector<double>>>();
        m->q = j.at("q").get<std::array<double, kClasses>>();
        m->present = j.at("present").get<std::array<bool, kClasses>>();
        return m;
    }

    std::optional<std::vector<double>> intrinsic_importance() const override { return mean_abs_coef(); }
};

} // namespace sitewise::learn
