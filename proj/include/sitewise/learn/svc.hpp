#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <vector>

#include "sitewise/core/parallel.hpp"
#include "sitewise/learn/model.hpp"

namespace sitewise::learn {

struct SvcParams {
    double c = 1.0;
    double gamma = 0.0; // 0: 1/K
    double tolerance = 1e-3;
    long max_iterations = 0; // 0: max(10^7, 100 n)
};

namespace detail {

/// Binary soft-margin dual solved by SMO with second-order working-set selection:
/// min 1/2 a'Qa - e'a, 0 <= a <= C, y'a = 0, Q_ij = y_i y_j K_ij. Returns (alpha, bias).
inline std::pair<std::vector<double>, double> smo(const std::vector<double>& kernel, std::size_t n,
                                                  const std::vector<double>& y, double c, double eps, long max_iter) {
    constexpr double tau = 1e-12;
    std::vector<double> alpha(n, 0.0), grad(n, -1.0);
    auto K = [&](std::size_t i, std::size_t j) { return kernel[i * n + j]; };
    auto up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0); };
    auto low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0) || (y[t] < 0 && alpha[t] < c); };

    for (long iter = 0; iter < max_iter; ++iter) {
        double gmax = -INFINITY, gmax2 = -INFINITY;
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t)
            if (up(t) && -y[t] * grad[t] >= gmax) {
                gmax = -y[t] * grad[t];
                i = t;
            }
        if (i == n) break;
        std::size_t j = n;
        double obj_min = INFINITY;
        for (std::size_t t = 0; t < n; ++t) {
            if (!low(t)) continue;
            double v = y[t] * grad[t];
            gmax2 = std::max(gmax2, v);
            double b = gmax + v;
            if (b > 0.0) {
                double a = K(i, i) + K(t, t) - 2.0 * K(i, t);
                if (a <= 0.0) a = tau;
                double o = -(b * b) / a;
                if (o <= obj_min) {
                    obj_min = o;
                    j = t;
                }
            }
        }
        if (gmax + gmax2 < eps || j == n) break;

        const double qii = K(i, i), qjj = K(j, j), qij = y[i] * y[j] * K(i, j);
        const double old_i = alpha[i], old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = qii + qjj + 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            double delta = (-grad[i] - grad[j]) / quad;
            double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0 && alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
            else if (diff <= 0 && alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
            if (diff > 0 && alpha[i] > c) { alpha[i] = c; alpha[j] = c - diff; }
            else if (diff <= 0 && alpha[j] > c) { alpha[j] = c; alpha[i] = c + diff; }
        } else {
            double quad = qii + qjj - 2.0 * qij;
            if (quad <= 0.0) quad = tau;
            double delta = (grad[i] - grad[j]) / quad;
            double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c && alpha[i] > c) { alpha[i] = c; alpha[j] = sum - c; }
            else if (sum <= c && alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
            if (sum > c && alpha[j] > c) { alpha[j] = c; alpha[i] = sum - c; }
            else if (sum <= c && alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
        }
        const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
        for (std::size_t t = 0; t < n; ++t)
            grad[t] += y[t] * (y[i] * K(t, i) * di + y[j] * K(t, j) * dj);
    }

    // Bias from free vectors, else the midpoint of the feasible interval.
    double ub = INFINITY, lb = -INFINITY, sum = 0.0;
    int free = 0;
    for (std::size_t t = 0; t < n; ++t) {
        double yg = y[t] * grad[t];
        if (alpha[t] >= c) {
            if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (alpha[t] <= 0) {
            if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++free;
            sum += yg;
        }
    }
    double rho = free > 0 ? sum / free : (ub + lb) / 2.0;
    return {alpha, -rho};
}

} // namespace detail

/// One-vs-rest RBF support vector classifiers sharing one support-vector pool. Probabilities
/// are a softmax over the decision values (uncalibrated).
class SvcRbf final : public Model {
public:
    double gamma = 1.0;
    Matrix support;                                   // union of support vectors
    std::vector<std::array<double, kClasses>> coef;   // alpha_i y_i per class, per support vector
    std::array<double, kClasses> bias{};
    std::array<bool, kClasses> present{};

    static std::shared_ptr<SvcRbf> fit(const Dataset& d, const SvcParams& p, unsigned threads = 1) {
        d.validate();
        const std::size_t n = d.size(), k = d.n_features();
        if (n < 2) throw Error("svc: need at least 2 training rows");
        if (!(p.c > 0.0) || p.gamma < 0.0) throw Error("svc: C must be > 0 and gamma >= 0");
        auto m = std::make_shared<SvcRbf>();
        m->gamma = p.gamma > 0.0 ? p.gamma : 1.0 / static_cast<double>(k);
        m->present = classes_present(d.y);

        std::vector<double> kernel(n * n);
        parallel_for(n, threads, [&](std::size_t i) {
            for (std::size_t j = 0; j < n; ++j) kernel[i * n + j] = std::exp(-m->gamma * squared_distance(d.x.row(i), d.x.row(j)));
        });
        const long max_iter = p.max_iterations > 0 ? p.max_iterations : std::max<long>(10000000L, 100L * static_cast<long>(n));
        std::array<std::vector<double>, kClasses> alpha;
        std::vector<int> active;
        for (int c = 0; c < kClasses; ++c)
            if (m->present[c]) active.push_back(c);
        parallel_for(active.size(), threads, [&](std::size_t a) {
            int c = active[a];
            std::vector<double> y(n);
            for (std::size_t i = 0; i < n; ++i) y[i] = d.y[i] == c ? 1.0 : -1.0;
            if (active.size() == 1) { // single class: constant positive decision
                alpha[c].assign(n, 0.0);
                m->bias[c] = 1.0;
                return;
            }
            auto [al, b] = detail::smo(kernel, n, y, p.c, p.tolerance, max_iter);
            for (std::size_t i = 0; i < n; ++i) al[i] *= y[i];
            alpha[c] = std::move(al);
            m->bias[c] = b;
        });
        m->support = Matrix(0, k);
        for (std::size_t i = 0; i < n; ++i) {
            std::array<double, kClasses> row{};
            bool any = false;
            for (int c : active) {
                row[c] = alpha[c][i];
                any = any || row[c] != 0.0;
            }
            if (!any) continue;
            m->support.append_row(d.x.row(i));
            m->coef.push_back(row);
        }
        return m;
    }

    std::array<double, kClasses> decision(std::span<const double> x) const {
        std::array<double, kClasses> f = bias;
        for (std::size_t s = 0; s < support.rows(); ++s) {
            double kv = std::exp(-gamma * squared_distance(support.row(s), x));
            for (int c = 0; c < kClasses; ++c) f[c] += coef[s][c] * kv;
        }
        return f;
    }

    ModelKind kind() const override { return ModelKind::svc_rbf; }
    Proba proba(std::span<const double> x) const override { return softmax(decision(x), present); }
    int predict(std::span<const double> x) const override {
        auto f = decision(x);
        int best = -1;
        for (int c = 0; c < kClasses; ++c)
            if (present[c] && (best < 0 || f[c] > f[best])) best = c;
        return best;
    }

    nlohmann::json to_json() const override {
        return {{"gamma", gamma}, {"bias", bias}, {"present", present}, {"support", support.data()},
                {"n_features", support.cols()}, {"coef", coef}};
    }

    static std::shared_ptr<SvcRbf> from_json(const nlohmann::json& j) {
        auto m = std::make_shared<SvcRbf>();
        m->gamma = j.at("gamma").get<double>();
        m->bias = j.at("bias").get<std::array<double, kClasses>>();
        m->present = j.at("present").get<std::array<bool, kClasses>>();
        auto k = j.at("n_features").get<std::size_t>();
        auto flat = j.at("support").get<std::vector<double>>();
        m->support = Matrix(0, k);
        for (std::size_t i = 0; k > 0 && i < flat.size() / k; ++i) m->support.append_row(std::span<const double>(flat.data() + i * k, k));
        m->coef = j.at("coef").get<std::vector<std::array<double, kClasses>>>();
        return m;
    }
};

} // namespace sitewise::learn
