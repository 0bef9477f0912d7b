#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/learn/dataset.hpp"

namespace sitewise::explain {

struct CollinearityReport {
    std::vector<std::string> names;
    std::vector<std::vector<double>> correlation; // K x K Pearson r
    std::vector<double> r_squared;                // of each feature regressed on the others
    std::vector<double> vif;                      // +inf when perfectly collinear
    std::vector<double> tolerance;                // 1 - R^2
    std::vector<bool> infinite;
};

/// Pearson correlations and variance inflation factors. VIF_i = 1 / (1 - R^2_i) with R^2_i
/// from an intercept least-squares fit of column i on the remaining columns.
inline CollinearityReport collinearity(const learn::Matrix& x, const std::vector<std::string>& names) {
    const auto n = static_cast<Eigen::Index>(x.rows());
    const auto k = static_cast<Eigen::Index>(x.cols());
    if (names.size() != x.cols()) throw Error("collinearity: name count mismatch");
    if (n < k + 2) throw Error("collinearity: need at least K + 2 rows");
    Eigen::MatrixXd m(n, k);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) m(i, j) = x(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    Eigen::RowVectorXd mean = m.colwise().mean();
    Eigen::MatrixXd c = m.rowwise() - mean;
    Eigen::VectorXd ss = c.colwise().squaredNorm();
    for (Eigen::Index j = 0; j < k; ++j)
        if (!(ss(j) > 0.0)) throw Error("collinearity: column '" + names[static_cast<std::size_t>(j)] + "' is constant");

    CollinearityReport rep;
    rep.names = names;
    rep.correlation.assign(static_cast<std::size_t>(k), std::vector<double>(static_cast<std::size_t>(k), 0.0));
    for (Eigen::Index a = 0; a < k; ++a) {
        rep.correlation[a][a] = 1.0;
        for (Eigen::Index b = a + 1; b < k; ++b) {
            double r = c.col(a).dot(c.col(b)) / std::sqrt(ss(a) * ss(b));
            rep.correlation[a][b] = rep.correlation[b][a] = r;
        }
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        double r2 = 0.0;
        bool singular = false;
        if (k > 1) {
            Eigen::MatrixXd a(n, k); // intercept plus the other columns (centered)
            a.col(0).setOnes();
            for (Eigen::Index j = 0, t = 1; j < k; ++j)
                if (j != i) a.col(t++) = c.col(j);
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
            qr.setThreshold(1e-12);
            Eigen::VectorXd beta = qr.solve(c.col(i));
            double sse = (c.col(i) - a * beta).squaredNorm();
            r2 = 1.0 - sse / ss(i);
            singular = r2 >= 1.0 - 1e-12;
        }
        rep.r_squared.push_back(r2);
        rep.infinite.push_back(singular);
        rep.tolerance.push_back(singular ? 0.0 : 1.0 - r2);
        rep.vif.push_back(singular ? std::numeric_limits<double>::infinity() : 1.0 / (1.0 - r2));
    }
    return rep;
}

inline std::string format_correlation(const CollinearityReport& r) {
    std::string out = "criterion";
    for (const auto& n : r.names) out += "," + csv_escape(n);
    out += "\n";
    for (std::size_t a = 0; a < r.names.size(); ++a) {
        CsvLine line;
        line << r.names[a];
        for (double v : r.correlation[a]) line << v;
        out += line.str() + "\n";
    }
    return out;
}

inline std::string format_vif(const CollinearityReport& r) {
    std::string out = "criterion,vif,tolerance,r_squared\n";
    for (std::size_t i = 0; i < r.names.size(); ++i) {
        CsvLine line;
        line << r.names[i];
        if (r.infinite[i]) line << "inf";
        else line << r.vif[i];
        line << r.tolerance[i] << r.r_squared[i];
        out += line.str() + "\n";
    }
    return out;
}

} // namespace sitewise::explain
