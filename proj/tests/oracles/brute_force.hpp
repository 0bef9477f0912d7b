#pragma once

// Slow reference implementations used only by tests. None of them shares code with the
// library routines they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "sitewise/geocore/raster.hpp"
#include "sitewise/geocore/region.hpp"

namespace oracle {

/// Distance from every cell to the nearest source cell by scanning all (cell, source) pairs.
inline std::vector<double> distance_all_pairs(const sitewise::RasterLayer& mask) {
    const auto& g = mask.header;
    std::vector<std::pair<int, int>> sources;
    for (int r = 0; r < g.nrows; ++r)
        for (int c = 0; c < g.ncols; ++c)
            if (mask.at(r, c) == 1.0) sources.emplace_back(r, c);
    std::vector<double> out(g.size());
    for (int r = 0; r < g.nrows; ++r)
        for (int c = 0; c < g.ncols; ++c) {
            double best = std::numeric_limits<double>::infinity();
            for (auto [sr, sc] : sources) best = std::min(best, std::hypot(double(r - sr), double(c - sc)));
            out[g.index(r, c)] = best * g.cellsize;
        }
    return out;
}

/// Demand allocation by visiting every grid cell and testing its center against the disk.
inline std::vector<double> allocate_point(const sitewise::RegionModel& region, double x, double y, double demand) {
    const auto& g = region.grid;
    std::vector<double> count(region.counties.size(), 0.0);
    double total = 0.0;
    for (std::size_t j = 0; j < region.counties.size(); ++j)
        for (std::size_t idx : region.counties[j].cells) {
            auto rc = g.cell(idx);
            double dx = g.center_x(rc.col) - x, dy = g.center_y(rc.row) - y;
            if (dx * dx + dy * dy <= region.radius * region.radius) {
                count[j] += 1.0;
                total += 1.0;
            }
        }
    std::vector<double> out(count.size(), 0.0);
    if (total > 0.0)
        for (std::size_t j = 0; j < count.size(); ++j) out[j] = demand * count[j] / total;
    return out;
}

/// Centroid cell: the mask cell closest to the mean (row, col), first in row-major order on ties.
inline std::size_t centroid_cell(const sitewise::RegionModel& region, std::size_t j) {
    const auto& g = region.grid;
    std::vector<std::size_t> cells = region.counties[j].cells;
    std::sort(cells.begin(), cells.end());
    double mr = 0, mc = 0;
    for (std::size_t idx : cells) {
        mr += g.cell(idx).row;
        mc += g.cell(idx).col;
    }
    mr /= double(cells.size());
    mc /= double(cells.size());
    std::size_t best = cells[0];
    double bd = 1e300;
    for (std::size_t idx : cells) {
        double d = std::pow(g.cell(idx).row - mr, 2) + std::pow(g.cell(idx).col - mc, 2);
        if (d < bd) {
            bd = d;
            best = idx;
        }
    }
    return best;
}

struct SdrOracleRow {
    double existing = 0.0;
    double d_new = 0.0;
    double sdr = 0.0;
    bool defined = false;
};

inline std::vector<SdrOracleRow> sdr(const sitewise::RegionModel& region, double d_new) {
    const auto& g = region.grid;
    std::vector<SdrOracleRow> rows(region.counties.size());
    for (const auto& f : region.facilities) {
        auto share = allocate_point(region, f.x, f.y, f.demand_tons_per_year);
        for (std::size_t j = 0; j < rows.size(); ++j) rows[j].existing += share[j];
    }
    for (std::size_t j = 0; j < rows.size(); ++j) {
        if (region.counties[j].cells.empty()) continue;
        auto rc = g.cell(centroid_cell(region, j));
        rows[j].d_new = allocate_point(region, g.center_x(rc.col), g.center_y(rc.row), d_new)[j];
        double denom = rows[j].existing + rows[j].d_new;
        rows[j].defined = denom > 0.0;
        if (rows[j].defined) rows[j].sdr = region.counties[j].supply_tons / denom;
    }
    return rows;
}

/// Exact within-class sum of squares of integer data, scaled by L = lcm(1..16) so that it is
/// an integer: sum over classes of (L / n_c) * (n_c * sum x^2 - (sum x)^2).
using Int = __int128;
inline constexpr long long kLcm16 = 720720;

inline Int scaled_sse(const std::vector<long long>& sorted, const std::vector<std::size_t>& class_sizes) {
    Int total = 0;
    std::size_t start = 0;
    for (std::size_t n : class_sizes) {
        Int s = 0, s2 = 0;
        for (std::size_t i = start; i < start + n; ++i) {
            s += sorted[i];
            s2 += Int(sorted[i]) * sorted[i];
        }
        total += Int(kLcm16 / (long long)n) * (Int(n) * s2 - s * s);
        start += n;
    }
    return total;
}

/// Minimum scaled SSE over all C(n-1, k-1) contiguous partitions of the sorted data.
inline Int exhaustive_jenks(std::vector<long long> values, int k) {
    std::sort(values.begin(), values.end());
    const int n = static_cast<int>(values.size());
    Int best = -1;
    std::vector<int> cuts(static_cast<std::size_t>(k - 1));
    std::function<void(int, int)> rec = [&](int depth, int from) {
        if (depth == k - 1) {
            std::vector<std::size_t> sizes;
            int prev = 0;
            for (int c : cuts) {
                sizes.push_back(std::size_t(c - prev));
                prev = c;
            }
            sizes.push_back(std::size_t(n - prev));
            Int v = scaled_sse(values, sizes);
            if (best < 0 || v < best) best = v;
            return;
        }
        for (int c = from; c <= n - (k - 1 - depth); ++c) {
            cuts[std::size_t(depth)] = c;
            rec(depth + 1, c + 1);
        }
    };
    rec(0, 1);
    return best;
}

/// Shapley values by averaging marginal contributions over all K! feature orderings.
inline std::vector<double> permutation_shapley(int k, const std::function<double(std::uint32_t)>& v) {
    std::vector<int> order(static_cast<std::size_t>(k));
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phi(static_cast<std::size_t>(k), 0.0);
    double count = 0.0;
    do {
        std::uint32_t s = 0;
        double prev = v(0);
        for (int f : order) {
            s |= 1u << f;
            double cur = v(s);
            phi[std::size_t(f)] += cur - prev;
            prev = cur;
        }
        count += 1.0;
    } while (std::next_permutation(order.begin(), order.end()));
    for (double& p : phi) p /= count;
    return phi;
}

/// AUC as the share of (positive, negative) pairs ranked correctly, ties counting one half.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& positive) {
    double good = 0.0, pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (!positive[i]) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (positive[j]) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) good += 1.0;
            else if (scores[i] == scores[j]) good += 0.5;
        }
    }
    return good / pairs;
}

} // namespace oracle
