#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "sitewise/core/error.hpp"
#include "sitewise/geocore/raster.hpp"

namespace sitewise {

namespace detail {

/// Squared distance transform of a sampled function along one line (lower envelope of
/// parabolas). f holds 0 at sources and +inf elsewhere; d receives min_q ((p-q)^2 + f(q)).
inline void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = static_cast<int>(f.size());
    constexpr double inf = std::numeric_limits<double>::infinity();
    int k = -1;
    for (int q = 0; q < n; ++q) {
        if (f[q] == inf) continue;
        while (true) {
            if (k < 0) {
                k = 0;
                v[0] = q;
                z[0] = -inf;
                z[1] = inf;
                break;
            }
            double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
                continue;
            }
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = inf;
            break;
        }
    }
    if (k < 0) {
        for (int q = 0; q < n; ++q) d[q] = inf;
        return;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

} // namespace detail

/// Exact Euclidean distance (grid units times cellsize) from every cell to the nearest source
/// cell (value 1). Separable two-pass squared-distance transform, linear in the cell count.
/// Nodata cells in the mask are never sources and stay nodata in the output.
inline RasterLayer distance_transform(const RasterLayer& mask) {
    const GridHeader& h = mask.header;
    const int rows = h.nrows, cols = h.ncols;
    constexpr double inf = std::numeric_limits<double>::infinity();

    std::vector<double> g(h.size(), inf);
    bool any = false;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!mask.is_nodata(i) && mask.cells[i] == 1.0) {
            g[i] = 0.0;
            any = true;
        }
    }
    if (!any) throw Error("distance_transform: empty mask (no source cells)");

    const int n = std::max(rows, cols);
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> v(n);

    f.resize(rows);
    d.resize(rows);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) f[r] = g[h.index(r, c)];
        detail::edt_1d(f, d, v, z);
        for (int r = 0; r < rows; ++r) g[h.index(r, c)] = d[r];
    }
    f.resize(cols);
    d.resize(cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) f[c] = g[h.index(r, c)];
        detail::edt_1d(f, d, v, z);
        for (int c = 0; c < cols; ++c) g[h.index(r, c)] = d[c];
    }

    RasterLayer out(mask.name + "_distance", h, h.nodata);
    for (std::size_t i = 0; i < g.size(); ++i)
        out.cells[i] = mask.is_nodata(i) ? h.nodata : std::sqrt(g[i]) * h.cellsize;
    return out;
}

} // namespace sitewise
