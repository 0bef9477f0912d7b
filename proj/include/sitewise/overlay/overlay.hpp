#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/criteria/criteria_set.hpp"
#include "sitewise/geocore/raster.hpp"
#include "sitewise/overlay/weights.hpp"

namespace sitewise {

inline constexpr int kNumClasses = 4;
inline constexpr const char* kClassNames[kNumClasses] = {"not_suitable", "somewhat_suitable", "suitable",
                                                         "highly_suitable"};

/// Cell-wise sum of w_i * R_i. A cell that is nodata in any layer is nodata in the output.
inline RasterLayer weighted_sum(const CriteriaSet& criteria, const WeightVector& w) {
    if (criteria.empty()) throw Error("weighted_sum: no criteria");
    if (w.size() != criteria.size()) throw Error("weighted_sum: weight count does not match criteria count");
    for (std::size_t k = 0; k < w.size(); ++k)
        if (w.names()[k] != criteria.names()[k])
            throw Error("weighted_sum: weight order mismatch at '" + w.names()[k] + "' vs '" + criteria.names()[k] + "'");
    const GridHeader& g = criteria.grid();
    RasterLayer out("score", g, g.nodata);
    for (std::size_t i = 0; i < g.size(); ++i) {
        double s = 0.0;
        bool ok = true;
        for (std::size_t k = 0; k < criteria.size(); ++k) {
            const RasterLayer& layer = criteria.layer(k);
            if (layer.is_nodata(i)) {
                ok = false;
                break;
            }
            s += w[k] * layer.cells[i];
        }
        if (ok) out.cells[i] = s;
    }
    return out;
}

enum class BreakMethod { equal_interval, jenks };

inline const char* to_string(BreakMethod m) { return m == BreakMethod::jenks ? "jenks" : "equal-interval"; }

/// Upper bounds of classes 0..2; class 3 takes everything above the last break.
using Breaks = std::array<double, 3>;

/// Class of a score: intervals are closed at the top, so a score equal to a break falls in the
/// lower class.
inline int classify_score(double v, const Breaks& b) {
    if (v <= b[0]) return 0;
    if (v <= b[1]) return 1;
    if (v <= b[2]) return 2;
    return 3;
}

inline Breaks equal_interval_breaks(double lo, double hi) {
    if (!(hi > lo)) throw Error("equal_interval_breaks: zero range");
    const double step = (hi - lo) / 4.0;
    return {lo + step, lo + 2.0 * step, lo + 3.0 * step};
}

/// Four equal-width intervals over the observed score range.
inline Breaks equal_interval_breaks(const std::vector<double>& scores) {
    if (scores.empty()) throw Error("equal_interval_breaks: no scores");
    auto [mn, mx] = std::minmax_element(scores.begin(), scores.end());
    return equal_interval_breaks(*mn, *mx);
}

namespace detail {

struct WeightedValue {
    double value;
    double count;
};

/// Distinct values in ascending order with multiplicities.
inline std::vector<WeightedValue> distinct_sorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    std::vector<WeightedValue> out;
    for (double x : v) {
        if (!out.empty() && out.back().value == x) out.back().count += 1.0;
        else out.push_back({x, 1.0});
    }
    return out;
}

} // namespace detail

/// Sum over classes of squared deviations from the class mean for a partition of `sorted`
/// into consecutive runs ending before each index in `cuts`.
inline double partition_sse(const std::vector<double>& sorted, const std::vector<std::size_t>& cuts) {
    double total = 0.0;
    std::size_t start = 0;
    for (std::size_t c = 0; c <= cuts.size(); ++c) {
        std::size_t end = c < cuts.size() ? cuts[c] : sorted.size();
        double mean = 0.0;
        for (std::size_t i = start; i < end; ++i) mean += sorted[i];
        mean /= static_cast<double>(end - start);
        for (std::size_t i = start; i < end; ++i) total += (sorted[i] - mean) * (sorted[i] - mean);
        start = end;
    }
    return total;
}

/// Fisher-Jenks optimal classification: the partition of the sorted values into n_classes
/// contiguous classes minimizing total within-class squared deviation. Equal values never
/// straddle a break. Returns the n_classes - 1 class upper bounds.
inline std::vector<double> jenks_breaks(const std::vector<double>& scores, int n_classes = kNumClasses) {
    if (n_classes < 2) throw Error("jenks_breaks: need at least two classes");
    auto pts = detail::distinct_sorted(scores);
    const int n = static_cast<int>(pts.size());
    const int k = n_classes;
    if (n < k) throw Error("jenks_breaks: fewer distinct values than classes");

    // Prefix sums (shifted by the first value for conditioning).
    const double shift = pts[0].value;
    std::vector<double> w(n + 1, 0.0), s1(n + 1, 0.0), s2(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        double x = pts[i].value - shift;
        w[i + 1] = w[i] + pts[i].count;
        s1[i + 1] = s1[i] + pts[i].count * x;
        s2[i + 1] = s2[i] + pts[i].count * x * x;
    }
    auto sse = [&](int a, int b) { // points [a, b)
        double ww = w[b] - w[a], t1 = s1[b] - s1[a], t2 = s2[b] - s2[a];
        return std::max(0.0, t2 - t1 * t1 / ww);
    };

    constexpr double inf = std::numeric_limits<double>::infinity();
    // cost[c][j]: best cost of splitting points [0, j) into c+1 classes.
    std::vector<std::vector<double>> cost(k, std::vector<double>(n + 1, inf));
    std::vector<std::vector<int>> arg(k, std::vector<int>(n + 1, -1));
    for (int j = 1; j <= n; ++j) cost[0][j] = sse(0, j);
    for (int c = 1; c < k; ++c) {
        for (int j = c + 1; j <= n; ++j) {
            double best = inf;
            int best_i = -1;
            for (int i = c; i < j; ++i) { // last class is [i, j)
                double v = cost[c - 1][i] + sse(i, j);
                if (v < best) {
                    best = v;
                    best_i = i;
                }
            }
            cost[c][j] = best;
            arg[c][j] = best_i;
        }
    }
    std::vector<double> breaks(static_cast<std::size_t>(k - 1));
    int j = n;
    for (int c = k - 1; c >= 1; --c) {
        int i = arg[c][j];
        breaks[static_cast<std::size_t>(c - 1)] = pts[static_cast<std::size_t>(i - 1)].value;
        j = i;
    }
    return breaks;
}

inline Breaks jenks_breaks4(const std::vector<double>& scores) {
    auto b = jenks_breaks(scores, kNumClasses);
    return {b[0], b[1], b[2]};
}

/// Continuous score raster plus the four-class raster derived from its breaks.
struct SuitabilityMap {
    RasterLayer score;
    RasterLayer classes;
    Breaks breaks{};
    BreakMethod method = BreakMethod::equal_interval;

    std::optional<int> class_at(double x, double y) const {
        auto v = classes.sample(x, y);
        if (!v) return std::nullopt;
        return static_cast<int>(*v);
    }
};

inline RasterLayer classify_raster(const RasterLayer& score, const Breaks& breaks) {
    if (!(breaks[0] < breaks[1] && breaks[1] < breaks[2])) throw Error("classify: breaks must be strictly ascending");
    RasterLayer out("class", score.header, score.nodata());
    for (std::size_t i = 0; i < score.cells.size(); ++i)
        if (!score.is_nodata(i)) out.cells[i] = classify_score(score.cells[i], breaks);
    return out;
}

inline SuitabilityMap make_map(RasterLayer score, const Breaks& breaks, BreakMethod method) {
    SuitabilityMap m;
    m.classes = classify_raster(score, breaks);
    m.score = std::move(score);
    m.breaks = breaks;
    m.method = method;
    return m;
}

/// Share of classified cells in each class, in percent (the class-area table).
inline std::array<double, kNumClasses> class_area_percent(const SuitabilityMap& map) {
    std::array<double, kNumClasses> count{};
    double total = 0.0;
    for (std::size_t i = 0; i < map.classes.cells.size(); ++i) {
        if (map.classes.is_nodata(i)) continue;
        count[static_cast<std::size_t>(map.classes.cells[i])] += 1.0;
        total += 1.0;
    }
    for (double& c : count) c = total > 0.0 ? 100.0 * c / total : 0.0;
    return count;
}

inline std::string format_breaks(const Breaks& b, BreakMethod m) {
    std::string out = "method,break1,break2,break3\n";
    out += (CsvLine() << to_string(m) << b[0] << b[1] << b[2]).str() + "\n";
    return out;
}

inline std::pair<Breaks, BreakMethod> load_breaks(const std::filesystem::path& path) {
    CsvTable t = load_csv(path);
    if (t.rows.size() != 1) throw Error(path.string() + ": expected one row of breaks");
    int cm = t.require_column("method");
    std::string m = t.rows[0][static_cast<std::size_t>(cm)];
    BreakMethod method = BreakMethod::jenks;
    if (m == "equal-interval") method = BreakMethod::equal_interval;
    else if (m != "jenks") throw Error(path.string() + ": unknown break method '" + m + "'");
    Breaks b{t.number(0, t.require_column("break1")), t.number(0, t.require_column("break2")),
             t.number(0, t.require_column("break3"))};
    if (!(b[0] <= b[1] && b[1] <= b[2])) throw Error(path.string() + ": breaks must be non-decreasing");
    return {b, method};
}

} // namespace sitewise
