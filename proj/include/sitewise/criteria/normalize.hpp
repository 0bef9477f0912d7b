#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>

#include "sitewise/core/error.hpp"
#include "sitewise/geocore/raster.hpp"

namespace sitewise {

enum class Direction { lower_is_better, higher_is_better };

inline Direction parse_direction(const std::string& s) {
    if (s == "lower" || s == "lower-is-better") return Direction::lower_is_better;
    if (s == "higher" || s == "higher-is-better") return Direction::higher_is_better;
    throw Error("unknown direction '" + s + "' (expected lower|higher)");
}

inline const char* to_string(Direction d) { return d == Direction::lower_is_better ? "lower" : "higher"; }

/// Ordinal scores of the four suitability bands, indexed by class (0 = not suitable).
inline constexpr std::array<double, 4> kBandScores = {0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0};

/// Four-band measurement rule over a raw layer.
///
/// For lower-is-better rules a value v scores 1 when v <= b1, 2/3 when b1 < v <= b2, 1/3 when
/// b2 < v <= b3 and 0 above b3. Higher-is-better rules mirror this: 0 below b1, 1/3 on
/// [b1, b2), 2/3 on [b2, b3) and 1 from b3 up.
struct BandRule {
    std::string criterion;
    Direction direction = Direction::lower_is_better;
    std::array<double, 3> breakpoints{};

    void validate() const {
        for (double b : breakpoints)
            if (!std::isfinite(b)) throw Error("band rule '" + criterion + "': non-finite breakpoint");
        if (!(breakpoints[0] < breakpoints[1] && breakpoints[1] < breakpoints[2]))
            throw Error("band rule '" + criterion + "': breakpoints must be strictly ascending");
    }

    int band(double v) const {
        const auto& b = breakpoints;
        if (direction == Direction::lower_is_better) {
            if (v <= b[0]) return 3;
            if (v <= b[1]) return 2;
            if (v <= b[2]) return 1;
            return 0;
        }
        if (v >= b[2]) return 3;
        if (v >= b[1]) return 2;
        if (v >= b[0]) return 1;
        return 0;
    }

    double score(double v) const { return kBandScores[static_cast<std::size_t>(band(v))]; }
};

inline RasterLayer reclassify(const RasterLayer& raw, const BandRule& rule) {
    rule.validate();
    RasterLayer out(rule.criterion.empty() ? raw.name : rule.criterion, raw.header, raw.nodata());
    for (std::size_t i = 0; i < raw.cells.size(); ++i)
        if (!raw.is_nodata(i)) out.cells[i] = rule.score(raw.cells[i]);
    return out;
}

/// Category code -> band lookup for categorical layers (land cover and the like). Codes
/// missing from the table score as "not suitable".
struct CategoryLookup {
    std::string criterion;
    std::map<long long, int> bands;

    double score(double v) const {
        auto code = static_cast<long long>(std::llround(v));
        auto it = bands.find(code);
        if (it == bands.end()) return 0.0;
        return kBandScores[static_cast<std::size_t>(it->second)];
    }
};

inline RasterLayer reclassify(const RasterLayer& raw, const CategoryLookup& lookup) {
    RasterLayer out(lookup.criterion.empty() ? raw.name : lookup.criterion, raw.header, raw.nodata());
    for (std::size_t i = 0; i < raw.cells.size(); ++i)
        if (!raw.is_nodata(i)) out.cells[i] = lookup.score(raw.cells[i]);
    return out;
}

/// Affine rescaling parameters of a continuous criterion: normalized = (v - lo) / (hi - lo),
/// inverted for lower-is-better and clamped to [0, 1].
struct RangeNormalization {
    double lo = 0.0;
    double hi = 1.0;
    Direction direction = Direction::higher_is_better;

    double apply(double v) const {
        double t = (v - lo) / (hi - lo);
        t = std::clamp(t, 0.0, 1.0);
        return direction == Direction::higher_is_better ? t : 1.0 - t;
    }
};

inline RasterLayer apply_normalization(const RasterLayer& raw, const RangeNormalization& n, const std::string& name) {
    if (!(n.hi > n.lo)) throw Error("normalization of '" + name + "': zero spread");
    RasterLayer out(name, raw.header, raw.nodata());
    for (std::size_t i = 0; i < raw.cells.size(); ++i)
        if (!raw.is_nodata(i)) out.cells[i] = n.apply(raw.cells[i]);
    return out;
}

/// Min-max parameters of a layer. Throws when fewer than two distinct values exist.
inline RangeNormalization fit_min_max(const RasterLayer& raw, Direction direction) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < raw.cells.size(); ++i) {
        if (raw.is_nodata(i)) continue;
        lo = std::min(lo, raw.cells[i]);
        hi = std::max(hi, raw.cells[i]);
    }
    if (!(hi > lo)) throw Error("normalize_continuous('" + raw.name + "'): zero spread");
    return {lo, hi, direction};
}

/// Min-max rescale to [0, 1], inverted when lower values are better.
inline RasterLayer normalize_continuous(const RasterLayer& raw, Direction direction) {
    return apply_normalization(raw, fit_min_max(raw, direction), raw.name);
}

} // namespace sitewise
