#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/criteria/criteria_set.hpp"
#include "sitewise/criteria/distance_transform.hpp"
#include "sitewise/geocore/raster.hpp"
#include "sitewise/geocore/region.hpp"
#include "sitewise/overlay/weights.hpp"
#include "sitewise/sdr/sdr.hpp"

namespace sitewise {

// Synthetic regions with a planted weight vector.
//
// Counties are a Voronoi partition of random seed cells. Distance criteria measure the
// distance to random source cells; county criteria are constant per county; the SDR
// criterion comes from the county supplies and the facilities. Every criterion is normalized
// over a fixed reference range, and its spread across the region (mean absolute deviation
// of the normalized layer) is made proportional to its planted weight, with a floor of 5% of
// the largest weight. Spread is what an attribution method can see when every criterion
// enters the labels with the same weight, so this is what makes planted weights recoverable.

struct SyntheticCriterion {
    std::string name;
    SourceKind source;
    std::string column; // counties.csv column for county criteria
    Direction direction;
    double lo, hi;      // reference range of raw values (distance criteria: 0 .. hi in grid units)
};

/// Criteria the generator knows, in their default order.
inline const std::vector<SyntheticCriterion>& synthetic_catalog() {
    static const std::vector<SyntheticCriterion> catalog = {
        {"road_dist", SourceKind::distance, "", Direction::lower_is_better, 0.0, 0.0},
        {"rail_dist", SourceKind::distance, "", Direction::lower_is_better, 0.0, 0.0},
        {"urban_dist", SourceKind::distance, "", Direction::lower_is_better, 0.0, 0.0},
        {"unemployment", SourceKind::county, "unemployment_rate", Direction::higher_is_better, 2.0, 12.0},
        {"market_revenue", SourceKind::county, "market_revenue", Direction::higher_is_better, 1.0e6, 5.0e7},
        {"sdr", SourceKind::sdr, "", Direction::higher_is_better, 0.5, 2.5},
        {"precipitation", SourceKind::county, "precip_inches", Direction::lower_is_better, 40.0, 70.0},
    };
    return catalog;
}

inline WeightVector default_planted_weights() {
    return WeightVector({"road_dist", "rail_dist", "urban_dist", "unemployment", "market_revenue", "sdr", "precipitation"},
                        {0.40, 0.25, 0.15, 0.10, 0.05, 0.03, 0.02});
}

struct SyntheticOptions {
    std::uint64_t seed = 1;
    int ncols = 150;
    int nrows = 150;
    int n_counties = 82;
    int n_facilities = 24;
    int n_candidates = 40;
    double cellsize = 1000.0;
    double radius = 0.0;       // 0: a fifth of the shorter grid side
    double min_contrast = 0.05; // spread floor relative to the top criterion
    WeightVector planted = default_planted_weights();
};

struct SyntheticRegion {
    RegionModel region;
    double d_new = 0.0;
    std::vector<CriterionSpec> specs;
    std::map<std::string, RasterLayer> source_masks; // file name -> 0/1 mask
    CriteriaSet criteria;
    RasterLayer ground_truth;
    WeightVector planted;
};

/// Mean absolute deviation of the non-nodata cells.
inline double mean_abs_deviation(const RasterLayer& layer) {
    double sum = 0.0, n = 0.0;
    for (std::size_t i = 0; i < layer.cells.size(); ++i)
        if (!layer.is_nodata(i)) {
            sum += layer.cells[i];
            n += 1.0;
        }
    if (n == 0.0) return 0.0;
    const double mean = sum / n;
    double dev = 0.0;
    for (std::size_t i = 0; i < layer.cells.size(); ++i)
        if (!layer.is_nodata(i)) dev += std::abs(layer.cells[i] - mean);
    return dev / n;
}

namespace detail {

/// Voronoi partition of the grid among n random seed cells; ties go to the lower seed.
inline std::vector<County> voronoi_counties(const GridHeader& g, int n, Rng& rng) {
    std::vector<std::size_t> all(g.size());
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < n; ++i) {
        std::size_t j = static_cast<std::size_t>(i) + static_cast<std::size_t>(uniform_index(rng, all.size() - static_cast<std::size_t>(i)));
        std::swap(all[static_cast<std::size_t>(i)], all[j]);
    }
    std::vector<County> counties(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        counties[static_cast<std::size_t>(j)].id = j;
        counties[static_cast<std::size_t>(j)].name = "County " + std::to_string(j);
    }
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        auto rc = g.cell(idx);
        long best = -1, best_d = 0;
        for (int j = 0; j < n; ++j) {
            auto s = g.cell(all[static_cast<std::size_t>(j)]);
            long d = long(rc.row - s.row) * (rc.row - s.row) + long(rc.col - s.col) * (rc.col - s.col);
            if (best < 0 || d < best_d) {
                best = j;
                best_d = d;
            }
        }
        counties[static_cast<std::size_t>(best)].cells.push_back(idx);
    }
    return counties;
}

/// Stratified uniforms: a shuffled set of the n midpoints (i + 0.5) / n.
inline std::vector<double> stratified_uniforms(std::size_t n, Rng& rng) {
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    shuffle(u, rng);
    return u;
}

inline RasterLayer source_mask(const GridHeader& g, const std::vector<std::size_t>& order, std::size_t count) {
    GridHeader h = g;
    RasterLayer mask("mask", h, 0.0);
    for (std::size_t i = 0; i < count; ++i) mask.cells[order[i]] = 1.0;
    return mask;
}

inline RasterLayer normalized_distance(const RasterLayer& mask, double hi, Direction dir) {
    return apply_normalization(distance_transform(mask), RangeNormalization{0.0, hi, dir}, "d");
}

} // namespace detail

inline SyntheticRegion generate_synthetic_region(const SyntheticOptions& opt) {
    if (opt.ncols <= 0 || opt.nrows <= 0) throw Error("synthetic: grid dimensions must be positive");
    if (opt.n_counties < 1) throw Error("synthetic: need at least one county");
    if (static_cast<std::size_t>(opt.n_counties) > static_cast<std::size_t>(opt.ncols) * static_cast<std::size_t>(opt.nrows))
        throw Error("synthetic: n_counties exceeds the cell count");
    if (opt.n_facilities < 0 || opt.n_candidates < 0) throw Error("synthetic: negative facility or candidate count");

    const auto& catalog = synthetic_catalog();
    std::vector<const SyntheticCriterion*> chosen;
    for (const auto& name : opt.planted.names()) {
        auto it = std::find_if(catalog.begin(), catalog.end(), [&](const auto& c) { return c.name == name; });
        if (it == catalog.end()) throw Error("synthetic: unknown criterion '" + name + "'");
        chosen.push_back(&*it);
    }

    SyntheticRegion out;
    out.planted = opt.planted;
    RegionModel& region = out.region;
    region.grid = GridHeader{opt.ncols, opt.nrows, 0.0, 0.0, opt.cellsize, -9999.0};
    region.radius = opt.radius > 0.0 ? opt.radius : 0.2 * std::min(opt.ncols, opt.nrows) * opt.cellsize;
    Rng county_rng = make_rng(opt.seed, 1);
    region.counties = detail::voronoi_counties(region.grid, opt.n_counties, county_rng);
    region.index_cells();
    const GridHeader& g = region.grid;
    const double extent = 0.5 * std::min(opt.ncols, opt.nrows) * opt.cellsize;

    const double w_max = *std::max_element(opt.planted.values().begin(), opt.planted.values().end());
    std::vector<double> contrast;
    for (double w : opt.planted.values()) contrast.push_back(std::max(w / w_max, opt.min_contrast));

    // Distance criteria: nested source sets (prefixes of one random cell order), so spread
    // falls as the source count grows. The reachable spread with few sources caps the scale
    // of every target.
    std::vector<std::vector<std::size_t>> orders(chosen.size());
    double cap = 0.25;
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        if (chosen[k]->source != SourceKind::distance) continue;
        orders[k].resize(g.size());
        std::iota(orders[k].begin(), orders[k].end(), 0);
        Rng rng = make_rng(opt.seed, 100 + k);
        shuffle(orders[k], rng);
        double best = 0.0;
        for (std::size_t count = 1; count <= std::min<std::size_t>(4, g.size()); ++count)
            best = std::max(best, mean_abs_deviation(detail::normalized_distance(detail::source_mask(g, orders[k], count), extent, chosen[k]->direction)));
        cap = std::min(cap, best);
    }

    std::vector<RasterLayer> normalized(chosen.size());
    std::vector<double> sdr_target;
    Rng value_rng = make_rng(opt.seed, 2);
    for (std::size_t k = 0; k < chosen.size(); ++k) {
        const SyntheticCriterion& c = *chosen[k];
        const double target = cap * contrast[k];
        CriterionSpec spec;
        spec.name = c.name;
        spec.source = c.source;
        spec.direction = c.direction;
        if (c.source == SourceKind::distance) {
            // Smallest MAD difference over a doubling ladder refined by bisection.
            auto mad = [&](std::size_t count) {
                return mean_abs_deviation(detail::normalized_distance(detail::source_mask(g, orders[k], count), extent, c.direction));
            };
            std::size_t best_count = 1;
            double best_err = std::abs(mad(1) - target);
            std::size_t lo = 1, hi = 1;
            while (hi < g.size()) {
                hi = std::min(g.size(), hi * 2);
                double m = mad(hi);
                double err = std::abs(m - target);
                if (err < best_err) best_err = err, best_count = hi;
                if (m < target) break;
                lo = hi;
            }
            while (hi - lo > 1) {
                std::size_t mid = lo + (hi - lo) / 2;
                double m = mad(mid);
                double err = std::abs(m - target);
                if (err < best_err || (err == best_err && mid < best_count)) best_err = err, best_count = mid;
                (m < target ? hi : lo) = mid;
            }
            RasterLayer mask = detail::source_mask(g, orders[k], best_count);
            mask.name = c.name + "_sources";
            spec.source_arg = c.name + "_sources.asc";
            spec.method = CriterionSpec::Range{0.0, extent};
            out.source_masks[spec.source_arg] = mask;
            normalized[k] = normalize_criterion(spec, distance_transform(mask)).layer;
        } else {
            auto u = detail::stratified_uniforms(region.counties.size(), value_rng);
            std::vector<double> raw(u.size());
            for (std::size_t j = 0; j < u.size(); ++j) {
                double t = 0.5 + contrast[k] * cap / 0.25 * (u[j] - 0.5);
                // Higher raw is better unless the criterion says otherwise; t is the normalized value.
                double a = c.direction == Direction::higher_is_better ? t : 1.0 - t;
                raw[j] = c.lo + a * (c.hi - c.lo);
            }
            spec.method = CriterionSpec::Range{c.lo, c.hi};
            if (c.source == SourceKind::county) {
                spec.source_arg = c.column;
                for (std::size_t j = 0; j < raw.size(); ++j) region.counties[j].attributes[c.column] = raw[j];
                normalized[k] = normalize_criterion(spec, burn_table(region, c.column)).layer;
            } else {
                sdr_target = raw;
                RasterLayer planned(c.name, g, g.nodata);
                for (std::size_t j = 0; j < raw.size(); ++j)
                    for (std::size_t idx : region.counties[j].cells) planned.cells[idx] = raw[j];
                normalized[k] = normalize_criterion(spec, planned).layer;
            }
        }
        out.specs.push_back(spec);
    }
    // Every counties.csv column exists even when its criterion is not planted.
    for (const auto& c : catalog)
        if (c.source == SourceKind::county)
            for (auto& county : region.counties) county.attributes.emplace(c.column, 0.5 * (c.lo + c.hi));

    auto weighted = [&](const std::vector<RasterLayer>& layers) {
        RasterLayer gt("ground_truth", g, g.nodata);
        for (std::size_t i = 0; i < g.size(); ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < layers.size(); ++k) {
                if (layers[k].is_nodata(i)) {
                    s = g.nodata;
                    break;
                }
                s += opt.planted[k] * layers[k].cells[i];
            }
            gt.cells[i] = s;
        }
        return gt;
    };

    // Facilities at random cells of the top decile of the planned ground truth.
    RasterLayer planned_gt = weighted(normalized);
    std::vector<std::size_t> in_region;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!planned_gt.is_nodata(i)) in_region.push_back(i);
    std::vector<std::size_t> ranked = in_region;
    std::stable_sort(ranked.begin(), ranked.end(), [&](std::size_t a, std::size_t b) { return planned_gt.cells[a] > planned_gt.cells[b]; });
    std::vector<std::size_t> top(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, ranked.size() / 10)));
    if (static_cast<std::size_t>(opt.n_facilities) > top.size()) throw Error("synthetic: more facilities than top-decile cells");
    Rng fac_rng = make_rng(opt.seed, 3);
    for (int i = 0; i < opt.n_facilities; ++i) {
        std::size_t j = static_cast<std::size_t>(i) + static_cast<std::size_t>(uniform_index(fac_rng, top.size() - static_cast<std::size_t>(i)));
        std::swap(top[static_cast<std::size_t>(i)], top[j]);
        auto rc = g.cell(top[static_cast<std::size_t>(i)]);
        region.facilities.push_back({i + 1, g.center_x(rc.col), g.center_y(rc.row), 20000.0 + 180000.0 * uniform01(fac_rng),
                                     FacilityStatus::existing});
    }
    out.d_new = opt.n_facilities > 0 ? default_new_demand(region) : 50000.0;

    // Supplies solved so that the SDR of every county hits its planned value.
    DemandAllocation alloc = allocate_demand(region);
    {
        SdrTable unit = compute_sdr(region, alloc, out.d_new);
        for (std::size_t j = 0; j < region.counties.size(); ++j) {
            double denom = unit.rows[j].existing_demand + unit.rows[j].d_new;
            double target = sdr_target.empty() ? 1.0 : sdr_target[j];
            region.counties[j].supply_tons = target * denom;
        }
    }
    for (std::size_t k = 0; k < chosen.size(); ++k)
        if (chosen[k]->source == SourceKind::sdr)
            normalized[k] = normalize_criterion(out.specs[k], sdr_raster(compute_sdr(region, alloc, out.d_new), region)).layer;

    for (std::size_t k = 0; k < chosen.size(); ++k) out.criteria.add(chosen[k]->name, normalized[k]);
    out.ground_truth = weighted(normalized);

    Rng cand_rng = make_rng(opt.seed, 4);
    if (static_cast<std::size_t>(opt.n_candidates) > in_region.size()) throw Error("synthetic: more candidates than cells");
    for (int i = 0; i < opt.n_candidates; ++i) {
        std::size_t j = static_cast<std::size_t>(i) + static_cast<std::size_t>(uniform_index(cand_rng, in_region.size() - static_cast<std::size_t>(i)));
        std::swap(in_region[static_cast<std::size_t>(i)], in_region[j]);
        auto rc = g.cell(in_region[static_cast<std::size_t>(i)]);
        region.candidates.push_back({i + 1, g.center_x(rc.col), g.center_y(rc.row), std::nullopt, std::nullopt});
    }
    region.validate();
    return out;
}

/// Convenience overload matching the generator's minimal parameter list.
inline SyntheticRegion generate_synthetic_region(std::uint64_t seed, int ncols, int nrows, int n_counties,
                                                 int n_facilities, const WeightVector& planted) {
    SyntheticOptions opt;
    opt.seed = seed;
    opt.ncols = ncols;
    opt.nrows = nrows;
    opt.n_counties = n_counties;
    opt.n_facilities = n_facilities;
    opt.planted = planted;
    return generate_synthetic_region(opt);
}

/// Writes a region directory the pipeline can read: the region files, source masks,
/// criteria.cfg, ground_truth.asc and planted_weights.csv.
inline void save_synthetic(const SyntheticRegion& s, const std::filesystem::path& dir) {
    save_region(s.region, dir, s.d_new);
    for (const auto& [file, mask] : s.source_masks) save_raster(mask, dir / file);
    write_text_file(dir / "criteria.cfg", format_criteria_config(s.specs));
    save_raster(s.ground_truth, dir / "ground_truth.asc");
    write_text_file(dir / "planted_weights.csv", format_weights(s.planted));
}

} // namespace sitewise
