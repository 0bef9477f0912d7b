#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/geocore/raster.hpp"
#include "sitewise/geocore/region.hpp"

namespace sitewise {

/// Count of in-region cells per county whose centers lie within `radius` of (x, y).
inline std::vector<std::size_t> radius_cell_counts(const RegionModel& region, double x, double y, double radius) {
    const GridHeader& g = region.grid;
    std::vector<std::size_t> counts(region.counties.size(), 0);
    const double r2 = radius * radius;
    // Row/column window covering the disk.
    int c0 = std::max(0, static_cast<int>(std::floor((x - radius - g.xll) / g.cellsize)) - 1);
    int c1 = std::min(g.ncols - 1, static_cast<int>(std::ceil((x + radius - g.xll) / g.cellsize)) + 1);
    int r0 = std::max(0, static_cast<int>(std::floor((g.ymax() - (y + radius)) / g.cellsize)) - 1);
    int r1 = std::min(g.nrows - 1, static_cast<int>(std::ceil((g.ymax() - (y - radius)) / g.cellsize)) + 1);
    for (int r = r0; r <= r1; ++r) {
        double dy = g.center_y(r) - y;
        if (dy * dy > r2) continue;
        for (int c = c0; c <= c1; ++c) {
            double dx = g.center_x(c) - x;
            if (dx * dx + dy * dy > r2) continue;
            int j = region.county_of_cell[g.index(r, c)];
            if (j >= 0) ++counts[static_cast<std::size_t>(j)];
        }
    }
    return counts;
}

/// Demand of every facility split across counties in proportion to the share of the
/// facility's procurement disk (counted in region cells) that lies in each county.
struct DemandAllocation {
    std::size_t n_facilities = 0;
    std::size_t n_counties = 0;
    std::vector<double> tons;            // (facility i, county j) at i * n_counties + j
    std::vector<bool> uncovered;         // facility's disk covers no region cell; allocates nothing

    double at(std::size_t i, std::size_t j) const { return tons[i * n_counties + j]; }

    double row_sum(std::size_t i) const {
        double s = 0.0;
        for (std::size_t j = 0; j < n_counties; ++j) s += at(i, j);
        return s;
    }

    double county_total(std::size_t j) const {
        double s = 0.0;
        for (std::size_t i = 0; i < n_facilities; ++i) s += at(i, j);
        return s;
    }
};

/// Splits `demand` over counties by the radius rule. Returns an all-zero vector when the disk
/// covers no region cell.
inline std::vector<double> allocate_point_demand(const RegionModel& region, double x, double y, double demand,
                                                 bool* uncovered = nullptr) {
    auto counts = radius_cell_counts(region, x, y, region.radius);
    std::size_t total = 0;
    for (auto c : counts) total += c;
    std::vector<double> out(counts.size(), 0.0);
    if (uncovered) *uncovered = total == 0;
    if (total == 0) return out;
    for (std::size_t j = 0; j < counts.size(); ++j)
        out[j] = demand * static_cast<double>(counts[j]) / static_cast<double>(total);
    return out;
}

inline DemandAllocation allocate_demand(const RegionModel& region) {
    if (!(region.radius > 0.0)) throw Error("allocate_demand: radius must be positive");
    DemandAllocation a;
    a.n_facilities = region.facilities.size();
    a.n_counties = region.counties.size();
    a.tons.assign(a.n_facilities * a.n_counties, 0.0);
    a.uncovered.assign(a.n_facilities, false);
    for (std::size_t i = 0; i < a.n_facilities; ++i) {
        const Facility& f = region.facilities[i];
        bool uncovered = false;
        auto row = allocate_point_demand(region, f.x, f.y, f.demand_tons_per_year, &uncovered);
        a.uncovered[i] = uncovered;
        if (uncovered) log::warn("facility " + std::to_string(f.id) + ": procurement radius covers no region cell");
        std::copy(row.begin(), row.end(), a.tons.begin() + static_cast<std::ptrdiff_t>(i * a.n_counties));
    }
    return a;
}

/// Cell of the county mask nearest to the mean of its (row, col) coordinates; ties resolve to
/// the lowest row-major index.
inline std::size_t county_centroid_cell(const RegionModel& region, const County& county) {
    if (county.cells.empty()) throw Error("county " + std::to_string(county.id) + " has an empty mask");
    double mr = 0.0, mc = 0.0;
    for (std::size_t idx : county.cells) {
        auto c = region.grid.cell(idx);
        mr += c.row;
        mc += c.col;
    }
    mr /= static_cast<double>(county.cells.size());
    mc /= static_cast<double>(county.cells.size());
    std::size_t best = county.cells.front();
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t idx : county.cells) {
        auto c = region.grid.cell(idx);
        double d = (c.row - mr) * (c.row - mr) + (c.col - mc) * (c.col - mc);
        if (d < best_d || (d == best_d && idx < best)) {
            best_d = d;
            best = idx;
        }
    }
    return best;
}

/// How the hypothetical entrant's demand is charged to its own county.
enum class NewDemandMode {
    radius, // entrant's demand allocated by the radius rule; the county's own share is charged
    whole   // the county is charged the entrant's entire demand
};

struct SdrRow {
    int county_id = 0;
    double supply = 0.0;
    double existing_demand = 0.0; // sum over facilities in the model of D_ij
    double d_new = 0.0;           // entrant demand charged to this county
    double sdr = 0.0;
    bool defined = false;
};

struct SdrTable {
    std::vector<SdrRow> rows; // aligned with region.counties
};

/// Supply-demand ratio per county: S_j / (sum_i D_ij + D_new,j), each county evaluated with its
/// own hypothetical entrant at the county centroid cell. A zero denominator leaves the
/// county flagged undefined.
inline SdrTable compute_sdr(const RegionModel& region, const DemandAllocation& alloc, double d_new,
                            NewDemandMode mode = NewDemandMode::radius) {
    if (d_new < 0.0 || !std::isfinite(d_new)) throw Error("compute_sdr: d_new must be non-negative");
    if (alloc.n_counties != region.counties.size() || alloc.n_facilities != region.facilities.size())
        throw Error("compute_sdr: allocation does not match region");
    SdrTable table;
    table.rows.resize(region.counties.size());
    for (std::size_t j = 0; j < region.counties.size(); ++j) {
        const County& county = region.counties[j];
        SdrRow& row = table.rows[j];
        row.county_id = county.id;
        row.supply = county.supply_tons;
        // Every facility present in the model competes for supply, whatever its status tag.
        for (std::size_t i = 0; i < alloc.n_facilities; ++i) row.existing_demand += alloc.at(i, j);
        if (county.cells.empty()) {
            row.defined = false;
            continue;
        }
        if (mode == NewDemandMode::whole) {
            row.d_new = d_new;
        } else {
            auto cell = region.grid.cell(county_centroid_cell(region, county));
            auto share = allocate_point_demand(region, region.grid.center_x(cell.col), region.grid.center_y(cell.row), d_new);
            row.d_new = share[j];
        }
        double denom = row.existing_demand + row.d_new;
        row.defined = denom > 0.0;
        row.sdr = row.defined ? row.supply / denom : 0.0;
    }
    return table;
}

inline SdrTable compute_sdr(const RegionModel& region, double d_new, NewDemandMode mode = NewDemandMode::radius) {
    return compute_sdr(region, allocate_demand(region), d_new, mode);
}

/// Mean demand of existing facilities, the default entrant size. Zero when none exist.
inline double default_new_demand(const RegionModel& region) {
    double sum = 0.0;
    int n = 0;
    for (const auto& f : region.facilities)
        if (f.status == FacilityStatus::existing) {
            sum += f.demand_tons_per_year;
            ++n;
        }
    return n ? sum / n : 0.0;
}

/// County-constant SDR raster; undefined counties and cells outside the region are nodata.
inline RasterLayer sdr_raster(const SdrTable& table, const RegionModel& region) {
    RasterLayer out("sdr", region.grid, region.grid.nodata);
    for (std::size_t j = 0; j < region.counties.size() && j < table.rows.size(); ++j) {
        if (!table.rows[j].defined) continue;
        for (std::size_t idx : region.counties[j].cells) out.cells[idx] = table.rows[j].sdr;
    }
    return out;
}

inline std::string format_sdr_table(const SdrTable& table) {
    std::string out = "county_id,supply,existing_demand_allocated,d_new,sdr,defined\n";
    for (const auto& r : table.rows)
        out += (CsvLine() << r.county_id << r.supply << r.existing_demand << r.d_new << r.sdr << r.defined).str() + "\n";
    return out;
}

} // namespace sitewise
