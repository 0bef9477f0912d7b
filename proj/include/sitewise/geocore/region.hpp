#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sitewise/core/config.hpp"
#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/core/log.hpp"
#include "sitewise/geocore/raster.hpp"

namespace sitewise {

struct County {
    int id = 0;
    std::string name;
    double supply_tons = 0.0;
    std::map<std::string, double> attributes; // remaining numeric counties.csv columns
    std::vector<std::size_t> cells;           // row-major indices into the region grid
};

enum class FacilityStatus { existing, hypothetical };

inline const char* to_string(FacilityStatus s) { return s == FacilityStatus::existing ? "existing" : "hypothetical"; }

inline FacilityStatus parse_facility_status(const std::string& s) {
    if (s == "existing") return FacilityStatus::existing;
    if (s == "hypothetical") return FacilityStatus::hypothetical;
    throw Error("unknown facility status '" + s + "'");
}

struct Facility {
    int id = 0;
    double x = 0.0;
    double y = 0.0;
    double demand_tons_per_year = 0.0;
    FacilityStatus status = FacilityStatus::existing;
};

struct CandidateSite {
    int id = 0;
    double x = 0.0;
    double y = 0.0;
    std::optional<double> score;
    std::optional<int> class_label;
};

/// Counties, facilities and candidate sites on one planar grid.
struct RegionModel {
    GridHeader grid;
    std::vector<County> counties;
    std::vector<Facility> facilities;
    std::vector<CandidateSite> candidates;
    double radius = 1.0; // procurement radius, grid distance units
    std::vector<int> county_of_cell; // county position in `counties`, -1 outside the region

    /// Rebuilds county_of_cell from the county masks and checks the invariants.
    void index_cells() {
        county_of_cell.assign(grid.size(), -1);
        for (std::size_t j = 0; j < counties.size(); ++j) {
            for (std::size_t idx : counties[j].cells) {
                if (idx >= grid.size()) throw Error("county " + std::to_string(counties[j].id) + " mask outside grid");
                if (county_of_cell[idx] != -1)
                    throw Error("county masks overlap at cell " + std::to_string(idx));
                county_of_cell[idx] = static_cast<int>(j);
            }
        }
    }

    void validate() const {
        grid.validate();
        if (!(radius > 0.0)) throw Error("radius must be positive");
        for (const auto& c : counties)
            if (c.supply_tons < 0.0 || !std::isfinite(c.supply_tons))
                throw Error("county " + std::to_string(c.id) + ": supply must be non-negative");
        for (const auto& f : facilities) {
            if (f.demand_tons_per_year < 0.0) throw Error("facility " + std::to_string(f.id) + ": negative demand");
            if (!grid.locate(f.x, f.y)) throw Error("facility " + std::to_string(f.id) + " lies outside the region");
        }
    }

    int county_position(int county_id) const {
        for (std::size_t j = 0; j < counties.size(); ++j)
            if (counties[j].id == county_id) return static_cast<int>(j);
        return -1;
    }

    bool in_region(double x, double y) const {
        auto c = grid.locate(x, y);
        return c && county_of_cell[grid.index(c->row, c->col)] >= 0;
    }
};

/// County-constant raster of a county attribute; cells outside every mask are nodata.
inline RasterLayer burn_table(const RegionModel& region, const std::string& column,
                              std::vector<std::string>* warnings = nullptr) {
    RasterLayer out(column, region.grid, region.grid.nodata);
    for (const auto& county : region.counties) {
        double value = 0.0;
        if (column == "supply_tons") {
            value = county.supply_tons;
        } else {
            auto it = county.attributes.find(column);
            if (it == county.attributes.end()) throw Error("unknown county attribute '" + column + "'");
            value = it->second;
        }
        for (std::size_t idx : county.cells) out.cells[idx] = value;
        if (county.cells.empty()) {
            std::string msg = "county " + std::to_string(county.id) + " has an empty mask; no cells written";
            log::warn(msg);
            if (warnings) warnings->push_back(msg);
        }
    }
    return out;
}

/// Integer raster of county ids (nodata outside the region).
inline RasterLayer county_mask_raster(const RegionModel& region) {
    RasterLayer out("county_mask", region.grid, region.grid.nodata);
    for (const auto& county : region.counties)
        for (std::size_t idx : county.cells) out.cells[idx] = county.id;
    return out;
}

// ---------------------------------------------------------------------------------------------
// Region directory IO:
//   county_mask.asc  counties.csv  facilities.csv  [candidates.csv]  region.cfg

inline std::vector<Facility> load_facilities(const std::filesystem::path& path) {
    CsvTable t = load_csv(path);
    int cid = t.require_column("id"), cx = t.require_column("x"), cy = t.require_column("y");
    int cd = t.require_column("demand_tons_per_year"), cs = t.require_column("status");
    std::vector<Facility> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        Facility f;
        f.id = static_cast<int>(t.integer(r, cid));
        f.x = t.number(r, cx);
        f.y = t.number(r, cy);
        f.demand_tons_per_year = t.number(r, cd);
        f.status = parse_facility_status(t.rows[r][static_cast<std::size_t>(cs)]);
        out.push_back(f);
    }
    return out;
}

inline std::vector<CandidateSite> load_candidates(const std::filesystem::path& path) {
    CsvTable t = load_csv(path);
    int cid = t.require_column("id"), cx = t.require_column("x"), cy = t.require_column("y");
    std::vector<CandidateSite> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r)
        out.push_back({static_cast<int>(t.integer(r, cid)), t.number(r, cx), t.number(r, cy), std::nullopt, std::nullopt});
    return out;
}

inline std::string format_facilities(const std::vector<Facility>& facilities) {
    std::string out = "id,x,y,demand_tons_per_year,status\n";
    for (const auto& f : facilities)
        out += (CsvLine() << f.id << f.x << f.y << f.demand_tons_per_year << to_string(f.status)).str() + "\n";
    return out;
}

inline std::string format_candidates(const std::vector<CandidateSite>& candidates) {
    std::string out = "id,x,y\n";
    for (const auto& c : candidates) out += (CsvLine() << c.id << c.x << c.y).str() + "\n";
    return out;
}

inline std::string format_counties(const RegionModel& region) {
    std::string out = "id,name,supply_tons,precip_inches,unemployment_rate,market_revenue\n";
    for (const auto& c : region.counties) {
        auto attr = [&](const char* k) {
            auto it = c.attributes.find(k);
            return it == c.attributes.end() ? 0.0 : it->second;
        };
        out += (CsvLine() << c.id << c.name << c.supply_tons << attr("precip_inches") << attr("unemployment_rate")
                          << attr("market_revenue"))
                   .str() +
               "\n";
    }
    return out;
}

/// Loads a region directory. region.cfg supplies `radius` (required) and optional `d_new`.
inline RegionModel load_region(const std::filesystem::path& dir) {
    RegionModel region;
    RasterLayer mask = load_raster(dir / "county_mask.asc");
    region.grid = mask.header;

    CsvTable t = load_csv(dir / "counties.csv");
    int cid = t.require_column("id"), cname = t.require_column("name"), csup = t.require_column("supply_tons");
    std::map<int, std::size_t> position;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        County c;
        c.id = static_cast<int>(t.integer(r, cid));
        c.name = t.rows[r][static_cast<std::size_t>(cname)];
        c.supply_tons = t.number(r, csup);
        for (std::size_t col = 0; col < t.header.size(); ++col) {
            if (static_cast<int>(col) == cid || static_cast<int>(col) == cname || static_cast<int>(col) == csup) continue;
            c.attributes[t.header[col]] = t.number(r, static_cast<int>(col));
        }
        if (position.count(c.id)) throw ParseError("counties.csv: duplicate county id " + std::to_string(c.id), t.row_lines[r]);
        position[c.id] = region.counties.size();
        region.counties.push_back(std::move(c));
    }
    for (std::size_t idx = 0; idx < mask.cells.size(); ++idx) {
        double v = mask.cells[idx];
        if (mask.is_nodata(v)) continue;
        int id = static_cast<int>(std::lround(v));
        auto it = position.find(id);
        if (it == position.end() || static_cast<double>(id) != v)
            throw Error("county_mask.asc: cell value " + format_double(v) + " is not a county id in counties.csv");
        region.counties[it->second].cells.push_back(idx);
    }
    region.index_cells();

    if (std::filesystem::exists(dir / "facilities.csv")) region.facilities = load_facilities(dir / "facilities.csv");
    if (std::filesystem::exists(dir / "candidates.csv")) region.candidates = load_candidates(dir / "candidates.csv");
    KeyValueConfig cfg = KeyValueConfig::load(dir / "region.cfg");
    if (!cfg.has("radius")) throw Error("region.cfg: missing 'radius'");
    region.radius = cfg.get_double("radius", 0.0);
    region.validate();
    return region;
}

inline void save_region(const RegionModel& region, const std::filesystem::path& dir,
                        std::optional<double> d_new = std::nullopt) {
    std::filesystem::create_directories(dir);
    save_raster(county_mask_raster(region), dir / "county_mask.asc");
    write_text_file(dir / "counties.csv", format_counties(region));
    write_text_file(dir / "facilities.csv", format_facilities(region.facilities));
    write_text_file(dir / "candidates.csv", format_candidates(region.candidates));
    std::string cfg = "radius = " + format_double(region.radius) + "\n";
    if (d_new) cfg += "d_new = " + format_double(*d_new) + "\n";
    write_text_file(dir / "region.cfg", cfg);
}

} // namespace sitewise
