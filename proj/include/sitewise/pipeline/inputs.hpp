#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sitewise/core/error.hpp"
#include "sitewise/criteria/criteria_set.hpp"
#include "sitewise/criteria/distance_transform.hpp"
#include "sitewise/geocore/region.hpp"
#include "sitewise/sdr/sdr.hpp"

namespace sitewise {

/// Normalized criteria of a region plus what is needed to rebuild any one of them later:
/// the affine parameters of continuous criteria and the SDR table behind the SDR layer.
struct AssembledCriteria {
    CriteriaSet criteria;
    std::vector<CriterionSpec> specs;
    std::vector<std::optional<RangeNormalization>> params; // aligned with specs
    std::optional<SdrTable> sdr;
};

/// Raw (pre-normalization) layer of one criterion.
inline RasterLayer raw_criterion(const CriterionSpec& spec, const RegionModel& region, const std::filesystem::path& dir,
                                 double d_new, NewDemandMode mode) {
    RasterLayer raw;
    switch (spec.source) {
    case SourceKind::raster: raw = load_raster(dir / spec.source_arg); break;
    case SourceKind::distance: raw = distance_transform(load_raster(dir / spec.source_arg)); break;
    case SourceKind::county: raw = burn_table(region, spec.source_arg); break;
    case SourceKind::sdr: raw = sdr_raster(compute_sdr(region, d_new, mode), region); break;
    }
    if (!raw.header.same_grid(region.grid))
        throw Error("criterion '" + spec.name + "': layer grid differs from the county mask grid");
    return raw;
}

/// Builds every criterion layer of `specs` for a region directory. `frozen` (aligned with
/// specs) pins the continuous normalizations, as scenario updates require.
inline AssembledCriteria assemble_criteria(const RegionModel& region, const std::vector<CriterionSpec>& specs,
                                           const std::filesystem::path& dir, double d_new,
                                           NewDemandMode mode = NewDemandMode::radius,
                                           const std::vector<std::optional<RangeNormalization>>* frozen = nullptr) {
    if (specs.empty()) throw Error("assemble_criteria: no criteria");
    if (frozen && frozen->size() != specs.size()) throw Error("assemble_criteria: frozen parameter count mismatch");
    AssembledCriteria out;
    out.specs = specs;
    for (std::size_t k = 0; k < specs.size(); ++k) {
        const CriterionSpec& spec = specs[k];
        RasterLayer raw;
        if (spec.source == SourceKind::sdr) {
            if (!out.sdr) out.sdr = compute_sdr(region, d_new, mode);
            raw = sdr_raster(*out.sdr, region);
        } else {
            raw = raw_criterion(spec, region, dir, d_new, mode);
        }
        auto n = normalize_criterion(spec, raw, frozen ? (*frozen)[k] : std::nullopt);
        out.params.push_back(n.params);
        out.criteria.add(spec.name, std::move(n.layer));
    }
    return out;
}

/// Replaces the SDR criterion (if any) after the facility set changed, keeping its frozen
/// normalization. Returns the new SDR table.
inline std::optional<SdrTable> refresh_sdr(AssembledCriteria& a, const RegionModel& region, double d_new, NewDemandMode mode) {
    std::optional<SdrTable> table;
    for (std::size_t k = 0; k < a.specs.size(); ++k) {
        if (a.specs[k].source != SourceKind::sdr) continue;
        if (!table) table = compute_sdr(region, d_new, mode);
        auto n = normalize_criterion(a.specs[k], sdr_raster(*table, region), a.params[k]);
        a.criteria.replace(k, std::move(n.layer));
    }
    if (!table) table = compute_sdr(region, d_new, mode);
    a.sdr = table;
    return table;
}

} // namespace sitewise
