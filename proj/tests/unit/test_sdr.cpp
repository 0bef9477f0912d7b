#include <gtest/gtest.h>

#include "oracles/brute_force.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/sdr/sdr.hpp"

using namespace sitewise;

namespace {

// Counties as vertical strips with a ragged hole pattern so masks are uneven.
RegionModel random_region(Rng& rng) {
    RegionModel r;
    int cols = 8 + static_cast<int>(uniform_index(rng, 30));
    int rows = 8 + static_cast<int>(uniform_index(rng, 30));
    r.grid = {cols, rows, uniform01(rng) * 1000, uniform01(rng) * 1000, 10.0 + uniform01(rng) * 40, -9999};
    int n = 1 + static_cast<int>(uniform_index(rng, 8));
    for (int j = 0; j < n; ++j)
        r.counties.push_back({100 + j, "c" + std::to_string(j), std::floor(uniform01(rng) * 5000), {}, {}});
    std::vector<int> owner(r.grid.size());
    for (std::size_t i = 0; i < owner.size(); ++i) {
        auto rc = r.grid.cell(i);
        owner[i] = uniform01(rng) < 0.08 ? -1 : std::min(n - 1, rc.col * n / cols + (uniform01(rng) < 0.1 ? 1 : 0));
    }
    for (std::size_t i = 0; i < owner.size(); ++i)
        if (owner[i] >= 0) r.counties[static_cast<std::size_t>(owner[i])].cells.push_back(i);
    r.index_cells();
    r.radius = r.grid.cellsize * (0.5 + uniform01(rng) * 8);
    int nf = static_cast<int>(uniform_index(rng, 7));
    for (int i = 0; i < nf; ++i)
        r.facilities.push_back({i + 1, r.grid.xll + uniform01(rng) * (r.grid.xmax() - r.grid.xll),
                                r.grid.yll + uniform01(rng) * (r.grid.ymax() - r.grid.yll), std::floor(uniform01(rng) * 900),
                                i % 3 ? FacilityStatus::existing : FacilityStatus::hypothetical});
    return r;
}

} // namespace

TEST(Sdr, MatchesBruteForceOnRandomRegions) {
    Rng rng = make_rng(77);
    for (int trial = 0; trial < 40; ++trial) {
        RegionModel r = random_region(rng);
        double d_new = std::floor(uniform01(rng) * 400);
        auto table = compute_sdr(r, d_new);
        auto want = oracle::sdr(r, d_new);
        ASSERT_EQ(table.rows.size(), want.size());
        for (std::size_t j = 0; j < want.size(); ++j) {
            const auto& got = table.rows[j];
            EXPECT_EQ(got.county_id, r.counties[j].id);
            EXPECT_NEAR(got.existing_demand, want[j].existing, 1e-9 * (1 + want[j].existing));
            EXPECT_NEAR(got.d_new, want[j].d_new, 1e-9 * (1 + want[j].d_new));
            ASSERT_EQ(got.defined, want[j].defined) << "trial " << trial << " county " << j;
            if (got.defined) EXPECT_NEAR(got.sdr, want[j].sdr, 1e-9 * (1 + want[j].sdr));
        }
    }
}

TEST(Sdr, AllocationConservesDemand) {
    Rng rng = make_rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        RegionModel r = random_region(rng);
        auto alloc = allocate_demand(r);
        for (std::size_t i = 0; i < r.facilities.size(); ++i) {
            double demand = r.facilities[i].demand_tons_per_year;
            if (alloc.uncovered[i]) EXPECT_EQ(alloc.row_sum(i), 0.0);
            else EXPECT_NEAR(alloc.row_sum(i), demand, 1e-9 * (1 + demand));
            for (std::size_t j = 0; j < r.counties.size(); ++j) EXPECT_GE(alloc.at(i, j), 0.0);
        }
    }
}

TEST(Sdr, SingleCountyTakesAllDemand) {
    RegionModel r;
    r.grid = {5, 5, 0, 0, 1, -9999};
    r.counties = {{1, "only", 300.0, {}, {}}};
    for (std::size_t i = 0; i < r.grid.size(); ++i) r.counties[0].cells.push_back(i);
    r.index_cells();
    r.radius = 2.0;
    r.facilities = {{1, 2.5, 2.5, 100.0, FacilityStatus::existing}, {2, 0.5, 0.5, 50.0, FacilityStatus::hypothetical}};
    auto t = compute_sdr(r, 50.0);
    EXPECT_DOUBLE_EQ(t.rows[0].existing_demand, 150.0);
    EXPECT_DOUBLE_EQ(t.rows[0].d_new, 50.0);
    EXPECT_DOUBLE_EQ(t.rows[0].sdr, 1.5);
}

TEST(Sdr, TwoCountySplitFollowsCellShares) {
    // 4x1 grid; county 1 owns the west cell, county 2 the other three. A disk of radius 10
    // centered on the grid covers all four centers.
    RegionModel r;
    r.grid = {4, 1, 0, 0, 1, -9999};
    r.counties = {{1, "w", 10.0, {}, {}}, {2, "e", 90.0, {}, {}}};
    r.counties[0].cells = {0};
    r.counties[1].cells = {1, 2, 3};
    r.index_cells();
    r.radius = 10.0;
    r.facilities = {{1, 2.0, 0.5, 40.0, FacilityStatus::existing}};
    auto t = compute_sdr(r, 0.0);
    EXPECT_DOUBLE_EQ(t.rows[0].existing_demand, 10.0);
    EXPECT_DOUBLE_EQ(t.rows[1].existing_demand, 30.0);
    EXPECT_DOUBLE_EQ(t.rows[0].sdr, 1.0);
    EXPECT_DOUBLE_EQ(t.rows[1].sdr, 3.0);
}

TEST(Sdr, ZeroDenominatorIsUndefined) {
    RegionModel r;
    r.grid = {4, 1, 0, 0, 1, -9999};
    r.counties = {{1, "w", 10.0, {}, {}}, {2, "e", 90.0, {}, {}}};
    r.counties[0].cells = {0};
    r.counties[1].cells = {3};
    r.index_cells();
    r.radius = 0.5;
    auto t = compute_sdr(r, 0.0);
    EXPECT_FALSE(t.rows[0].defined);
    EXPECT_FALSE(t.rows[1].defined);
    auto layer = sdr_raster(t, r);
    for (std::size_t i = 0; i < layer.cells.size(); ++i) EXPECT_TRUE(layer.is_nodata(i));
    EXPECT_NE(format_sdr_table(t).find(",false"), std::string::npos);
}

TEST(Sdr, WholeModeChargesFullEntrantDemand) {
    Rng rng = make_rng(31);
    RegionModel r = random_region(rng);
    auto t = compute_sdr(r, 120.0, NewDemandMode::whole);
    for (std::size_t j = 0; j < r.counties.size(); ++j)
        if (!r.counties[j].cells.empty()) EXPECT_EQ(t.rows[j].d_new, 120.0);
}

TEST(Sdr, AddingDemandNeverRaisesRatio) {
    Rng rng = make_rng(12);
    for (int trial = 0; trial < 20; ++trial) {
        RegionModel r = random_region(rng);
        auto before = compute_sdr(r, 100.0);
        r.facilities.push_back({999, r.grid.center_x(0), r.grid.center_y(0), 500.0, FacilityStatus::hypothetical});
        auto after = compute_sdr(r, 100.0);
        for (std::size_t j = 0; j < r.counties.size(); ++j)
            if (before.rows[j].defined) EXPECT_LE(after.rows[j].sdr, before.rows[j].sdr + 1e-12);
    }
}

TEST(Sdr, DefaultNewDemandIsMeanOfExisting) {
    RegionModel r;
    r.facilities = {{1, 0, 0, 10, FacilityStatus::existing},
                    {2, 0, 0, 30, FacilityStatus::existing},
                    {3, 0, 0, 1000, FacilityStatus::hypothetical}};
    EXPECT_EQ(default_new_demand(r), 20.0);
    r.facilities.clear();
    EXPECT_EQ(default_new_demand(r), 0.0);
}
