#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

#include "sitewise/core/random.hpp"
#include "sitewise/geocore/region.hpp"
#include "sitewise/geocore/synthetic.hpp"

using namespace sitewise;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("sitewise_geocore_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RegionModel two_county_region() {
    RegionModel r;
    r.grid = {4, 3, 100.0, 200.0, 10.0, -9999.0};
    County a{1, "West", 500.0, {{"unemployment_rate", 4.5}}, {}};
    County b{2, "East", 250.0, {{"unemployment_rate", 7.0}}, {}};
    for (int row = 0; row < 3; ++row)
        for (int col = 0; col < 4; ++col) {
            if (row == 2 && col == 3) continue; // outside both counties
            (col < 2 ? a : b).cells.push_back(r.grid.index(row, col));
        }
    r.counties = {a, b};
    r.facilities = {{7, 105.0, 225.0, 120.0, FacilityStatus::existing},
                    {9, 135.0, 205.0, 60.5, FacilityStatus::hypothetical}};
    r.candidates = {{3, 115.0, 215.0, std::nullopt, std::nullopt}};
    r.radius = 15.0;
    r.index_cells();
    return r;
}

} // namespace

TEST(GridHeader, CentersAndLocateAgree) {
    GridHeader g{5, 4, 10.0, 20.0, 2.0, -9999.0};
    for (int r = 0; r < g.nrows; ++r)
        for (int c = 0; c < g.ncols; ++c) {
            auto hit = g.locate(g.center_x(c), g.center_y(r));
            ASSERT_TRUE(hit);
            EXPECT_EQ(*hit, (CellIndex{r, c}));
            EXPECT_EQ(g.cell(g.index(r, c)), (CellIndex{r, c}));
        }
    EXPECT_EQ(g.center_y(0), 27.0); // row 0 is north
}

TEST(GridHeader, LocateEdges) {
    GridHeader g{2, 2, 0.0, 0.0, 1.0, -9999.0};
    EXPECT_EQ(*g.locate(0.0, 0.0), (CellIndex{1, 0}));
    EXPECT_EQ(*g.locate(1.0, 1.0), (CellIndex{0, 1})); // west/south edges are closed
    EXPECT_EQ(*g.locate(2.0, 2.0), (CellIndex{0, 1})); // outer east/north boundary included
    EXPECT_FALSE(g.locate(-1e-9, 0.5));
    EXPECT_FALSE(g.locate(0.5, 2.0 + 1e-9));
}

TEST(Raster, ParseFormatRoundTrip) {
    Rng rng = make_rng(4);
    RasterLayer layer("x", {6, 5, -12.5, 3.25, 0.5, -9999.0}, 0.0);
    for (double& v : layer.cells) v = uniform01(rng) * 1e4 - 5e3;
    layer.cells[7] = -9999.0;
    std::string text = format_raster(layer);
    std::istringstream in(text);
    RasterLayer back = parse_raster(in, "x");
    EXPECT_TRUE(back.header.same_grid(layer.header));
    EXPECT_EQ(back.cells, layer.cells);
    EXPECT_TRUE(back.is_nodata(std::size_t{7}));
    EXPECT_EQ(format_raster(back), text);
}

TEST(Raster, HeaderKeywordsAreCaseInsensitiveAndNodataOptional) {
    std::istringstream in("NCOLS 2\nNROWS 1\nXLLCORNER 0\nYLLCORNER 0\nCELLSIZE 1\n1 2\n");
    auto layer = parse_raster(in);
    EXPECT_EQ(layer.cells, (std::vector<double>{1, 2}));
    EXPECT_EQ(layer.nodata(), -9999.0);
}

TEST(Raster, ErrorsNameTheLine) {
    auto line_of = [](const std::string& text) {
        std::istringstream in(text);
        try {
            parse_raster(in);
        } catch (const ParseError& e) {
            return e.line();
        }
        return -1;
    };
    const std::string head = "ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\n";
    EXPECT_EQ(line_of(head + "1 2\n3\n"), 7);
    EXPECT_EQ(line_of(head + "1 2\n3 x\n"), 7);
    EXPECT_EQ(line_of(head + "1 2\n"), 7);
    EXPECT_EQ(line_of(head + "1 2\n3 4\n5 6\n"), 8);
    EXPECT_EQ(line_of("ncols 2\nnrows 2\nxllcorner 0\nbogus 1\n"), 4);
    EXPECT_NE(line_of("ncols 2\nnrows 2\nxllcorner 0\nyllcorner 0\n1 2\n3 4\n"), -1); // missing cellsize
}

TEST(Raster, SampleSkipsNodataAndOutside) {
    RasterLayer layer("x", {2, 1, 0.0, 0.0, 1.0, -1.0}, 5.0);
    layer.cells[1] = -1.0;
    EXPECT_EQ(layer.sample(0.5, 0.5).value(), 5.0);
    EXPECT_FALSE(layer.sample(1.5, 0.5));
    EXPECT_FALSE(layer.sample(3.0, 0.5));
}

TEST(Region, BurnTableWritesCountyValues) {
    RegionModel r = two_county_region();
    auto layer = burn_table(r, "unemployment_rate");
    EXPECT_EQ(layer.at(0, 0), 4.5);
    EXPECT_EQ(layer.at(1, 3), 7.0);
    EXPECT_TRUE(layer.is_nodata(layer.at(2, 3)));
    EXPECT_EQ(burn_table(r, "supply_tons").at(0, 1), 500.0);
    EXPECT_THROW(burn_table(r, "nope"), Error);

    r.counties.push_back({3, "Empty", 0.0, {{"unemployment_rate", 1.0}}, {}});
    std::vector<std::string> warnings;
    burn_table(r, "unemployment_rate", &warnings);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("county 3"), std::string::npos);
}

TEST(Region, SaveLoadRoundTrip) {
    RegionModel r = two_county_region();
    fs::path dir = scratch("roundtrip");
    save_region(r, dir, 80.0);
    RegionModel back = load_region(dir);
    ASSERT_EQ(back.counties.size(), 2u);
    EXPECT_EQ(back.counties[1].name, "East");
    EXPECT_EQ(back.counties[1].cells, r.counties[1].cells);
    EXPECT_EQ(back.counties[0].attributes.at("unemployment_rate"), 4.5);
    EXPECT_EQ(back.county_of_cell, r.county_of_cell);
    ASSERT_EQ(back.facilities.size(), 2u);
    EXPECT_EQ(back.facilities[1].status, FacilityStatus::hypothetical);
    EXPECT_EQ(back.facilities[1].demand_tons_per_year, 60.5);
    ASSERT_EQ(back.candidates.size(), 1u);
    EXPECT_EQ(back.radius, 15.0);
    EXPECT_TRUE(back.in_region(105.0, 205.0));
    EXPECT_FALSE(back.in_region(139.0, 201.0));
}

TEST(Region, MaskValueWithoutCountyIsRejected) {
    RegionModel r = two_county_region();
    fs::path dir = scratch("badmask");
    save_region(r, dir);
    auto mask = load_raster(dir / "county_mask.asc");
    mask.cells[0] = 42.0;
    save_raster(mask, dir / "county_mask.asc");
    EXPECT_THROW(load_region(dir), Error);
}

TEST(Region, FacilityOutsideGridIsRejected) {
    RegionModel r = two_county_region();
    r.facilities.push_back({11, 1e6, 1e6, 1.0, FacilityStatus::existing});
    EXPECT_THROW(r.validate(), Error);
}

TEST(Synthetic, SameSeedSameRegion) {
    SyntheticOptions opt;
    opt.ncols = 40;
    opt.nrows = 30;
    opt.n_counties = 6;
    opt.n_facilities = 5;
    opt.n_candidates = 8;
    opt.seed = 17;
    auto a = generate_synthetic_region(opt);
    auto b = generate_synthetic_region(opt);
    EXPECT_EQ(a.ground_truth.cells, b.ground_truth.cells);
    EXPECT_EQ(format_facilities(a.region.facilities), format_facilities(b.region.facilities));
    EXPECT_EQ(a.criteria.names(), b.criteria.names());

    opt.seed = 18;
    auto c = generate_synthetic_region(opt);
    EXPECT_NE(a.ground_truth.cells, c.ground_truth.cells);
}

TEST(Synthetic, SavedRegionLoadsBack) {
    SyntheticOptions opt;
    opt.ncols = 30;
    opt.nrows = 30;
    opt.n_counties = 5;
    opt.n_facilities = 4;
    opt.n_candidates = 6;
    auto s = generate_synthetic_region(opt);
    fs::path dir = scratch("synthetic");
    save_synthetic(s, dir);
    RegionModel back = load_region(dir);
    EXPECT_EQ(back.counties.size(), 5u);
    EXPECT_EQ(back.facilities.size(), 4u);
    EXPECT_EQ(back.candidates.size(), 6u);
    EXPECT_TRUE(fs::exists(dir / "criteria.cfg"));
    EXPECT_TRUE(fs::exists(dir / "planted_weights.csv"));
    for (const auto& f : back.facilities) EXPECT_TRUE(back.in_region(f.x, f.y));
}

TEST(Synthetic, SpreadFollowsPlantedWeights) {
    SyntheticOptions opt;
    opt.ncols = 80;
    opt.nrows = 80;
    opt.n_counties = 30;
    auto s = generate_synthetic_region(opt);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < 3; ++k) { // the three heaviest criteria
        int i = s.criteria.index_of(s.planted.names()[k]);
        ASSERT_GE(i, 0);
        double contribution = s.planted[k] * mean_abs_deviation(s.criteria.layer(static_cast<std::size_t>(i)));
        EXPECT_LT(contribution, prev);
        prev = contribution;
    }
}
