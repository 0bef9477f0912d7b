#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/criteria/criteria_set.hpp"
#include "sitewise/overlay/overlay.hpp"

namespace sitewise {

enum class Split { none, train, test };

inline const char* to_string(Split s) {
    switch (s) {
    case Split::train: return "train";
    case Split::test: return "test";
    default: return "";
    }
}

struct SampleRow {
    int id = 0;
    std::size_t cell = 0;
    double x = 0.0;
    double y = 0.0;
    std::vector<double> features;
    double score = 0.0;
    int label = 0;
    Split split = Split::none;
};

/// Labeled observations drawn from a suitability map.
struct SampleSet {
    std::vector<std::string> feature_names;
    std::vector<SampleRow> rows;

    std::size_t size() const { return rows.size(); }

    std::array<std::size_t, kNumClasses> class_counts(Split only = Split::none) const {
        std::array<std::size_t, kNumClasses> c{};
        for (const auto& r : rows)
            if (only == Split::none || r.split == only) ++c[static_cast<std::size_t>(r.label)];
        return c;
    }

    std::vector<double> scores() const {
        std::vector<double> s;
        s.reserve(rows.size());
        for (const auto& r : rows) s.push_back(r.score);
        return s;
    }
};

/// Cells eligible for sampling: non-nodata in the score raster and in every criterion.
inline std::vector<std::size_t> valid_cells(const RasterLayer& score, const CriteriaSet& criteria) {
    std::vector<std::size_t> cells;
    std::vector<double> tmp;
    for (std::size_t i = 0; i < score.cells.size(); ++i)
        if (!score.is_nodata(i) && criteria.features_at(i, tmp)) cells.push_back(i);
    return cells;
}

/// n distinct cells drawn uniformly without replacement, in draw order.
inline std::vector<std::size_t> draw_cells(const RasterLayer& score, const CriteriaSet& criteria, std::size_t n,
                                           std::uint64_t seed) {
    auto cells = valid_cells(score, criteria);
    if (n > cells.size())
        throw Error("sample_points: requested " + std::to_string(n) + " points but only " + std::to_string(cells.size()) +
                    " valid cells");
    Rng rng = make_rng(seed, 0x5A3D);
    // Partial Fisher-Yates: the first n positions are the draw.
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i + static_cast<std::size_t>(uniform_index(rng, cells.size() - i));
        std::swap(cells[i], cells[j]);
    }
    cells.resize(n);
    return cells;
}

inline SampleSet rows_from_cells(const SuitabilityMap& map, const CriteriaSet& criteria,
                                 const std::vector<std::size_t>& cells, int first_id = 0) {
    SampleSet s;
    s.feature_names = criteria.names();
    s.rows.reserve(cells.size());
    const GridHeader& g = map.score.header;
    int id = first_id;
    for (std::size_t cell : cells) {
        SampleRow row;
        row.id = id++;
        row.cell = cell;
        auto rc = g.cell(cell);
        row.x = g.center_x(rc.col);
        row.y = g.center_y(rc.row);
        if (!criteria.features_at(cell, row.features)) throw Error("sample_points: nodata criterion at sampled cell");
        row.score = map.score.cells[cell];
        row.label = classify_score(row.score, map.breaks);
        s.rows.push_back(std::move(row));
    }
    return s;
}

/// Draws n random cells of the map and labels them with the map's breaks.
inline SampleSet sample_points(const SuitabilityMap& map, const CriteriaSet& criteria, std::size_t n, std::uint64_t seed) {
    return rows_from_cells(map, criteria, draw_cells(map.score, criteria, n, seed));
}

/// Scores of the cells draw_cells would return for (n, seed); used to place breaks from a
/// sample before classifying.
inline std::vector<double> sampled_scores(const RasterLayer& score, const CriteriaSet& criteria, std::size_t n,
                                          std::uint64_t seed) {
    std::vector<double> out;
    for (std::size_t c : draw_cells(score, criteria, n, seed)) out.push_back(score.cells[c]);
    return out;
}

/// Extra draw targeting under-represented classes: adds up to `per_class_target - count`
/// previously unsampled cells of each short class.
inline void top_up(SampleSet& samples, const SuitabilityMap& map, const CriteriaSet& criteria,
                   std::size_t per_class_target, std::uint64_t seed) {
    auto counts = samples.class_counts();
    std::vector<bool> taken(map.score.cells.size(), false);
    for (const auto& r : samples.rows) taken[r.cell] = true;
    auto cells = valid_cells(map.score, criteria);
    Rng rng = make_rng(seed, 0x70F);
    shuffle(cells, rng);
    std::vector<std::size_t> extra;
    for (std::size_t c : cells) {
        if (taken[c]) continue;
        auto cls = static_cast<std::size_t>(classify_score(map.score.cells[c], map.breaks));
        if (counts[cls] >= per_class_target) continue;
        ++counts[cls];
        extra.push_back(c);
    }
    int next_id = 0;
    for (const auto& r : samples.rows) next_id = std::max(next_id, r.id + 1);
    auto more = rows_from_cells(map, criteria, extra, next_id);
    for (auto& r : more.rows) samples.rows.push_back(std::move(r));
}

/// Stratified train/test split: within each class, round(train_frac * n_c) rows go to train.
inline void split(SampleSet& samples, double train_frac, std::uint64_t seed) {
    if (samples.size() < 5) throw Error("split: need at least 5 rows");
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw Error("split: train_frac must be in (0, 1)");
    std::array<std::vector<std::size_t>, kNumClasses> by_class;
    for (std::size_t i = 0; i < samples.rows.size(); ++i)
        by_class[static_cast<std::size_t>(samples.rows[i].label)].push_back(i);
    for (int c = 0; c < kNumClasses; ++c)
        if (by_class[c].size() == 1) throw Error(std::string("split: class ") + kClassNames[c] + " has fewer than 2 rows");
    Rng rng = make_rng(seed, 0x5B17);
    for (auto& idx : by_class) {
        shuffle(idx, rng);
        auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(idx.size())));
        if (idx.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        for (std::size_t k = 0; k < idx.size(); ++k) samples.rows[idx[k]].split = k < n_train ? Split::train : Split::test;
    }
}

inline std::string format_samples(const SampleSet& s) {
    std::string out = "id,x,y";
    for (const auto& n : s.feature_names) out += "," + csv_escape(n);
    out += ",score,label,split\n";
    for (const auto& r : s.rows) {
        CsvLine line;
        line << r.id << r.x << r.y;
        for (double f : r.features) line << f;
        line << r.score << r.label << to_string(r.split);
        out += line.str() + "\n";
    }
    return out;
}

inline SampleSet load_samples(const std::filesystem::path& path) {
    CsvTable t = load_csv(path);
    if (t.header.size() < 6 || t.header[0] != "id" || t.header[1] != "x" || t.header[2] != "y")
        throw ParseError("samples.csv: header must start with id,x,y", 1);
    const std::size_t nf = t.header.size() - 6;
    if (t.header[3 + nf] != "score" || t.header[4 + nf] != "label" || t.header[5 + nf] != "split")
        throw ParseError("samples.csv: header must end with score,label,split", 1);
    SampleSet s;
    for (std::size_t k = 0; k < nf; ++k) s.feature_names.push_back(t.header[3 + k]);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        SampleRow row;
        row.id = static_cast<int>(t.integer(r, 0));
        row.x = t.number(r, 1);
        row.y = t.number(r, 2);
        for (std::size_t k = 0; k < nf; ++k) row.features.push_back(t.number(r, static_cast<int>(3 + k)));
        row.score = t.number(r, static_cast<int>(3 + nf));
        auto label = t.integer(r, static_cast<int>(4 + nf));
        if (label < 0 || label >= kNumClasses) throw ParseError("samples.csv: label out of range", t.row_lines[r]);
        row.label = static_cast<int>(label);
        const std::string& sp = t.rows[r][5 + nf];
        row.split = sp == "train" ? Split::train : sp == "test" ? Split::test : Split::none;
        s.rows.push_back(std::move(row));
    }
    return s;
}

} // namespace sitewise
