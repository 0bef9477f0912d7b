#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/core/format.hpp"

namespace sitewise {

struct CellIndex {
    int row = 0;
    int col = 0;
    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Georeferencing for a north-up grid. Row 0 is the northernmost row.
struct GridHeader {
    int ncols = 0;
    int nrows = 0;
    double xll = 0.0; // lower-left corner
    double yll = 0.0;
    double cellsize = 1.0;
    double nodata = -9999.0;

    std::size_t size() const { return static_cast<std::size_t>(ncols) * static_cast<std::size_t>(nrows); }
    std::size_t index(int row, int col) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(ncols) + static_cast<std::size_t>(col);
    }
    CellIndex cell(std::size_t idx) const {
        return {static_cast<int>(idx / static_cast<std::size_t>(ncols)), static_cast<int>(idx % static_cast<std::size_t>(ncols))};
    }
    bool contains(int row, int col) const { return row >= 0 && row < nrows && col >= 0 && col < ncols; }

    double center_x(int col) const { return xll + (col + 0.5) * cellsize; }
    double center_y(int row) const { return yll + (nrows - row - 0.5) * cellsize; }

    double xmax() const { return xll + ncols * cellsize; }
    double ymax() const { return yll + nrows * cellsize; }

    /// Cell containing (x, y). Cells are closed on the west/south edges and open on the
    /// east/north edges, except that the grid's own east and north boundaries are included.
    std::optional<CellIndex> locate(double x, double y) const {
        if (!(x >= xll && x <= xmax() && y >= yll && y <= ymax())) return std::nullopt;
        int col = static_cast<int>(std::floor((x - xll) / cellsize));
        int row_from_south = static_cast<int>(std::floor((y - yll) / cellsize));
        if (col >= ncols) col = ncols - 1;
        if (row_from_south >= nrows) row_from_south = nrows - 1;
        return CellIndex{nrows - 1 - row_from_south, col};
    }

    bool same_grid(const GridHeader& o) const {
        return ncols == o.ncols && nrows == o.nrows && xll == o.xll && yll == o.yll && cellsize == o.cellsize;
    }

    void validate() const {
        if (ncols <= 0 || nrows <= 0) throw Error("grid dimensions must be positive");
        if (!(cellsize > 0.0) || !std::isfinite(cellsize)) throw Error("cellsize must be positive");
        if (!std::isfinite(xll) || !std::isfinite(yll)) throw Error("grid origin must be finite");
    }
};

/// m x n grid of reals in row-major order (north to south).
struct RasterLayer {
    std::string name;
    GridHeader header;
    std::vector<double> cells;

    RasterLayer() = default;
    RasterLayer(std::string layer_name, const GridHeader& h, double fill)
        : name(std::move(layer_name)), header(h), cells(h.size(), fill) {}

    int ncols() const { return header.ncols; }
    int nrows() const { return header.nrows; }
    double nodata() const { return header.nodata; }

    double& at(int row, int col) { return cells[header.index(row, col)]; }
    double at(int row, int col) const { return cells[header.index(row, col)]; }

    bool is_nodata(double v) const { return v == header.nodata; }
    bool is_nodata(std::size_t idx) const { return cells[idx] == header.nodata; }

    /// Value at a world coordinate, or nullopt if outside the grid or nodata.
    std::optional<double> sample(double x, double y) const {
        auto c = header.locate(x, y);
        if (!c) return std::nullopt;
        double v = at(c->row, c->col);
        if (is_nodata(v)) return std::nullopt;
        return v;
    }

    void validate() const {
        header.validate();
        if (cells.size() != header.size()) throw Error("raster '" + name + "': cell count does not match header");
        for (double v : cells)
            if (!is_nodata(v) && !std::isfinite(v)) throw Error("raster '" + name + "': non-finite cell value");
    }
};

/// Parses an ESRI ASCII grid: six header lines (ncols, nrows, xllcorner, yllcorner, cellsize,
/// NODATA_value; the last is optional) followed by nrows lines of ncols values, north first.
inline RasterLayer parse_raster(std::istream& in, std::string name = "") {
    RasterLayer layer;
    layer.name = std::move(name);
    GridHeader& h = layer.header;
    bool got[6] = {false, false, false, false, false, false};
    static const char* keys[6] = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"};

    std::string line;
    int lineno = 0;
    std::streampos data_start = in.tellg();
    // Header: keyword lines until the first line that starts with a number.
    while (true) {
        data_start = in.tellg();
        if (!std::getline(in, line)) break;
        ++lineno;
        std::istringstream ls(line);
        std::string key, value, extra;
        if (!(ls >> key)) {
            continue;
        }
        if (parse_double(key)) {
            in.clear();
            in.seekg(data_start);
            --lineno;
            break;
        }
        if (!(ls >> value) || (ls >> extra)) throw ParseError("malformed header line '" + line + "'", lineno);
        std::string lower;
        for (char ch : key) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        int which = -1;
        for (int k = 0; k < 6; ++k)
            if (lower == keys[k]) which = k;
        if (which < 0) throw ParseError("unknown header keyword '" + key + "'", lineno);
        if (got[which]) throw ParseError("duplicate header keyword '" + key + "'", lineno);
        got[which] = true;
        if (which <= 1) {
            auto iv = parse_int(value);
            if (!iv || *iv <= 0) throw ParseError("malformed header: " + key + " must be a positive integer", lineno);
            (which == 0 ? h.ncols : h.nrows) = static_cast<int>(*iv);
        } else {
            auto dv = parse_double(value);
            if (!dv || !std::isfinite(*dv)) throw ParseError("malformed header: non-numeric " + key, lineno);
            if (which == 2) h.xll = *dv;
            if (which == 3) h.yll = *dv;
            if (which == 4) h.cellsize = *dv;
            if (which == 5) h.nodata = *dv;
        }
    }
    for (int k = 0; k < 5; ++k)
        if (!got[k]) throw ParseError(std::string("malformed header: missing ") + keys[k], lineno);
    if (!(h.cellsize > 0.0)) throw ParseError("malformed header: cellsize must be positive", lineno);

    layer.cells.reserve(h.size());
    int rows_read = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        if (rows_read == h.nrows) throw ParseError("cell-count mismatch: more than " + std::to_string(h.nrows) + " rows", lineno);
        std::istringstream ls(line);
        std::string tok;
        int count = 0;
        while (ls >> tok) {
            auto v = parse_double(tok);
            if (!v) throw ParseError("non-numeric token '" + tok + "'", lineno);
            if (!std::isfinite(*v) && *v != h.nodata) throw ParseError("non-finite cell value '" + tok + "'", lineno);
            layer.cells.push_back(*v);
            ++count;
        }
        if (count != h.ncols) throw ParseError("cell-count mismatch", lineno);
        ++rows_read;
    }
    if (rows_read != h.nrows)
        throw ParseError("cell-count mismatch: expected " + std::to_string(h.nrows) + " rows, found " + std::to_string(rows_read),
                         lineno + 1);
    return layer;
}

inline RasterLayer load_raster(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open raster " + path.string());
    try {
        return parse_raster(in, path.stem().string());
    } catch (const ParseError& e) {
        throw ParseError(path.filename().string() + ": " + e.what(), 0);
    }
}

/// Canonical ASCII grid text: one keyword per line, single-space separated rows, shortest
/// round-trip decimal values.
inline std::string format_raster(const RasterLayer& layer) {
    const GridHeader& h = layer.header;
    std::string out;
    out.reserve(layer.cells.size() * 8 + 128);
    out += "ncols " + std::to_string(h.ncols) + "\n";
    out += "nrows " + std::to_string(h.nrows) + "\n";
    out += "xllcorner " + format_double(h.xll) + "\n";
    out += "yllcorner " + format_double(h.yll) + "\n";
    out += "cellsize " + format_double(h.cellsize) + "\n";
    out += "NODATA_value " + format_double(h.nodata) + "\n";
    for (int r = 0; r < h.nrows; ++r) {
        for (int c = 0; c < h.ncols; ++c) {
            if (c) out.push_back(' ');
            out += format_double(layer.at(r, c));
        }
        out.push_back('\n');
    }
    return out;
}

inline void save_raster(const RasterLayer& layer, const std::filesystem::path& path) {
    write_text_file(path, format_raster(layer));
}

} // namespace sitewise
