#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "sitewise/core/error.hpp"
#include "sitewise/core/format.hpp"
#include "sitewise/criteria/normalize.hpp"
#include "sitewise/geocore/raster.hpp"

namespace sitewise {

/// Ordered normalized criterion layers sharing one grid. Order is the canonical order used by
/// every WeightVector and feature matrix built from the set.
class CriteriaSet {
public:
    CriteriaSet() = default;

    void add(std::string name, RasterLayer layer) {
        if (!layers_.empty() && !layer.header.same_grid(layers_.front().header))
            throw Error("criterion '" + name + "' does not share the grid of the first criterion");
        for (const auto& n : names_)
            if (n == name) throw Error("duplicate criterion '" + name + "'");
        for (std::size_t i = 0; i < layer.cells.size(); ++i) {
            double v = layer.cells[i];
            if (!layer.is_nodata(i) && !(v >= 0.0 && v <= 1.0))
                throw Error("criterion '" + name + "' has a value outside [0, 1]");
        }
        layer.name = name;
        names_.push_back(std::move(name));
        layers_.push_back(std::move(layer));
    }

    void replace(std::size_t i, RasterLayer layer) {
        layer.name = names_.at(i);
        if (!layer.header.same_grid(layers_.at(i).header)) throw Error("replacement layer grid mismatch");
        layers_[i] = std::move(layer);
    }

    std::size_t size() const { return layers_.size(); }
    bool empty() const { return layers_.empty(); }
    const std::vector<std::string>& names() const { return names_; }
    const RasterLayer& layer(std::size_t i) const { return layers_.at(i); }
    const std::vector<RasterLayer>& layers() const { return layers_; }
    const GridHeader& grid() const { return layers_.at(0).header; }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (names_[i] == name) return static_cast<int>(i);
        return -1;
    }

    /// Feature vector at a cell; false if any layer is nodata there.
    bool features_at(std::size_t cell, std::vector<double>& out) const {
        out.resize(layers_.size());
        for (std::size_t k = 0; k < layers_.size(); ++k) {
            if (layers_[k].is_nodata(cell)) return false;
            out[k] = layers_[k].cells[cell];
        }
        return true;
    }

private:
    std::vector<std::string> names_;
    std::vector<RasterLayer> layers_;
};

// ---------------------------------------------------------------------------------------------
// Criteria configuration: one criterion per line, whitespace separated.
//
//   <name> <source> <direction> <method> [params...]
//
//   source:    raster:<file>      raw values
//              distance:<file>    0/1 source mask, converted by distance_transform
//              county:<column>    counties.csv attribute, burned to the county masks
//              sdr                supply-demand ratio computed from the region
//   method:    bands b1 b2 b3     four-band reclassification
//              minmax             min-max over the layer
//              range lo hi        fixed reference range
//              lookup code=band[,code=band...]

enum class SourceKind { raster, distance, county, sdr };

struct CriterionSpec {
    std::string name;
    SourceKind source = SourceKind::raster;
    std::string source_arg;
    Direction direction = Direction::higher_is_better;

    struct Bands {
        std::array<double, 3> breakpoints{};
    };
    struct MinMax {};
    struct Range {
        double lo = 0.0, hi = 1.0;
    };
    struct Lookup {
        std::map<long long, int> bands;
    };
    std::variant<Bands, MinMax, Range, Lookup> method = MinMax{};

    BandRule band_rule() const { return {name, direction, std::get<Bands>(method).breakpoints}; }
};

inline std::string format_criterion(const CriterionSpec& c) {
    std::string src;
    switch (c.source) {
    case SourceKind::raster: src = "raster:" + c.source_arg; break;
    case SourceKind::distance: src = "distance:" + c.source_arg; break;
    case SourceKind::county: src = "county:" + c.source_arg; break;
    case SourceKind::sdr: src = "sdr"; break;
    }
    std::string out = c.name + " " + src + " " + to_string(c.direction) + " ";
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, CriterionSpec::Bands>) {
                out += "bands " + format_double(m.breakpoints[0]) + " " + format_double(m.breakpoints[1]) + " " +
                       format_double(m.breakpoints[2]);
            } else if constexpr (std::is_same_v<M, CriterionSpec::MinMax>) {
                out += "minmax";
            } else if constexpr (std::is_same_v<M, CriterionSpec::Range>) {
                out += "range " + format_double(m.lo) + " " + format_double(m.hi);
            } else {
                out += "lookup ";
                bool first = true;
                for (auto [code, band] : m.bands) {
                    if (!first) out += ",";
                    first = false;
                    out += std::to_string(code) + "=" + std::to_string(band);
                }
            }
        },
        c.method);
    return out;
}

inline std::vector<CriterionSpec> parse_criteria_config(std::istream& in) {
    std::vector<CriterionSpec> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok.size() < 4) throw ParseError("expected '<name> <source> <direction> <method> ...'", lineno);

        CriterionSpec c;
        c.name = tok[0];
        const std::string& src = tok[1];
        auto colon = src.find(':');
        std::string kind = src.substr(0, colon);
        if (kind == "sdr" && colon == std::string::npos) {
            c.source = SourceKind::sdr;
        } else if (colon == std::string::npos || colon + 1 == src.size()) {
            throw ParseError("malformed source '" + src + "'", lineno);
        } else {
            c.source_arg = src.substr(colon + 1);
            if (kind == "raster") c.source = SourceKind::raster;
            else if (kind == "distance") c.source = SourceKind::distance;
            else if (kind == "county") c.source = SourceKind::county;
            else throw ParseError("unknown source kind '" + kind + "'", lineno);
        }
        try {
            c.direction = parse_direction(tok[2]);
        } catch (const Error& e) {
            throw ParseError(e.what(), lineno);
        }
        const std::string& method = tok[3];
        auto num = [&](std::size_t i) {
            if (i >= tok.size()) throw ParseError("missing parameter for method '" + method + "'", lineno);
            auto v = parse_double(tok[i]);
            if (!v) throw ParseError("non-numeric parameter '" + tok[i] + "'", lineno);
            return *v;
        };
        if (method == "bands") {
            CriterionSpec::Bands b{{num(4), num(5), num(6)}};
            if (tok.size() != 7) throw ParseError("bands takes exactly three breakpoints", lineno);
            BandRule rule{c.name, c.direction, b.breakpoints};
            try {
                rule.validate();
            } catch (const Error& e) {
                throw ParseError(e.what(), lineno);
            }
            c.method = b;
        } else if (method == "minmax") {
            if (tok.size() != 4) throw ParseError("minmax takes no parameters", lineno);
            c.method = CriterionSpec::MinMax{};
        } else if (method == "range") {
            CriterionSpec::Range r{num(4), num(5)};
            if (tok.size() != 6 || !(r.hi > r.lo)) throw ParseError("range takes lo < hi", lineno);
            c.method = r;
        } else if (method == "lookup") {
            if (tok.size() != 5) throw ParseError("lookup takes one code=band list", lineno);
            CriterionSpec::Lookup lk;
            std::istringstream items(tok[4]);
            for (std::string item; std::getline(items, item, ',');) {
                auto eq = item.find('=');
                auto code = eq == std::string::npos ? std::nullopt : parse_int(item.substr(0, eq));
                auto band = eq == std::string::npos ? std::nullopt : parse_int(item.substr(eq + 1));
                if (!code || !band || *band < 0 || *band > 3) throw ParseError("malformed lookup entry '" + item + "'", lineno);
                lk.bands[*code] = static_cast<int>(*band);
            }
            c.method = lk;
        } else {
            throw ParseError("unknown method '" + method + "'", lineno);
        }
        for (const auto& prev : out)
            if (prev.name == c.name) throw ParseError("duplicate criterion '" + c.name + "'", lineno);
        out.push_back(std::move(c));
    }
    if (out.empty()) throw ParseError("criteria config lists no criteria", 0);
    return out;
}

inline std::vector<CriterionSpec> load_criteria_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open criteria config " + path.string());
    try {
        return parse_criteria_config(in);
    } catch (const ParseError& e) {
        throw ParseError(path.filename().string() + ": " + e.what(), 0);
    }
}

inline std::string format_criteria_config(const std::vector<CriterionSpec>& specs) {
    std::string out;
    for (const auto& c : specs) out += format_criterion(c) + "\n";
    return out;
}

/// Normalized layer of one criterion from its raw values (distance layers already
/// transformed). Continuous methods report the affine parameters they used; passing them
/// back as `frozen` reproduces the same mapping on new raw data.
struct NormalizedCriterion {
    RasterLayer layer;
    std::optional<RangeNormalization> params;
};

inline NormalizedCriterion normalize_criterion(const CriterionSpec& spec, const RasterLayer& raw,
                                               const std::optional<RangeNormalization>& frozen = std::nullopt) {
    NormalizedCriterion out;
    if (const auto* b = std::get_if<CriterionSpec::Bands>(&spec.method)) {
        out.layer = reclassify(raw, BandRule{spec.name, spec.direction, b->breakpoints});
    } else if (const auto* lk = std::get_if<CriterionSpec::Lookup>(&spec.method)) {
        out.layer = reclassify(raw, CategoryLookup{spec.name, lk->bands});
    } else {
        RangeNormalization n;
        if (frozen) n = *frozen;
        else if (const auto* r = std::get_if<CriterionSpec::Range>(&spec.method)) n = {r->lo, r->hi, spec.direction};
        else n = fit_min_max(raw, spec.direction);
        out.layer = apply_normalization(raw, n, spec.name);
        out.params = n;
    }
    out.layer.name = spec.name;
    return out;
}

} // namespace sitewise
