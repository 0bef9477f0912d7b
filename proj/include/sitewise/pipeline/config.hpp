#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "sitewise/core/config.hpp"
#include "sitewise/core/error.hpp"
#include "sitewise/geocore/synthetic.hpp"
#include "sitewise/learn/classifier.hpp"
#include "sitewise/sdr/sdr.hpp"

namespace sitewise {

enum class SelectionMetric { auc, accuracy, f1 };
enum class ShapAggregate { per_model, cross_model };

/// Everything a pipeline run depends on. Parsed from the run config:
///
///     seed = 7
///     out = runs/r1
///     [region]        dir, criteria, d_new, sdr_mode (radius|whole)
///     [synthetic]     ncols, nrows, n_counties, n_facilities, n_candidates, cellsize, radius, weights
///     [sampling]      n, train_frac, breaks (sample|theoretical), top_up
///     [learn]         models, grid_search, folds, k_smote, k_enn
///     [learn.<kind>]  hyperparameter overrides, e.g. [learn.rf] n_trees = 200
///     [explain]       n_explain, n_background, aggregate (per-model|cross-model), prune, prune_fraction
///     [retune]        iterations, tolerance
///     [select]        metric (auc|accuracy|f1)
///     [rank]          top
///
/// Without [region] dir the run generates a synthetic region from [synthetic].
struct RunConfig {
    std::uint64_t seed = 1;
    unsigned threads = 0; // 0: all cores
    std::filesystem::path out;

    std::optional<std::filesystem::path> region_dir;
    std::optional<std::filesystem::path> criteria_path;
    std::optional<double> d_new;
    NewDemandMode sdr_mode = NewDemandMode::radius;

    SyntheticOptions synthetic;

    std::size_t n_samples = 2000;
    double train_frac = 0.8;
    bool theoretical_range = false;
    std::size_t top_up = 0;

    std::vector<learn::ModelKind> models{learn::kAllKinds.begin(), learn::kAllKinds.end()};
    bool grid_search = true;
    int folds = 5;
    int k_smote = 5;
    int k_enn = 3;
    std::map<learn::ModelKind, learn::Hyperparameters> overrides;

    std::size_t n_explain = 40;
    std::size_t n_background = 100;
    ShapAggregate aggregate = ShapAggregate::per_model;
    bool prune = false;
    double prune_fraction = 0.25;

    int iterations = 1;
    double tolerance = 1e-3;

    SelectionMetric metric = SelectionMetric::auc;
    std::size_t top = 10;

    KeyValueConfig source; // as parsed, for the run snapshot
};

inline std::vector<learn::ModelKind> parse_model_list(const std::string& s) {
    std::vector<learn::ModelKind> out;
    std::istringstream in(s);
    for (std::string item; std::getline(in, item, ',');) {
        std::string t(trim(item));
        if (t.empty()) continue;
        auto k = learn::parse_model_kind(t);
        if (std::find(out.begin(), out.end(), k) != out.end()) throw Error("model '" + t + "' listed twice");
        out.push_back(k);
    }
    if (out.empty()) throw Error("no models selected");
    // Results are reported in the fixed kind order whatever the listing order.
    std::sort(out.begin(), out.end());
    return out;
}

inline RunConfig parse_run_config(const KeyValueConfig& cfg, const std::filesystem::path& base = {}) {
    static const std::set<std::string> known = {
        "seed", "threads", "out",
        "region.dir", "region.criteria", "region.d_new", "region.sdr_mode",
        "synthetic.ncols", "synthetic.nrows", "synthetic.n_counties", "synthetic.n_facilities",
        "synthetic.n_candidates", "synthetic.cellsize", "synthetic.radius", "synthetic.weights", "synthetic.seed",
        "sampling.n", "sampling.train_frac", "sampling.breaks", "sampling.top_up",
        "learn.models", "learn.grid_search", "learn.folds", "learn.k_smote", "learn.k_enn",
        "explain.n_explain", "explain.n_background", "explain.aggregate", "explain.prune", "explain.prune_fraction",
        "retune.iterations", "retune.tolerance", "select.metric", "rank.top"};
    RunConfig r;
    r.source = cfg;
    auto path = [&](const std::string& v) {
        std::filesystem::path p(v);
        return p.is_absolute() || base.empty() ? p : base / p;
    };
    auto positive = [&](const std::string& key, long long fallback) {
        long long v = cfg.get_int(key, fallback);
        if (v < 0) throw Error("config key '" + key + "' must be non-negative");
        return static_cast<std::size_t>(v);
    };
    for (const auto& [key, value] : cfg.values()) {
        if (known.count(key)) continue;
        if (key.rfind("learn.", 0) == 0) {
            auto dot = key.find('.', 6);
            if (dot != std::string::npos) {
                auto kind = learn::parse_model_kind(key.substr(6, dot - 6));
                auto v = parse_double(value);
                if (!v) throw Error("config key '" + key + "' is not a number: " + value);
                r.overrides[kind][key.substr(dot + 1)] = *v;
                continue;
            }
        }
        throw Error("unknown config key '" + key + "'");
    }

    r.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
    r.threads = static_cast<unsigned>(positive("threads", 0));
    if (auto o = cfg.get("out")) r.out = path(*o);
    if (auto d = cfg.get("region.dir")) r.region_dir = path(*d);
    if (auto c = cfg.get("region.criteria")) r.criteria_path = path(*c);
    if (cfg.has("region.d_new")) {
        r.d_new = cfg.get_double("region.d_new", 0.0);
        if (*r.d_new < 0.0) throw Error("region.d_new must be non-negative");
    }
    std::string mode = cfg.get_string("region.sdr_mode", "radius");
    if (mode == "radius") r.sdr_mode = NewDemandMode::radius;
    else if (mode == "whole") r.sdr_mode = NewDemandMode::whole;
    else throw Error("region.sdr_mode must be 'radius' or 'whole'");

    auto& s = r.synthetic;
    s.seed = static_cast<std::uint64_t>(cfg.get_int("synthetic.seed", static_cast<long long>(r.seed)));
    s.ncols = static_cast<int>(cfg.get_int("synthetic.ncols", s.ncols));
    s.nrows = static_cast<int>(cfg.get_int("synthetic.nrows", s.nrows));
    s.n_counties = static_cast<int>(cfg.get_int("synthetic.n_counties", s.n_counties));
    s.n_facilities = static_cast<int>(cfg.get_int("synthetic.n_facilities", s.n_facilities));
    s.n_candidates = static_cast<int>(cfg.get_int("synthetic.n_candidates", s.n_candidates));
    s.cellsize = cfg.get_double("synthetic.cellsize", s.cellsize);
    s.radius = cfg.get_double("synthetic.radius", s.radius);
    if (auto w = cfg.get("synthetic.weights")) s.planted = parse_weight_spec(*w);

    r.n_samples = positive("sampling.n", static_cast<long long>(r.n_samples));
    r.train_frac = cfg.get_double("sampling.train_frac", r.train_frac);
    std::string breaks = cfg.get_string("sampling.breaks", "sample");
    if (breaks == "sample") r.theoretical_range = false;
    else if (breaks == "theoretical") r.theoretical_range = true;
    else throw Error("sampling.breaks must be 'sample' or 'theoretical'");
    r.top_up = positive("sampling.top_up", 0);
    if (!(r.train_frac > 0.0 && r.train_frac < 1.0)) throw Error("sampling.train_frac must lie in (0, 1)");

    if (auto m = cfg.get("learn.models")) r.models = parse_model_list(*m);
    r.grid_search = cfg.get_bool("learn.grid_search", r.grid_search);
    r.folds = static_cast<int>(cfg.get_int("learn.folds", r.folds));
    r.k_smote = static_cast<int>(cfg.get_int("learn.k_smote", r.k_smote));
    r.k_enn = static_cast<int>(cfg.get_int("learn.k_enn", r.k_enn));
    if (r.folds < 2) throw Error("learn.folds must be at least 2");
    if (r.k_smote < 1 || r.k_enn < 1) throw Error("learn.k_smote and learn.k_enn must be positive");
    for (const auto& [kind, h] : r.overrides) {
        auto merged = learn::default_hyperparameters(kind);
        for (const auto& [k, v] : h) merged[k] = v;
        learn::check_hyperparameters(kind, merged);
    }

    r.n_explain = positive("explain.n_explain", static_cast<long long>(r.n_explain));
    r.n_background = positive("explain.n_background", static_cast<long long>(r.n_background));
    std::string agg = cfg.get_string("explain.aggregate", "per-model");
    if (agg == "per-model") r.aggregate = ShapAggregate::per_model;
    else if (agg == "cross-model") r.aggregate = ShapAggregate::cross_model;
    else throw Error("explain.aggregate must be 'per-model' or 'cross-model'");
    r.prune = cfg.get_bool("explain.prune", r.prune);
    r.prune_fraction = cfg.get_double("explain.prune_fraction", r.prune_fraction);

    r.iterations = static_cast<int>(cfg.get_int("retune.iterations", r.iterations));
    if (r.iterations < 1) throw Error("retune.iterations must be at least 1");
    r.tolerance = cfg.get_double("retune.tolerance", r.tolerance);

    std::string metric = cfg.get_string("select.metric", "auc");
    if (metric == "auc") r.metric = SelectionMetric::auc;
    else if (metric == "accuracy") r.metric = SelectionMetric::accuracy;
    else if (metric == "f1") r.metric = SelectionMetric::f1;
    else throw Error("select.metric must be auc, accuracy or f1");
    r.top = positive("rank.top", static_cast<long long>(r.top));
    if (r.n_explain == 0 || r.n_background == 0) throw Error("explain.n_explain and explain.n_background must be positive");
    return r;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(KeyValueConfig::load(path), path.parent_path());
}

} // namespace sitewise
