#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sitewise/core/log.hpp"
#include "sitewise/geocore/synthetic.hpp"
#include "sitewise/learn/metrics.hpp"
#include "sitewise/pipeline/pipeline.hpp"
#include "sitewise/pipeline/stages.hpp"
#include "sitewise/service/service.hpp"

namespace {

using namespace sitewise;
using nlohmann::json;
namespace fs = std::filesystem;

struct Common {
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string config;
    std::string format = "csv";
};

void add_common(CLI::App* app, Common& c, bool with_format = false) {
    app->add_option("--seed", c.seed, "Master seed");
    app->add_option("--threads", c.threads, "Worker threads (0: all cores)");
    app->add_option("--config", c.config, "Run config supplying defaults")->check(CLI::ExistingFile);
    if (with_format) app->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
}

// Run config for the staged subcommands: the --config file if given, with --seed applied.
RunConfig stage_config(const Common& c) {
    KeyValueConfig kv;
    fs::path base;
    if (!c.config.empty()) {
        kv = KeyValueConfig::load(c.config);
        base = fs::path(c.config).parent_path();
    }
    if (c.seed) kv.set("seed", std::to_string(*c.seed));
    RunConfig r = parse_run_config(kv, base);
    if (c.threads) r.threads = c.threads;
    return r;
}

void summary(const json& j) { std::cerr << "summary: " << j.dump() << "\n"; }

double resolve_d_new(const RegionModel& region, const fs::path& dir, std::optional<double> flag) {
    if (flag) return *flag;
    if (fs::exists(dir / "region.cfg")) {
        auto kv = KeyValueConfig::load(dir / "region.cfg");
        if (kv.has("d_new")) return kv.get_double("d_new", 0.0);
    }
    return default_new_demand(region);
}

NewDemandMode parse_mode(const std::string& s) { return s == "whole" ? NewDemandMode::whole : NewDemandMode::radius; }

// Weights in criteria order, from "name:w,..." or a weights.csv path; equal when empty.
WeightVector weights_for(const std::string& arg, const std::vector<std::string>& names) {
    if (arg.empty()) return WeightVector::equal(names);
    WeightVector w = fs::exists(arg) ? load_weights(arg) : parse_weight_spec(arg);
    if (w.size() != names.size()) throw Error("weights name " + std::to_string(w.size()) + " criteria, expected " +
                                              std::to_string(names.size()));
    std::vector<double> v;
    for (const auto& n : names) {
        auto it = std::find(w.names().begin(), w.names().end(), n);
        if (it == w.names().end()) throw Error("no weight for criterion '" + n + "'");
        v.push_back(w[static_cast<std::size_t>(it - w.names().begin())]);
    }
    return WeightVector(names, v);
}

// Normalized criteria written by `map`, in the order of its weights.csv.
CriteriaSet load_map_criteria(const fs::path& dir, const WeightVector& w) {
    CriteriaSet c;
    for (const auto& n : w.names()) c.add(n, load_raster(dir / "criteria" / (n + ".asc")));
    return c;
}

void emit(const std::string& text, const std::string& out) {
    if (out.empty()) std::cout << text;
    else write_text_file(out, text);
}

// ----- subcommands

struct GenArgs {
    std::string out;
    std::optional<int> ncols, nrows, counties, facilities, candidates;
    std::optional<double> cellsize, radius;
    std::string weights;
};

json cmd_gen(const Common& c, const GenArgs& a) {
    RunConfig cfg = stage_config(c);
    SyntheticOptions opt = cfg.synthetic;
    if (c.seed) opt.seed = *c.seed;
    if (a.ncols) opt.ncols = *a.ncols;
    if (a.nrows) opt.nrows = *a.nrows;
    if (a.counties) opt.n_counties = *a.counties;
    if (a.facilities) opt.n_facilities = *a.facilities;
    if (a.candidates) opt.n_candidates = *a.candidates;
    if (a.cellsize) opt.cellsize = *a.cellsize;
    if (a.radius) opt.radius = *a.radius;
    if (!a.weights.empty()) opt.planted = parse_weight_spec(a.weights);
    SyntheticRegion s = generate_synthetic_region(opt);
    fs::create_directories(a.out);
    save_synthetic(s, a.out);
    return {{"command", "gen"},
            {"out", a.out},
            {"seed", opt.seed},
            {"ncols", opt.ncols},
            {"nrows", opt.nrows},
            {"counties", s.region.counties.size()},
            {"facilities", s.region.facilities.size()},
            {"candidates", s.region.candidates.size()},
            {"radius", s.region.radius},
            {"d_new", s.d_new},
            {"criteria", s.planted.names()}};
}

struct RegionArgs {
    std::string region;
    std::optional<double> radius, d_new;
    std::string mode = "radius";
};

void add_region(CLI::App* app, RegionArgs& r) {
    app->add_option("--region", r.region, "Region directory")->required()->check(CLI::ExistingDirectory);
    app->add_option("--radius", r.radius, "Facility service radius (overrides region.cfg)")->check(CLI::PositiveNumber);
    app->add_option("--d-new", r.d_new, "Demand of the entrant facility")->check(CLI::NonNegativeNumber);
    app->add_option("--mode", r.mode, "Entrant demand placement")->check(CLI::IsMember({"radius", "whole"}));
}

RegionModel open_region(const RegionArgs& r) {
    RegionModel region = load_region(r.region);
    if (r.radius) region.radius = *r.radius;
    return region;
}

json cmd_sdr(const Common& c, const RegionArgs& r, const std::string& out) {
    RegionModel region = open_region(r);
    double d_new = resolve_d_new(region, r.region, r.d_new);
    SdrTable t = compute_sdr(region, d_new, parse_mode(r.mode));
    if (c.format == "json") {
        json rows = json::array();
        for (const auto& row : t.rows)
            rows.push_back({{"county_id", row.county_id}, {"supply", row.supply}, {"existing_demand_allocated", row.existing_demand},
                            {"d_new", row.d_new}, {"sdr", row.defined ? json(row.sdr) : json(nullptr)}, {"defined", row.defined}});
        emit(rows.dump(2) + "\n", out);
    } else {
        emit(format_sdr_table(t), out);
    }
    std::size_t defined = 0;
    for (const auto& row : t.rows) defined += row.defined;
    return {{"command", "sdr"}, {"counties", t.rows.size()}, {"defined", defined}, {"d_new", d_new}, {"radius", region.radius}};
}

struct MapArgs {
    std::string criteria, weights, breaks = "sample", out;
    std::optional<std::size_t> n;
};

json cmd_map(const Common& c, const RegionArgs& r, const MapArgs& a) {
    RunConfig cfg = stage_config(c);
    if (a.breaks == "theoretical") cfg.theoretical_range = true;
    if (a.n) cfg.n_samples = *a.n;
    RegionModel region = open_region(r);
    double d_new = resolve_d_new(region, r.region, r.d_new);
    fs::path cpath = a.criteria.empty() ? fs::path(r.region) / "criteria.cfg" : fs::path(a.criteria);
    auto specs = load_criteria_config(cpath);
    AssembledCriteria in = assemble_criteria(region, specs, r.region, d_new, parse_mode(r.mode));
    WeightVector w = weights_for(a.weights, in.criteria.names());
    auto method = a.breaks == "jenks" ? BreakMethod::jenks : BreakMethod::equal_interval;
    auto lm = stages::label_map(in.criteria, w, method, cfg, 0);
    fs::path out(a.out);
    for (std::size_t k = 0; k < in.criteria.size(); ++k)
        save_raster(in.criteria.layer(k), out / "criteria" / (in.criteria.names()[k] + ".asc"));
    write_text_file(out / "weights.csv", format_weights(w));
    stages::write_map(lm.map, out);
    auto pct = class_area_percent(lm.map);
    return {{"command", "map"}, {"out", a.out}, {"criteria", in.criteria.names()}, {"breaks", lm.map.breaks},
            {"method", to_string(method)}, {"class_area_percent", pct}};
}

json cmd_sample(const Common& c, const std::string& map_dir, std::optional<std::size_t> n,
                std::optional<double> train_frac, const std::string& out) {
    RunConfig cfg = stage_config(c);
    if (n) cfg.n_samples = *n;
    if (train_frac) cfg.train_frac = *train_frac;
    fs::path dir(map_dir);
    WeightVector w = load_weights(dir / "weights.csv");
    CriteriaSet criteria = load_map_criteria(dir, w);
    auto [b, method] = load_breaks(dir / "breaks.csv");
    SuitabilityMap map = make_map(weighted_sum(criteria, w), b, method);
    const auto s_seed = stages::stream_seed(cfg.seed, stages::kSampling, 0);
    SampleSet samples = sample_points(map, criteria, cfg.n_samples, s_seed);
    if (cfg.top_up > 0) top_up(samples, map, criteria, cfg.top_up, s_seed);
    split(samples, cfg.train_frac, stages::stream_seed(cfg.seed, stages::kSplit, 0));
    write_text_file(out, format_samples(samples));
    return {{"command", "sample"}, {"out", out}, {"rows", samples.size()}, {"class_counts", samples.class_counts()},
            {"train", samples.class_counts(Split::train)}, {"test", samples.class_counts(Split::test)}};
}

struct TrainArgs {
    std::string samples, model = "random-forest", out;
    std::vector<std::string> params;
    std::optional<bool> grid_search;
};

void apply_params(RunConfig& cfg, learn::ModelKind kind, const std::vector<std::string>& params) {
    for (const auto& p : params) {
        auto eq = p.find('=');
        auto v = eq == std::string::npos ? std::nullopt : parse_double(p.substr(eq + 1));
        if (!v) throw Error("--param expects name=value, got '" + p + "'");
        cfg.overrides[kind][p.substr(0, eq)] = *v;
    }
    auto merged = stages::base_hyperparameters(kind, cfg);
    learn::check_hyperparameters(kind, merged);
}

json write_trained(const learn::TrainedClassifier& model, const learn::EvaluationReport& e, const fs::path& out,
                   const std::string& format) {
    model.save(out / "model.json");
    json ej = learn::to_json(e);
    write_text_file(out / "evaluation.json", ej.dump(2) + "\n");
    if (format == "json") std::cout << ej.dump(2) << "\n";
    else std::cout << "metric,value\naccuracy," << format_double(e.accuracy) << "\nprecision," << format_double(e.precision)
                   << "\nrecall," << format_double(e.recall) << "\nf1," << format_double(e.f1) << "\nauc,"
                   << format_double(e.auc) << "\n";
    return {{"accuracy", e.accuracy}, {"f1", e.f1}, {"auc", e.auc}};
}

json cmd_train(const Common& c, const TrainArgs& a) {
    RunConfig cfg = stage_config(c);
    auto kind = learn::parse_model_kind(a.model);
    if (a.grid_search) cfg.grid_search = *a.grid_search;
    apply_params(cfg, kind, a.params);
    SampleSet samples = load_samples(a.samples);
    auto prep = stages::prepare(samples, cfg, 0);
    auto t = stages::tune(kind, prep, cfg);
    fs::path out(a.out);
    if (cfg.grid_search) write_text_file(out / "grid_search.csv", stages::format_grid(t.grid, t.scores));
    auto model = stages::fit(kind, prep, t.params, cfg, 0);
    auto e = learn::evaluate(model, prep.test_raw);
    json j = write_trained(model, e, out, c.format);
    j["command"] = "train";
    j["model"] = learn::to_string(kind);
    j["out"] = a.out;
    return j;
}

json cmd_explain(const Common& c, const std::string& model_path, const std::string& samples_path,
                 std::optional<std::size_t> n_explain, std::optional<std::size_t> n_background, const std::string& out) {
    RunConfig cfg = stage_config(c);
    if (n_explain) cfg.n_explain = *n_explain;
    if (n_background) cfg.n_background = *n_background;
    auto model = learn::TrainedClassifier::load(model_path);
    SampleSet samples = load_samples(samples_path);
    const auto kind = static_cast<std::uint64_t>(model.kind());
    auto rep = stages::explain_samples(model, samples, samples.feature_names, cfg.n_explain, cfg.n_background,
                                       stages::stream_seed(cfg.seed, stages::kRows, 1),
                                       stages::stream_seed(cfg.seed, stages::kExplain, 16 + kind),
                                       cfg.threads ? cfg.threads : default_threads());
    WeightVector w = explain::shap_to_weights(rep);
    fs::path dir(out);
    write_text_file(dir / "shap_report.csv", explain::format_shap_report(rep));
    write_text_file(dir / "mean_abs_shap.csv", explain::format_mean_abs(rep.feature_names, rep.mean_abs()));
    write_text_file(dir / "weights.csv", format_weights(w));
    if (c.format == "json") {
        json jw = json::array();
        for (std::size_t i = 0; i < w.size(); ++i) jw.push_back({{"criterion", w.names()[i]}, {"weight", w[i]}});
        std::cout << jw.dump(2) << "\n";
    } else {
        std::cout << format_weights(w);
    }
    return {{"command", "explain"}, {"out", out}, {"explained", rep.n_samples()}, {"exact", rep.exact},
            {"weights", w.values()}, {"criteria", w.names()}};
}

json cmd_retune(const Common& c, const std::string& map_dir, const std::string& weights, const TrainArgs& a,
                std::optional<std::size_t> n) {
    RunConfig cfg = stage_config(c);
    if (n) cfg.n_samples = *n;
    auto kind = learn::parse_model_kind(a.model);
    apply_params(cfg, kind, a.params);
    WeightVector base = load_weights(fs::path(map_dir) / "weights.csv");
    CriteriaSet criteria = load_map_criteria(map_dir, base);
    WeightVector w = weights_for(weights, criteria.names());
    auto lm = stages::label_map(criteria, w, BreakMethod::jenks, cfg, 1);
    fs::path out(a.out);
    stages::write_map(lm.map, out);
    write_text_file(out / "weights.csv", format_weights(w));
    write_text_file(out / "samples.csv", format_samples(lm.samples));
    auto prep = stages::prepare(lm.samples, cfg, 16 + static_cast<std::uint64_t>(kind));
    auto model = stages::fit(kind, prep, stages::base_hyperparameters(kind, cfg), cfg, 1);
    auto e = learn::evaluate(model, prep.test_raw);
    json j = write_trained(model, e, out, c.format);
    j["command"] = "retune";
    j["model"] = learn::to_string(kind);
    j["out"] = a.out;
    j["breaks"] = lm.map.breaks;
    return j;
}

json cmd_run(const Common& c, const std::string& out) {
    KeyValueConfig kv = KeyValueConfig::load(c.config);
    if (c.seed) kv.set("seed", std::to_string(*c.seed));
    RunConfig cfg = parse_run_config(kv, fs::path(c.config).parent_path());
    if (!out.empty()) cfg.out = out;
    if (c.threads) cfg.threads = c.threads;
    if (cfg.out.empty()) throw Error("no output directory: set 'out' in the config or pass --out");
    PipelineRun pr = run(cfg);
    const ModelRun& best = pr.best_model();
    return {{"command", "run"},
            {"out", cfg.out.string()},
            {"best_model", learn::to_string(best.kind)},
            {"accuracy", best.final_eval.accuracy},
            {"auc", best.final_eval.auc},
            {"criteria", best.weights.names()},
            {"weights", best.weights.values()},
            {"validation_percent", pr.validation.percent},
            {"manifest_sha256", pr.manifest_digest}};
}

json cmd_validate(const Common& c, const std::string& run_dir) {
    RunState s = load_run(run_dir);
    ValidationReport v = validate_against_existing(s.map, s.region);
    if (c.format == "json") std::cout << to_json(v).dump(2) << "\n";
    else std::cout << format_validation(v);
    return {{"command", "validate"}, {"run", run_dir}, {"existing", v.n_existing}, {"percent", v.percent},
            {"classes_2_3_percent", v.percent[2] + v.percent[3]}};
}

json cmd_rank(const Common& c, const std::string& run_dir, std::optional<std::size_t> top, const std::string& facilities,
              const std::string& candidates) {
    RunState s = load_run(run_dir);
    auto fac = facilities.empty() ? s.region.facilities : load_facilities(facilities);
    auto cand = candidates.empty() ? s.region.candidates : load_candidates(candidates);
    ScenarioResult r = scenario_update(s, fac, cand, top.value_or(s.top));
    if (c.format == "json") std::cout << to_json(r.ranking).dump(2) << "\n";
    else std::cout << format_ranking(r.ranking);
    return {{"command", "rank"}, {"run", run_dir}, {"ranked", r.ranking.ranked.size()}, {"excluded", r.ranking.excluded}};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"sitewise: facility site suitability with explainable weight tuning"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    Common c;
    GenArgs gen;
    RegionArgs reg;
    MapArgs map;
    TrainArgs train;
    std::string out, file_out, run_dir, map_dir, model_path, samples_path, weights, facilities, candidates;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::optional<std::size_t> n, n_explain, n_background, top;
    std::optional<double> train_frac;

    auto* g = app.add_subcommand("gen", "Generate a synthetic region");
    add_common(g, c);
    g->add_option("--out", gen.out, "Output directory")->required();
    g->add_option("--ncols", gen.ncols)->check(CLI::PositiveNumber);
    g->add_option("--nrows", gen.nrows)->check(CLI::PositiveNumber);
    g->add_option("--counties", gen.counties)->check(CLI::PositiveNumber);
    g->add_option("--facilities", gen.facilities)->check(CLI::NonNegativeNumber);
    g->add_option("--candidates", gen.candidates)->check(CLI::NonNegativeNumber);
    g->add_option("--cellsize", gen.cellsize)->check(CLI::PositiveNumber);
    g->add_option("--radius", gen.radius)->check(CLI::PositiveNumber);
    g->add_option("--weights", gen.weights, "Planted weights, name:w,...");

    auto* sdr = app.add_subcommand("sdr", "County supply/demand ratios");
    add_common(sdr, c, true);
    add_region(sdr, reg);
    sdr->add_option("--out", file_out, "Output file (default stdout)");

    auto* mp = app.add_subcommand("map", "Weighted-sum suitability map");
    add_common(mp, c);
    add_region(mp, reg);
    mp->add_option("--criteria", map.criteria, "Criteria config (default <region>/criteria.cfg)")->check(CLI::ExistingFile);
    mp->add_option("--weights", map.weights, "weights.csv or name:w,... (default equal)");
    mp->add_option("--breaks", map.breaks)->check(CLI::IsMember({"sample", "theoretical", "jenks"}));
    mp->add_option("--n", map.n, "Sampled cells behind the class breaks")->check(CLI::PositiveNumber);
    mp->add_option("--out", map.out, "Output directory")->required();

    auto* sm = app.add_subcommand("sample", "Labeled sample points from a map");
    add_common(sm, c);
    sm->add_option("--map", map_dir, "Directory written by map")->required()->check(CLI::ExistingDirectory);
    sm->add_option("--n", n)->check(CLI::PositiveNumber);
    sm->add_option("--train-frac", train_frac)->check(CLI::Range(0.0, 1.0));
    sm->add_option("--out", file_out, "Output samples.csv")->required();

    auto* tr = app.add_subcommand("train", "Balance, fit and evaluate one classifier");
    add_common(tr, c, true);
    tr->add_option("--samples", train.samples)->required()->check(CLI::ExistingFile);
    tr->add_option("--model", train.model, "random-forest|gradient-boosted-trees|svc-rbf|logistic-regression|knn");
    tr->add_option("--param", train.params, "Hyperparameter override name=value");
    tr->add_option("--grid-search", train.grid_search, "Cross-validated grid search (true|false)");
    tr->add_option("--out", train.out, "Output directory")->required();

    auto* ex = app.add_subcommand("explain", "Shapley values and derived weights");
    add_common(ex, c, true);
    ex->add_option("--model", model_path)->required()->check(CLI::ExistingFile);
    ex->add_option("--samples", samples_path)->required()->check(CLI::ExistingFile);
    ex->add_option("--n-explain", n_explain)->check(CLI::PositiveNumber);
    ex->add_option("--n-background", n_background)->check(CLI::PositiveNumber);
    ex->add_option("--out", out, "Output directory")->required();

    auto* rt = app.add_subcommand("retune", "Rebuild the map from tuned weights and retrain");
    add_common(rt, c, true);
    rt->add_option("--map", map_dir, "Directory written by map")->required()->check(CLI::ExistingDirectory);
    rt->add_option("--weights", weights, "Tuned weights.csv")->required()->check(CLI::ExistingFile);
    rt->add_option("--model", train.model);
    rt->add_option("--param", train.params, "Hyperparameter override name=value");
    rt->add_option("--n", n)->check(CLI::PositiveNumber);
    rt->add_option("--out", train.out, "Output directory")->required();

    auto* rn = app.add_subcommand("run", "Full pipeline into a run directory");
    add_common(rn, c);
    rn->get_option("--config")->required();
    rn->add_option("--out", out, "Run directory (overrides the config)");

    auto* va = app.add_subcommand("validate", "Class distribution of existing facilities");
    add_common(va, c, true);
    va->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);

    auto* rk = app.add_subcommand("rank", "Rank candidate sites");
    add_common(rk, c, true);
    rk->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);
    rk->add_option("--top", top, "Number of candidates (0: all)")->check(CLI::NonNegativeNumber);
    rk->add_option("--facilities", facilities, "facilities.csv replacing the run's facility set")->check(CLI::ExistingFile);
    rk->add_option("--candidates", candidates, "candidates.csv replacing the run's candidates")->check(CLI::ExistingFile);

    auto* sv = app.add_subcommand("serve", "HTTP scenario service");
    add_common(sv, c);
    sv->add_option("--run", run_dir)->required()->check(CLI::ExistingDirectory);
    sv->add_option("--host", host);
    sv->add_option("--port", port)->check(CLI::Range(1, 65535));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::string msg = e.what();
        for (char& ch : msg)
            if (ch == '\n') ch = ' ';
        std::cerr << "sitewise: usage error: " << msg << "\n";
        return 2;
    }

    try {
        json s;
        if (g->parsed()) s = cmd_gen(c, gen);
        else if (sdr->parsed()) s = cmd_sdr(c, reg, file_out);
        else if (mp->parsed()) s = cmd_map(c, reg, map);
        else if (sm->parsed()) s = cmd_sample(c, map_dir, n, train_frac, file_out);
        else if (tr->parsed()) s = cmd_train(c, train);
        else if (ex->parsed()) s = cmd_explain(c, model_path, samples_path, n_explain, n_background, out);
        else if (rt->parsed()) s = cmd_retune(c, map_dir, weights, train, n);
        else if (rn->parsed()) s = cmd_run(c, out);
        else if (va->parsed()) s = cmd_validate(c, run_dir);
        else if (rk->parsed()) s = cmd_rank(c, run_dir, top, facilities, candidates);
        else if (sv->parsed()) {
            service::serve(run_dir, host, port);
            s = {{"command", "serve"}};
        }
        summary(s);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        for (char& ch : msg)
            if (ch == '\n') ch = ' ';
        std::cerr << "sitewise: error: " << msg << "\n";
        return 1;
    }
    return 0;
}
