#include "sitewise/pipeline/pipeline.hpp"
#include "sitewise/pipeline/stages.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>

#include "sitewise/core/digest.hpp"
#include "sitewise/core/log.hpp"
#include "sitewise/core/parallel.hpp"
#include "sitewise/geocore/synthetic.hpp"
#include "sitewise/learn/grid_search.hpp"
#include "sitewise/learn/smote_enn.hpp"

namespace sitewise {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace stages;

namespace {


std::uint64_t kind_index(learn::ModelKind k) { return static_cast<std::uint64_t>(k); }

std::string kind_dir(learn::ModelKind k) { return learn::to_string(k); }

const char* to_string(SelectionMetric m) {
    switch (m) {
    case SelectionMetric::auc: return "auc";
    case SelectionMetric::accuracy: return "accuracy";
    case SelectionMetric::f1: return "f1";
    }
    return "auc";
}

template <class Fn>
void phase(const char* name, Fn&& fn) {
    log::info(std::string("phase: ") + name);
    try {
        fn();
    } catch (const std::exception& e) {
        throw Error(std::string("phase '") + name + "': " + e.what());
    }
}

std::string format_smote_stats(const learn::SmoteEnnStats& s, const learn::Dataset& before, const learn::Dataset& after) {
    auto b = before.class_counts(), a = after.class_counts();
    std::string out = "class,label,before,synthesized,removed,after\n";
    for (int c = 0; c < kNumClasses; ++c)
        out += (CsvLine() << c << kClassNames[c] << b[c] << s.synthesized[c] << s.removed[c] << a[c]).str() + "\n";
    return out;
}

void append_evaluation(std::string& out, const std::string& model, const char* phase_name, const learn::EvaluationReport& r) {
    CsvLine line;
    line << model << phase_name << r.n << r.accuracy << r.precision << r.recall << r.f1 << r.auc;
    for (const auto& ca : r.class_accuracy) {
        if (ca) line << *ca;
        else line << "";
    }
    out += line.str() + "\n";
}

json normalization_json(const AssembledCriteria& a) {
    json arr = json::array();
    for (std::size_t k = 0; k < a.specs.size(); ++k) {
        if (!a.params[k]) {
            arr.push_back(nullptr);
            continue;
        }
        arr.push_back({{"criterion", a.specs[k].name},
                       {"lo", a.params[k]->lo},
                       {"hi", a.params[k]->hi},
                       {"direction", to_string(a.params[k]->direction)}});
    }
    return arr;
}

std::string format_normalization(const AssembledCriteria& a) {
    std::string out = "criterion,lo,hi,direction\n";
    for (std::size_t k = 0; k < a.specs.size(); ++k)
        if (a.params[k]) out += (CsvLine() << a.specs[k].name << a.params[k]->lo << a.params[k]->hi << to_string(a.params[k]->direction)).str() + "\n";
    return out;
}

AssembledCriteria restrict_to(const AssembledCriteria& a, const std::vector<std::string>& keep) {
    AssembledCriteria out;
    out.sdr = a.sdr;
    for (std::size_t k = 0; k < a.specs.size(); ++k) {
        if (std::find(keep.begin(), keep.end(), a.specs[k].name) == keep.end()) continue;
        out.specs.push_back(a.specs[k]);
        out.params.push_back(a.params[k]);
        out.criteria.add(a.specs[k].name, a.criteria.layer(k));
    }
    return out;
}

void copy_into(const fs::path& from, const fs::path& to) {
    if (to.has_parent_path()) fs::create_directories(to.parent_path());
    fs::copy_file(from, to, fs::copy_options::overwrite_existing);
}

/// Pulls the region (given or generated) into `inputs`, so the run directory is self-contained.
void stage_inputs(const RunConfig& cfg, const fs::path& inputs) {
    if (!cfg.region_dir) {
        save_synthetic(generate_synthetic_region(cfg.synthetic), inputs);
        return;
    }
    const fs::path& src = *cfg.region_dir;
    for (const char* f : {"county_mask.asc", "counties.csv", "region.cfg"}) {
        if (!fs::exists(src / f)) throw Error("region directory lacks " + std::string(f));
        copy_into(src / f, inputs / f);
    }
    for (const char* f : {"facilities.csv", "candidates.csv"})
        if (fs::exists(src / f)) copy_into(src / f, inputs / f);
    fs::path criteria = cfg.criteria_path ? *cfg.criteria_path : src / "criteria.cfg";
    auto specs = load_criteria_config(criteria);
    copy_into(criteria, inputs / "criteria.cfg");
    for (const auto& s : specs)
        if (s.source == SourceKind::raster || s.source == SourceKind::distance) {
            fs::path rel(s.source_arg);
            if (rel.is_absolute() || rel.lexically_normal().string().rfind("..", 0) == 0)
                throw Error("criterion '" + s.name + "': source file must lie inside the region directory");
            copy_into(src / rel, inputs / rel);
        }
}

std::string iso_time(std::chrono::system_clock::time_point t) {
    std::time_t tt = std::chrono::system_clock::to_time_t(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

double metric_of(const learn::EvaluationReport& r, SelectionMetric m) {
    switch (m) {
    case SelectionMetric::auc: return r.auc;
    case SelectionMetric::accuracy: return r.accuracy;
    case SelectionMetric::f1: return r.f1;
    }
    return r.auc;
}

} // namespace

// ---------------------------------------------------------------------------------------------

ValidationReport validate_against_existing(const SuitabilityMap& map, const RegionModel& region) {
    ValidationReport v;
    std::size_t classified = 0;
    for (const auto& f : region.facilities) {
        if (f.status != FacilityStatus::existing) continue;
        ++v.n_existing;
        auto c = map.class_at(f.x, f.y);
        if (!c) {
            v.unclassified.push_back(f.id);
            continue;
        }
        ++v.count[static_cast<std::size_t>(*c)];
        ++classified;
    }
    if (v.n_existing == 0) throw Error("validate: the region has no existing facilities");
    for (int c = 0; c < kNumClasses; ++c)
        v.percent[c] = classified ? 100.0 * static_cast<double>(v.count[c]) / static_cast<double>(classified) : 0.0;
    return v;
}

std::string format_validation(const ValidationReport& v) {
    std::string out = "class,label,count,percent\n";
    for (int c = 0; c < kNumClasses; ++c) out += (CsvLine() << c << kClassNames[c] << v.count[c] << v.percent[c]).str() + "\n";
    out += (CsvLine() << "" << "unclassified" << v.unclassified.size() << "").str() + "\n";
    return out;
}

json to_json(const ValidationReport& v) {
    json classes = json::array();
    for (int c = 0; c < kNumClasses; ++c)
        classes.push_back({{"class", c}, {"label", kClassNames[c]}, {"count", v.count[c]}, {"percent", v.percent[c]}});
    return {{"n_existing", v.n_existing}, {"classes", classes}, {"unclassified", v.unclassified}};
}

RankResult rank_candidates(const learn::TrainedClassifier& model, const CriteriaSet& criteria, const SuitabilityMap& map,
                           const std::vector<CandidateSite>& candidates, std::size_t top) {
    RankResult r;
    std::vector<double> f;
    const GridHeader& g = criteria.grid();
    for (const auto& c : candidates) {
        auto cell = g.locate(c.x, c.y);
        if (!cell) {
            r.excluded.push_back(c.id);
            continue;
        }
        std::size_t idx = g.index(cell->row, cell->col);
        if (!criteria.features_at(idx, f) || map.score.is_nodata(idx)) {
            r.excluded.push_back(c.id);
            continue;
        }
        RankedCandidate rc;
        rc.id = c.id;
        rc.x = c.x;
        rc.y = c.y;
        rc.score = model.predict_proba(f)[kNumClasses - 1];
        rc.class_label = static_cast<int>(map.classes.cells[idx]);
        r.ranked.push_back(rc);
    }
    std::sort(r.ranked.begin(), r.ranked.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });
    if (top > 0 && r.ranked.size() > top) r.ranked.resize(top);
    for (std::size_t i = 0; i < r.ranked.size(); ++i) r.ranked[i].rank = static_cast<int>(i + 1);
    return r;
}

std::string format_ranking(const RankResult& r) {
    std::string out;
    for (const auto& c : r.ranked) out += (CsvLine() << c.rank << c.id << c.score).str() + "\n";
    return out;
}

json to_json(const RankResult& r) {
    json ranked = json::array();
    for (const auto& c : r.ranked)
        ranked.push_back({{"rank", c.rank},
                          {"id", c.id},
                          {"x", c.x},
                          {"y", c.y},
                          {"score", c.score},
                          {"class", c.class_label ? json(*c.class_label) : json(nullptr)}});
    return {{"ranked", ranked}, {"excluded", r.excluded}};
}

std::size_t select_best(const std::vector<ModelRun>& models, SelectionMetric metric) {
    if (models.empty()) throw Error("select_best: no models");
    std::size_t best = 0;
    for (std::size_t i = 1; i < models.size(); ++i) {
        const auto& a = models[i].final_eval;
        const auto& b = models[best].final_eval;
        double ma = metric_of(a, metric), mb = metric_of(b, metric);
        bool better = ma > mb || (ma == mb && a.accuracy > b.accuracy) ||
                      (ma == mb && a.accuracy == b.accuracy && models[i].kind < models[best].kind);
        if (better) best = i;
    }
    return best;
}

std::string write_manifest(const fs::path& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::string rel = fs::relative(e.path(), dir).generic_string();
        if (rel == "manifest.csv" || rel == "run_info.json") continue;
        files.push_back(rel);
    }
    std::sort(files.begin(), files.end());
    std::string out = "path,sha256\n";
    for (const auto& f : files) out += (CsvLine() << f << sha256_file(dir / f)).str() + "\n";
    write_text_file(dir / "manifest.csv", out);
    return sha256_hex(out);
}

// ---------------------------------------------------------------------------------------------

PipelineRun run(const RunConfig& cfg) {
    if (cfg.out.empty()) throw Error("run: no output directory configured");
    const auto started = std::chrono::system_clock::now();
    const unsigned threads = cfg.threads ? cfg.threads : default_threads();
    PipelineRun pr;
    pr.config = cfg;
    pr.dir = cfg.out;
    const fs::path dir = cfg.out, inputs_dir = dir / "inputs", art = dir / "artifacts";
    fs::create_directories(dir);
    for (const char* stale : {"inputs", "artifacts", "config.toml", "state.json", "manifest.csv", "run_info.json"})
        fs::remove_all(dir / stale);

    {
        KeyValueConfig snapshot = cfg.source;
        KeyValueConfig clean;
        for (const auto& [k, v] : snapshot.values())
            if (k != "out" && k != "threads") clean.set(k, v);
        write_text_file(dir / "config.toml", clean.to_string());
    }

    phase("inputs", [&] {
        stage_inputs(cfg, inputs_dir);
        pr.region = load_region(inputs_dir);
        auto specs = load_criteria_config(inputs_dir / "criteria.cfg");
        KeyValueConfig region_cfg = KeyValueConfig::load(inputs_dir / "region.cfg");
        if (cfg.d_new) pr.d_new = *cfg.d_new;
        else if (region_cfg.has("d_new")) pr.d_new = region_cfg.get_double("d_new", 0.0);
        else pr.d_new = default_new_demand(pr.region);
        pr.inputs = assemble_criteria(pr.region, specs, inputs_dir, pr.d_new, cfg.sdr_mode);
        pr.all_criteria = pr.inputs.criteria.names();
        for (std::size_t k = 0; k < pr.inputs.criteria.size(); ++k)
            save_raster(pr.inputs.criteria.layer(k), art / "criteria" / (pr.inputs.criteria.names()[k] + ".asc"));
        write_text_file(art / "criteria" / "normalization.csv", format_normalization(pr.inputs));
        if (pr.inputs.sdr) write_text_file(art / "criteria" / "sdr_table.csv", format_sdr_table(*pr.inputs.sdr));
    });

    Prepared prep;
    std::string evaluations = "model,phase,n,accuracy,precision,recall,f1,auc,acc_not,acc_somewhat,acc_suitable,acc_highly\n";

    // Phases 1 and 2, repeated once on the retained criteria if pruning drops any.
    for (int pass = 0; pass < 2; ++pass) {
        const CriteriaSet& criteria = pr.inputs.criteria;
        phase("initial-map", [&] {
            pr.initial_weights = WeightVector::equal(criteria.names());
            auto lm = label_map(criteria, pr.initial_weights, BreakMethod::equal_interval, cfg, 0);
            pr.initial_map = std::move(lm.map);
            pr.initial_samples = std::move(lm.samples);
            write_text_file(art / "initial" / "weights.csv", format_weights(pr.initial_weights));
            write_map(pr.initial_map, art / "initial");
            write_text_file(art / "initial" / "samples.csv", format_samples(pr.initial_samples));
        });

        phase("train", [&] {
            prep = prepare(pr.initial_samples, cfg, 0);
            write_text_file(art / "initial" / "smote_enn.csv",
                            format_smote_stats(prep.stats, prep.train_raw, prep.balanced));
            try {
                pr.collinearity = explain::collinearity(prep.train_raw.x, criteria.names());
                write_text_file(art / "collinearity" / "correlation.csv", explain::format_correlation(*pr.collinearity));
                write_text_file(art / "collinearity" / "vif.csv", explain::format_vif(*pr.collinearity));
            } catch (const Error& e) {
                pr.collinearity.reset();
                log::warn(std::string("collinearity report skipped: ") + e.what());
                write_text_file(art / "collinearity" / "skipped.txt", std::string(e.what()) + "\n");
            }
            pr.models.assign(cfg.models.size(), ModelRun{});
            parallel_for(cfg.models.size(), threads, [&](std::size_t m) {
                ModelRun& mr = pr.models[m];
                mr.kind = cfg.models[m];
                Tuning t = tune(mr.kind, prep, cfg);
                mr.params = t.params;
                mr.grid_scores = t.scores;
                if (cfg.grid_search)
                    write_text_file(art / "models" / kind_dir(mr.kind) / "grid_search.csv", format_grid(t.grid, t.scores));
                mr.initial_model = fit(mr.kind, prep, mr.params, cfg, 0);
                mr.initial_eval = learn::evaluate(mr.initial_model, prep.test_raw);
                mr.importance = explain::model_importance(mr.initial_model, prep.test_raw,
                                                          stream_seed(cfg.seed, kImportance, kind_index(mr.kind)));
            });
        });

        bool rerun = false;
        phase("feature-selection", [&] {
            std::vector<std::vector<double>> per_model;
            std::vector<std::pair<std::string, std::vector<double>>> named;
            for (const auto& mr : pr.models) {
                per_model.push_back(mr.importance);
                named.emplace_back(learn::to_string(mr.kind), mr.importance);
            }
            pr.pruning = explain::prune_features(per_model, criteria.names(), cfg.prune_fraction);
            write_text_file(art / "importance.csv", explain::format_importance(criteria.names(), named));
            write_text_file(art / "pruning.csv", explain::format_pruning(criteria.names(), *pr.pruning));
            if (cfg.prune && pass == 0 && !pr.pruning->dropped.empty()) {
                std::string dropped;
                for (const auto& d : pr.pruning->dropped) dropped += (dropped.empty() ? "" : ", ") + d;
                log::info("pruning drops " + dropped + "; repeating phases 1-2");
                pr.inputs = restrict_to(pr.inputs, pr.pruning->retained);
                rerun = true;
            }
        });
        if (!rerun) break;
    }

    for (const auto& mr : pr.models) {
        fs::path mdir = art / "models" / kind_dir(mr.kind);
        write_text_file(mdir / "hyperparameters.json", json(mr.params).dump(2) + "\n");
        mr.initial_model.save(mdir / "initial_model.json");
        write_text_file(mdir / "initial_evaluation.json", learn::to_json(mr.initial_eval).dump(2) + "\n");
        append_evaluation(evaluations, learn::to_string(mr.kind), "initial", mr.initial_eval);
    }

    // Phase 3: explain, retune weights, rebuild maps, resample and retrain.
    const CriteriaSet& criteria = pr.inputs.criteria;
    const auto& names = criteria.names();
    for (int it = 0; it < cfg.iterations; ++it) {
        bool converged = false;
        phase("retune", [&] {
            const std::uint64_t round = static_cast<std::uint64_t>(it) + 1;
            std::vector<explain::ShapleyReport> reports(pr.models.size());
            parallel_for(pr.models.size(), threads, [&](std::size_t m) {
                ModelRun& mr = pr.models[m];
                const bool first = it == 0;
                const learn::TrainedClassifier& model = first ? mr.initial_model : mr.final_model;
                const SampleSet& samples = first ? pr.initial_samples : mr.samples;
                reports[m] = explain_samples(model, samples, names, cfg.n_explain, cfg.n_background,
                                             stream_seed(cfg.seed, kRows, round),
                                             stream_seed(cfg.seed, kExplain, round * 16 + kind_index(mr.kind)));
            });
            std::optional<WeightVector> shared;
            if (cfg.aggregate == ShapAggregate::cross_model) shared = explain::shap_to_weights(reports);
            std::vector<Prepared> preps(pr.models.size());
            converged = it > 0;
            for (std::size_t m = 0; m < pr.models.size(); ++m) {
                ModelRun& mr = pr.models[m];
                WeightVector w = shared ? *shared : explain::shap_to_weights(reports[m]);
                if (it > 0 && w.max_abs_difference(mr.weights) >= cfg.tolerance) converged = false;
                mr.shap = std::move(reports[m]);
                mr.weights = w;
                mr.weight_history.push_back(w);
            }
            parallel_for(pr.models.size(), threads, [&](std::size_t m) {
                ModelRun& mr = pr.models[m];
                auto lm = label_map(criteria, mr.weights, BreakMethod::jenks, cfg, round);
                mr.map = std::move(lm.map);
                mr.samples = std::move(lm.samples);
                preps[m] = prepare(mr.samples, cfg, round * 16 + kind_index(mr.kind));
                mr.final_model = fit(mr.kind, preps[m], mr.params, cfg, round);
                mr.final_eval = learn::evaluate(mr.final_model, preps[m].test_raw);
            });
        });
        if (converged) {
            log::info("weights converged after " + std::to_string(it + 1) + " iterations");
            break;
        }
    }

    phase("select", [&] {
        pr.best = select_best(pr.models, cfg.metric);
        std::string comparison = "model";
        for (const auto& n : names) comparison += "," + csv_escape(n);
        comparison += "\n";
        {
            CsvLine line;
            line << "baseline";
            for (double w : pr.initial_weights.values()) line << w;
            comparison += line.str() + "\n";
        }
        std::string shap_table = "model,criterion,mean_abs_shap\n";
        for (const auto& mr : pr.models) {
            fs::path mdir = art / "models" / kind_dir(mr.kind);
            write_text_file(mdir / "shap_report.csv", explain::format_shap_report(mr.shap));
            auto mean_abs = mr.shap.mean_abs();
            write_text_file(mdir / "mean_abs_shap.csv", explain::format_mean_abs(names, mean_abs));
            for (std::size_t i = 0; i < names.size(); ++i)
                shap_table += (CsvLine() << learn::to_string(mr.kind) << names[i] << mean_abs[i]).str() + "\n";
            write_text_file(mdir / "weights.csv", format_weights(mr.weights));
            std::string history = "iteration";
            for (const auto& n : names) history += "," + csv_escape(n);
            history += "\n";
            for (std::size_t h = 0; h < mr.weight_history.size(); ++h) {
                CsvLine line;
                line << h + 1;
                for (double w : mr.weight_history[h].values()) line << w;
                history += line.str() + "\n";
            }
            write_text_file(mdir / "weight_history.csv", history);
            write_map(mr.map, mdir);
            write_text_file(mdir / "samples.csv", format_samples(mr.samples));
            mr.final_model.save(mdir / "model.json");
            write_text_file(mdir / "evaluation.json", learn::to_json(mr.final_eval).dump(2) + "\n");
            append_evaluation(evaluations, learn::to_string(mr.kind), "retrained", mr.final_eval);
            CsvLine line;
            line << learn::to_string(mr.kind);
            for (double w : mr.weights.values()) line << w;
            comparison += line.str() + "\n";
        }
        write_text_file(art / "evaluations.csv", evaluations);
        write_text_file(art / "weights_comparison.csv", comparison);
        write_text_file(art / "mean_abs_shap.csv", shap_table);
    });

    phase("validate", [&] {
        const ModelRun& best = pr.best_model();
        pr.ranking = rank_candidates(best.final_model, criteria, best.map, pr.region.candidates, cfg.top);
        fs::path fdir = art / "final";
        best.final_model.save(fdir / "model.json");
        write_text_file(fdir / "weights.csv", format_weights(best.weights));
        write_map(best.map, fdir);
        write_text_file(fdir / "ranking.csv", "rank,id,score\n" + format_ranking(pr.ranking));
        std::string excluded = "id\n";
        for (int id : pr.ranking.excluded) excluded += std::to_string(id) + "\n";
        write_text_file(fdir / "excluded_candidates.csv", excluded);
        bool any_existing = std::any_of(pr.region.facilities.begin(), pr.region.facilities.end(),
                                        [](const Facility& f) { return f.status == FacilityStatus::existing; });
        if (any_existing) {
            pr.validation = validate_against_existing(best.map, pr.region);
            write_text_file(fdir / "validation.csv", format_validation(pr.validation));
        } else {
            log::warn("no existing facilities; validation skipped");
        }

        json models = json::array();
        for (const auto& mr : pr.models)
            models.push_back({{"kind", learn::to_string(mr.kind)},
                              {"hyperparameters", mr.params},
                              {"initial", learn::to_json(mr.initial_eval)},
                              {"final", learn::to_json(mr.final_eval)}});
        json weights = json::array();
        for (std::size_t i = 0; i < best.weights.size(); ++i)
            weights.push_back({{"criterion", names[i]}, {"weight", best.weights[i]}});
        json state = {{"format", 1},
                      {"seed", cfg.seed},
                      {"criteria", names},
                      {"all_criteria", pr.all_criteria},
                      {"best_model", learn::to_string(best.kind)},
                      {"selection_metric", to_string(cfg.metric)},
                      {"weights", weights},
                      {"breaks", best.map.breaks},
                      {"break_method", to_string(best.map.method)},
                      {"d_new", pr.d_new},
                      {"sdr_mode", cfg.sdr_mode == NewDemandMode::whole ? "whole" : "radius"},
                      {"normalization", normalization_json(pr.inputs)},
                      {"top", cfg.top},
                      {"models", models},
                      {"validation", any_existing ? to_json(pr.validation) : json(nullptr)}};
        write_text_file(dir / "state.json", state.dump(2) + "\n");
    });

    pr.manifest_digest = write_manifest(dir);
    const auto finished = std::chrono::system_clock::now();
    json info = {{"started", iso_time(started)},
                 {"finished", iso_time(finished)},
                 {"seconds", std::chrono::duration<double>(finished - started).count()},
                 {"threads", threads},
                 {"out", fs::absolute(dir).string()},
                 {"manifest_sha256", pr.manifest_digest}};
    write_text_file(dir / "run_info.json", info.dump(2) + "\n");
    return pr;
}

} // namespace sitewise
