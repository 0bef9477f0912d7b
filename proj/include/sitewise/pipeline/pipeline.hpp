#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitewise/explain/collinearity.hpp"
#include "sitewise/explain/importance.hpp"
#include "sitewise/explain/shapley.hpp"
#include "sitewise/geocore/region.hpp"
#include "sitewise/learn/classifier.hpp"
#include "sitewise/learn/metrics.hpp"
#include "sitewise/overlay/overlay.hpp"
#include "sitewise/overlay/sampling.hpp"
#include "sitewise/overlay/weights.hpp"
#include "sitewise/pipeline/config.hpp"
#include "sitewise/pipeline/inputs.hpp"

namespace sitewise {

// ---------------------------------------------------------------------------------------------
// Validation and ranking

struct ValidationReport {
    std::array<std::size_t, kNumClasses> count{};
    std::array<double, kNumClasses> percent{}; // of facilities on classified cells
    std::size_t n_existing = 0;
    std::vector<int> unclassified; // ids of existing facilities on nodata cells
};

/// Class distribution of the existing facilities on a classified map.
ValidationReport validate_against_existing(const SuitabilityMap& map, const RegionModel& region);

std::string format_validation(const ValidationReport& v);
nlohmann::json to_json(const ValidationReport& v);

struct RankedCandidate {
    int rank = 0; // 1-based
    int id = 0;
    double x = 0.0;
    double y = 0.0;
    double score = 0.0; // probability of the highly suitable class
    std::optional<int> class_label;
};

struct RankResult {
    std::vector<RankedCandidate> ranked; // top M, best first
    std::vector<int> excluded;           // candidates outside the region or on nodata cells
};

/// Scores each candidate by the model's class-3 probability at its cell's criteria values;
/// descending score, ties by ascending id. top = 0 keeps every included candidate.
RankResult rank_candidates(const learn::TrainedClassifier& model, const CriteriaSet& criteria, const SuitabilityMap& map,
                           const std::vector<CandidateSite>& candidates, std::size_t top);

/// "rank,id,score" lines.
std::string format_ranking(const RankResult& r);
nlohmann::json to_json(const RankResult& r);

// ---------------------------------------------------------------------------------------------
// Full run

struct ModelRun {
    learn::ModelKind kind{};
    learn::Hyperparameters params;
    std::vector<double> grid_scores;
    learn::TrainedClassifier initial_model;
    learn::EvaluationReport initial_eval;
    std::vector<double> importance;
    explain::ShapleyReport shap;
    WeightVector weights;
    std::vector<WeightVector> weight_history; // one entry per retuning iteration
    SuitabilityMap map;
    SampleSet samples;
    learn::TrainedClassifier final_model;
    learn::EvaluationReport final_eval;
};

struct PipelineRun {
    RunConfig config;
    std::filesystem::path dir;
    RegionModel region;
    AssembledCriteria inputs;
    double d_new = 0.0;
    std::vector<std::string> all_criteria; // before pruning
    WeightVector initial_weights;
    SuitabilityMap initial_map;
    SampleSet initial_samples;
    std::optional<explain::CollinearityReport> collinearity;
    std::optional<explain::PruneResult> pruning;
    std::vector<ModelRun> models;
    std::size_t best = 0;
    ValidationReport validation;
    RankResult ranking;
    std::string manifest_digest;

    const ModelRun& best_model() const { return models.at(best); }
};

/// Runs the four phases and writes the run directory `config.out`:
///   config.toml  inputs/  artifacts/  state.json  manifest.csv  run_info.json
/// Errors are rethrown prefixed with the phase name; artifacts written so far remain.
PipelineRun run(const RunConfig& config);

/// Index of the best model: highest metric, then accuracy, then fixed kind order.
std::size_t select_best(const std::vector<ModelRun>& models, SelectionMetric metric);

/// Writes manifest.csv (path,sha256 of every file except the manifest and run_info.json,
/// sorted by path) and returns the digest of the manifest.
std::string write_manifest(const std::filesystem::path& dir);

// ---------------------------------------------------------------------------------------------
// Frozen run state: what scenario updates, ranking and the service work from.

struct RunState {
    std::filesystem::path dir;
    RegionModel region;          // base facility set
    AssembledCriteria inputs;    // base criteria with frozen normalizations
    double d_new = 0.0;
    NewDemandMode sdr_mode = NewDemandMode::radius;
    WeightVector weights;        // tuned weights of the best model
    Breaks breaks{};
    BreakMethod method = BreakMethod::jenks;
    learn::TrainedClassifier model;
    learn::ModelKind best_kind{};
    SuitabilityMap map;
    std::size_t top = 10;
};

/// Loads a completed run directory. Throws naming the first missing artifact.
RunState load_run(const std::filesystem::path& dir);

/// Files a completed run must contain, relative to the run directory.
std::vector<std::string> required_run_files();

struct ScenarioResult {
    std::vector<Facility> facilities;
    SdrTable sdr;
    CriteriaSet criteria;
    SuitabilityMap map;
    RankResult ranking;
};

/// Recomputes SDR, the SDR criterion (frozen normalization), the weighted sum (frozen weights)
/// and classes (frozen breaks) for a new facility set, then re-ranks `candidates` with the
/// frozen model.
ScenarioResult scenario_update(const RunState& state, const std::vector<Facility>& facilities,
                               const std::vector<CandidateSite>& candidates, std::size_t top);

/// Facility-set edits relative to a base list.
std::vector<Facility> apply_facility_changes(std::vector<Facility> base, const std::vector<Facility>& add,
                                             const std::vector<int>& remove_ids);

} // namespace sitewise
