#pragma once

// Building blocks shared by the full run and the staged CLI subcommands.

#include <cstdint>
#include <filesystem>
#include <string>

#include "sitewise/explain/shapley.hpp"
#include "sitewise/learn/classifier.hpp"
#include "sitewise/learn/grid_search.hpp"
#include "sitewise/learn/smote_enn.hpp"
#include "sitewise/overlay/overlay.hpp"
#include "sitewise/overlay/sampling.hpp"
#include "sitewise/overlay/weights.hpp"
#include "sitewise/pipeline/config.hpp"

namespace sitewise::stages {

// Independent random streams of a run.
enum Stream : std::uint64_t {
    kSampling = 1,
    kSplit = 2,
    kSmote = 3,
    kGrid = 4,
    kFit = 5,
    kExplain = 6,
    kImportance = 7,
    kRows = 8,
};

std::uint64_t stream_seed(std::uint64_t seed, Stream s, std::uint64_t sub = 0);

struct LabeledMap {
    SuitabilityMap map;
    SampleSet samples;
};

/// Weighted sum, breaks from n_samples sampled scores (Jenks, or equal interval over the sample
/// or theoretical range), classification, labeled sample draw and train/test split.
/// `round` selects the sampling and split streams.
LabeledMap label_map(const CriteriaSet& criteria, const WeightVector& w, BreakMethod method, const RunConfig& cfg,
                     std::uint64_t round);

struct Prepared {
    learn::Dataset train_raw;
    learn::Dataset test_raw;
    learn::StandardScaler scaler;
    learn::Dataset balanced; // scaled, SMOTE-ENN
    learn::SmoteEnnStats stats;
};

/// Splits the samples, fits the scaler on the train rows and balances them with SMOTE-ENN.
Prepared prepare(const SampleSet& samples, const RunConfig& cfg, std::uint64_t round);

learn::Hyperparameters base_hyperparameters(learn::ModelKind kind, const RunConfig& cfg);

struct Tuning {
    learn::Hyperparameters params;
    learn::Grid grid;           // empty without grid search
    std::vector<double> scores; // cross-validated score per grid point
};

/// Defaults merged with config overrides; with grid search on, the best point of the default
/// grid (overrides pinned) by stratified cross-validation on the balanced train set.
Tuning tune(learn::ModelKind kind, const Prepared& p, const RunConfig& cfg);

std::string format_grid(const learn::Grid& grid, const std::vector<double>& scores);

learn::TrainedClassifier fit(learn::ModelKind kind, const Prepared& p, const learn::Hyperparameters& h,
                             const RunConfig& cfg, std::uint64_t round);

/// SHAP values of up to n_explain shuffled test rows against up to n_background shuffled train
/// rows; both shuffles draw from `rows_seed`.
explain::ShapleyReport explain_samples(const learn::TrainedClassifier& model, const SampleSet& samples,
                                       const std::vector<std::string>& names, std::size_t n_explain,
                                       std::size_t n_background, std::uint64_t rows_seed, std::uint64_t explain_seed,
                                       unsigned threads = 1);

std::string format_class_area(const SuitabilityMap& map);

/// score.asc, class.asc, breaks.csv, class_area.csv
void write_map(const SuitabilityMap& map, const std::filesystem::path& dir);

} // namespace sitewise::stages
