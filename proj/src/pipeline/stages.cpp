#include "sitewise/pipeline/stages.hpp"

#include <numeric>

#include "sitewise/core/csv.hpp"
#include "sitewise/core/random.hpp"

namespace sitewise::stages {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t stream_seed(std::uint64_t seed, Stream s, std::uint64_t sub) {
    return derive_seed(derive_seed(seed, s), sub);
}

namespace {

std::uint64_t kind_index(learn::ModelKind k) { return static_cast<std::uint64_t>(k); }

} // namespace

// ----- labeled map (phase 1, and the rebuild in phase 3)

LabeledMap label_map(const CriteriaSet& criteria, const WeightVector& w, BreakMethod method, const RunConfig& cfg,
                     std::uint64_t round) {
    LabeledMap out;
    RasterLayer score = weighted_sum(criteria, w);
    const std::uint64_t s_seed = stream_seed(cfg.seed, kSampling, round);
    auto scores = sampled_scores(score, criteria, cfg.n_samples, s_seed);
    Breaks b{};
    if (method == BreakMethod::jenks) b = jenks_breaks4(scores);
    else b = cfg.theoretical_range ? equal_interval_breaks(0.0, 1.0) : equal_interval_breaks(scores);
    out.map = make_map(std::move(score), b, method);
    out.samples = sample_points(out.map, criteria, cfg.n_samples, s_seed);
    if (cfg.top_up > 0) top_up(out.samples, out.map, criteria, cfg.top_up, s_seed);
    split(out.samples, cfg.train_frac, stream_seed(cfg.seed, kSplit, round));
    return out;
}

// ----- training (phase 2, and the retrain in phase 3)

Prepared prepare(const SampleSet& samples, const RunConfig& cfg, std::uint64_t round) {
    Prepared p;
    p.train_raw = learn::dataset_from_samples(samples, Split::train);
    p.test_raw = learn::dataset_from_samples(samples, Split::test);
    if (p.test_raw.size() == 0) throw Error("empty test split");
    p.scaler = learn::StandardScaler::fit(p.train_raw.x);
    p.balanced = learn::smote_enn(p.scaler.transform(p.train_raw), {cfg.k_smote, cfg.k_enn},
                                  stream_seed(cfg.seed, kSmote, round), &p.stats);
    return p;
}

learn::Hyperparameters base_hyperparameters(learn::ModelKind kind, const RunConfig& cfg) {
    auto h = learn::default_hyperparameters(kind);
    if (auto it = cfg.overrides.find(kind); it != cfg.overrides.end())
        for (const auto& [k, v] : it->second) h[k] = v;
    return h;
}

Tuning tune(learn::ModelKind kind, const Prepared& p, const RunConfig& cfg) {
    Tuning t;
    t.params = base_hyperparameters(kind, cfg);
    if (!cfg.grid_search) return t;
    t.grid = learn::default_grid(kind);
    if (auto it = cfg.overrides.find(kind); it != cfg.overrides.end())
        for (auto& point : t.grid)
            for (const auto& [k, v] : it->second) point[k] = v;
    auto gs = learn::grid_search(kind, p.balanced, t.grid, cfg.folds, stream_seed(cfg.seed, kGrid, kind_index(kind)), 1);
    t.params = gs.best;
    t.scores = gs.scores;
    return t;
}

learn::TrainedClassifier fit(learn::ModelKind kind, const Prepared& p, const learn::Hyperparameters& h,
                             const RunConfig& cfg, std::uint64_t round) {
    auto model = learn::fit_model(kind, p.balanced, h, stream_seed(cfg.seed, kFit, round * 16 + kind_index(kind)), 1);
    return learn::TrainedClassifier(kind, h, p.scaler, std::move(model));
}

// ----- explanation

explain::ShapleyReport explain_samples(const learn::TrainedClassifier& model, const SampleSet& samples,
                                       const std::vector<std::string>& names, std::size_t n_explain,
                                       std::size_t n_background, std::uint64_t rows_seed, std::uint64_t explain_seed,
                                       unsigned threads) {
    auto train = learn::dataset_from_samples(samples, Split::train);
    auto test = learn::dataset_from_samples(samples, Split::test);
    Rng rng = make_rng(rows_seed);
    std::vector<std::size_t> bg(train.size()), ex(test.size());
    std::iota(bg.begin(), bg.end(), 0);
    std::iota(ex.begin(), ex.end(), 0);
    shuffle(bg, rng);
    shuffle(ex, rng);
    bg.resize(std::min(bg.size(), n_background));
    ex.resize(std::min(ex.size(), n_explain));
    learn::Matrix background(0, names.size()), rows(0, names.size());
    for (auto i : bg) background.append_row(train.x.row(i));
    std::vector<int> test_ids;
    for (const auto& r : samples.rows)
        if (r.split == Split::test) test_ids.push_back(r.id);
    std::vector<int> ids;
    for (auto i : ex) {
        rows.append_row(test.x.row(i));
        ids.push_back(test_ids[i]);
    }
    explain::ExplainOptions opt;
    opt.seed = explain_seed;
    opt.threads = threads;
    return explain::explain_model(model, rows, ids, background, names, opt);
}

// ----- formatting

std::string format_grid(const learn::Grid& grid, const std::vector<double>& scores) {
    std::string out = "index,hyperparameters,mean_weighted_f1\n";
    for (std::size_t g = 0; g < grid.size(); ++g) out += (CsvLine() << g << json(grid[g]).dump() << scores[g]).str() + "\n";
    return out;
}

std::string format_class_area(const SuitabilityMap& map) {
    auto pct = class_area_percent(map);
    std::string out = "class,label,percent\n";
    for (int c = 0; c < kNumClasses; ++c) out += (CsvLine() << c << kClassNames[c] << pct[c]).str() + "\n";
    return out;
}

void write_map(const SuitabilityMap& map, const fs::path& dir) {
    save_raster(map.score, dir / "score.asc");
    save_raster(map.classes, dir / "class.asc");
    write_text_file(dir / "breaks.csv", format_breaks(map.breaks, map.method));
    write_text_file(dir / "class_area.csv", format_class_area(map));
}

} // namespace sitewise::stages
