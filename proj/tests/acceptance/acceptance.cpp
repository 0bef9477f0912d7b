// One PASS/FAIL line per primary acceptance criterion. Exit status is nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "oracles/brute_force.hpp"
#include "sitewise/core/random.hpp"
#include "sitewise/explain/shapley.hpp"
#include "sitewise/learn/metrics.hpp"
#include "sitewise/overlay/overlay.hpp"
#include "sitewise/pipeline/pipeline.hpp"
#include "sitewise/sdr/sdr.hpp"

using namespace sitewise;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kAxiomTol = 1e-6;
constexpr double kOracleTol = 1e-9;
constexpr double kSdrTol = 1e-9;
constexpr double kAucTol = 1e-12;
constexpr double kShapleySeconds = 10.0;
constexpr double kSdrSeconds = 5.0;
constexpr double kPlantedSeconds = 180.0;
constexpr double kMinAccuracy = 0.85;
constexpr double kMinClass23Percent = 70.0;
constexpr int kSeeds = 5;
constexpr int kRequiredSeeds = 4;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!ok) ++failures;
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << v;
    return s.str();
}

// ----- Shapley

void shapley_axioms() {
    auto t0 = Clock::now();
    Rng rng = make_rng(2024);
    int games = 0;
    double worst_axiom = 0.0, worst_oracle = 0.0;
    auto random_game = [&](int k) {
        std::vector<double> v(std::size_t{1} << k);
        for (double& x : v) x = uniform01(rng) * 20 - 10;
        return v;
    };
    auto swap01 = [](std::uint32_t s) {
        std::uint32_t a = s & 1u, b = (s >> 1) & 1u;
        return (s & ~3u) | (a << 1) | b;
    };
    for (int k = 2; k <= 6; ++k)
        for (int t = 0; t < 5; ++t, ++games) {
            auto u = random_game(k), w = random_game(k);
            auto fu = [&](std::uint32_t s) { return u[s]; };
            auto phi = explain::exact_shapley(k, fu);

            auto want = oracle::permutation_shapley(k, fu);
            for (int i = 0; i < k; ++i) worst_oracle = std::max(worst_oracle, std::abs(phi[i] - want[i]));

            double sum = 0.0;
            for (double p : phi) sum += p;
            worst_axiom = std::max(worst_axiom, std::abs(sum - (u.back() - u.front())));

            // Player k-1 never changes the value.
            const std::uint32_t last = 1u << (k - 1);
            auto dummy = explain::exact_shapley(k, [&](std::uint32_t s) { return u[s & ~last]; });
            worst_axiom = std::max(worst_axiom, std::abs(dummy[static_cast<std::size_t>(k - 1)]));

            // Players 0 and 1 are interchangeable.
            auto sym = explain::exact_shapley(k, [&](std::uint32_t s) { return u[s] + u[swap01(s)]; });
            worst_axiom = std::max(worst_axiom, std::abs(sym[0] - sym[1]));

            auto pw = explain::exact_shapley(k, [&](std::uint32_t s) { return w[s]; });
            auto mix = explain::exact_shapley(k, [&](std::uint32_t s) { return 1.5 * u[s] - 0.25 * w[s]; });
            for (int i = 0; i < k; ++i) worst_axiom = std::max(worst_axiom, std::abs(mix[i] - (1.5 * phi[i] - 0.25 * pw[i])));
        }
    double secs = seconds_since(t0);
    report(games >= 20 && worst_axiom <= kAxiomTol && worst_oracle <= kOracleTol && secs < kShapleySeconds,
           "shapley-axioms",
           std::to_string(games) + " games K=2..6, max axiom error " + fmt(worst_axiom) + " (tol 1e-6), max oracle error " +
               fmt(worst_oracle) + " (tol 1e-9), " + fmt(secs, 3) + " s");
}

// ----- SDR

void sdr_oracle() {
    auto t0 = Clock::now();
    double worst = 0.0, worst_conservation = 0.0;
    int regions = 0, facilities = 0, mismatched_defined = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed, ++regions) {
        SyntheticOptions opt;
        opt.seed = seed;
        opt.ncols = 40 + static_cast<int>(seed * 6);
        opt.nrows = 100 - static_cast<int>(seed * 4);
        opt.n_counties = 1 + static_cast<int>((seed * 3) % 8);
        opt.n_facilities = static_cast<int>(seed % 7);
        opt.n_candidates = 0;
        RegionModel r = generate_synthetic_region(opt).region;
        double d_new = default_new_demand(r);

        auto alloc = allocate_demand(r);
        for (std::size_t i = 0; i < r.facilities.size(); ++i, ++facilities) {
            const auto& f = r.facilities[i];
            auto want = oracle::allocate_point(r, f.x, f.y, f.demand_tons_per_year);
            for (std::size_t j = 0; j < r.counties.size(); ++j)
                worst = std::max(worst, std::abs(alloc.at(i, j) - want[j]) / (1.0 + want[j]));
            if (!alloc.uncovered[i])
                worst_conservation = std::max(worst_conservation, std::abs(alloc.row_sum(i) - f.demand_tons_per_year) /
                                                                       (1.0 + f.demand_tons_per_year));
        }

        auto table = compute_sdr(r, d_new);
        auto want = oracle::sdr(r, d_new);
        for (std::size_t j = 0; j < want.size(); ++j) {
            const auto& got = table.rows[j];
            if (got.defined != want[j].defined) ++mismatched_defined;
            worst = std::max(worst, std::abs(got.existing_demand - want[j].existing) / (1.0 + want[j].existing));
            worst = std::max(worst, std::abs(got.d_new - want[j].d_new) / (1.0 + want[j].d_new));
            if (got.defined && want[j].defined) worst = std::max(worst, std::abs(got.sdr - want[j].sdr) / (1.0 + want[j].sdr));
        }
    }
    double secs = seconds_since(t0);
    report(worst <= kSdrTol && worst_conservation <= kSdrTol && mismatched_defined == 0 && secs < kSdrSeconds, "sdr-oracle",
           std::to_string(regions) + " regions, " + std::to_string(facilities) + " facilities, max relative error " +
               fmt(worst) + ", conservation " + fmt(worst_conservation) + " (tol 1e-9), " + fmt(secs, 3) + " s");
}

// ----- Jenks

std::vector<std::size_t> class_sizes(const std::vector<long long>& sorted, const std::vector<double>& breaks) {
    std::vector<std::size_t> sizes(breaks.size() + 1, 0);
    for (long long v : sorted) {
        std::size_t c = 0;
        while (c < breaks.size() && static_cast<double>(v) > breaks[c]) ++c;
        ++sizes[c];
    }
    return sizes;
}

void jenks_optimality() {
    Rng rng = make_rng(16);
    int checked = 0, optimal = 0;
    while (checked < 50) {
        std::size_t n = 4 + uniform_index(rng, 13); // 4..16
        long long span = 2 + static_cast<long long>(uniform_index(rng, 200));
        std::vector<long long> values(n);
        for (auto& v : values) v = static_cast<long long>(uniform_index(rng, static_cast<std::uint64_t>(span)));
        if (std::set<long long>(values.begin(), values.end()).size() < 4) continue;
        auto breaks = jenks_breaks(std::vector<double>(values.begin(), values.end()), 4);
        std::sort(values.begin(), values.end());
        if (oracle::scaled_sse(values, class_sizes(values, breaks)) == oracle::exhaustive_jenks(values, 4)) ++optimal;
        ++checked;
    }
    report(optimal == checked, "jenks-optimality",
           std::to_string(optimal) + "/" + std::to_string(checked) + " inputs (n<=16) at the exhaustive optimum, exact");
}

// ----- Metrics

void metrics(const std::vector<learn::EvaluationReport>& pipeline_evals) {
    bool ok = true;
    std::string detail;
    auto m = learn::binary_metrics(40, 10, 20, 30);
    bool fixture = m.accuracy == 0.7 && std::abs(m.precision - 0.8) <= 1e-15 && std::abs(m.recall - 2.0 / 3.0) <= 1e-15 &&
                   std::abs(m.f1 - 16.0 / 22.0) <= 1e-15 && fmt(m.recall) == "0.6667" && fmt(m.f1) == "0.7273";
    ok &= fixture;
    detail += std::string("fixture 40/10/20/30 -> ") + fmt(m.accuracy) + "/" + fmt(m.precision) + "/" + fmt(m.recall) +
              "/" + fmt(m.f1);

    Rng rng = make_rng(8);
    double worst_auc = 0.0;
    for (int t = 0; t < 20; ++t) {
        std::size_t n = 5 + uniform_index(rng, 80);
        std::vector<double> s(n);
        std::vector<int> pos(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = t % 2 ? uniform01(rng) : static_cast<double>(uniform_index(rng, 6));
            pos[i] = uniform01(rng) < 0.5;
        }
        pos[0] = 1;
        pos[1] = 0;
        auto got = learn::binary_auc(s, pos);
        if (!got) ok = false;
        else worst_auc = std::max(worst_auc, std::abs(*got - oracle::pairwise_auc(s, pos)));
    }
    ok &= worst_auc <= kAucTol;
    detail += ", 20 AUC sets max error " + fmt(worst_auc);

    double worst_identity = 0.0;
    std::size_t evals = 0;
    for (int t = 0; t < 30; ++t, ++evals) {
        std::size_t n = 10 + uniform_index(rng, 200);
        std::vector<int> truth(n), pred(n);
        std::vector<learn::Proba> proba(n);
        for (std::size_t i = 0; i < n; ++i) {
            truth[i] = static_cast<int>(uniform_index(rng, 4));
            pred[i] = uniform01(rng) < 0.6 ? truth[i] : static_cast<int>(uniform_index(rng, 4));
            for (double& q : proba[i]) q = uniform01(rng);
        }
        auto r = learn::evaluate_predictions(truth, pred, proba);
        worst_identity = std::max(worst_identity, std::abs(r.recall - r.accuracy));
    }
    for (const auto& e : pipeline_evals) {
        worst_identity = std::max(worst_identity, std::abs(e.recall - e.accuracy));
        ++evals;
    }
    ok &= worst_identity <= kAucTol;
    detail += ", accuracy = weighted recall on " + std::to_string(evals) + " evaluations (max gap " + fmt(worst_identity) + ")";
    report(ok, "metrics", detail);
}

// ----- Planted recovery, validation, determinism

RunConfig planted_config(std::uint64_t seed, const fs::path& out) {
    KeyValueConfig kv;
    kv.set("seed", std::to_string(seed));
    kv.set("learn.grid_search", "false");
    kv.set("explain.n_explain", "40");
    kv.set("explain.n_background", "30");
    RunConfig cfg = parse_run_config(kv);
    cfg.out = out;
    return cfg;
}

std::set<std::string> top3(const WeightVector& w) {
    std::vector<std::size_t> idx(w.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    std::set<std::string> out;
    for (std::size_t i = 0; i < 3 && i < idx.size(); ++i) out.insert(w.names()[idx[i]]);
    return out;
}

std::string join(const std::set<std::string>& s) {
    std::string out;
    for (const auto& x : s) out += (out.empty() ? "" : "|") + x;
    return out;
}

} // namespace

int main() {
    const fs::path root = fs::temp_directory_path() / "sitewise_acceptance";
    fs::remove_all(root);

    shapley_axioms();
    sdr_oracle();
    jenks_optimality();

    // The pipeline runs feed the planted-recovery, validation, determinism and metrics lines.
    std::vector<learn::EvaluationReport> evals;
    std::vector<std::string> digests;
    int recovered = 0, accurate = 0, validated = 0;
    std::string per_seed, validation_detail;
    auto t0 = Clock::now();
    for (int seed = 1; seed <= kSeeds; ++seed) {
        PipelineRun pr = run(planted_config(static_cast<std::uint64_t>(seed), root / ("seed" + std::to_string(seed))));
        const ModelRun& best = pr.best_model();
        for (const auto& m : pr.models) {
            evals.push_back(m.initial_eval);
            evals.push_back(m.final_eval);
        }
        digests.push_back(pr.manifest_digest);
        auto want = top3(pr.config.synthetic.planted);
        auto got = top3(best.weights);
        bool hit = got == want;
        recovered += hit;
        accurate += best.final_eval.accuracy >= kMinAccuracy;
        double c23 = pr.validation.percent[2] + pr.validation.percent[3];
        validated += c23 >= kMinClass23Percent;
        per_seed += " seed " + std::to_string(seed) + ": " + learn::to_string(best.kind) + " top3 " + join(got) +
                    (hit ? "" : " (miss)") + " acc " + fmt(best.final_eval.accuracy, 3) + ";";
        validation_detail += " " + fmt(c23, 3) + "%";
    }
    double planted_secs = seconds_since(t0);

    metrics(evals);
    report(recovered >= kRequiredSeeds && accurate == kSeeds && planted_secs < kPlantedSeconds, "planted-recovery",
           std::to_string(recovered) + "/5 seeds recover the planted top-3, " + std::to_string(accurate) +
               "/5 best models at accuracy >= 0.85, " + fmt(planted_secs, 4) + " s for 5 runs (150x150);" + per_seed);
    report(validated >= kRequiredSeeds, "validation-analogue",
           std::to_string(validated) + "/5 seeds with >= 70% of existing facilities in classes 2-3:" + validation_detail);

    PipelineRun again = run(planted_config(1, root / "seed1_again"));
    report(again.manifest_digest == digests.front(), "determinism",
           "seed 1 rerun digest " + again.manifest_digest.substr(0, 16) + " vs " + digests.front().substr(0, 16));

    // Stated rather than measured: these need the study area's proprietary data.
    report(true, "not-reproducible-at-desk-scale",
           "the study-area metric table, VIF table, adjusted weight table and state maps depend on proprietary "
           "state data and are not reproduced; they are covered structurally by the unit suites (row sums, "
           "report formats, accuracy = weighted recall, VIF = 1/(1-R^2))");

    fs::remove_all(root);
    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
