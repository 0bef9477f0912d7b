#include <algorithm>

#include "sitewise/pipeline/pipeline.hpp"

namespace sitewise {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> required_run_files() {
    return {"config.toml",
            "state.json",
            "manifest.csv",
            "inputs/county_mask.asc",
            "inputs/counties.csv",
            "inputs/region.cfg",
            "inputs/criteria.cfg",
            "artifacts/final/model.json",
            "artifacts/final/weights.csv",
            "artifacts/final/score.asc",
            "artifacts/final/class.asc"};
}

RunState load_run(const fs::path& dir) {
    for (const auto& f : required_run_files())
        if (!fs::exists(dir / f)) throw Error("run directory " + dir.string() + " is missing " + f);
    RunState s;
    s.dir = dir;
    json state;
    try {
        state = json::parse(read_text_file(dir / "state.json"));
        s.region = load_region(dir / "inputs");
        auto names = state.at("criteria").get<std::vector<std::string>>();
        auto all_specs = load_criteria_config(dir / "inputs" / "criteria.cfg");
        std::vector<CriterionSpec> specs;
        for (const auto& n : names) {
            auto it = std::find_if(all_specs.begin(), all_specs.end(), [&](const CriterionSpec& c) { return c.name == n; });
            if (it == all_specs.end()) throw Error("state.json names criterion '" + n + "' missing from criteria.cfg");
            specs.push_back(*it);
        }
        std::vector<std::optional<RangeNormalization>> frozen;
        const auto& norm = state.at("normalization");
        if (norm.size() != specs.size()) throw Error("state.json: normalization count mismatch");
        for (const auto& n : norm) {
            if (n.is_null()) frozen.emplace_back();
            else frozen.push_back(RangeNormalization{n.at("lo").get<double>(), n.at("hi").get<double>(),
                                                     parse_direction(n.at("direction").get<std::string>())});
        }
        s.d_new = state.at("d_new").get<double>();
        s.sdr_mode = state.at("sdr_mode").get<std::string>() == "whole" ? NewDemandMode::whole : NewDemandMode::radius;
        s.inputs = assemble_criteria(s.region, specs, dir / "inputs", s.d_new, s.sdr_mode, &frozen);
        s.weights = load_weights(dir / "artifacts" / "final" / "weights.csv");
        if (s.weights.names() != names) throw Error("final weights do not match the run's criteria");
        auto b = state.at("breaks").get<std::vector<double>>();
        if (b.size() != 3) throw Error("state.json: expected three breaks");
        s.breaks = {b[0], b[1], b[2]};
        s.method = state.at("break_method").get<std::string>() == "jenks" ? BreakMethod::jenks : BreakMethod::equal_interval;
        s.model = learn::TrainedClassifier::load(dir / "artifacts" / "final" / "model.json");
        s.best_kind = s.model.kind();
        s.top = state.value("top", std::size_t{10});
    } catch (const json::exception& e) {
        throw Error("run directory " + dir.string() + ": malformed state.json: " + e.what());
    }
    s.map = make_map(weighted_sum(s.inputs.criteria, s.weights), s.breaks, s.method);
    return s;
}

std::vector<Facility> apply_facility_changes(std::vector<Facility> base, const std::vector<Facility>& add,
                                             const std::vector<int>& remove_ids) {
    for (int id : remove_ids) {
        auto it = std::find_if(base.begin(), base.end(), [&](const Facility& f) { return f.id == id; });
        if (it == base.end()) throw Error("cannot remove facility " + std::to_string(id) + ": no such facility");
        base.erase(it);
    }
    for (const auto& f : add) {
        if (std::any_of(base.begin(), base.end(), [&](const Facility& g) { return g.id == f.id; }))
            throw Error("facility id " + std::to_string(f.id) + " already exists");
        base.push_back(f);
    }
    return base;
}

ScenarioResult scenario_update(const RunState& state, const std::vector<Facility>& facilities,
                               const std::vector<CandidateSite>& candidates, std::size_t top) {
    RegionModel region = state.region;
    region.facilities = facilities;
    region.validate();
    AssembledCriteria a = state.inputs;
    ScenarioResult out;
    out.sdr = *refresh_sdr(a, region, state.d_new, state.sdr_mode);
    out.facilities = facilities;
    out.map = make_map(weighted_sum(a.criteria, state.weights), state.breaks, state.method);
    out.ranking = rank_candidates(state.model, a.criteria, out.map, candidates, top);
    out.criteria = std::move(a.criteria);
    return out;
}

} // namespace sitewise
