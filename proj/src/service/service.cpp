#include "sitewise/service/service.hpp"

#include <httplib.h>

#include "sitewise/core/log.hpp"

namespace sitewise::service {

using nlohmann::json;

namespace {

ScenarioService::Response error(int status, const std::string& message) {
    return {status, json{{"error", message}}.dump(), "application/json"};
}

ScenarioService::Response ok(const json& body) { return {200, body.dump(), "application/json"}; }

json sdr_json(const SdrTable& t) {
    json rows = json::array();
    for (const auto& r : t.rows)
        rows.push_back({{"county_id", r.county_id},
                        {"supply", r.supply},
                        {"existing_demand_allocated", r.existing_demand},
                        {"d_new", r.d_new},
                        {"sdr", r.defined ? json(r.sdr) : json(nullptr)},
                        {"defined", r.defined}});
    return rows;
}

json facility_json(const Facility& f) {
    return {{"id", f.id}, {"x", f.x}, {"y", f.y}, {"demand_tons_per_year", f.demand_tons_per_year}, {"status", to_string(f.status)}};
}

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < path.size()) {
        std::size_t j = path.find('/', i);
        if (j == std::string::npos) j = path.size();
        if (j > i) out.push_back(path.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

std::string query_or(const std::map<std::string, std::string>& q, const std::string& key, const std::string& fallback) {
    auto it = q.find(key);
    return it == q.end() || it->second.empty() ? fallback : it->second;
}

} // namespace

json grid_json(const RasterLayer& layer, bool integral) {
    const GridHeader& g = layer.header;
    json values = json::array();
    for (double v : layer.cells) {
        if (integral) values.push_back(static_cast<long long>(v));
        else values.push_back(v);
    }
    return {{"ncols", g.ncols}, {"nrows", g.nrows},       {"xll", g.xll}, {"yll", g.yll},
            {"cellsize", g.cellsize}, {"nodata", g.nodata}, {"values", std::move(values)}};
}

ScenarioService::ScenarioService(RunState base) : base_(std::move(base)) {
    auto s = std::make_shared<Scenario>();
    auto snap = std::make_shared<Snapshot>();
    snap->id = "base";
    snap->facilities = base_.region.facilities;
    snap->result = scenario_update(base_, snap->facilities, base_.region.candidates, 0);
    s->current = snap;
    for (const auto& f : base_.region.facilities) s->next_facility_id = std::max(s->next_facility_id, f.id + 1);
    scenarios_["base"] = s;
}

std::shared_ptr<ScenarioService::Scenario> ScenarioService::find(const std::string& id) const {
    std::shared_lock lock(registry_mu_);
    auto it = scenarios_.find(id);
    return it == scenarios_.end() ? nullptr : it->second;
}

std::shared_ptr<const Snapshot> ScenarioService::snapshot(const std::string& id) const {
    auto s = find(id);
    if (!s) return nullptr;
    std::lock_guard lock(s->mu);
    return s->current;
}

ScenarioService::Response ScenarioService::run_info() const {
    json weights = json::array();
    for (std::size_t i = 0; i < base_.weights.size(); ++i)
        weights.push_back({{"criterion", base_.weights.names()[i]}, {"weight", base_.weights[i]}});
    json candidates = json::array();
    for (const auto& c : base_.region.candidates) candidates.push_back({{"id", c.id}, {"x", c.x}, {"y", c.y}});
    json facilities = json::array();
    for (const auto& f : base_.region.facilities) facilities.push_back(facility_json(f));
    const GridHeader& g = base_.region.grid;
    return ok({{"scenario", "base"},
               {"revision", 0},
               {"best_model", learn::to_string(base_.best_kind)},
               {"criteria", base_.inputs.criteria.names()},
               {"weights", weights},
               {"breaks", base_.breaks},
               {"break_method", to_string(base_.method)},
               {"d_new", base_.d_new},
               {"radius", base_.region.radius},
               {"grid", {{"ncols", g.ncols}, {"nrows", g.nrows}, {"xll", g.xll}, {"yll", g.yll}, {"cellsize", g.cellsize}, {"nodata", g.nodata}}},
               {"facilities", facilities},
               {"candidates", candidates},
               {"top", base_.top}});
}

ScenarioService::Response ScenarioService::map(const std::map<std::string, std::string>& query) const {
    std::string id = query_or(query, "scenario", "base");
    std::string layer = query_or(query, "layer", "");
    auto snap = snapshot(id);
    if (!snap) return error(404, "unknown scenario '" + id + "'");
    if (layer.empty())
        return ok({{"scenario", id},
                   {"revision", snap->revision},
                   {"breaks", snap->result.map.breaks},
                   {"score", grid_json(snap->result.map.score)},
                   {"class", grid_json(snap->result.map.classes, true)}});
    json grid;
    if (layer == "score") {
        grid = grid_json(snap->result.map.score);
    } else if (layer == "class") {
        grid = grid_json(snap->result.map.classes, true);
    } else if (layer == "sdr") {
        grid = grid_json(sdr_raster(snap->result.sdr, base_.region));
    } else {
        int k = snap->result.criteria.index_of(layer);
        if (k < 0) return error(400, "unknown layer '" + layer + "'");
        grid = grid_json(snap->result.criteria.layer(static_cast<std::size_t>(k)));
    }
    return ok({{"scenario", id}, {"revision", snap->revision}, {"layer", layer}, {"grid", std::move(grid)}});
}

ScenarioService::Response ScenarioService::create_scenario() {
    auto base = snapshot("base");
    auto s = std::make_shared<Scenario>();
    auto snap = std::make_shared<Snapshot>(*base);
    snap->revision = 0;
    {
        std::unique_lock lock(registry_mu_);
        snap->id = "s" + std::to_string(next_scenario_++);
        s->next_facility_id = scenarios_.at("base")->next_facility_id;
        s->current = snap;
        scenarios_[snap->id] = s;
    }
    return ok({{"scenario", snap->id}, {"revision", 0}});
}

ScenarioService::Response ScenarioService::delete_scenario(const std::string& id) {
    if (id == "base") return error(400, "the base scenario is read-only");
    std::unique_lock lock(registry_mu_);
    if (!scenarios_.erase(id)) return error(404, "unknown scenario '" + id + "'");
    return ok({{"deleted", id}});
}

ScenarioService::Response ScenarioService::add_facility(const std::string& id, const json& body) {
    if (id == "base") return error(400, "the base scenario is read-only");
    auto s = find(id);
    if (!s) return error(404, "unknown scenario '" + id + "'");
    Facility f;
    try {
        f.x = body.at("x").get<double>();
        f.y = body.at("y").get<double>();
        f.demand_tons_per_year = body.contains("demand") ? body.at("demand").get<double>() : base_.d_new;
    } catch (const json::exception&) {
        return error(400, "body must be {x, y, demand}");
    }
    f.status = FacilityStatus::hypothetical;
    if (!(f.demand_tons_per_year >= 0.0)) return error(400, "demand must be non-negative");
    if (!base_.region.grid.locate(f.x, f.y)) return error(400, "facility lies outside the region");
    std::lock_guard lock(s->mu);
    f.id = s->next_facility_id;
    auto snap = std::make_shared<Snapshot>();
    snap->id = id;
    snap->revision = s->current->revision + 1;
    snap->facilities = apply_facility_changes(s->current->facilities, {f}, {});
    snap->result = scenario_update(base_, snap->facilities, base_.region.candidates, 0);
    ++s->next_facility_id;
    s->current = snap;
    return ok({{"scenario", id}, {"revision", snap->revision}, {"facility", facility_json(f)}, {"sdr", sdr_json(snap->result.sdr)}});
}

ScenarioService::Response ScenarioService::remove_facility(const std::string& id, int facility_id) {
    if (id == "base") return error(400, "the base scenario is read-only");
    auto s = find(id);
    if (!s) return error(404, "unknown scenario '" + id + "'");
    std::lock_guard lock(s->mu);
    auto snap = std::make_shared<Snapshot>();
    snap->id = id;
    snap->revision = s->current->revision + 1;
    try {
        snap->facilities = apply_facility_changes(s->current->facilities, {}, {facility_id});
    } catch (const Error& e) {
        return error(404, e.what());
    }
    snap->result = scenario_update(base_, snap->facilities, base_.region.candidates, 0);
    s->current = snap;
    return ok({{"scenario", id}, {"revision", snap->revision}, {"removed", facility_id}, {"sdr", sdr_json(snap->result.sdr)}});
}

ScenarioService::Response ScenarioService::rank(const json& body, bool csv) const {
    std::string id = body.value("scenario", std::string("base"));
    auto snap = snapshot(id);
    if (!snap) return error(404, "unknown scenario '" + id + "'");
    std::size_t top = body.value("top", base_.top);
    std::vector<CandidateSite> candidates;
    if (body.contains("candidates")) {
        int next = 1;
        for (const auto& c : body.at("candidates")) {
            CandidateSite site;
            site.id = c.contains("id") ? c.at("id").get<int>() : next;
            site.x = c.at("x").get<double>();
            site.y = c.at("y").get<double>();
            next = std::max(next, site.id) + 1;
            candidates.push_back(site);
        }
    } else {
        candidates = base_.region.candidates;
    }
    RankResult r = rank_candidates(base_.model, snap->result.criteria, snap->result.map, candidates, top);
    if (csv) return {200, format_ranking(r), "text/csv"};
    json out = to_json(r);
    out["scenario"] = id;
    out["revision"] = snap->revision;
    return ok(out);
}

ScenarioService::Response ScenarioService::validation(const std::map<std::string, std::string>& query) const {
    std::string id = query_or(query, "scenario", "base");
    auto snap = snapshot(id);
    if (!snap) return error(404, "unknown scenario '" + id + "'");
    RegionModel region = base_.region;
    region.facilities = snap->facilities;
    json out = to_json(validate_against_existing(snap->result.map, region));
    out["scenario"] = id;
    out["revision"] = snap->revision;
    return ok(out);
}

ScenarioService::Response ScenarioService::scenario_info(const std::string& id) const {
    auto snap = snapshot(id);
    if (!snap) return error(404, "unknown scenario '" + id + "'");
    json facilities = json::array();
    for (const auto& f : snap->facilities) facilities.push_back(facility_json(f));
    return ok({{"scenario", id}, {"revision", snap->revision}, {"facilities", facilities}, {"sdr", sdr_json(snap->result.sdr)}});
}

ScenarioService::Response ScenarioService::handle(const std::string& method, const std::string& path,
                                                  const std::map<std::string, std::string>& query, const std::string& body) {
    try {
        auto parts = split_path(path);
        if (parts.size() < 2 || parts[0] != "api") return error(404, "not found");
        auto parse_body = [&] { return body.empty() ? json::object() : json::parse(body); };
        const std::string& what = parts[1];
        if (what == "run" && parts.size() == 2 && method == "GET") return run_info();
        if (what == "map" && parts.size() == 2 && method == "GET") return map(query);
        if (what == "validation" && parts.size() == 2 && method == "GET") return validation(query);
        if (what == "rank" && parts.size() == 2 && method == "POST")
            return rank(parse_body(), query_or(query, "format", "json") == "csv");
        if (what == "scenario") {
            if (parts.size() == 2 && method == "POST") return create_scenario();
            if (parts.size() == 3 && method == "DELETE") return delete_scenario(parts[2]);
            if (parts.size() == 3 && method == "GET") return scenario_info(parts[2]);
            if (parts.size() == 4 && parts[3] == "facilities" && method == "POST") return add_facility(parts[2], parse_body());
            if (parts.size() == 5 && parts[3] == "facilities" && method == "DELETE") {
                auto fid = parse_int(parts[4]);
                if (!fid) return error(400, "facility id must be an integer");
                return remove_facility(parts[2], static_cast<int>(*fid));
            }
        }
        return error(404, "no route for " + method + " " + path);
    } catch (const json::exception& e) {
        return error(400, std::string("malformed request: ") + e.what());
    } catch (const std::exception& e) {
        return error(500, e.what());
    }
}

void ScenarioService::mount(httplib::Server& server) {
    auto adapt = [this](const httplib::Request& req, httplib::Response& res) {
        std::map<std::string, std::string> query;
        for (const auto& [k, v] : req.params) query[k] = v;
        Response r = handle(req.method, req.path, query, req.body);
        res.status = r.status;
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_content(r.body, r.content_type);
    };
    server.Get(R"(/api/.*)", adapt);
    server.Post(R"(/api/.*)", adapt);
    server.Delete(R"(/api/.*)", adapt);
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Origin", "*");
        res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
    });
}

void serve(const std::filesystem::path& run_dir, const std::string& host, int port) {
    ScenarioService svc(load_run(run_dir));
    httplib::Server server;
    svc.mount(server);
    log::info("serving " + run_dir.string() + " on " + host + ":" + std::to_string(port));
    if (!server.listen(host, port)) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

} // namespace sitewise::service
