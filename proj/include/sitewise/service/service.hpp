#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitewise/pipeline/pipeline.hpp"

namespace httplib {
class Server;
}

namespace sitewise::service {

/// One immutable view of a scenario: its facility set and everything derived from it.
struct Snapshot {
    std::string id;
    long revision = 0;
    std::vector<Facility> facilities;
    ScenarioResult result;
};

/// What-if scenarios over a frozen run. The base run is read-only; each scenario holds its
/// current snapshot behind its own mutex, so mutations of one scenario serialize and readers
/// always see a complete snapshot.
class ScenarioService {
public:
    struct Response {
        int status = 200;
        std::string body;
        std::string content_type = "application/json";
    };

    explicit ScenarioService(RunState base);

    /// Routes one request. Used by the HTTP server and directly by tests.
    Response handle(const std::string& method, const std::string& path,
                    const std::map<std::string, std::string>& query, const std::string& body);

    std::shared_ptr<const Snapshot> snapshot(const std::string& id) const;
    const RunState& base() const { return base_; }

    /// Registers every endpoint on `server`.
    void mount(httplib::Server& server);

private:
    struct Scenario {
        std::mutex mu;
        std::shared_ptr<const Snapshot> current;
        int next_facility_id = 1;
    };

    std::shared_ptr<Scenario> find(const std::string& id) const;
    Response run_info() const;
    Response map(const std::map<std::string, std::string>& query) const;
    Response create_scenario();
    Response delete_scenario(const std::string& id);
    Response add_facility(const std::string& id, const nlohmann::json& body);
    Response remove_facility(const std::string& id, int facility_id);
    Response rank(const nlohmann::json& body, bool csv) const;
    Response validation(const std::map<std::string, std::string>& query) const;
    Response scenario_info(const std::string& id) const;

    RunState base_;
    mutable std::shared_mutex registry_mu_;
    std::map<std::string, std::shared_ptr<Scenario>> scenarios_;
    int next_scenario_ = 1;
};

/// Grid JSON: {ncols, nrows, xll, yll, cellsize, nodata, values} with row-major values.
nlohmann::json grid_json(const RasterLayer& layer, bool integral = false);

/// Loads the run and serves it until the process stops. Throws if artifacts are missing.
void serve(const std::filesystem::path& run_dir, const std::string& host, int port);

} // namespace sitewise::service
