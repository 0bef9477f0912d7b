#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <regex>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "sitewise/core/csv.hpp"
#include "sitewise/service/service.hpp"

using namespace sitewise;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string out;
    std::string err;
};

const fs::path& work() {
    static const fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "sitewise_cli";
        fs::remove_all(p);
        fs::create_directories(p);
        return p;
    }();
    return dir;
}

Result cli(const std::string& args) {
    fs::path err = work() / "stderr.txt";
    std::string cmd = std::string(SITEWISE_CLI) + " " + args + " 2>" + err.string();
    Result r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
    int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = read_text_file(err);
    return r;
}

// A completed small run, produced through the CLI itself.
const fs::path& cli_run() {
    static const fs::path dir = [] {
        fs::path cfg = work() / "run.toml";
        write_text_file(cfg,
                        "seed = 2\n"
                        "[synthetic]\nncols = 40\nnrows = 40\nn_counties = 10\nn_facilities = 6\nn_candidates = 10\n"
                        "[sampling]\nn = 600\n"
                        "[learn]\nmodels = logistic-regression,knn\ngrid_search = false\n"
                        "[explain]\nn_explain = 8\nn_background = 8\n"
                        "[rank]\ntop = 5\n");
        fs::path out = work() / "run";
        Result r = cli("run --config " + cfg.string() + " --out " + out.string() + " --threads 1");
        EXPECT_EQ(r.code, 0) << r.err;
        return out;
    }();
    return dir;
}

} // namespace

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(cli("").code, 2);
    EXPECT_EQ(cli("frobnicate").code, 2);
    Result r = cli("gen --ncols 10");
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("usage error"), std::string::npos);
    EXPECT_EQ(cli("rank --run /definitely/not/here").code, 2);
    EXPECT_EQ(cli("gen --out x --ncols -3").code, 2);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, RuntimeErrorsExitOneWithOneLine) {
    fs::path empty = work() / "empty_run";
    fs::create_directories(empty);
    Result r = cli("validate --run " + empty.string());
    EXPECT_EQ(r.code, 1);
    EXPECT_EQ(r.err.rfind("sitewise: error: ", 0), 0u) << r.err;
    EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
    EXPECT_NE(r.err.find("config.toml"), std::string::npos);
}

TEST(Cli, GenIsIdempotent) {
    fs::path a = work() / "gen_a", b = work() / "gen_b";
    std::string flags = " --seed 9 --ncols 30 --nrows 25 --counties 6 --facilities 4 --candidates 5";
    ASSERT_EQ(cli("gen --out " + a.string() + flags).code, 0);
    ASSERT_EQ(cli("gen --out " + b.string() + flags).code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(a)) {
        ++files;
        EXPECT_EQ(read_text_file(e.path()), read_text_file(b / e.path().filename())) << e.path().filename();
    }
    EXPECT_GE(files, 8u);
    Result again = cli("gen --out " + a.string() + flags);
    EXPECT_EQ(again.code, 0);
    EXPECT_NE(again.err.find("summary: "), std::string::npos);
}

TEST(Cli, SdrTableHasOneRowPerCounty) {
    fs::path region = work() / "sdr_region";
    ASSERT_EQ(cli("gen --out " + region.string() + " --ncols 30 --nrows 30 --counties 7 --facilities 3").code, 0);
    Result r = cli("sdr --region " + region.string());
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("county_id,supply,existing_demand_allocated,d_new,sdr,defined\n", 0), 0u);
    EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 8);
    Result j = cli("sdr --region " + region.string() + " --format json --mode whole");
    ASSERT_EQ(j.code, 0) << j.err;
    EXPECT_NO_THROW(nlohmann::json::parse(j.out));
}

TEST(Cli, StagedCommandsChain) {
    fs::path region = work() / "staged_region", m = work() / "staged_map", s = work() / "staged_samples.csv",
             t = work() / "staged_train", e = work() / "staged_explain";
    ASSERT_EQ(cli("gen --out " + region.string() + " --ncols 40 --nrows 40 --counties 8").code, 0);
    Result rm = cli("map --region " + region.string() + " --out " + m.string() + " --breaks jenks --n 500");
    ASSERT_EQ(rm.code, 0) << rm.err;
    EXPECT_TRUE(fs::exists(m / "class.asc"));
    Result rs = cli("sample --map " + m.string() + " --n 500 --out " + s.string());
    ASSERT_EQ(rs.code, 0) << rs.err;
    Result rt = cli("train --samples " + s.string() + " --model knn --param k=7 --out " + t.string());
    ASSERT_EQ(rt.code, 0) << rt.err;
    EXPECT_NE(rt.out.find("accuracy,"), std::string::npos);
    Result re = cli("explain --model " + (t / "model.json").string() + " --samples " + s.string() +
                         " --n-explain 5 --n-background 5 --out " + e.string());
    ASSERT_EQ(re.code, 0) << re.err;
    EXPECT_TRUE(fs::exists(e / "weights.csv"));
    EXPECT_EQ(cli("train --samples " + s.string() + " --model knn --param kk=7 --out " + t.string()).code, 1);
}

TEST(Cli, RankLinesAndServiceAgree) {
    const fs::path& run = cli_run();
    Result r = cli("rank --run " + run.string() + " --top 3");
    ASSERT_EQ(r.code, 0) << r.err;
    std::regex line(R"(\d+,-?\d+,[0-9.eE+-]+)");
    std::size_t count = 0;
    std::size_t start = 0;
    while (start < r.out.size()) {
        auto end = r.out.find('\n', start);
        ASSERT_NE(end, std::string::npos);
        EXPECT_TRUE(std::regex_match(r.out.substr(start, end - start), line)) << r.out.substr(start, end - start);
        ++count;
        start = end + 1;
    }
    EXPECT_EQ(count, 3u);

    service::ScenarioService svc(load_run(run));
    auto resp = svc.handle("POST", "/api/rank", {{"format", "csv"}}, R"({"scenario":"base","top":3})");
    EXPECT_EQ(resp.body, r.out);

    Result all = cli("rank --run " + run.string());
    EXPECT_EQ(std::count(all.out.begin(), all.out.end(), '\n'), 5);
}

TEST(Cli, RankWithEditedFacilitiesMatchesScenario) {
    const fs::path& run = cli_run();
    RunState s = load_run(run);
    auto facilities = s.region.facilities;
    facilities.erase(facilities.begin());
    fs::path file = work() / "fewer_facilities.csv";
    write_text_file(file, format_facilities(facilities));
    Result r = cli("rank --run " + run.string() + " --top 0 --facilities " + file.string());
    ASSERT_EQ(r.code, 0) << r.err;

    service::ScenarioService svc(load_run(run));
    std::string id = nlohmann::json::parse(svc.handle("POST", "/api/scenario", {}, "").body)["scenario"];
    auto del = svc.handle("DELETE", "/api/scenario/" + id + "/facilities/" + std::to_string(s.region.facilities.front().id), {}, "");
    ASSERT_EQ(del.status, 200) << del.body;
    auto resp = svc.handle("POST", "/api/rank", {{"format", "csv"}}, R"({"scenario":")" + id + R"(","top":0})");
    EXPECT_EQ(resp.body, r.out);
}

TEST(Cli, ValidateReportsPercentages) {
    Result r = cli("validate --run " + cli_run().string() + " --format json");
    ASSERT_EQ(r.code, 0) << r.err;
    auto j = nlohmann::json::parse(r.out);
    double total = 0.0;
    for (const auto& c : j["classes"]) total += c["percent"].get<double>();
    EXPECT_EQ(j["n_existing"].get<int>(), 6);
    EXPECT_NEAR(total, 100.0, 1e-9);
}

TEST(Cli, RunSeedFlagChangesDigest) {
    fs::path cfg = work() / "run.toml";
    cli_run();
    fs::path other = work() / "run_seed7";
    Result r = cli("run --config " + cfg.string() + " --out " + other.string() + " --seed 7 --threads 1");
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(read_text_file(other / "manifest.csv"), read_text_file(cli_run() / "manifest.csv"));
}
