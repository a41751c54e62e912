#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "aerosem/drivers.hpp"

using namespace aerosem;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("aerosem_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json small_solve() {
    return json::parse(R"({
      "version": "1", "kind": "solve",
      "physics": {"rho0": 1.2, "c0": 340.0},
      "mesh": {"box": {"lo": [0,0,0], "hi": [1,1,1], "divisions": [2,2,2]}},
      "degree": 2,
      "time": {"dt": 1e-4, "t_final": 2e-3},
      "boundary": [{"tags": ["xmin", "xmax"], "type": "impedance", "Z": 408.0}],
      "source": {"type": "monopole", "position": [0.4, 0.5, 0.5], "f0": 200.0},
      "probes": [{"name": "a", "position": [0.7, 0.3, 0.6]}],
      "output": {"name": "t"}
    })");
}

} // namespace

TEST(Config, ProblemsAreCollectedTogether) {
    json j = small_solve();
    j["version"] = "2";
    j["degree"] = 0;
    j["time"].erase("dt");
    j["boundary"][0]["tags"] = {"nowhere"};
    j["probes"][0]["name"] = "a,b";
    try {
        drivers::parse_solve(j, fs::current_path(), 0);
        FAIL() << "expected ConfigError";
    } catch (const config::ConfigError& e) {
        EXPECT_EQ(e.code(), ErrorCode::schema);
        EXPECT_GE(e.problems().size(), 4u);
        std::string all;
        for (const auto& p : e.problems()) all += p + "\n";
        EXPECT_NE(all.find("version"), std::string::npos);
        EXPECT_NE(all.find("time.dt"), std::string::npos);
        EXPECT_NE(all.find("degree"), std::string::npos);
        EXPECT_NE(all.find("probes[0].name"), std::string::npos);
    }
}

TEST(Config, MeshChecksRunOnceFieldsAreValid) {
    json j = small_solve();
    j["boundary"][0]["tags"] = {"xmin", "nowhere"};
    j["boundary"].push_back({{"tags", {"xmin"}}, {"type", "rigid"}});
    j["probes"][0]["position"] = {2.0, 0.5, 0.5};
    try {
        drivers::parse_solve(j, fs::current_path(), 0);
        FAIL() << "expected ConfigError";
    } catch (const config::ConfigError& e) {
        EXPECT_EQ(e.problems().size(), 3u) << ::testing::PrintToString(e.problems());
    }
}

TEST(Config, KindMustMatch) {
    json j = small_solve();
    j["kind"] = "project";
    EXPECT_THROW(drivers::parse_solve(j, fs::current_path(), 0), config::ConfigError);
}

TEST(Config, SpacingGivesDivisions) {
    config::Reader r;
    const auto m = config::read_mesh_spec(json::parse(R"({"box": {"lo": [0,0,0], "hi": [1.2,0.8,0.4], "spacing": 0.2}})"),
                                          "mesh", r, fs::current_path());
    ASSERT_TRUE(r.ok());
    EXPECT_EQ(m.divisions, (std::array<int, 3>{6, 4, 2}));
}

TEST(Solve, ZeroForcingStaysZero) {
    json j = small_solve();
    j["source"] = {{"type", "none"}};
    const auto res = drivers::solve(drivers::parse_solve(j, fs::current_path(), 0));
    ASSERT_FALSE(res.run.rows.empty());
    for (const auto& row : res.run.rows) EXPECT_EQ(row[1], 0.0);
    EXPECT_EQ(res.energy_final, 0.0);
}

TEST(Solve, RandomInitialDependsOnlyOnSeed) {
    json j = small_solve();
    j["source"] = {{"type", "none"}};
    j["initial"] = {{"type", "random"}, {"amplitude", 1e-3}};
    const auto a = drivers::solve(drivers::parse_solve(j, fs::current_path(), 5));
    const auto b = drivers::solve(drivers::parse_solve(j, fs::current_path(), 5));
    const auto c = drivers::solve(drivers::parse_solve(j, fs::current_path(), 6));
    EXPECT_EQ(a.run.rows, b.run.rows);
    EXPECT_NE(a.run.rows, c.run.rows);
}

TEST(Output, RunsAreByteReproducibleAndHashed) {
    const json j = small_solve();
    std::string probes[2];
    json manifest;
    for (int k = 0; k < 2; ++k) {
        const auto dir = scratch("repro" + std::to_string(k));
        output::RunDirectory out(dir);
        drivers::run_solve(j, fs::current_path(), 0, out);
        manifest = out.write_manifest("solve", j, 0);
        probes[k] = slurp(dir / "t_probes.csv");
        for (const auto& o : manifest["outputs"])
            EXPECT_EQ(o["sha256"].get<std::string>(), output::sha256_file(dir / o["path"].get<std::string>()));
    }
    EXPECT_EQ(probes[0], probes[1]);
    EXPECT_EQ(probes[0].rfind("time,a\n", 0), 0u);
}

TEST(Output, Sha256KnownVector) {
    const auto dir = scratch("sha");
    std::ofstream(dir / "abc") << "abc";
    EXPECT_EQ(output::sha256_file(dir / "abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Projected, JsonRoundTrip) {
    drivers::ProjectedSource p;
    p.degree = 2;
    p.num_dofs = 3;
    p.mesh = json::object();
    p.snapshots.push_back({0.5, {std::vector<double>{1, 2, 3}, std::vector<double>{0, 0, 0}, std::vector<double>{-1, 0.25, 1e-300}}});
    const auto q = drivers::projected_from_json(drivers::projected_to_json(p), "src");
    ASSERT_EQ(q.snapshots.size(), 1u);
    EXPECT_EQ(q.snapshots[0].time, 0.5);
    EXPECT_EQ(q.snapshots[0].components[2], p.snapshots[0].components[2]);
}

#ifdef AEROSEM_CLI
namespace {
struct CliResult {
    int status;
    std::string out, err;
};

CliResult cli(const std::string& args, const fs::path& dir) {
    const std::string cmd = std::string(AEROSEM_CLI) + " " + args + " > " + (dir / "stdout").string() + " 2> " +
                            (dir / "stderr").string();
    const int raw = std::system(cmd.c_str());
    return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, slurp(dir / "stdout"), slurp(dir / "stderr")};
}
} // namespace

TEST(Cli, BadConfigGivesJsonErrorAndNonzeroExit) {
    const auto dir = scratch("cli_bad");
    json j = small_solve();
    j["time"]["dt"] = -1.0;
    j.erase("physics");
    std::ofstream(dir / "bad.json") << j.dump();
    const auto r = cli("solve --config " + (dir / "bad.json").string() + " --out " + (dir / "o").string(), dir);
    EXPECT_EQ(r.status, 1);
    const auto e = json::parse(r.err);
    EXPECT_EQ(e["status"], "error");
    EXPECT_EQ(e["error"]["code"], "schema");
    EXPECT_GE(e["error"]["problems"].size(), 2u);
}

TEST(Cli, UsageErrorExitsTwo) {
    const auto dir = scratch("cli_usage");
    const auto r = cli("solve --out " + dir.string(), dir);
    EXPECT_EQ(r.status, 2);
    EXPECT_EQ(json::parse(r.err)["error"]["code"], "usage");
}

TEST(Cli, MeshGenWritesManifest) {
    const auto dir = scratch("cli_mesh");
    const auto r = cli("mesh-gen --box 0,0,0,1,2,3 --div 1,2,3 --tag xmin=inlet --name m --out " + (dir / "o").string(), dir);
    ASSERT_EQ(r.status, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["status"], "ok");
    const auto m = json::parse(slurp(dir / "o" / "manifest.json"));
    EXPECT_EQ(m["command"], "mesh-gen");
    EXPECT_FALSE(m["outputs"].empty());
    const auto mesh = read_mesh((dir / "o" / "m.json").string());
    EXPECT_EQ(mesh.num_elements(), 6u);
    EXPECT_TRUE(mesh.tags().count("inlet"));
}
#endif
