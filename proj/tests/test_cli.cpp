#include "doctest.h"

#include "cli.hpp"
#include "mlsolve/io.hpp"

#include "json.hpp"

#include <filesystem>
#include <sstream>

using namespace mlsolve;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string scratch(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("mlsolve-test-cli-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

std::string data(const char* name) { return std::string(MLSOLVE_TEST_DATA) + "/" + name; }

} // namespace

TEST_CASE("solve then certify reproduces the summary")
{
    auto dir = scratch("solve");
    auto out = dir + "/chy6.json";
    auto r = run({"solve", "--family", "chy", "--m", "6", "--data", data("chy6_example.json"), "--cache-dir", dir,
                  "--workers", "1", "-o", out});
    CHECK(r.code == cli::complete);
    auto file = read_solutions(out);
    CHECK(file.set.points.size() == 6);
    REQUIRE(file.summary);
    CHECK(file.summary->real_certified == 6);

    auto c = run({"certify", "--solutions", out});
    CHECK(c.code == cli::complete);
    auto j = nlohmann::json::parse(c.out);
    CHECK(j["matches_file_summary"] == true);
    CHECK(j["certification"]["distinct"] == 6);

    // Without certification the run is partial.
    auto u = run({"solve", "--family", "chy", "--m", "6", "--data", data("chy6_example.json"), "--cache-dir", dir,
                  "--no-certify"});
    CHECK(u.code == cli::partial);
}

TEST_CASE("mle, amplitude, mldegree and kinematics commands")
{
    auto dir = scratch("commands");
    auto m = run({"mle", "--family", "chy", "--m", "6", "--data", data("chy6_example.json"), "--cache-dir", dir});
    CHECK(m.code == cli::complete);
    auto mj = nlohmann::json::parse(m.out);
    CHECK(std::stod(mj["x"]["x1"].get<std::string>()) == doctest::Approx(0.240043275929170).epsilon(1e-9));
    CHECK(mj["domain_points"] == 1);

    auto a = run({"amplitude", "--family", "chy", "--m", "6", "--data", data("chy6_example.json"), "--cache-dir", dir,
                  "--oracle"});
    CHECK(a.code == cli::complete);
    auto aj = nlohmann::json::parse(a.out);
    CHECK(aj["oracle"]["exact"] == "16074421/56770632000");
    CHECK(std::stod(aj["value"].get<std::string>()) == doctest::Approx(2.8314676856e-4).epsilon(1e-9));

    auto d = run({"mldegree", "--family", "cegm3", "--m", "6", "--cache-dir", dir});
    CHECK(d.code == cli::complete);
    CHECK(nlohmann::json::parse(d.out)["certified_lower_bound"] == 26);

    auto k = run({"kinematics", "complete", "--family", "chy", "--m", "6", "--data", data("chy6_example.json")});
    CHECK(k.code == cli::complete);
    auto kj = nlohmann::json::parse(k.out);
    CHECK(kj["mandelstam"].size() == 15);
    CHECK(kj["mandelstam"]["56"] == "27");

    auto info = run({"model", "info", "--family", "tensor", "--m", "2", "--k", "2", "--l", "4"});
    CHECK(info.code == cli::complete);
    CHECK(nlohmann::json::parse(info.out)["group_order"] == 2);
}

TEST_CASE("errors have distinct diagnostics and exit code 1")
{
    auto dir = scratch("errors");
    auto bad = dir + "/bad.json";
    write_file_atomic(bad, "{\"23\": 1, \"99\": 2}");
    auto r = run({"solve", "--family", "chy", "--m", "6", "--data", bad, "--cache-dir", dir});
    CHECK(r.code == cli::error);
    CHECK(r.err.find("error: data:") != std::string::npos);
    CHECK(r.err.find("99") != std::string::npos);

    auto broken = dir + "/broken.json";
    write_file_atomic(broken, "{\"23\": ");
    r = run({"solve", "--family", "chy", "--m", "6", "--data", broken, "--cache-dir", dir});
    CHECK(r.code == cli::error);
    CHECK(r.err.find("error: malformed input:") != std::string::npos);

    // A stale cache is refused, not silently rebuilt.
    CHECK(run({"prepare", "--family", "chy", "--m", "5", "--cache-dir", dir}).code == cli::complete);
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().filename().string().starts_with("chy"))
            write_file_atomic(entry.path().string(), "{\"format\": \"mlsolve-start-system\", \"version\": 7}");
    auto five = dir + "/five.json";
    write_file_atomic(five, R"({"23": 3, "24": 5, "34": 7, "35": 2, "45": 4})");
    r = run({"solve", "--family", "chy", "--m", "5", "--data", five, "--cache-dir", dir});
    CHECK(r.code == cli::error);
    CHECK(r.err.find("error: cache:") != std::string::npos);

    r = run({"amplitude", "--family", "cegm3", "--m", "6", "--data", five, "--oracle", "--cache-dir", dir});
    CHECK(r.code == cli::error);
    r = run({"solve", "--family", "chy", "--m", "12", "--data", five});
    CHECK(r.code == cli::error);
    CHECK(r.err.find("--long") != std::string::npos);
    r = run({"solve", "--family", "chy", "--m", "6", "--data", five, "--format", "xml"});
    CHECK(r.code == cli::error);
    CHECK(run({}).code == cli::error);
}
