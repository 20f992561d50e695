#include "oracles.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

// runs the CLI from a scratch working directory, capturing stdout and stderr
Outcome run(const std::string& args, const fs::path& cwd) {
    const std::string cmd = "cd '" + cwd.string() + "' && '" COVLIFT_CLI "' " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    Outcome o;
    char buf[4096];
    while (std::fgets(buf, sizeof buf, p)) o.out += buf;
    const int status = pclose(p);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("covlift_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_points(const fs::path& p, const std::vector<covlift::Vec>& pts) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : pts) j.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    std::ofstream(p) << j.dump();
}

} // namespace

TEST_CASE("help text matches the golden copy") {
    const auto r = run("--help-all", scratch("help"));
    CHECK(r.code == 0);
    CHECK(r.out == slurp(COVLIFT_GOLDEN_DIR "/help.txt"));
}

TEST_CASE("usage errors exit 64") {
    const auto dir = scratch("usage");
    CHECK(run("", dir).code == 64);
    CHECK(run("no-such-command", dir).code == 64);
    CHECK(run("gen-cover --kind bogus", dir).code == 64);
    CHECK(run("gen-cover --d 0", dir).code == 64);
    CHECK(run("w2 --a only.json", dir).code == 64);
}

TEST_CASE("missing input files exit 74") {
    const auto dir = scratch("io");
    const auto r = run("w2 --a nope.json --b nope.json", dir);
    CHECK(r.code == 74);
    CHECK(r.out.find("IoError") != std::string::npos);
    CHECK(run("decompose --spec nope.json", dir).code == 74);
}

TEST_CASE("gen-cover writes the spec and its meshes") {
    const auto dir = scratch("gen");
    const auto r = run("gen-cover --kind circle --d 3 --segments 12 --out c3", dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("degree 3") != std::string::npos);
    for (const char* f : {"spec.json", "source.json", "target.json"}) CHECK(fs::exists(dir / "c3" / f));
    CHECK(run("gen-cover --kind tube --n-r 64 --n-theta 16 --out tube --obj", dir).code == 0);
    CHECK(fs::exists(dir / "tube" / "target.obj"));
}

TEST_CASE("COVLIFT_OUT sets the default output directory") {
    const auto dir = scratch("env");
    const std::string full = "cd '" + dir.string() + "' && COVLIFT_OUT=envout '" COVLIFT_CLI "' gen-cover --kind circle --d 2 --segments 8 >/dev/null 2>&1";
    CHECK(std::system(full.c_str()) == 0);
    CHECK(fs::exists(dir / "envout" / "spec.json"));
}

TEST_CASE("torus pipeline: gen-cover, decompose, check-lift") {
    const auto dir = scratch("torus");
    REQUIRE(run("gen-cover --kind torus --n-r 12 --n-theta 8 --rho 0.4 --out t", dir).code == 0);
    REQUIRE(run("decompose --spec t/spec.json --out t/lift.json", dir).code == 0);
    const auto r = run("check-lift --lift t/lift.json --samples 200", dir);
    CHECK(r.code == 0);
    CHECK(r.out.find("PASS") != std::string::npos);
}

TEST_CASE("subdivide adds the requested vertices") {
    const auto dir = scratch("sub");
    REQUIRE(run("gen-cover --kind circle --d 1 --segments 6 --out c", dir).code == 0);
    write_points(dir / "pts.json", {oracle::v2(0.75, 0.4330127018922193)});
    const auto r = run("subdivide --mesh c/target.json --points pts.json --out fine.json", dir);
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(slurp(dir / "fine.json"));
    CHECK(j["vertices"].size() == 7);
}

TEST_CASE("w2 agrees with brute force") {
    const auto dir = scratch("w2");
    std::mt19937_64 rng(3);
    std::normal_distribution<double> N;
    std::vector<covlift::Vec> A, B;
    for (int i = 0; i < 6; ++i) {
        A.push_back(oracle::v2(N(rng), N(rng)));
        B.push_back(oracle::v2(N(rng), N(rng)));
    }
    write_points(dir / "a.json", A);
    write_points(dir / "b.json", B);
    const auto same = run("w2 --a a.json --b a.json", dir);
    CHECK(same.code == 0);
    CHECK(same.out == "0.0\n");
    const auto r = run("w2 --a a.json --b b.json", dir);
    CHECK(r.code == 0);
    CHECK(std::stod(r.out) == doctest::Approx(oracle::w2_bruteforce(A, B)).epsilon(1e-12));
}

TEST_CASE("train, invert and verify on a short run") {
    const auto dir = scratch("train");
    REQUIRE(run("train --d 2 --steps 30 --samples 64 --out tr", dir).code == 0);
    CHECK(fs::exists(dir / "tr" / "network.json"));
    CHECK(fs::exists(dir / "tr" / "loss.csv"));
    const auto inv = run("invert --net tr/network.json --y 1,0 --d 2 --candidates 500", dir);
    CHECK(inv.code == 0);
    CHECK(inv.out.find("2 points") != std::string::npos);
    CHECK(run("invert --net tr/network.json --y 1,zz", dir).code == 64);
    // 30 steps is far from a bistable fit
    CHECK(run("verify-bistable --net tr/network.json --d 2 --samples 100", dir).code == 2);
}
