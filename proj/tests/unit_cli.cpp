#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "walklab/config.hpp"

#ifndef WALKLAB_CLI_PATH
#error "the test build must define WALKLAB_CLI_PATH"
#endif

using walklab::Json;

namespace {

int run_cli(const std::string& args) {
    std::string cmd = std::string(WALKLAB_CLI_PATH) + " " + args + " >/dev/null 2>/dev/null";
    int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

void write_file(const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_summary(const std::filesystem::path& dir) { return Json::parse(read_file(dir / "summary.json")); }

}  // namespace

TEST_CASE("a never-absorb survival run reports certainty") {
    std::filesystem::path dir = fresh_dir("cli_never");
    write_file(dir / "cfg.json", R"({
      "increment": {"kind": "rademacher"},
      "mechanism": {"family": "never-absorb"},
      "horizons": {"list": [16, 64]},
      "total_paths": 2000
    })");
    REQUIRE(run_cli("survival --config " + (dir / "cfg.json").string() + " --out " + dir.string()) == 0);

    Json summary = read_summary(dir);
    REQUIRE(summary.at("status") == "ok");
    REQUIRE(summary.at("subcommand") == "survival");
    REQUIRE(summary.at("config").at("total_paths") == 2000);

    std::string csv = read_file(dir / "survival.csv");
    REQUIRE(csv.rfind("x,n,survivors,total,estimate,ci_low,ci_high\n", 0) == 0);
    REQUIRE(csv.find("\n0,16,2000,2000,1,") != std::string::npos);
    REQUIRE(csv.find("\n0,64,2000,2000,1,") != std::string::npos);
}

TEST_CASE("a malformed mechanism exits with the config error code") {
    std::filesystem::path dir = fresh_dir("cli_bad");
    write_file(dir / "cfg.json", R"({
      "mechanism": {"family": "position-hazard", "values": [1.5]}
    })");
    REQUIRE(run_cli("survival --config " + (dir / "cfg.json").string() + " --out " + dir.string()) == 2);
    Json summary = read_summary(dir);
    REQUIRE(summary.at("status") == "error");
    REQUIRE(summary.at("error").at("code") == "invalid-spec");
    std::string message = summary.at("error").at("message");
    REQUIRE(message.find("hazard") != std::string::npos);
}

TEST_CASE("a survivor shortfall is a runtime error visible in the summary") {
    std::filesystem::path dir = fresh_dir("cli_short");
    write_file(dir / "cfg.json", R"({
      "increment": {"kind": "rademacher"},
      "mechanism": {"family": "position-hazard", "values": [1.0]},
      "total_paths": 2000,
      "check": {"condition": "c4", "n": 4096, "survivor_target": 100}
    })");
    REQUIRE(run_cli("check --config " + (dir / "cfg.json").string() + " --out " + dir.string()) == 3);
    Json summary = read_summary(dir);
    REQUIRE(summary.at("status") == "error");
    REQUIRE(summary.at("error").at("code") == "too-few-survivors");
}

TEST_CASE("bad command lines exit with code 2") {
    REQUIRE(run_cli("survival --mode sideways") == 2);
    REQUIRE(run_cli("frobnicate") == 2);
    REQUIRE(run_cli("") == 2);  // a subcommand is required
}

TEST_CASE("worker count never changes the bytes on disk") {
    std::filesystem::path dir = fresh_dir("cli_det");
    write_file(dir / "cfg.json", R"({
      "increment": {"kind": "rademacher"},
      "mechanism": {"family": "time-below-zero", "u": {"kind": "geometric", "q": 0.3}},
      "horizons": {"list": [16, 64, 256]},
      "total_paths": 30000,
      "seed": 12345
    })");
    std::string cfg = (dir / "cfg.json").string();
    REQUIRE(run_cli("survival --config " + cfg + " --workers 1 --out " + (dir / "a").string()) == 0);
    REQUIRE(run_cli("survival --config " + cfg + " --workers 8 --out " + (dir / "b").string()) == 0);
    REQUIRE(read_file(dir / "a" / "survival.csv") == read_file(dir / "b" / "survival.csv"));
}

TEST_CASE("both mode emits the paired difference table") {
    std::filesystem::path dir = fresh_dir("cli_both");
    write_file(dir / "cfg.json", R"({
      "increment": {"kind": "rademacher"},
      "mechanism": {"family": "time-below-zero", "u": {"kind": "geometric", "q": 0.3}},
      "horizons": {"list": [16, 64]},
      "total_paths": 20000,
      "mode": "both"
    })");
    REQUIRE(run_cli("survival --config " + (dir / "cfg.json").string() + " --out " + dir.string()) == 0);
    REQUIRE(std::filesystem::exists(dir / "survival.csv"));
    REQUIRE(std::filesystem::exists(dir / "survival_dp.csv"));
    std::string diff = read_file(dir / "survival_diff.csv");
    REQUIRE(diff.rfind("x,n,mc,dp,diff,z\n", 0) == 0);

    Json summary = read_summary(dir);
    double z = summary.at("results").at("curves").at(0).at("max_abs_z");
    REQUIRE(z < 5.0);
}

TEST_CASE("flag overrides beat the config file") {
    std::filesystem::path dir = fresh_dir("cli_flags");
    write_file(dir / "cfg.json", R"({
      "increment": {"kind": "rademacher"},
      "mechanism": {"family": "never-absorb"},
      "horizons": {"list": [16]},
      "total_paths": 1000,
      "seed": 1
    })");
    REQUIRE(run_cli("survival --config " + (dir / "cfg.json").string() + " --seed 9 --paths 500 --out " +
                    dir.string()) == 0);
    Json summary = read_summary(dir);
    REQUIRE(summary.at("seed") == 9);
    REQUIRE(summary.at("config").at("total_paths") == 500);
    REQUIRE(read_file(dir / "survival.csv").find(",500,") != std::string::npos);
}

TEST_CASE("the exact oracle subcommand writes closed-form tables") {
    std::filesystem::path dir = fresh_dir("cli_oracle");
    write_file(dir / "cfg.json", R"({
      "increment": {"kind": "rademacher"},
      "mechanism": {"family": "position-hazard", "values": [1.0]},
      "oracle": {"op": "enumerate", "n": 4}
    })");
    REQUIRE(run_cli("oracle --config " + (dir / "cfg.json").string() + " --out " + dir.string()) == 0);
    Json summary = read_summary(dir);
    REQUIRE(summary.at("results").at("values").at(0).at("exact") == "3/8");
    REQUIRE(summary.at("results").at("values").at(0).at("value") == 0.375);
}
