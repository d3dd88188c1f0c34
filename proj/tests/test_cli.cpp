#include "diffeolab/runner.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace diffeolab;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("diffeolab_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DIFFEOLAB_CLI) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const char* kSmallDefect = R"({
  "chart": {"kind": "torus", "dim": 2, "extent": [[0, 1], [0, 1]], "resolution": [64, 64], "boundary_margin": 0},
  "levels": [64, 128],
  "operators": [%OPS%]
})";

std::string small_defect(const std::string& ops) {
    std::string s = kSmallDefect;
    s.replace(s.find("%OPS%"), 5, ops);
    return s;
}

RunOptions quiet(const fs::path& out) {
    RunOptions o;
    o.out_dir = out;
    static std::ostringstream sink;
    o.log = &sink;
    return o;
}

}  // namespace

TEST_CASE("defect with tanh alone passes and writes every report") {
    const fs::path dir = scratch("tanh");
    const fs::path cfg = write_config(dir, small_defect(R"({"kind": "pointwise", "params": {"rho": "tanh"}})"));
    const fs::path out = dir / "nested" / "out";
    CHECK(run_command("defect", cfg, quiet(out)) == kExitOk);
    const std::string csv = slurp(out / "summary.csv");
    CHECK(csv.rfind("operator,diffeo,field,p,grid,defect_abs,defect_rel,verdict\n", 0) == 0);
    const auto rows = std::count(csv.begin(), csv.end(), '\n');
    CHECK(rows == 1 + 12 * 3 * 2);
    const std::string jsonl = slurp(out / "reports.jsonl");
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 12 * 3 * 2);
    CHECK(slurp(out / "verdicts.txt").find("pointwise(tanh)") != std::string::npos);
}

TEST_CASE("expected verdicts decide the exit code") {
    const fs::path dir = scratch("blur");
    const fs::path good = write_config(
        dir, small_defect(R"({"kind": "blur", "params": {"sigma": 0.05}, "expected": "falsified"})"));
    CHECK(run_command("defect", good, quiet(dir / "a")) == kExitOk);
    CHECK(slurp(dir / "a" / "verdicts.txt").find("witness") != std::string::npos);
    const fs::path bad = write_config(
        dir, small_defect(R"({"kind": "blur", "params": {"sigma": 0.05}, "expected": "consistent"})"));
    CHECK(run_command("defect", bad, quiet(dir / "b")) == kExitFailure);
}

TEST_CASE("decay writes the curve and reports nan for a single n") {
    const fs::path dir = scratch("decay");
    const fs::path cfg = write_config(dir, R"({"decay": {"dims": [2], "p": [2], "n": [4], "resolution": 128}})");
    CHECK(run_command("decay", cfg, quiet(dir / "out")) == kExitOk);
    const std::string csv = slurp(dir / "out" / "decay.csv");
    CHECK(csv.find(",nan,true") != std::string::npos);
}

TEST_CASE("under-resolution exits with 3") {
    const fs::path dir = scratch("under");
    const fs::path cfg = write_config(dir, R"({"decay": {"dims": [2], "p": [2], "n": [2, 64], "resolution": 128}})");
    CHECK(run_command("decay", cfg, quiet(dir / "out")) == kExitUnderResolution);
}

TEST_CASE("corrupt configs exit with 2") {
    const fs::path dir = scratch("corrupt");
    const fs::path cfg = write_config(dir, "{\n  \"levels\": [64,\n  oops\n}");
    CHECK(run_command("suite", cfg, quiet(dir / "out")) == kExitConfig);
    CHECK(run_command("suite", dir / "missing.json", quiet(dir / "out")) == kExitConfig);
}

TEST_CASE("the executable honours the exit-code contract") {
    const fs::path dir = scratch("exe");
    CHECK(run_cli("zoo --out " + (dir / "zoo").string() + " --threads 2") == 0);
    CHECK(fs::exists(dir / "zoo" / "zoo.csv"));
    write_config(dir, "{ \"levels\": [64, }");
    CHECK(run_cli("decay --config " + (dir / "config.json").string() + " --out " + (dir / "x").string()) == 2);
    CHECK(run_cli("frobnicate") == 2);
}

TEST_CASE("repeated runs give byte-identical CSV") {
    const fs::path dir = scratch("determinism");
    const fs::path cfg = write_config(dir, small_defect(R"({"kind": "pointwise", "params": {"rho": "abs"}})"));
    REQUIRE(run_command("defect", cfg, quiet(dir / "a")) == kExitOk);
    REQUIRE(run_command("defect", cfg, quiet(dir / "b")) == kExitOk);
    CHECK(slurp(dir / "a" / "summary.csv") == slurp(dir / "b" / "summary.csv"));
    CHECK(slurp(dir / "a" / "reports.jsonl") == slurp(dir / "b" / "reports.jsonl"));
}
