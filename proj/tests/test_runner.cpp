#include "doctest.h"

#include <fstream>
#include <sstream>

#include "fdist/common.hpp"
#include "fdist/runner.hpp"

using namespace fdist;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "fdist_runner_tests" / name;
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

json read_json(const fs::path& path) { return json::parse(slurp(path)); }

int run_config(const json& config, const fs::path& out, int threads = 1)
{
    RunRequest r;
    r.config = config;
    r.out_dir = out;
    r.threads = threads;
    return run(r);
}

} // namespace

TEST_CASE("mesh command")
{
    const auto out = scratch("mesh");
    CHECK(run_config({{"command", "mesh"}, {"domain", {{"kind", "disk"}, {"level", 0}}}}, out) == kExitOk);
    const json result = read_json(out / "result.json");
    CHECK(result["mesh"]["nodes"] == 7);
    CHECK(result["mesh"]["triangles"] == 6);
    CHECK(result["status"] == "ok");
    const json manifest = read_json(out / "manifest.json");
    CHECK(manifest.contains("wall_time_seconds"));
    CHECK(manifest["versions"].contains("fdist"));
    CHECK(manifest["config"]["command"] == "mesh");
    CHECK(fs::exists(out / "mesh.json"));
}

TEST_CASE("minimize command recovers pi e^2")
{
    const auto out = scratch("minimize");
    const json config = {{"command", "minimize"},
                         {"seed", 3},
                         {"domain", {{"kind", "disk"}, {"level", 4}}},
                         {"functional", {{"family", "exp_p"}, {"p", 1.0}}}};
    CHECK(run_config(config, out) == kExitOk);
    const json result = read_json(out / "result.json");
    const double e = result["minimization"]["energy"].get<double>();
    CHECK(std::abs(e - 3.14159265358979323846 * std::exp(2.0)) < 0.01 * 23.2);
    CHECK(result["seed"] == 3);
    for (const char* f : {"trace.csv", "derived.csv", "mapping.json"}) CHECK(fs::exists(out / f));
}

TEST_CASE("seed override")
{
    const auto out = scratch("seed");
    RunRequest r;
    r.config = {{"command", "mesh"}, {"seed", 3}, {"domain", {{"kind", "disk"}, {"level", 1}}}};
    r.out_dir = out;
    r.seed = 99;
    CHECK(run(r) == kExitOk);
    CHECK(read_json(out / "result.json")["seed"] == 99);
    CHECK(read_json(out / "manifest.json")["seed"] == 99);
}

TEST_CASE("validation errors exit with 2 and record the reason")
{
    for (const json& config : {json{{"command", "fly"}},
                               json{{"command", "mesh"}, {"domain", {{"kind", "disk"}, {"level", 99}}}},
                               json{{"command", "minimize"}, {"domain", {{"kind", "disk"}, {"level", 2}}},
                                    {"functional", {{"family", "quartic"}}}},
                               json{{"command", "mesh"}, {"seed", -4}, {"domain", {{"kind", "disk"}}}},
                               json::array()}) {
        const auto out = scratch("invalid");
        CHECK(run_config(config, out) == kExitValidation);
        const json manifest = read_json(out / "manifest.json");
        CHECK(manifest["exit_code"] == kExitValidation);
        CHECK_FALSE(manifest["failure_reason"].get<std::string>().empty());
        CHECK(read_json(out / "result.json")["status"] == "validation_error");
    }
}

TEST_CASE("unreadable config exits with 2")
{
    const auto out = scratch("unreadable");
    RunRequest r;
    r.out_dir = out;
    try {
        r.config = load_config(out / "missing.json");
    } catch (const ConfigError& e) {
        r.load_error = e.what();
    }
    CHECK_FALSE(r.load_error.empty());
    CHECK(run(r) == kExitValidation);
}

TEST_CASE("domain errors exit with 3")
{
    const auto out = scratch("domain");
    const json config = {{"command", "hopf"},
                         {"domain", {{"kind", "disk"}, {"level", 2}}},
                         {"hopf",
                          {{"kind", "ahlfors_hopf"},
                           {"weight", "hyperbolic"},
                           {"map", {{"tag", "affine"}, {"a", 2.0}, {"b", 0.1}}}}}};
    CHECK(run_config(config, out) == kExitNumerical);
    CHECK(read_json(out / "result.json")["status"] == "numerical_failure");
}

TEST_CASE("unwritable output directory exits with 2")
{
    const auto base = scratch("blocked");
    fs::create_directories(base);
    std::ofstream(base / "file") << "x";
    CHECK(run_config({{"command", "mesh"}, {"domain", {{"kind", "disk"}, {"level", 0}}}}, base / "file" / "out") ==
          kExitValidation);
}

TEST_CASE("diagnose command reports the oscillation gap")
{
    const auto out = scratch("diagnose");
    const json config = {{"command", "diagnose"},
                         {"domain", {{"kind", "square"}, {"level", 3}, {"base", 16}}},
                         {"functional", {{"family", "dirichlet"}}},
                         {"sequence", {{"kind", "oscillation"}, {"j_values", {1, 2, 4, 8}}, {"j_max", 8}}}};
    CHECK(run_config(config, out) == kExitOk);
    const json d = read_json(out / "result.json")["diagnosis"];
    // At j = 8 the weak residual is still above tolerance, which takes precedence.
    CHECK(d["verdict"] == "WeakProbeFail");
    CHECK_FALSE(d["hypotheses"]["energy_convergence"]["passed"].get<bool>());
    CHECK(d["hypotheses"]["energy_convergence"]["gap"].get<double>() == doctest::Approx(0.5).epsilon(0.05));
    CHECK(fs::exists(out / "gaps.csv"));
}

TEST_CASE("property: result json is byte-identical across thread counts")
{
    const json config = {{"command", "sweep"},
                         {"seed", 5},
                         {"domain", {{"kind", "disk"}, {"level", 5}}},
                         {"functional", {{"family", "trunc_exp"}, {"p", 1.0}, {"jac_exp", 1.0}}},
                         {"boundary", {{"kind", "circle_diffeo"}, {"a", {0.0, 0.3}}}},
                         {"sweep", {{"p", 1.0}, {"N_list", {2, 4}}, {"diagnose_after", true}}}};
    const auto a = scratch("repro_a"), b = scratch("repro_b"), c = scratch("repro_c");
    CHECK(run_config(config, a, 1) == kExitOk);
    CHECK(run_config(config, b, 4) == kExitOk);
    CHECK(run_config(config, c, 3) == kExitOk);
    CHECK(slurp(a / "result.json") == slurp(b / "result.json"));
    CHECK(slurp(a / "result.json") == slurp(c / "result.json"));
    CHECK(slurp(a / "sweep.csv") == slurp(b / "sweep.csv"));
}

TEST_CASE("schema is embedded")
{
    const json schema = json::parse(result_schema());
    CHECK(schema["properties"]["schema_version"]["const"] == 1);
}
