#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "stochpmp/cli.hpp"
#include "stochpmp/io.hpp"

using namespace stochpmp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "stochpmp_unit" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& f) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

cli::RunConfig config(const json& j, cli::Overrides o = {}) { return cli::parse_config(j, fs::current_path(), o); }

int run(const std::string& cmd, const cli::RunConfig& c, const fs::path& out) {
    std::ostringstream log;
    return cli::run_command(cmd, c, out, log);
}

}  // namespace

TEST_CASE("doubles print in shortest round-trip form") {
    for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0}) {
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(0.5) == "0.5");
}

TEST_CASE("binary ensembles round trip") {
    const auto dir = scratch("binary");
    PathArray a(3, 5, 2, 2);
    for (std::size_t i = 0; i < a.raw().size(); ++i) a.raw()[i] = 0.1 * static_cast<double>(i) - 1.0;
    write_ensemble_binary(dir / "a.bin", a, 99);
    std::vector<double> data;
    const auto h = read_ensemble_binary(dir / "a.bin", data);
    CHECK(h.paths == 3);
    CHECK(h.steps == 4);
    CHECK(h.block == 4);
    CHECK(h.seed == 99);
    CHECK(data == a.raw());
}

TEST_CASE("CSV ensembles have one row per path and grid point") {
    const auto dir = scratch("csv");
    PathArray a(2, 3, 1);
    a.raw() = {0.0, 0.25, 0.5, 1.0, 2.0, 3.0};
    write_ensemble_csv(dir / "x.csv", a, TimeGrid(1.0, 2), "x");
    std::istringstream in(slurp(dir / "x.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "path,step,t,x_0");
    std::vector<std::string> rows;
    while (std::getline(in, line)) rows.push_back(line);
    REQUIRE(rows.size() == 6);
    CHECK(rows[1] == "0,1,0.5,0.25");
    CHECK(rows[5] == "1,2,1,3");
}

TEST_CASE("configuration errors") {
    const json base = {{"problem", "example1"}, {"grid", {{"N", 10}}}, {"monte_carlo", {{"M", 5}, {"seed", 1}}}};
    CHECK_NOTHROW(config(base));

    json no_seed = base;
    no_seed["monte_carlo"].erase("seed");
    CHECK_THROWS_AS(config(no_seed), ConfigError);
    cli::Overrides o;
    o.seed = 4;
    CHECK(config(no_seed, o).seed == 4);

    json unknown = base;
    unknown["extra"] = 1;
    CHECK_THROWS_AS(config(unknown), ConfigError);

    json bad_problem = base;
    bad_problem["problem"] = "no_such_problem";
    CHECK_THROWS_AS(config(bad_problem), ConfigError);

    json bad_method = base;
    bad_method["adjoint"] = {{"method", "magic"}};
    CHECK_THROWS_AS(config(bad_method), ConfigError);

    json zero_steps = base;
    zero_steps["grid"]["N"] = 0;
    CHECK_THROWS_AS(config(zero_steps), ConfigError);

    CHECK_THROWS_AS(run("nonsense", config(base), scratch("nonsense")), ConfigError);
}

TEST_CASE("deterministic problems run a single path") {
    const auto c = config({{"problem", "example1"}, {"grid", {{"N", 10}}}, {"monte_carlo", {{"M", 500}, {"seed", 1}}}});
    CHECK(c.paths == 1);
    CHECK(c.paths_forced);
    const auto s = config({{"problem", "example2_stochastic"}, {"grid", {{"N", 10}}}, {"monte_carlo", {{"M", 500}, {"seed", 1}}}});
    CHECK(s.paths == 500);
    CHECK_FALSE(s.paths_forced);
}

TEST_CASE("candidate resolution") {
    const auto c = config({{"problem", "example1"}, {"grid", {{"N", 8}}}, {"monte_carlo", {{"M", 1}, {"seed", 1}}}});
    const auto sw = cli::resolve_candidate({{"control", {{"builtin", "switching"}, {"blocks", 2}}}}, c);
    REQUIRE(sw.strict);
    CHECK(sw.singular.cells() == 8);
    const auto mix = cli::resolve_candidate(
        {{"control", {{"builtin", "mixture"}, {"atoms", {{-1}, {1}}}, {"weights", {0.5, 0.5}}}}}, c);
    CHECK_FALSE(mix.strict);
    CHECK_THROWS_AS(cli::resolve_candidate({{"control", {{"builtin", "constant"}, {"value", {0.3}}}}}, c), ConfigError);
    CHECK_THROWS_AS(cli::resolve_candidate({{"control", {{"builtin", "spiral"}}}}, c), ConfigError);
}

TEST_CASE("cost command examples") {
    SUBCASE("an impulse of size one costs exactly one") {
        json j = {{"problem", {{"builtin", "singular_block"}, {"kappa", 1.0}}},
                  {"grid", {{"N", 20}}},
                  {"monte_carlo", {{"M", 50}, {"seed", 3}}},
                  {"candidate",
                   {{"control", {{"builtin", "constant"}, {"value", {0}}}},
                    {"singular", {{"builtin", "impulse"}, {"cell", 5}, {"size", {1.0}}}}}}};
        const auto dir = scratch("impulse");
        CHECK(run("cost", config(j), dir) == cli::kSuccess);
        const auto cost = read_json_file(dir / "cost.json");
        CHECK(cost.at("parts").at("singular").at("mean").get<double>() == 1.0);
        CHECK(cost.at("parts").at("singular").at("std_error").get<double>() == 0.0);
    }
    SUBCASE("the zero problem costs nothing") {
        json j = {{"problem", {{"file", testing_support::data_path("zero.json")}}},
                  {"grid", {{"N", 10}}},
                  {"monte_carlo", {{"M", 3}, {"seed", 3}}},
                  {"candidate", {{"control", {{"builtin", "constant"}, {"value", {0}}}}}}};
        const auto dir = scratch("zero");
        CHECK(run("cost", config(j), dir) == cli::kSuccess);
        CHECK(read_json_file(dir / "cost.json").at("cost").get<double>() == 0.0);
    }
}

TEST_CASE("every command writes a manifest and reruns are byte identical") {
    json j = {{"problem", "example2_stochastic"},
              {"grid", {{"N", 32}}},
              {"monte_carlo", {{"M", 200}, {"seed", 77}}},
              {"candidate",
               {{"control", {{"builtin", "mixture"}, {"atoms", {{-1}, {1}}}, {"weights", {0.5, 0.5}}}}}},
              {"direction", {{"control", {{"builtin", "constant"}, {"value", {1}}}}}},
              {"chatter", {{"levels", {2, 4}}}}};
    const auto c = config(j);
    for (const auto& cmd : cli::command_names()) {
        const auto a = scratch("rerun_a_" + cmd);
        const auto b = scratch("rerun_b_" + cmd);
        const int ca = run(cmd, c, a);
        const int cb = run(cmd, c, b);
        CHECK(ca == cb);
        const auto manifest = read_json_file(a / "manifest.json");
        CHECK(manifest.at("command") == cmd);
        CHECK(manifest.at("exit_code").get<int>() == ca);
        CHECK(fs::exists(a / "config.json"));
        for (const auto& f : manifest.at("files")) {
            const auto name = f.get<std::string>();
            INFO(cmd << ": " << name);
            CHECK(slurp(a / name) == slurp(b / name));
        }
    }
}
