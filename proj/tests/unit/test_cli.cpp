#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "rbmcli/commands.hpp"
#include "rbmcli/config.hpp"
#include "rbmlab/table_io.hpp"

using namespace rbmcli;
namespace fs = std::filesystem;

namespace {

std::string square_domain() { return std::string(RBMLAB_SOURCE_DIR) + "/domains/unit_square.json"; }

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rbmlab_cli_" + name);
  fs::remove_all(p);
  return p;
}

ConfigSources small_square(const fs::path& out) {
  ConfigSources s;
  s.flags = {{"domain", nlohmann::json(square_domain()).dump()},
             {"h", "0.125"},
             {"eigen_count", "64"},
             {"times", "[0.001, 0.003, 0.01, 0.03, 0.1]"},
             {"points", "[[0.5, 0.5], [0.1, 0.2]]"},
             {"out", nlohmann::json(out.string()).dump()}};
  return s;
}

RunConfig loaded(const ConfigSources& s) {
  const LoadResult r = load_config(s);
  REQUIRE_MESSAGE(r.errors.empty(), (r.errors.empty() ? "" : r.errors.front()));
  return r.config;
}

std::string slurp(const fs::path& p) { return rbm::read_text(p.string()); }

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("a Monte Carlo run without a seed is refused") {
    const fs::path out = scratch("noseed");
    const RunConfig c = loaded(small_square(out));
    const auto errors = validate(c, {"simulate"});
    bool seed_error = false;
    for (const auto& e : errors) seed_error |= e.find("seed") != std::string::npos;
    CHECK(seed_error);

    std::ostringstream cmd;
    cmd << RBMLAB_CLI_PATH << " simulate --set domain='\"" << square_domain() << "\"' --out " << out.string()
        << " > /dev/null 2>&1";
    const int status = std::system(cmd.str().c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 2);
    CHECK_FALSE(fs::exists(out));
  }

  TEST_CASE("validation lists every problem") {
    ConfigSources s;
    s.flags = {{"h", "-1"}, {"paths", "0"}, {"bogus", "1"}};
    const LoadResult r = load_config(s);
    auto errors = r.errors;
    const auto more = validate(r.config, {"simulate", "nonsense"});
    errors.insert(errors.end(), more.begin(), more.end());
    CHECK(errors.size() >= 5);
  }

  TEST_CASE("eig writes the spectrum") {
    const fs::path out = scratch("eig");
    const RunConfig c = loaded(small_square(out));
    const CommandResult r = run_command("eig", c);
    REQUIRE(r.status == "ok");
    std::istringstream csv(slurp(out / "eig" / "eigenvalues.csv"));
    std::string header, first;
    std::getline(csv, header);
    std::getline(csv, first);
    CHECK(header == "k,lambda");
    const auto comma = first.find(',');
    CHECK(first.substr(0, comma) == "1");
    CHECK(std::abs(std::stod(first.substr(comma + 1))) <= 1e-9);
    for (const auto& f : r.files) CHECK(f.sha256 == rbm::sha256_hex(slurp(out / f.path)));
    fs::remove_all(out);
  }

  TEST_CASE("verify-kato reports a rate") {
    const fs::path out = scratch("kato");
    ConfigSources s = small_square(out);
    s.flags["h"] = "0.0625";
    s.flags["eigen_count"] = "256";
    const RunConfig c = loaded(s);
    const CommandResult r = run_command("verify-kato", c);
    REQUIRE(r.status != "error");
    const auto fit = nlohmann::json::parse(slurp(out / "verify-kato" / "kato_fit.json"));
    const double alpha = fit.at("constants").at("alpha").get<double>();
    CHECK(alpha > 0.3);
    CHECK(alpha < 0.8);
    fs::remove_all(out);
  }

  TEST_CASE("reruns are byte identical") {
    const fs::path a = scratch("rerun_a"), b = scratch("rerun_b");
    ConfigSources s = small_square(a);
    s.flags["seed"] = "17";
    s.flags["paths"] = "500";
    s.flags["delta"] = "0.001";
    s.flags["exit_radii"] = "[0.1, 0.2]";
    s.flags["checkpoint_times"] = "[0.05, 0.1]";
    s.flags["times"] = "[0.01, 0.05, 0.1]";
    RunConfig c = loaded(s);
    const std::vector<std::string> commands{"grid", "kernel", "simulate"};
    const RunReport ra = run_all(c, commands, "x");
    c.out = b.string();
    c.threads = 2;
    const RunReport rb = run_all(c, commands, "x");
    CHECK(ra.exit_status == 0);
    CHECK(rb.exit_status == 0);
    for (const auto& cmd : commands) {
      for (const auto& entry : fs::directory_iterator(a / cmd)) {
        CHECK(slurp(entry.path()) == slurp(b / cmd / entry.path().filename()));
      }
    }
    const auto sa = nlohmann::json::parse(slurp(a / "summary.json"));
    const auto sb = nlohmann::json::parse(slurp(b / "summary.json"));
    CHECK(sa.at("content_sha256") == sb.at("content_sha256"));
    fs::remove_all(a);
    fs::remove_all(b);
  }

  TEST_CASE("a failing command leaves the others intact") {
    const fs::path out = scratch("partial");
    ConfigSources s = small_square(out);
    s.flags["schedule"] = "[0.2, 0.4]";
    s.flags["scheme"] = "\"ball\"";
    s.flags["center"] = "[0.5, 0.5]";
    const RunConfig c = loaded(s);
    const RunReport r = run_all(c, {"grid", "exhaust", "eig"}, "x");
    REQUIRE(r.results.size() == 3);
    CHECK(r.results[0].status == "ok");
    CHECK(r.results[1].status == "error");
    CHECK(r.results[2].status == "ok");
    CHECK(r.exit_status == 1);
    CHECK(fs::exists(out / "grid" / "grid.csv"));
    CHECK_FALSE(fs::exists(out / "exhaust"));
    const auto summary = nlohmann::json::parse(slurp(out / "summary.json"));
    CHECK(summary.at("exit_status") == 1);
    fs::remove_all(out);
  }

  TEST_CASE("flags override the environment which overrides the file") {
    const fs::path dir = scratch("layers");
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << R"({"domain": "square.json", "h": 0.5, "paths": 10, "threads": 1})";
    ConfigSources s;
    s.path = (dir / "c.json").string();
    s.environment = {{"h", "0.25"}, {"paths", "20"}};
    s.flags = {{"h", "0.125"}};
    const LoadResult r = load_config(s);
    REQUIRE(r.errors.empty());
    CHECK(r.config.h == 0.125);
    CHECK(r.config.paths == 20);
    CHECK(r.config.domain == (dir / "square.json").string());

    setenv("RBMLAB_SEED", "99", 1);
    const auto env = environment_overrides();
    unsetenv("RBMLAB_SEED");
    REQUIRE(env.count("seed") == 1);
    CHECK(env.at("seed") == "99");
    fs::remove_all(dir);
  }
}
