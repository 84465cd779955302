#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rbmcli/commands.hpp"
#include "rbmcli/config.hpp"

int main(int argc, char** argv) {
  CLI::App app{"rbmlab: reflecting Brownian motion heat kernels, exhaustion certificates and Monte Carlo checks"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::string seed;
  int threads = 0;
  std::vector<std::string> sets;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", out, "Output directory");
    sub->add_option("--seed", seed, "Monte Carlo seed (unsigned 64-bit)");
    sub->add_option("--threads", threads, "Worker threads; never changes results")->check(CLI::PositiveNumber);
    sub->add_option("--set", sets, "Override a config key, KEY=JSON");
  };
  for (const std::string& name : rbmcli::command_names()) {
    CLI::App* sub = app.add_subcommand(name, name == "report" ? "Run every command listed under \"commands\""
                                                              : "Run the " + name + " command");
    common(sub);
  }
  CLI11_PARSE(app, argc, argv);

  const std::string command = app.get_subcommands().front()->get_name();
  rbmcli::ConfigSources sources;
  if (!config_path.empty()) sources.path = config_path;
  sources.environment = rbmcli::environment_overrides();
  for (const std::string& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: --set expects KEY=VALUE, got '" << s << "'\n";
      return 2;
    }
    sources.flags[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (!out.empty()) sources.flags["out"] = "\"" + out + "\"";
  if (!seed.empty()) sources.flags["seed"] = seed;
  if (threads > 0) sources.flags["threads"] = std::to_string(threads);

  rbmcli::LoadResult loaded = rbmcli::load_config(sources);
  const std::vector<std::string> commands =
      command == "report" ? loaded.config.commands : std::vector<std::string>{command};
  std::vector<std::string> errors = loaded.errors;
  for (const std::string& e : rbmcli::validate(loaded.config, commands)) errors.push_back(e);
  if (!errors.empty()) {
    std::cerr << "configuration invalid (" << errors.size() << " problem" << (errors.size() > 1 ? "s" : "")
              << "):\n";
    for (const std::string& e : errors) std::cerr << "  - " << e << "\n";
    return 2;
  }

  const rbmcli::RunReport report = rbmcli::run_all(loaded.config, commands, loaded.canonical);
  for (const rbmcli::CommandResult& r : report.results) {
    std::cout << r.name << ": " << r.status;
    if (!r.message.empty()) std::cout << " (" << r.message << ")";
    std::cout << "\n";
    for (const rbmcli::EmittedFile& f : r.files) std::cout << "  " << f.path << "  " << f.sha256 << "\n";
  }
  return report.exit_status;
}
