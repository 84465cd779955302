#include "rbmcli/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

extern char** environ;

namespace rbmcli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json parse_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) return json(text);
  return v;
}

class Reader {
 public:
  Reader(const json& doc, std::vector<std::string>& errors) : doc_(doc), errors_(errors) {}

  template <class F>
  void field(const char* key, F&& convert) {
    seen_.insert(key);
    auto it = doc_.find(key);
    if (it == doc_.end() || it->is_null()) return;
    try {
      convert(*it);
    } catch (const std::exception& e) {
      errors_.push_back(std::string(key) + ": " + e.what());
    }
  }

  void unknown_keys() {
    for (auto it = doc_.begin(); it != doc_.end(); ++it) {
      if (!seen_.count(it.key())) errors_.push_back("unknown config key '" + it.key() + "'");
    }
  }

 private:
  const json& doc_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

double number(const json& v) {
  if (!v.is_number()) throw std::invalid_argument("expected a number");
  return v.get<double>();
}

std::int64_t integer(const json& v) {
  if (!v.is_number_integer()) throw std::invalid_argument("expected an integer");
  return v.get<std::int64_t>();
}

std::vector<double> numbers(const json& v) {
  if (!v.is_array()) throw std::invalid_argument("expected an array of numbers");
  std::vector<double> out;
  for (const json& e : v) out.push_back(number(e));
  return out;
}

rbm::Point point(const json& v) {
  if (!v.is_array() || v.size() != 2) throw std::invalid_argument("expected [x, y]");
  return {number(v[0]), number(v[1])};
}

std::vector<rbm::Point> points(const json& v) {
  if (!v.is_array()) throw std::invalid_argument("expected an array of [x, y] pairs");
  std::vector<rbm::Point> out;
  for (const json& e : v) out.push_back(point(e));
  return out;
}

std::string text(const json& v) {
  if (!v.is_string()) throw std::invalid_argument("expected a string");
  return v.get<std::string>();
}

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || fs::path(path).is_absolute() || base.empty()) return path;
  return (fs::path(base) / path).lexically_normal().string();
}

void sorted_check(const char* key, const std::vector<double>& v, bool strict, std::vector<std::string>& errors) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (strict ? !(v[i] > v[i - 1]) : !(v[i] >= v[i - 1])) {
      errors.push_back(std::string(key) + " must be increasing");
      return;
    }
  }
}

}  // namespace

std::map<std::string, std::string> environment_overrides() {
  std::map<std::string, std::string> out;
  static const std::string prefix = "RBMLAB_";
  for (char** e = environ; e && *e; ++e) {
    const std::string entry(*e);
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    std::string key = entry.substr(prefix.size(), eq - prefix.size());
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    out[key] = entry.substr(eq + 1);
  }
  return out;
}

LoadResult load_config(const ConfigSources& sources) {
  LoadResult result;
  json doc = json::object();
  if (sources.path) {
    std::ifstream in(*sources.path);
    if (!in) {
      result.errors.push_back("cannot read config file " + *sources.path);
    } else {
      json file = json::parse(in, nullptr, false);
      if (file.is_discarded() || !file.is_object()) {
        result.errors.push_back("config file " + *sources.path + " is not a JSON object");
      } else {
        doc = std::move(file);
      }
    }
    // Paths in the file are relative to the file; overrides to the working directory.
    const std::string base = fs::path(*sources.path).parent_path().string();
    for (const char* key : {"domain", "out"}) {
      if (doc.contains(key) && doc[key].is_string()) doc[key] = resolve(doc[key].get<std::string>(), base);
    }
  }
  for (const auto& [k, v] : sources.environment) doc[k] = parse_value(v);
  for (const auto& [k, v] : sources.flags) doc[k] = parse_value(v);
  result.canonical = doc.dump();

  RunConfig& c = result.config;
  Reader r(doc, result.errors);
  r.field("domain", [&](const json& v) { c.domain = text(v); });
  r.field("h", [&](const json& v) { c.h = number(v); });
  r.field("eigen_count", [&](const json& v) { c.eigen_count = static_cast<int>(integer(v)); });
  r.field("eigenvectors", [&](const json& v) { c.eigenvectors = v.get<bool>(); });
  r.field("times", [&](const json& v) { c.times = numbers(v); });
  r.field("points", [&](const json& v) { c.points = points(v); });
  r.field("schedule", [&](const json& v) { c.schedule = numbers(v); });
  r.field("scheme", [&](const json& v) { c.scheme = text(v); });
  r.field("center", [&](const json& v) { c.center = point(v); });
  r.field("radius", [&](const json& v) { c.radius = number(v); });
  r.field("eps", [&](const json& v) { c.eps = number(v); });
  r.field("tol", [&](const json& v) { c.tol = number(v); });
  r.field("part_region", [&](const json& v) {
    if (!v.is_object()) throw std::invalid_argument("expected an object");
    c.part_region.kind = v.value("kind", std::string("ball"));
    if (v.contains("center")) c.part_region.center = point(v.at("center"));
    if (v.contains("radius")) c.part_region.radius = number(v.at("radius"));
    if (v.contains("x_cut")) c.part_region.x_cut = number(v.at("x_cut"));
  });
  r.field("delta", [&](const json& v) { c.delta = number(v); });
  r.field("paths", [&](const json& v) {
    const auto n = integer(v);
    if (n < 1) throw std::invalid_argument("must be at least 1");
    c.paths = static_cast<std::size_t>(n);
  });
  r.field("seed", [&](const json& v) {
    if (v.is_number_unsigned()) c.seed = v.get<std::uint64_t>();
    else if (v.is_number_integer() && v.get<std::int64_t>() >= 0) c.seed = static_cast<std::uint64_t>(v.get<std::int64_t>());
    else throw std::invalid_argument("expected an unsigned 64-bit integer");
  });
  r.field("eps_list", [&](const json& v) { c.eps_list = numbers(v); });
  r.field("checkpoint_times", [&](const json& v) { c.checkpoint_times = numbers(v); });
  r.field("start", [&](const json& v) { c.start = point(v); });
  r.field("starts", [&](const json& v) { c.starts = points(v); });
  r.field("horizon", [&](const json& v) { c.horizon = number(v); });
  r.field("exit_radii", [&](const json& v) { c.exit_radii = numbers(v); });
  r.field("x_cut", [&](const json& v) { c.x_cut = number(v); });
  r.field("strip_center", [&](const json& v) { c.strip_center = point(v); });
  r.field("strip_radius", [&](const json& v) { c.strip_radius = number(v); });
  r.field("kato_center", [&](const json& v) { c.kato_center = point(v); });
  r.field("kato_radius", [&](const json& v) { c.kato_radius = number(v); });
  r.field("slack", [&](const json& v) { c.slack = number(v); });
  r.field("quarter_candidates", [&](const json& v) { c.quarter_candidates = numbers(v); });
  r.field("truncations", [&](const json& v) { c.truncations = numbers(v); });
  r.field("sobolev_exponent", [&](const json& v) { c.sobolev_exponent = number(v); });
  r.field("sobolev_iterations", [&](const json& v) { c.sobolev_iterations = static_cast<int>(integer(v)); });
  r.field("commands", [&](const json& v) {
    if (!v.is_array()) throw std::invalid_argument("expected an array of command names");
    c.commands.clear();
    for (const json& e : v) c.commands.push_back(text(e));
  });
  r.field("out", [&](const json& v) { c.out = text(v); });
  r.field("threads", [&](const json& v) {
    const auto n = integer(v);
    if (n < 1 || n > 1024) throw std::invalid_argument("must lie in [1, 1024]");
    c.threads = static_cast<int>(n);
  });
  r.unknown_keys();
  return result;
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = {
      "grid",        "eig",           "kernel",         "part",           "exhaust",
      "simulate",    "local-time",    "kato",           "verify-gaussian", "verify-exit",
      "verify-quarter", "verify-kato", "verify-sobolev", "report"};
  return names;
}

bool is_monte_carlo(const std::string& command) {
  return command == "simulate" || command == "local-time" || command == "verify-exit" ||
         command == "verify-quarter";
}

bool is_assertion(const std::string& command) {
  return command.rfind("verify-", 0) == 0 || command == "exhaust";
}

std::vector<std::string> validate(const RunConfig& c, const std::vector<std::string>& commands) {
  std::vector<std::string> errors;
  auto need = [&](bool ok, const std::string& message) {
    if (!ok) errors.push_back(message);
  };
  const auto& names = command_names();
  std::set<std::string> wanted;
  for (const std::string& cmd : commands) {
    if (std::find(names.begin(), names.end(), cmd) == names.end()) {
      errors.push_back("unknown command '" + cmd + "'");
    } else if (cmd != "report") {
      wanted.insert(cmd);
    }
  }
  if (commands.empty()) errors.push_back("no commands selected");
  if (wanted.empty()) return errors;

  need(!c.domain.empty(), "domain: a domain file is required");
  if (!c.domain.empty()) need(fs::exists(c.domain), "domain: file " + c.domain + " does not exist");
  need(c.h > 0.0 && c.h <= 1.0, "h: must lie in (0, 1]");
  need(c.threads >= 1, "threads: must be at least 1");
  need(!c.out.empty(), "out: output directory required");

  auto spectral = [&](const std::string& cmd) {
    return cmd == "eig" || cmd == "kernel" || cmd == "part" || cmd == "exhaust" || cmd == "kato" ||
           cmd == "verify-gaussian" || cmd == "verify-kato";
  };
  bool any_spectral = false, any_mc = false;
  for (const std::string& cmd : wanted) {
    any_spectral = any_spectral || spectral(cmd);
    any_mc = any_mc || is_monte_carlo(cmd);
  }
  if (any_spectral) need(c.eigen_count >= 1 && c.eigen_count <= 5000, "eigen_count: must lie in [1, 5000]");
  auto positive_times = [&](const char* key, const std::vector<double>& v) {
    need(!v.empty(), std::string(key) + ": at least one time required");
    for (double t : v) {
      if (!(t > 0.0) || !std::isfinite(t)) {
        errors.push_back(std::string(key) + ": times must be positive and finite");
        break;
      }
    }
    sorted_check(key, v, true, errors);
  };
  for (const std::string& cmd : {std::string("kernel"), std::string("part"), std::string("exhaust"),
                                 std::string("kato"), std::string("verify-gaussian"), std::string("verify-kato")}) {
    if (wanted.count(cmd)) {
      positive_times("times", c.times);
      break;
    }
  }
  if (wanted.count("kernel") || wanted.count("part") || wanted.count("exhaust") || wanted.count("verify-gaussian")) {
    need(!c.points.empty(), "points: at least one evaluation point required");
  }
  if (wanted.count("part")) {
    need(c.part_region.kind == "ball" || c.part_region.kind == "x_below", "part_region.kind: must be ball or x_below");
    if (c.part_region.kind == "ball") need(c.part_region.radius > 0.0, "part_region.radius: must be positive");
  }
  if (wanted.count("exhaust")) {
    need(c.schedule.size() >= 2, "schedule: at least two truncation levels required");
    sorted_check("schedule", c.schedule, true, errors);
    need(c.scheme == "x_cut" || c.scheme == "ball", "scheme: must be x_cut or ball");
    need(c.radius > 0.0, "radius: must be positive");
    need(c.eps > 0.0 && c.eps < 1.0, "eps: must lie in (0, 1)");
    need(c.tol > 0.0, "tol: must be positive");
  }
  if (any_mc) {
    need(c.seed.has_value(), "seed: required for Monte Carlo commands (config key, RBMLAB_SEED or --seed)");
    need(c.delta > 0.0 && c.delta <= 0.1, "delta: must lie in (0, 0.1]");
    need(c.horizon > 0.0, "horizon: must be positive");
    need(c.delta <= c.horizon, "delta: must not exceed horizon");
    need(c.paths <= 100000000, "paths: at most 1e8");
    for (double t : c.checkpoint_times) {
      if (!(t >= 0.0 && t <= c.horizon * (1.0 + 1e-12))) {
        errors.push_back("checkpoint_times: must lie in [0, horizon]");
        break;
      }
    }
    sorted_check("checkpoint_times", c.checkpoint_times, true, errors);
  }
  if (wanted.count("simulate")) need(!c.exit_radii.empty() || c.x_cut || !c.checkpoint_times.empty(),
                                     "simulate: set exit_radii, x_cut or checkpoint_times");
  if (wanted.count("local-time")) {
    need(!c.eps_list.empty(), "eps_list: at least one strip width required");
    for (double e : c.eps_list) {
      if (!(e > 0.0)) {
        errors.push_back("eps_list: widths must be positive");
        break;
      }
    }
  }
  if (wanted.count("verify-exit") || wanted.count("verify-quarter")) {
    need(!c.exit_radii.empty(), "exit_radii: at least one radius required");
    for (double r : c.exit_radii) {
      if (!(r > 0.0)) {
        errors.push_back("exit_radii: radii must be positive");
        break;
      }
    }
  }
  if (wanted.count("verify-exit") || wanted.count("simulate")) {
    for (double t : c.times) {
      if (t > c.horizon * (1.0 + 1e-12)) {
        errors.push_back("times: exit-tail times must not exceed horizon");
        break;
      }
    }
  }
  if (wanted.count("verify-exit")) positive_times("times", c.times);
  if (wanted.count("verify-quarter")) {
    need(!c.quarter_candidates.empty(), "quarter_candidates: candidate grid required");
    sorted_check("quarter_candidates", c.quarter_candidates, true, errors);
  }
  if (wanted.count("verify-gaussian") || wanted.count("verify-exit") || wanted.count("verify-kato")) {
    need(c.slack >= 0.0 && c.slack <= 1.0, "slack: must lie in [0, 1]");
  }
  if (wanted.count("verify-sobolev")) {
    need(!c.truncations.empty(), "truncations: at least one truncation required");
    sorted_check("truncations", c.truncations, true, errors);
    need(c.sobolev_exponent > 2.0, "sobolev_exponent: must exceed 2");
    need(c.sobolev_iterations >= 1, "sobolev_iterations: must be at least 1");
  }
  return errors;
}

}  // namespace rbmcli
