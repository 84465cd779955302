#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rbmlab/geometry.hpp"

namespace rbmcli {

/// Killed region for the `part` command.
struct RegionSpec {
  std::string kind = "ball";  // ball | x_below
  rbm::Point center;
  double radius = 0.5;
  double x_cut = 0.5;
};

/// Every key a config file may carry. Relative paths resolve against the
/// directory of the config file.
struct RunConfig {
  std::string domain;
  double h = 0.02;
  int eigen_count = 300;
  bool eigenvectors = false;
  std::vector<double> times;
  std::vector<rbm::Point> points;

  std::vector<double> schedule;
  std::string scheme = "x_cut";
  rbm::Point center;
  double radius = 1.0;  // R
  double eps = 0.2;     // window parameter
  double tol = 1e-3;
  RegionSpec part_region;

  double delta = 1e-4;
  std::size_t paths = 10000;
  std::optional<std::uint64_t> seed;
  std::vector<double> eps_list;
  std::vector<double> checkpoint_times;
  rbm::Point start;
  std::vector<rbm::Point> starts;
  double horizon = 0.1;
  std::vector<double> exit_radii;
  std::optional<double> x_cut;
  std::optional<rbm::Point> strip_center;
  double strip_radius = 0.0;  // 0: whole boundary

  std::optional<rbm::Point> kato_center;
  double kato_radius = 0.0;  // 0: whole domain

  double slack = 0.05;
  std::vector<double> quarter_candidates;
  std::vector<double> truncations;
  double sobolev_exponent = 4.0;
  int sobolev_iterations = 400;

  std::vector<std::string> commands;
  std::string out = "out";
  int threads = 1;
};

/// Keys set in `overrides` win over the file; values are JSON text (bare
/// words are taken as strings).
struct ConfigSources {
  std::optional<std::string> path;
  std::map<std::string, std::string> environment;  // key -> JSON text
  std::map<std::string, std::string> flags;        // key -> JSON text
};

/// RBMLAB_<KEY> variables of the process environment, keys lowercased.
std::map<std::string, std::string> environment_overrides();

struct LoadResult {
  RunConfig config;
  std::vector<std::string> errors;
  std::string canonical;  // merged key/value document, sorted keys
};

/// Merges file < environment < flags and converts every key. Conversion
/// problems are collected, never thrown.
LoadResult load_config(const ConfigSources& sources);

/// Every problem that would stop `commands` from running.
std::vector<std::string> validate(const RunConfig& config, const std::vector<std::string>& commands);

const std::vector<std::string>& command_names();
bool is_monte_carlo(const std::string& command);
bool is_assertion(const std::string& command);

}  // namespace rbmcli
