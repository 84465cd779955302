#include "rbmcli/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <memory>

#include "json.hpp"
#include "rbmlab/discretize.hpp"
#include "rbmlab/error.hpp"
#include "rbmlab/exhaust.hpp"
#include "rbmlab/grid.hpp"
#include "rbmlab/simulate.hpp"
#include "rbmlab/spectral.hpp"
#include "rbmlab/table_io.hpp"
#include "rbmlab/verify.hpp"

namespace rbmcli {

namespace {

using nlohmann::ordered_json;
using rbm::fmt;
using rbm::Point;
using rbm::Table;

// Files of one command, kept in memory until the command succeeds.
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  bool passed = true;
  std::string message;

  void add(const std::string& name, std::string body) { files.emplace_back(name, std::move(body)); }
  void add(const std::string& name, const Table& t) { add(name, t.to_csv()); }
  void add(const std::string& name, const ordered_json& j) { add(name, j.dump(2) + "\n"); }
};

struct Context {
  const RunConfig& config;
  rbm::Domain domain;
  std::shared_ptr<const rbm::Grid> grid;

  explicit Context(const RunConfig& c)
      : config(c), domain(rbm::load_domain(c.domain)),
        grid(std::make_shared<const rbm::Grid>(rbm::build_grid(domain, c.h))) {}
};

std::vector<int> point_cells(const rbm::Grid& grid, const std::vector<Point>& points) {
  std::vector<int> out;
  for (Point p : points) out.push_back(grid.nearest_cell(p));
  return out;
}

ordered_json spectral_json(const rbm::SpectralDecomposition& sd) {
  ordered_json j;
  j["method"] = sd.method;
  j["rows"] = sd.rows();
  j["eigen_count"] = sd.count();
  j["max_residual"] = sd.max_residual;
  j["t_min"] = sd.t_min;
  j["lambda_1"] = sd.eigenvalues[0];
  j["lambda_K"] = sd.eigenvalues[sd.count() - 1];
  return j;
}

rbm::SpectralDecomposition neumann_spectrum(const Context& ctx) {
  const rbm::Operator op = rbm::assemble_neumann(*ctx.grid);
  return rbm::eigensolve(op, std::min(ctx.config.eigen_count, op.rows()));
}

Table kernel_table(const rbm::SpectralDecomposition& sd, const std::vector<double>& times, const std::vector<int>& cells,
                   std::vector<double>& skipped) {
  Table t{{"t", "i", "j", "value", "tail"}, {}};
  for (double time : times) {
    if (time < sd.t_min) {
      skipped.push_back(time);
      continue;
    }
    for (int i : cells) {
      for (int j : cells) {
        const rbm::KernelEstimate k = rbm::heat_kernel(sd, time, i, j);
        t.add({fmt(time), fmt(i), fmt(j), fmt(k.value), fmt(k.tail)});
      }
    }
  }
  return t;
}

// Checkpoints are snapped to the nearest multiple of delta.
std::vector<double> snap(const std::vector<double>& times, double delta) {
  std::vector<double> out;
  for (double t : times) {
    const double s = std::round(t / delta) * delta;
    if (out.empty() || s > out.back()) out.push_back(s);
  }
  return out;
}

Outputs cmd_grid(const Context& ctx) {
  Outputs o;
  const rbm::Grid& g = *ctx.grid;
  Table cells{{"cell", "ix", "iy", "x", "y", "measure", "boundary_length"}, {}};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const rbm::Cell& c = g.cells()[i];
    cells.add({fmt(i), fmt(c.ix), fmt(c.iy), fmt(c.centroid.x), fmt(c.centroid.y), fmt(c.measure),
               fmt(c.boundary_length)});
  }
  ordered_json j;
  j["domain"] = ctx.domain.name();
  j["h"] = g.spacing();
  j["cells"] = g.size();
  j["faces"] = g.faces().size();
  j["measure"] = g.total_measure();
  j["domain_area"] = ctx.domain.area();
  j["boundary_length"] = g.boundary_length();
  j["domain_perimeter"] = ctx.domain.perimeter();
  j["connected"] = g.connected();
  o.add("grid.csv", cells);
  o.add("grid.json", j);
  return o;
}

Outputs cmd_eig(const Context& ctx) {
  Outputs o;
  const rbm::SpectralDecomposition sd = neumann_spectrum(ctx);
  Table values{{"k", "lambda"}, {}};
  for (int k = 0; k < sd.count(); ++k) values.add({fmt(k + 1), fmt(sd.eigenvalues[k])});
  o.add("eigenvalues.csv", values);
  if (ctx.config.eigenvectors) {
    Table vectors{{"cell"}, {}};
    for (int k = 0; k < sd.count(); ++k) vectors.header.push_back("phi_" + std::to_string(k + 1));
    for (int r = 0; r < sd.rows(); ++r) {
      std::vector<std::string> row{fmt(sd.cells[r])};
      for (int k = 0; k < sd.count(); ++k) row.push_back(fmt(sd.eigenvectors(r, k)));
      vectors.add(std::move(row));
    }
    o.add("eigenvectors.csv", vectors);
  }
  o.add("eig.json", spectral_json(sd));
  return o;
}

Outputs cmd_kernel(const Context& ctx) {
  Outputs o;
  const rbm::SpectralDecomposition sd = neumann_spectrum(ctx);
  std::vector<double> skipped;
  o.add("kernel.csv", kernel_table(sd, ctx.config.times, point_cells(*ctx.grid, ctx.config.points), skipped));
  ordered_json j = spectral_json(sd);
  j["skipped_times"] = skipped;
  o.add("kernel.json", j);
  return o;
}

Outputs cmd_part(const Context& ctx) {
  Outputs o;
  const RegionSpec& r = ctx.config.part_region;
  const rbm::Mask mask = r.kind == "ball" ? ctx.grid->ball(r.center, r.radius, "part")
                                          : ctx.grid->x_below(r.x_cut, "part");
  if (mask.empty()) throw rbm::InvalidInput("part_region contains no cells");
  const rbm::Operator op = rbm::assemble_part(*ctx.grid, mask);
  const rbm::SpectralDecomposition sd = rbm::eigensolve(op, std::min(ctx.config.eigen_count, op.rows()));
  std::vector<int> cells;
  for (int c : point_cells(*ctx.grid, ctx.config.points)) {
    if (mask[static_cast<std::size_t>(c)]) cells.push_back(c);
  }
  std::vector<double> skipped;
  o.add("part_kernel.csv", kernel_table(sd, ctx.config.times, cells, skipped));
  Table surv{{"t", "cell", "survival"}, {}};
  for (double t : ctx.config.times) {
    for (int c : cells) surv.add({fmt(t), fmt(c), fmt(rbm::survival(sd, t, c))});
  }
  o.add("survival.csv", surv);
  ordered_json j = spectral_json(sd);
  j["region"] = r.kind;
  j["cells"] = mask.count();
  j["skipped_times"] = skipped;
  o.add("part.json", j);
  return o;
}

Outputs cmd_exhaust(const Context& ctx) {
  Outputs o;
  const RunConfig& c = ctx.config;
  rbm::LadderOptions lo;
  lo.schedule = c.schedule;
  lo.scheme = c.scheme == "ball" ? rbm::TruncationScheme::ball : rbm::TruncationScheme::x_cut;
  lo.center = c.center;
  lo.radius = c.radius;
  lo.eps = c.eps;
  lo.eigen_count = c.eigen_count;
  lo.t_max = c.times.back();
  lo.threads = c.threads;
  const rbm::ExhaustionLadder ladder = rbm::build_ladder(ctx.grid, ctx.domain, lo);

  std::vector<int> xs = point_cells(*ctx.grid, c.points), ys;
  for (int y : xs) {
    if (ladder.window[static_cast<std::size_t>(y)]) ys.push_back(y);
  }
  if (ys.empty()) throw rbm::InvalidInput("no evaluation point lies in the (R, eps) window");

  Table levels{{"level", "t", "x", "y", "value", "tail", "exit_probability", "c_hat", "certificate"}, {}};
  Table limits{{"t", "x", "y", "value", "tail", "level", "certificate", "reached"}, {}};
  std::size_t monotone_bad = 0, sandwich_bad = 0, checked = 0;
  for (double t : c.times) {
    for (int x : xs) {
      for (int y : ys) {
        std::vector<rbm::CertifiedKernel> ks;
        for (std::size_t n = 0; n < ladder.depth(); ++n) {
          if (t < ladder.levels[n].t_min) continue;
          const rbm::CertifiedKernel k = rbm::certified_kernel(ladder, n, t, x, y);
          levels.add({fmt(n + 1), fmt(t), fmt(x), fmt(y), fmt(k.value), fmt(k.tail), fmt(k.exit_probability),
                      fmt(k.c_hat), fmt(k.certificate)});
          ks.push_back(k);
        }
        for (std::size_t n = 0; n + 1 < ks.size(); ++n) {
          const double slack = ks[n].tail + ks[n + 1].tail;
          const double inc = ks[n + 1].value - ks[n].value;
          ++checked;
          if (inc < -slack) ++monotone_bad;
          if (inc > ks[n].certificate + slack) ++sandwich_bad;
        }
        const rbm::LimitEstimate lim = rbm::limit_kernel(ladder, t, x, y, c.tol);
        limits.add({fmt(t), fmt(x), fmt(y), fmt(lim.kernel.value), fmt(lim.kernel.tail), fmt(lim.level_used + 1),
                    fmt(lim.certificate), lim.reached ? "1" : "0"});
      }
    }
  }
  ordered_json j;
  j["cells"] = ctx.grid->size();
  j["window_cells"] = ladder.window.count();
  j["levels"] = ordered_json::array();
  for (std::size_t n = 0; n < ladder.depth(); ++n) {
    ordered_json l = spectral_json(ladder.levels[n]);
    l["cut"] = ladder.schedule[n];
    j["levels"].push_back(l);
  }
  j["increments_checked"] = checked;
  j["monotone_violations"] = monotone_bad;
  j["certificate_violations"] = sandwich_bad;
  o.passed = monotone_bad == 0 && sandwich_bad == 0;
  j["passed"] = o.passed;
  if (!o.passed) o.message = "exhaustion increments violate monotonicity or the certificate";
  o.add("exhaust.csv", levels);
  o.add("limit.csv", limits);
  o.add("exhaust.json", j);
  return o;
}

Outputs cmd_simulate(const Context& ctx) {
  Outputs o;
  const RunConfig& c = ctx.config;
  rbm::SimulationSpec spec;
  spec.start = c.start;
  spec.horizon = c.horizon;
  spec.step = c.delta;
  spec.paths = c.paths;
  spec.seed = *c.seed;
  spec.checkpoints = snap(c.checkpoint_times, c.delta);
  spec.threads = c.threads;
  std::vector<std::string> names;
  for (double r : c.exit_radii) {
    spec.regions.push_back(rbm::ExitRegion::ball(c.start, r, "ball_" + fmt(r)));
    names.push_back("ball_" + fmt(r));
  }
  if (c.x_cut) {
    spec.regions.push_back(rbm::ExitRegion::x_below(*c.x_cut, "x_below_" + fmt(*c.x_cut)));
    names.push_back("x_below_" + fmt(*c.x_cut));
  }
  const rbm::PathEnsemble ens = rbm::sample_paths(ctx.domain, spec);

  Table tails{{"region", "t", "p_hat", "stderr"}, {}};
  Table stats{{"region", "mean", "stderr", "censored"}, {}};
  for (std::size_t r = 0; r < spec.regions.size(); ++r) {
    if (!c.times.empty()) {
      for (const rbm::TailPoint& p : rbm::exit_tail(ens, r, c.times)) {
        tails.add({names[r], fmt(p.t), fmt(p.p_hat), fmt(p.std_error)});
      }
    }
    const rbm::ExitTimeStats s = rbm::exit_time_stats(ens, r);
    stats.add({names[r], fmt(s.mean), fmt(s.std_error), fmt(s.censored)});
  }
  if (!spec.regions.empty()) {
    o.add("exit_tails.csv", tails);
    o.add("exit_times.csv", stats);
  }
  for (std::size_t k = 0; k < spec.checkpoints.size(); ++k) {
    if (!(spec.checkpoints[k] > 0.0)) continue;
    const rbm::Histogram hist = rbm::histogram(ens, k, *ctx.grid);
    Table t{{"cell", "density", "stderr"}, {}};
    for (std::size_t i = 0; i < hist.density.size(); ++i) {
      t.add({fmt(i), fmt(hist.density[i]), fmt(hist.std_error[i])});
    }
    o.add("histogram_t" + fmt(spec.checkpoints[k]) + ".csv", t);
  }
  ordered_json j;
  j["paths"] = c.paths;
  j["delta"] = c.delta;
  j["horizon"] = c.horizon;
  j["seed"] = *c.seed;
  j["steps"] = ens.steps;
  j["checkpoints"] = spec.checkpoints;
  j["regions"] = names;
  o.add("simulate.json", j);
  return o;
}

Outputs cmd_local_time(const Context& ctx) {
  Outputs o;
  const RunConfig& c = ctx.config;
  rbm::SimulationSpec spec;
  spec.start = c.start;
  spec.horizon = c.horizon;
  spec.step = c.delta;
  spec.paths = c.paths;
  spec.seed = *c.seed;
  spec.checkpoints = c.checkpoint_times.empty() ? std::vector<double>{c.horizon} : snap(c.checkpoint_times, c.delta);
  spec.strip_widths = c.eps_list;
  if (c.strip_center && c.strip_radius > 0.0) {
    spec.strip_center = *c.strip_center;
    spec.strip_radius = c.strip_radius;
  }
  spec.threads = c.threads;
  const rbm::PathEnsemble ens = rbm::sample_paths(ctx.domain, spec);

  auto mean_se = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    const double n = static_cast<double>(v.size());
    return std::pair<double, double>{m, n > 1 ? std::sqrt(s / (n - 1) / n) : 0.0};
  };
  Table t{{"t", "eps", "mean", "stderr"}, {}};
  ordered_json pairs = ordered_json::array();
  for (std::size_t k = 0; k < spec.checkpoints.size(); ++k) {
    for (std::size_t e = 0; e < c.eps_list.size(); ++e) {
      const auto [m, se] = mean_se(ens.local_time[e][k]);
      t.add({fmt(spec.checkpoints[k]), fmt(c.eps_list[e]), fmt(m), fmt(se)});
    }
    for (std::size_t e = 0; e + 1 < c.eps_list.size(); ++e) {
      const auto& a = ens.local_time[e][k];
      const auto& b = ens.local_time[e + 1][k];
      std::vector<double> diff(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
      const auto [dm, dse] = mean_se(diff);
      ordered_json p;
      p["t"] = spec.checkpoints[k];
      p["eps"] = c.eps_list[e];
      p["eps_next"] = c.eps_list[e + 1];
      p["difference"] = dm;
      p["difference_stderr"] = dse;
      if (std::abs(c.eps_list[e + 1] - 0.5 * c.eps_list[e]) <= 1e-12 * c.eps_list[e]) {
        std::vector<double> rich(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) rich[i] = 2.0 * b[i] - a[i];
        const auto [rm, rse] = mean_se(rich);
        p["richardson"] = rm;
        p["richardson_stderr"] = rse;
      }
      pairs.push_back(p);
    }
  }
  o.add("local_time.csv", t);
  ordered_json j;
  j["paths"] = c.paths;
  j["delta"] = c.delta;
  j["seed"] = *c.seed;
  j["under_resolved"] = ens.strip_under_resolved;
  j["strip_pairs"] = pairs;
  o.add("local_time.json", j);
  return o;
}

Table modulus_table(const Context& ctx, std::vector<rbm::ModulusPoint>& curve, ordered_json& info) {
  const RunConfig& c = ctx.config;
  const rbm::SpectralDecomposition sd = neumann_spectrum(ctx);
  const rbm::Mask k = c.kato_center && c.kato_radius > 0.0 ? ctx.grid->ball(*c.kato_center, c.kato_radius, "K")
                                                           : ctx.grid->all_cells("K");
  curve = rbm::kato_modulus(sd, *ctx.grid, k, c.times);
  Table t{{"t", "modulus"}, {}};
  for (const rbm::ModulusPoint& p : curve) t.add({fmt(p.t), fmt(p.modulus)});
  info = spectral_json(sd);
  info["k_cells"] = k.count();
  std::size_t unreliable = 0;
  for (const rbm::ModulusPoint& p : curve) unreliable += p.unreliable ? 1 : 0;
  info["points_below_t_min"] = unreliable;
  return t;
}

Outputs cmd_kato(const Context& ctx) {
  Outputs o;
  std::vector<rbm::ModulusPoint> curve;
  ordered_json info;
  o.add("kato_modulus.csv", modulus_table(ctx, curve, info));
  o.add("kato.json", info);
  return o;
}

Outputs finish_fit(Outputs o, const rbm::BoundFit& fit, const std::string& name) {
  o.add(name, fit.to_json());
  o.passed = fit.passed;
  if (!fit.passed) {
    o.message = fit.kind + " fit failed";
    for (const std::string& d : fit.diagnostics) o.message += "; " + d;
  }
  return o;
}

Outputs cmd_verify_gaussian(const Context& ctx) {
  Outputs o;
  const RunConfig& c = ctx.config;
  const rbm::SpectralDecomposition sd = neumann_spectrum(ctx);
  const std::vector<int> cells = point_cells(*ctx.grid, c.points);
  std::vector<rbm::KernelSample> samples;
  Table t{{"t", "x1", "x2", "y1", "y2", "p"}, {}};
  for (double time : c.times) {
    if (time < sd.t_min) continue;
    for (int i : cells) {
      for (int j : cells) {
        const Point x = ctx.grid->cells()[i].centroid, y = ctx.grid->cells()[j].centroid;
        const double p = rbm::heat_kernel(sd, time, i, j).value;
        samples.push_back({time, x, y, p});
        t.add({fmt(time), fmt(x.x), fmt(x.y), fmt(y.x), fmt(y.y), fmt(p)});
      }
    }
  }
  if (samples.empty()) throw rbm::InvalidInput("every configured time lies below t_min");
  o.add("gaussian_samples.csv", t);
  return finish_fit(std::move(o), rbm::fit_gaussian_bound(samples, 0.0, 0.0, c.slack), "gaussian_fit.json");
}

std::vector<Point> starts_of(const RunConfig& c) { return c.starts.empty() ? std::vector<Point>{c.start} : c.starts; }

Outputs cmd_verify_exit(const Context& ctx) {
  Outputs o;
  const RunConfig& c = ctx.config;
  std::vector<rbm::ExitSample> samples;
  Table t{{"x1", "x2", "r", "t", "p_hat", "stderr"}, {}};
  for (Point x : starts_of(c)) {
    rbm::SimulationSpec spec;
    spec.start = x;
    spec.horizon = c.horizon;
    spec.step = c.delta;
    spec.paths = c.paths;
    spec.seed = *c.seed;
    spec.threads = c.threads;
    spec.stop_when_exited = true;
    for (double r : c.exit_radii) spec.regions.push_back(rbm::ExitRegion::ball(x, r));
    const rbm::PathEnsemble ens = rbm::sample_paths(ctx.domain, spec);
    for (std::size_t r = 0; r < c.exit_radii.size(); ++r) {
      for (const rbm::TailPoint& p : rbm::exit_tail(ens, r, c.times)) {
        samples.push_back({c.exit_radii[r], p.t, p.p_hat, p.std_error});
        t.add({fmt(x.x), fmt(x.y), fmt(c.exit_radii[r]), fmt(p.t), fmt(p.p_hat), fmt(p.std_error)});
      }
    }
  }
  o.add("exit_samples.csv", t);
  return finish_fit(std::move(o), rbm::fit_exit_bound(samples, c.slack), "exit_fit.json");
}

Outputs cmd_verify_quarter(const Context& ctx) {
  Outputs o;
  const RunConfig& c = ctx.config;
  std::vector<double> checkpoints;
  for (double r : c.exit_radii) {
    for (double u : c.quarter_candidates) checkpoints.push_back(u * r * r);
  }
  std::sort(checkpoints.begin(), checkpoints.end());
  checkpoints = snap(checkpoints, c.delta);
  while (!checkpoints.empty() && !(checkpoints.front() > 0.0)) checkpoints.erase(checkpoints.begin());
  if (checkpoints.empty()) throw rbm::InvalidInput("delta is too coarse for the candidate times");
  std::vector<rbm::DisplacementSample> samples;
  Table t{{"x1", "x2", "r", "t", "p_hat", "stderr"}, {}};
  for (Point x : starts_of(c)) {
    rbm::SimulationSpec spec;
    spec.start = x;
    spec.horizon = checkpoints.back();
    spec.step = c.delta;
    spec.paths = c.paths;
    spec.seed = *c.seed;
    spec.threads = c.threads;
    spec.checkpoints = checkpoints;
    const rbm::PathEnsemble ens = rbm::sample_paths(ctx.domain, spec);
    for (double r : c.exit_radii) {
      for (std::size_t k = 0; k < checkpoints.size(); ++k) {
        const rbm::TailPoint p = rbm::displacement_tail(ens, k, r);
        samples.push_back({x, r, checkpoints[k], p.p_hat, p.std_error});
        t.add({fmt(x.x), fmt(x.y), fmt(r), fmt(checkpoints[k]), fmt(p.p_hat), fmt(p.std_error)});
      }
    }
  }
  o.add("displacement.csv", t);
  return finish_fit(std::move(o), rbm::quarter_time(samples, c.quarter_candidates, c.radius), "quarter_fit.json");
}

Outputs cmd_verify_kato(const Context& ctx) {
  Outputs o;
  std::vector<rbm::ModulusPoint> curve;
  ordered_json info;
  o.add("kato_modulus.csv", modulus_table(ctx, curve, info));
  // Points below t_min carry an unreliable truncated sum and stay out of the fit.
  std::vector<rbm::ModulusSample> samples;
  for (const rbm::ModulusPoint& p : curve) {
    if (!p.unreliable) samples.push_back({p.t, p.modulus});
  }
  o.add("kato.json", info);
  return finish_fit(std::move(o), rbm::fit_kato_rate(samples), "kato_fit.json");
}

Outputs cmd_verify_sobolev(const Context& ctx) {
  Outputs o;
  const RunConfig& c = ctx.config;
  rbm::SobolevScanOptions so;
  so.exponent = c.sobolev_exponent;
  so.spacing = c.h;
  so.optimizer.exponent = c.sobolev_exponent;
  so.optimizer.max_iterations = c.sobolev_iterations;
  so.optimizer.seed = c.seed.value_or(1);
  const rbm::BoundFit fit = rbm::sobolev_scan(ctx.domain, c.truncations, so);
  Table t{{"truncation", "S", "constant_ratio", "cells", "iterations"}, {}};
  const auto& s = fit.series;
  for (std::size_t i = 0; i < s.at("truncation").size(); ++i) {
    t.add({fmt(s.at("truncation")[i]), fmt(s.at("S")[i]), fmt(s.at("constant_ratio")[i]),
           fmt(static_cast<long long>(s.at("cells")[i])), fmt(static_cast<long long>(s.at("iterations")[i]))});
  }
  o.add("sobolev.csv", t);
  return finish_fit(std::move(o), fit, "sobolev_fit.json");
}

Outputs dispatch(const std::string& name, const Context& ctx) {
  if (name == "grid") return cmd_grid(ctx);
  if (name == "eig") return cmd_eig(ctx);
  if (name == "kernel") return cmd_kernel(ctx);
  if (name == "part") return cmd_part(ctx);
  if (name == "exhaust") return cmd_exhaust(ctx);
  if (name == "simulate") return cmd_simulate(ctx);
  if (name == "local-time") return cmd_local_time(ctx);
  if (name == "kato") return cmd_kato(ctx);
  if (name == "verify-gaussian") return cmd_verify_gaussian(ctx);
  if (name == "verify-exit") return cmd_verify_exit(ctx);
  if (name == "verify-quarter") return cmd_verify_quarter(ctx);
  if (name == "verify-kato") return cmd_verify_kato(ctx);
  if (name == "verify-sobolev") return cmd_verify_sobolev(ctx);
  throw rbm::InvalidInput("unknown command " + name);
}

std::string utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

CommandResult run_command(const std::string& name, const RunConfig& config) {
  CommandResult res;
  res.name = name;
  res.assertion = is_assertion(name);
  try {
    const Context ctx(config);
    Outputs o = dispatch(name, ctx);
    for (const auto& [file, body] : o.files) {
      const std::string rel = name + "/" + file;
      rbm::write_text((std::filesystem::path(config.out) / rel).string(), body);
      res.files.push_back({rel, rbm::sha256_hex(body), body.size()});
    }
    res.status = o.passed ? "ok" : "failed";
    res.message = o.message;
  } catch (const std::exception& e) {
    res.status = "error";
    res.message = e.what();
  }
  return res;
}

RunReport run_all(const RunConfig& config, const std::vector<std::string>& commands,
                  const std::string& config_canonical) {
  RunReport report;
  for (const std::string& name : commands) {
    if (name == "report") continue;
    report.results.push_back(run_command(name, config));
    const CommandResult& r = report.results.back();
    if (r.status == "error" || (r.status == "failed" && r.assertion)) report.exit_status = 1;
  }

  // The hashed part of the summary excludes the timestamp.
  ordered_json body;
  body["config_sha256"] = rbm::sha256_hex(config_canonical);
  body["commands"] = ordered_json::array();
  for (const CommandResult& r : report.results) {
    ordered_json c;
    c["name"] = r.name;
    c["status"] = r.status;
    c["assertion"] = r.assertion;
    c["message"] = r.message;
    c["files"] = ordered_json::array();
    for (const EmittedFile& f : r.files) c["files"].push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
    body["commands"].push_back(c);
  }
  body["exit_status"] = report.exit_status;
  ordered_json summary;
  summary["generated_at"] = utc_now();
  summary["content_sha256"] = rbm::sha256_hex(body.dump());
  for (auto it = body.begin(); it != body.end(); ++it) summary[it.key()] = it.value();
  rbm::write_text((std::filesystem::path(config.out) / "summary.json").string(), summary.dump(2) + "\n");
  return report;
}

}  // namespace rbmcli
