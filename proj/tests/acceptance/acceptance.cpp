// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rbmcli/commands.hpp"
#include "rbmcli/config.hpp"
#include "rbmlab/discretize.hpp"
#include "rbmlab/exhaust.hpp"
#include "rbmlab/simulate.hpp"
#include "rbmlab/spectral.hpp"
#include "rbmlab/table_io.hpp"
#include "rbmlab/verify.hpp"

using namespace rbm;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

Domain lshape() { return Domain::polygon({{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 2}, {0, 2}}, "lshape"); }

std::vector<int> every_cell(const Grid& g) {
  std::vector<int> v(g.size());
  for (std::size_t c = 0; c < g.size(); ++c) v[c] = static_cast<int>(c);
  return v;
}

double cosine_kernel_1d(double t, double u, double v) {
  double s = 1.0;
  for (int k = 1; k <= 50; ++k) s += 2 * std::exp(-0.5 * k * k * M_PI * M_PI * t) * std::cos(k * M_PI * u) * std::cos(k * M_PI * v);
  return s;
}

Outcome rectangle_oracle() {
  const Grid g = build_grid(Domain::rectangle(1, 1), 1.0 / 64);
  const SpectralDecomposition sd = eigensolve(assemble_neumann(g), 600);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double t = 0.05 + 0.95 * u(rng);
    const Point x{u(rng), u(rng)}, y{u(rng), u(rng)};
    const double exact = cosine_kernel_1d(t, x.x, y.x) * cosine_kernel_1d(t, x.y, y.y);
    worst = std::max(worst, std::abs(kernel_at(sd, g, t, x, y).value - exact) / exact);
  }
  return {worst <= 0.02, "max relative error " + num(worst) + " (tol 0.02, 50 samples, t_min " + num(sd.t_min) + ")"};
}

Outcome conservation_semigroup() {
  const std::vector<double> ladder{1e-3, 1e-2, 0.1, 0.5, 1.0};
  double mass_err = 0.0, ck = 0.0;
  for (const Domain& d : {Domain::rectangle(1, 1), lshape()}) {
    const Grid g = build_grid(d, 1.0 / 24);
    const Operator op = assemble_neumann(g);
    const SpectralDecomposition sd = eigensolve(op, op.rows());
    const auto all = every_cell(g);
    Eigen::VectorXd f(static_cast<Eigen::Index>(g.size()));
    for (std::size_t c = 0; c < g.size(); ++c) {
      const Point p = g.cells()[c].center;
      f[static_cast<Eigen::Index>(c)] = std::cos(3 * p.x) * std::exp(p.y) + (p.x > 0.7 ? 1.0 : 0.0);
    }
    for (double t : ladder) {
      const Eigen::VectorXd rows = kernel_block(sd, t, all, all) * sd.mass;
      mass_err = std::max(mass_err, (rows.array() - 1.0).abs().maxCoeff());
      for (double s : ladder) {
        const Eigen::VectorXd two = apply_semigroup(sd, t, apply_semigroup(sd, s, f));
        const Eigen::VectorXd one = apply_semigroup(sd, t + s, f);
        ck = std::max(ck, (two - one).norm() / f.norm());
      }
    }
  }
  return {mass_err <= 1e-8 && ck <= 1e-10,
          "row-sum error " + num(mass_err) + " (tol 1e-8), Chapman-Kolmogorov residual " + num(ck) + " (tol 1e-10)"};
}

Outcome positivity_continuity() {
  const Domain d = lshape();
  const Grid coarse = build_grid(d, 1.0 / 32);
  const Operator op = assemble_neumann(coarse);
  const SpectralDecomposition sd = eigensolve(op, 600);
  const double t_pos = certified_positivity_time(sd);
  const auto all = every_cell(coarse);

  // Uniformized kernel from t_min upward; T_t = T_{t_min} T_{t - t_min} with a
  // nonnegative second factor, so positivity at t_min covers every t >= t_min.
  int doublings = 0;
  while (sd.t_min * std::pow(2.0, doublings) < t_pos) ++doublings;
  double min_entry = std::numeric_limits<double>::infinity(), consistency = 0.0;
  uniformized_ladder(op, sd.t_min, doublings, [&](double t, const Eigen::MatrixXd& k) {
    min_entry = std::min(min_entry, k.minCoeff());
    const Eigen::MatrixXd s = kernel_block(sd, t, all, all);
    const Eigen::MatrixXd tail = kernel_tail_block(sd, t, all, all);
    for (Eigen::Index a = 0; a < k.rows(); ++a) {
      for (Eigen::Index b = 0; b < k.cols(); ++b) {
        const int ca = sd.cells[static_cast<std::size_t>(a)], cb = sd.cells[static_cast<std::size_t>(b)];
        consistency = std::max(consistency, std::abs(s(ca, cb) - k(a, b)) / tail(ca, cb));
      }
    }
  });

  const Grid fine = build_grid(d, 1.0 / 64);
  const SpectralDecomposition fine_sd = eigensolve(assemble_neumann(fine), 600);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 2.0), logt(std::log(0.25), 0.0);
  double worst = 0.0;
  for (int n = 0; n < 200;) {
    const Point x{u(rng), u(rng)}, y{u(rng), u(rng)};
    if (!d.contains(x) || !d.contains(y)) continue;
    ++n;
    const double t = std::exp(logt(rng));
    const double a = kernel_at(sd, coarse, t, x, y).value;
    const double b = kernel_at(fine_sd, fine, t, x, y).value;
    worst = std::max(worst, std::abs(a - b) / b);
  }
  const bool pass = min_entry > 0.0 && consistency <= 1.0 && worst <= 0.03;
  return {pass, "min kernel at t_min " + num(sd.t_min) + " is " + num(min_entry) + ", uniformized vs spectral " +
                    num(consistency) + " tails, spectral positivity from " + num(t_pos) +
                    "; h -> h/2 change " + num(worst) + " (tol 0.03, t in [0.25, 1])"};
}

Outcome exhaustion_certificate() {
  const double h = 0.02;
  const Domain d = Domain::horn(1, 1, 32 + 4 * h);
  auto grid = std::make_shared<const Grid>(build_grid(d, h));
  LadderOptions o;
  o.schedule = {4, 8, 16, 32};
  o.scheme = TruncationScheme::x_cut;
  o.center = {0, 0};
  o.radius = 3;
  o.eps = 0.2;
  o.eigen_count = 400;
  o.t_max = 1.0;
  const ExhaustionLadder l = build_ladder(grid, d, o);
  double lo = 0.0;
  for (const auto& sd : l.levels) lo = std::max(lo, sd.t_min);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto from = l.masks[0].indices();
  const auto to = l.window.indices();
  int monotone_bad = 0, sandwich_bad = 0, unreached = 0;
  for (int s = 0; s < 400; ++s) {
    const double t = lo * std::pow(0.5 / lo, u(rng));
    const int x = from[rng() % from.size()];
    const int y = to[rng() % to.size()];
    for (std::size_t n = 0; n + 1 < l.depth(); ++n) {
      const CertifiedKernel a = certified_kernel(l, n, t, x, y);
      const CertifiedKernel b = certified_kernel(l, n + 1, t, x, y);
      if (a.value > b.value + a.tail + b.tail) ++monotone_bad;
      if (b.value - a.value > a.certificate + a.tail + b.tail) ++sandwich_bad;
    }
    if (!limit_kernel(l, t, x, y, 1e-3).reached) ++unreached;
  }
  return {monotone_bad == 0 && sandwich_bad == 0 && unreached == 0,
          "400 samples, t in [" + num(lo) + ", 0.5]: monotonicity violations " + std::to_string(monotone_bad) +
              ", certificate violations " + std::to_string(sandwich_bad) + ", limit not reached " +
              std::to_string(unreached)};
}

Outcome exit_tails() {
  const Domain sq = Domain::rectangle(1, 1);
  const double delta = 1e-4;
  const std::size_t n = 100000;

  // majorant fit of ball exit tails
  SimulationSpec spec;
  spec.start = {0.5, 0.5};
  spec.horizon = 0.1;
  spec.step = delta;
  spec.paths = n;
  spec.seed = 20240601;
  spec.stop_when_exited = true;
  const std::vector<double> radii{0.1, 0.2, 0.3};
  for (double r : radii) spec.regions.push_back(ExitRegion::ball(spec.start, r));
  const PathEnsemble balls = sample_paths(sq, spec);
  const std::vector<double> fit_times{0.002, 0.004, 0.007, 0.01, 0.02, 0.04, 0.07, 0.1};
  std::vector<ExitSample> samples;
  for (std::size_t r = 0; r < radii.size(); ++r) {
    for (const TailPoint& p : exit_tail(balls, r, fit_times)) samples.push_back({radii[r], p.t, p.p_hat, p.std_error});
  }
  const BoundFit fit = fit_exit_bound(samples);
  const double gamma = fit.constants.at("gamma");

  // killed spectral survival with the first killed cell centre as the cut; the
  // MC cut sits 0.5826 sqrt(delta) inside it (discrete-monitoring correction)
  const double h = 1.0 / 64;
  const Grid g = build_grid(sq, h);
  const double cut = 32.5 * h;
  const Operator op = assemble_part(g, g.x_below(cut - 1e-9, "cut"));
  const SpectralDecomposition sd = eigensolve(op, op.rows());
  const std::vector<double> times{0.005, 0.01, 0.02, 0.04, 0.07, 0.1};
  double worst = 0.0;
  for (int i : {6, 13, 19, 25, 28, 30}) {
    SimulationSpec s;
    s.start = {(i + 0.5) * h, 32.5 * h};
    s.horizon = 0.1;
    s.step = delta;
    s.paths = n;
    s.seed = 42;
    s.regions = {ExitRegion::x_below(cut - 0.5826 * std::sqrt(delta))};
    s.stop_when_exited = true;
    const auto tail = exit_tail(sample_paths(sq, s), 0, times);
    const int cell = *g.locate(s.start);
    for (std::size_t k = 0; k < times.size(); ++k) {
      const double p = 1.0 - survival(sd, times[k], cell);
      const double se = std::sqrt(std::max(p * (1 - p), tail[k].p_hat * (1 - tail[k].p_hat)) / static_cast<double>(n));
      if (se > 0.0) worst = std::max(worst, std::abs(tail[k].p_hat - p) / se);
    }
  }
  return {gamma > 0.0 && fit.passed && worst <= 3.0,
          "majorant gamma " + num(gamma) + ", c " + num(fit.constants.at("c")) + "; MC vs spectral max |z| " +
              num(worst) + " (tol 3) on 6x6"};
}

std::vector<double> quarter_grid() {
  std::vector<double> c;
  for (int k = 0; k <= 60; ++k) c.push_back(0.2 + 0.005 * k);
  return c;
}

Outcome quarter_threshold() {
  const Domain sq = Domain::rectangle(1, 1);
  const auto candidates = quarter_grid();
  std::vector<DisplacementSample> free;
  for (double r : {0.05, 0.1}) {
    SimulationSpec s;
    s.start = {0.5, 0.5};
    s.step = r * r * 0.0005;
    s.paths = 100000;
    s.seed = 7;
    for (double u : candidates) s.checkpoints.push_back(std::round(u * r * r / s.step) * s.step);
    s.horizon = s.checkpoints.back();
    const PathEnsemble e = sample_paths(sq, s);
    for (std::size_t c = 0; c < s.checkpoints.size(); ++c) {
      const TailPoint p = displacement_tail(e, c, r);
      free.push_back({s.start, r, s.checkpoints[c], p.p_hat, p.std_error});
    }
  }
  const double target = 1 / (2 * std::log(4.0));
  const double free_delta = quarter_time(free, candidates, 1.0).constants.at("delta");

  std::vector<DisplacementSample> box;
  const std::vector<double> radii{0.1, 0.2, 0.4};
  for (Point x : {Point{0.5, 0.5}, Point{0.1, 0.1}, Point{0, 0}, Point{0.5, 0}}) {
    SimulationSpec s;
    s.start = x;
    s.step = 4e-5;
    s.paths = 20000;
    s.seed = 8;
    for (double r : radii) {
      for (int k = 0; k <= 60; k += 2) s.checkpoints.push_back(std::round((0.2 + 0.005 * k) * r * r / s.step) * s.step);
    }
    std::sort(s.checkpoints.begin(), s.checkpoints.end());
    s.checkpoints.erase(std::unique(s.checkpoints.begin(), s.checkpoints.end()), s.checkpoints.end());
    s.horizon = s.checkpoints.back();
    const PathEnsemble e = sample_paths(sq, s);
    for (double r : radii) {
      for (std::size_t c = 0; c < s.checkpoints.size(); ++c) {
        const double u = s.checkpoints[c] / (r * r);
        if (u < 0.19 || u > 0.51) continue;
        const TailPoint p = displacement_tail(e, c, r);
        box.push_back({x, r, s.checkpoints[c], p.p_hat, p.std_error});
      }
    }
  }
  const BoundFit fit = quarter_time(box, candidates, 1.0);
  const double box_delta = fit.constants.at("delta");
  const double rel = std::abs(free_delta - target) / target;
  return {box_delta > 0.0 && rel <= 0.15, "unit square delta_R " + num(box_delta) + "; free regime delta " +
                                               num(free_delta) + " vs " + num(target) + " (rel " + num(rel) +
                                               ", tol 0.15)"};
}

Outcome ball_exit_time() {
  const Domain sq = Domain::rectangle(1, 1);
  std::ostringstream out;
  bool pass = true;
  for (double r : {0.05, 0.1}) {
    double mean[2];
    for (int half = 0; half < 2; ++half) {
      SimulationSpec s;
      s.start = {0.5, 0.5};
      s.step = half ? 5e-7 : 1e-6;
      s.paths = 20000;
      s.seed = 11;
      s.horizon = std::ceil(20 * r * r / s.step) * s.step;
      s.regions = {ExitRegion::ball(s.start, r)};
      s.stop_when_exited = true;
      mean[half] = exit_time_stats(sample_paths(sq, s), 0).mean;
    }
    const double rel = std::abs(mean[1] / (r * r / 2) - 1);
    const double shift = std::abs(mean[1] / mean[0] - 1);
    pass = pass && rel <= 0.05 && shift < 0.02;
    out << "r " << r << ": rel " << num(rel) << " shift " << num(shift) << "; ";
  }
  return {pass, out.str() + "(tol 0.05 / 0.02)"};
}

Outcome local_time() {
  const Domain rect = Domain::rectangle(4, 2);
  const auto stats = mc_local_time(rect, {2, 0}, 0.1, 0.02, 1e-5, 100000, 5, 1, {0.05, 0.1});
  bool pass = true;
  std::ostringstream out;
  for (const LocalTimeStats& l : stats) {
    const double exact = 2 * std::sqrt(2 * l.t / M_PI);
    const double a = l.mean / exact - 1, b = l.half_mean / exact - 1;
    const double z = (l.mean - l.half_mean) / l.difference_std_error;
    pass = pass && std::abs(a) <= 0.05 && std::abs(b) <= 0.05 && std::abs(z) <= 2.0;
    out << "T " << l.t << ": eps 0.02 " << num(a) << ", eps 0.01 " << num(b) << ", paired z " << num(z)
        << ", Richardson " << num(l.richardson / exact - 1) << "; ";
  }
  return {pass, out.str() + "(tol 0.05, |z| <= 2)"};
}

Outcome kato_class() {
  const Grid g = build_grid(Domain::rectangle(1, 1), 1.0 / 48);
  const Operator op = assemble_neumann(g);
  const SpectralDecomposition sd = eigensolve(op, op.rows());
  std::vector<double> times;
  for (int k = 0; k <= 16; ++k) times.push_back(1e-3 * std::pow(100.0, k / 16.0));
  std::vector<ModulusSample> curve;
  for (const ModulusPoint& p : kato_modulus(sd, g, g.all_cells(), times)) curve.push_back({p.t, p.modulus});
  const BoundFit fit = fit_kato_rate(curve);
  const double alpha = fit.constants.at("alpha");
  const double drop = curve.front().modulus / curve.back().modulus;
  const bool pass = fit.passed && alpha >= 0.4 && alpha <= 0.6 && drop < 0.2;
  return {pass, "alpha " + num(alpha) + " (range [0.4, 0.6]), monotone " + (fit.passed ? "yes" : "no") +
                    ", modulus ratio t=1e-3 / t=1e-1 " + num(drop)};
}

Outcome sobolev_failure() {
  bool pass = true;
  std::ostringstream out;
  std::vector<double> control;
  for (double h : {0.02, 0.01}) {
    SobolevScanOptions o;
    o.spacing = h;
    const BoundFit horn = sobolev_scan(Domain::horn(1, 1, 65), {4, 16, 64}, o);
    const auto& s = horn.series.at("S");
    pass = pass && horn.passed;
    out << "h " << h << ": S " << num(s[0]) << " < " << num(s[1]) << " < " << num(s[2])
        << (horn.passed ? "" : " (not increasing)");
    for (const auto& f : horn.flags) out << " [" << f << "]";
    out << "; ";
    control.push_back(sobolev_scan(Domain::rectangle(1, 1), {1.0}, o).series.at("S")[0]);
  }
  const double spread = std::abs(control[1] - control[0]) / control[0];
  pass = pass && spread <= 0.05;
  return {pass, out.str() + "square control change " + num(spread) + " (tol 0.05)"};
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "rbmlab_acceptance_determinism";
  fs::remove_all(base);
  rbmcli::ConfigSources src;
  src.path = std::string(RBMLAB_SOURCE_DIR) + "/configs/unit_square.json";
  rbmcli::LoadResult loaded = rbmcli::load_config(src);
  if (!loaded.errors.empty()) return {false, "config error: " + loaded.errors.front()};
  rbmcli::RunConfig c = loaded.config;
  const std::vector<std::string> commands{"simulate", "verify-exit", "verify-quarter"};
  std::vector<std::string> digests;
  for (int threads : {1, 2}) {
    c.threads = threads;
    c.out = (base / ("threads" + std::to_string(threads))).string();
    const rbmcli::RunReport r = rbmcli::run_all(c, commands, loaded.canonical);
    std::string joined;
    for (const auto& result : r.results) {
      if (result.status == "error") return {false, result.name + ": " + result.message};
      for (const auto& f : result.files) joined += f.path + " " + f.sha256 + "\n";
    }
    digests.push_back(joined);
  }
  std::size_t files = std::count(digests[0].begin(), digests[0].end(), '\n');
  fs::remove_all(base);
  return {digests[0] == digests[1] && files > 0,
          std::to_string(files) + " data files from simulate/verify-exit/verify-quarter, threads 1 vs 2 " +
              (digests[0] == digests[1] ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"rectangle oracle", rectangle_oracle},
      {"conservation and semigroup", conservation_semigroup},
      {"positivity and continuity", positivity_continuity},
      {"exhaustion certificate", exhaustion_certificate},
      {"exit tails", exit_tails},
      {"quarter threshold", quarter_threshold},
      {"ball exit time", ball_exit_time},
      {"local time", local_time},
      {"local Kato class", kato_class},
      {"Sobolev failure on horns", sobolev_failure},
      {"determinism", determinism},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s %2d %s: %s [%.0fs]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
