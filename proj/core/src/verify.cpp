#include "rbmlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"

#include "rbmlab/error.hpp"
#include "rbmlab/grid.hpp"
#include "rbmlab/table_io.hpp"

namespace rbm {

namespace {

constexpr double kEqualityBand = 1e-6;

std::string hash_rows(const std::vector<std::vector<double>>& rows) {
  std::string text;
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) text += ',';
      text += fmt(r[i]);
    }
    text += '\n';
  }
  return sha256_hex(text);
}

// Fills max_violation / boundary_fraction from data and bound values.
void scan(BoundFit& fit, const std::vector<double>& data, const std::vector<double>& bound, double slack) {
  fit.samples = data.size();
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t tight = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = bound[i] > 0.0 ? data[i] / bound[i] - 1.0 : (data[i] > 0.0 ? 1.0 : -1.0);
    worst = std::max(worst, v);
    if (std::abs(v) <= kEqualityBand) ++tight;
  }
  fit.max_violation = data.empty() ? 0.0 : worst;
  fit.boundary_fraction = data.empty() ? 0.0 : static_cast<double>(tight) / static_cast<double>(data.size());
  if (fit.max_violation > slack) {
    fit.passed = false;
    std::ostringstream msg;
    msg << "bound violated by " << fit.max_violation << " (slack " << slack << ")";
    fit.diagnostics.push_back(msg.str());
  }
}

struct Line {
  double slope = 0.0;
  double intercept = 0.0;
};

Line least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  Line l;
  l.slope = sxy / sxx;
  l.intercept = my - l.slope * mx;
  return l;
}

}  // namespace

bool BoundFit::has_flag(const std::string& f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }

std::string BoundFit::to_json() const {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["constants"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : constants) j["constants"][k] = v;
  j["window"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : window) j["window"][k] = v;
  j["max_violation"] = max_violation;
  j["boundary_fraction"] = boundary_fraction;
  j["samples"] = samples;
  j["passed"] = passed;
  j["flags"] = flags;
  j["diagnostics"] = diagnostics;
  j["series"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : series) j["series"][k] = v;
  j["data_hash"] = data_hash;
  return j.dump(2) + "\n";
}

BoundFit fit_gaussian_bound(const std::vector<KernelSample>& samples, double radius, double eps, double slack) {
  if (samples.empty()) throw InvalidInput("Gaussian fit needs at least one sample");
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const KernelSample& s = samples[i];
    if (!(s.t > 0.0) || !std::isfinite(s.p) || s.p < 0.0) {
      std::ostringstream msg;
      msg << "infeasible Gaussian fit: sample " << i << " has t = " << s.t << ", p = " << s.p;
      throw InvalidInput(msg.str());
    }
    if (radius > 0.0 && !(s.t < radius * radius)) throw InvalidInput("Gaussian fit samples must satisfy t < R^2");
    rows.push_back({s.t, s.x.x, s.x.y, s.y.x, s.y.y, s.p});
  }

  const std::size_t n = samples.size();
  std::vector<double> log_base(n), u(n);
  for (std::size_t i = 0; i < n; ++i) {
    const KernelSample& s = samples[i];
    const double r = distance(s.x, s.y);
    u[i] = r * r / s.t;
    log_base[i] = s.p > 0.0 ? std::log(s.p) + std::log(s.t) - s.t : -std::numeric_limits<double>::infinity();
  }
  // log a(b) = max_i log_base_i + u_i / b, decreasing in b
  auto log_a = [&](double inv_b) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) best = std::max(best, log_base[i] + u[i] * inv_b);
    return best;
  };
  BoundFit fit;
  fit.kind = "gaussian";
  const double log_target = log_a(0.0) + std::log1p(1e-6);
  if (!std::isfinite(log_target)) throw InvalidInput("all kernel samples are zero");
  // smallest b (largest 1/b) with log a(1/b) <= target
  double lo = 0.0, hi = 1.0;
  while (log_a(hi) <= log_target && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (log_a(mid) <= log_target) lo = mid;
    else hi = mid;
  }
  const double inv_b = lo;
  const double a = std::exp(log_a(inv_b));
  const double b = inv_b > 0.0 ? 1.0 / inv_b : std::numeric_limits<double>::infinity();
  fit.constants["a"] = a;
  fit.constants["b"] = b;
  if (radius > 0.0) fit.window["R"] = radius;
  if (eps > 0.0) fit.window["eps"] = eps;
  double t_lo = samples.front().t, t_hi = samples.front().t;
  std::vector<double> data, bound;
  for (std::size_t i = 0; i < n; ++i) {
    const KernelSample& s = samples[i];
    t_lo = std::min(t_lo, s.t);
    t_hi = std::max(t_hi, s.t);
    data.push_back(s.p);
    bound.push_back(a * std::exp(s.t) / s.t * std::exp(-u[i] * inv_b));
  }
  fit.window["t_min"] = t_lo;
  fit.window["t_max"] = t_hi;
  if (!std::isfinite(b)) fit.flags.push_back("b_unbounded");
  scan(fit, data, bound, slack);
  fit.data_hash = hash_rows(rows);
  return fit;
}

BoundFit fit_exit_bound(const std::vector<ExitSample>& samples, double slack) {
  std::vector<double> x, y;
  std::vector<std::vector<double>> rows;
  for (const ExitSample& s : samples) {
    if (!(s.r > 0.0) || !(s.t > 0.0)) throw InvalidInput("exit samples need r > 0 and t > 0");
    rows.push_back({s.r, s.t, s.p, s.std_error});
    if (s.p >= 1e-3 && s.p <= 0.5) {
      x.push_back(s.r * s.r / s.t);
      y.push_back(std::log(s.p));
    }
  }
  if (x.size() < 4) {
    std::ostringstream msg;
    msg << "exit fit needs at least 4 samples with p in [1e-3, 0.5], got " << x.size();
    throw InvalidInput(msg.str());
  }
  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  if (!(*mx - *mn > 1e-9 * std::max(1.0, std::abs(*mx)))) {
    throw InvalidInput("exit fit has insufficient spread in r^2/t");
  }
  const Line l = least_squares(x, y);
  BoundFit fit;
  fit.kind = "exit";
  const double gamma = -l.slope;
  const double c_ls = std::exp(l.intercept);
  double c = c_ls;
  for (const ExitSample& s : samples) {
    const double u = s.r * s.r / s.t;
    c = std::max(c, (s.p + 2.0 * s.std_error) * std::exp(gamma * u));
  }
  fit.constants["gamma"] = gamma;
  fit.constants["c_regression"] = c_ls;
  fit.constants["c"] = c;
  std::vector<double> data, bound;
  for (const ExitSample& s : samples) {
    data.push_back(s.p);
    bound.push_back(c * std::exp(-gamma * s.r * s.r / s.t));
  }
  fit.window["u_min"] = *mn;
  fit.window["u_max"] = *mx;
  fit.window["regression_points"] = static_cast<double>(x.size());
  scan(fit, data, bound, slack);
  if (!(gamma > 0.0)) {
    fit.passed = false;
    fit.diagnostics.push_back("fitted gamma is not positive");
  }
  fit.data_hash = hash_rows(rows);
  return fit;
}

BoundFit quarter_time(const std::vector<DisplacementSample>& samples, std::vector<double> candidates, double radius) {
  if (candidates.empty()) throw InvalidInput("quarter time needs candidate values");
  if (samples.empty()) throw InvalidInput("quarter time needs samples");
  std::sort(candidates.begin(), candidates.end());
  std::vector<std::vector<double>> rows;
  double u_lo = std::numeric_limits<double>::infinity(), u_hi = 0.0;
  double u_fail = std::numeric_limits<double>::infinity();
  for (const DisplacementSample& s : samples) {
    if (!(s.r > 0.0) || !(s.t > 0.0)) throw InvalidInput("displacement samples need r > 0 and t > 0");
    if (radius > 0.0 && !(s.r < 0.5 * radius)) throw InvalidInput("displacement samples need r < R / 2");
    rows.push_back({s.x.x, s.x.y, s.r, s.t, s.p, s.std_error});
    const double u = s.t / (s.r * s.r);
    u_lo = std::min(u_lo, u);
    u_hi = std::max(u_hi, u);
    if (s.p + 2.0 * s.std_error > 0.25) u_fail = std::min(u_fail, u);
  }
  BoundFit fit;
  fit.kind = "quarter";
  double best = 0.0;
  bool found = false;
  for (double d : candidates) {
    const bool supported = d >= u_lo && d <= u_hi;
    if (supported && d < u_fail) {
      best = d;
      found = true;
    }
  }
  if (!found) {
    fit.flags.push_back("floor");
    fit.diagnostics.push_back("no supported candidate passes; delta lies below the candidate grid");
    best = 0.0;
  } else if (!std::isfinite(u_fail)) {
    fit.flags.push_back("censored");
  }
  fit.constants["delta"] = best;
  fit.constants["first_failing_u"] = std::isfinite(u_fail) ? u_fail : -1.0;
  fit.window["u_min"] = u_lo;
  fit.window["u_max"] = u_hi;
  if (radius > 0.0) fit.window["R"] = radius;
  fit.samples = samples.size();
  // Every covered sample satisfies p + 2 stderr <= 1/4 by construction.
  double worst = -1.0;
  for (const DisplacementSample& s : samples) {
    if (found && s.t / (s.r * s.r) <= best) worst = std::max(worst, (s.p + 2.0 * s.std_error) / 0.25 - 1.0);
  }
  fit.max_violation = worst;
  fit.passed = found;
  fit.data_hash = hash_rows(rows);
  return fit;
}

BoundFit fit_kato_rate(const std::vector<ModulusSample>& curve) {
  if (curve.size() < 5) throw InvalidInput("Kato rate fit needs at least 5 points");
  std::vector<ModulusSample> c = curve;
  std::sort(c.begin(), c.end(), [](const ModulusSample& a, const ModulusSample& b) { return a.t < b.t; });
  if (!(c.front().t > 0.0) || c.back().t / c.front().t < 100.0 * (1.0 - 1e-12)) {
    throw InvalidInput("Kato rate fit needs times spanning at least 2 decades");
  }
  BoundFit fit;
  fit.kind = "kato";
  std::vector<std::vector<double>> rows;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < c.size(); ++i) {
    rows.push_back({c[i].t, c[i].modulus});
    if (i > 0 && c[i].modulus < c[i - 1].modulus) {
      fit.passed = false;
      std::ostringstream msg;
      msg << "modulus decreases between t = " << c[i - 1].t << " and t = " << c[i].t;
      fit.diagnostics.push_back(msg.str());
    }
    if (!(c[i].modulus > 0.0)) throw InvalidInput("Kato rate fit needs positive modulus values");
    x.push_back(std::log(c[i].t));
    y.push_back(std::log(c[i].modulus));
  }
  const Line l = least_squares(x, y);
  const double alpha = l.slope;
  const double constant = std::exp(l.intercept);
  double major = 0.0;
  for (const ModulusSample& s : c) major = std::max(major, s.modulus / std::pow(s.t, alpha));
  fit.constants["alpha"] = alpha;
  fit.constants["C"] = constant;
  fit.constants["C_majorant"] = major;
  fit.window["t_min"] = c.front().t;
  fit.window["t_max"] = c.back().t;
  if (!(alpha > 0.0)) {
    fit.passed = false;
    fit.diagnostics.push_back("modulus does not decay as t -> 0");
  }
  std::vector<double> data, bound;
  for (const ModulusSample& s : c) {
    data.push_back(s.modulus);
    bound.push_back(major * std::pow(s.t, alpha));
  }
  const bool monotone = fit.passed;
  scan(fit, data, bound, 1e-12);
  fit.passed = fit.passed && monotone;
  fit.data_hash = hash_rows(rows);
  return fit;
}

BoundFit sobolev_scan(const Domain& domain, const std::vector<double>& truncations, const SobolevScanOptions& options) {
  if (truncations.empty()) throw InvalidInput("Sobolev scan needs truncations");
  for (std::size_t i = 1; i < truncations.size(); ++i) {
    if (!(truncations[i] > truncations[i - 1])) throw InvalidInput("Sobolev truncations must increase");
  }
  BoundFit fit;
  fit.kind = "sobolev";
  if (domain.kind() != DomainKind::horn) fit.flags.push_back("not_a_horn");
  std::vector<double> values, constants, cells, iterations;
  std::vector<std::vector<double>> rows;
  SobolevOptions opt = options.optimizer;
  opt.exponent = options.exponent;
  GridOptions gopt;
  gopt.max_cells = options.max_cells;
  for (double x : truncations) {
    const Domain part = domain.truncated(x);
    const Grid grid = build_grid(part, options.spacing, gopt);
    const Operator op = assemble_neumann(grid);
    const SobolevEstimate est = sobolev_constant(op, opt);
    values.push_back(est.ratio);
    constants.push_back(est.constant_ratio);
    cells.push_back(static_cast<double>(grid.size()));
    iterations.push_back(est.iterations);
    rows.push_back({x, est.ratio});
    if (!est.converged) {
      std::ostringstream msg;
      msg << "not_converged@" << x;
      fit.flags.push_back(msg.str());
    }
  }
  bool increasing = true;
  for (std::size_t i = 1; i < values.size(); ++i) increasing &= values[i] > values[i - 1];
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  fit.series["truncation"] = truncations;
  fit.series["S"] = values;
  fit.series["constant_ratio"] = constants;
  fit.series["cells"] = cells;
  fit.series["iterations"] = iterations;
  fit.constants["exponent"] = options.exponent;
  fit.constants["growth_ratio"] = values.back() / values.front();
  fit.constants["relative_spread"] = (*mx - *mn) / *mn;
  fit.constants["strictly_increasing"] = increasing ? 1.0 : 0.0;
  fit.window["h"] = options.spacing;
  fit.samples = values.size();
  fit.passed = increasing;
  if (!increasing) fit.diagnostics.push_back("S-estimates are not strictly increasing across truncations");
  fit.data_hash = hash_rows(rows);
  return fit;
}

}  // namespace rbm
