#include "rbmlab/exhaust.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "rbmlab/error.hpp"

namespace rbm {

namespace {

constexpr int kSupPointsPerDecade = 16;

std::vector<int> cells_where(const SpectralDecomposition& sd, const Mask& m, bool inside) {
  std::vector<int> out;
  for (int c : sd.cells) {
    if (m[static_cast<std::size_t>(c)] == inside) out.push_back(c);
  }
  return out;
}

// max over rows x cols of kernel + error bound at time s, evaluated in row chunks
double block_sup(const SpectralDecomposition& sd, double s, const std::vector<int>& rows,
                 const std::vector<int>& cols) {
  if (rows.empty() || cols.empty()) return 0.0;
  double best = 0.0;
  constexpr std::size_t chunk = 512;
  for (std::size_t r0 = 0; r0 < rows.size(); r0 += chunk) {
    const std::vector<int> part(rows.begin() + static_cast<std::ptrdiff_t>(r0),
                                rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), r0 + chunk)));
    const Eigen::MatrixXd v = kernel_block(sd, s, part, cols) + kernel_tail_block(sd, s, part, cols);
    best = std::max(best, v.maxCoeff());
  }
  return best;
}

void build_levels(ExhaustionLadder& ladder, const LadderOptions& options) {
  const std::size_t depth = ladder.masks.size();
  ladder.levels.resize(depth);
  std::vector<std::exception_ptr> errors(depth);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t n = next++; n < depth; n = next++) {
      try {
        const Operator op = assemble_part(*ladder.grid, ladder.masks[n]);
        const int k = std::min(options.eigen_count, op.rows());
        ladder.levels[n] = eigensolve(op, k, options.eigen);
      } catch (...) {
        errors[n] = std::current_exception();
      }
    }
  };
  const int threads = std::clamp(options.threads, 1, static_cast<int>(depth));
  std::vector<std::thread> pool;
  for (int i = 1; i < threads; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void tabulate_sup(ExhaustionLadder& ladder, double t_max) {
  const SpectralDecomposition& deep = ladder.levels.back();
  const double floor = std::max(deep.t_min, 1e-6);
  if (!(t_max > floor)) throw InvalidInput("sup table needs t_max above the deepest level's t_min");
  const double r2 = ladder.radius * ladder.radius;

  std::vector<double> times;
  const double ratio = std::pow(10.0, 1.0 / kSupPointsPerDecade);
  for (double s = floor; s < t_max * (1.0 + 1e-12); s *= ratio) times.push_back(s);
  if (times.back() < t_max) times.push_back(t_max * ratio);  // covers queries up to t_max
  if (r2 > floor && r2 < times.back()) times.push_back(r2);
  std::sort(times.begin(), times.end());

  const std::vector<int> outside = cells_where(deep, ladder.ball, false);
  const std::vector<int> everywhere = deep.cells;
  const std::vector<int> window = ladder.window.indices();
  ladder.sup_times = times;
  ladder.sup_outside.assign(times.size(), 0.0);
  ladder.sup_anywhere.assign(times.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 0; k < times.size(); ++k) {
    ladder.sup_outside[k] = block_sup(deep, times[k], outside, window);
    if (times[k] >= r2) ladder.sup_anywhere[k] = block_sup(deep, times[k], everywhere, window);
  }
  ladder.sup_floor_time = floor;
}

double exit_bound(const SpectralDecomposition& sd, double t, int x) {
  const int l = sd.local_of[static_cast<std::size_t>(x)];
  if (l < 0) return 1.0;
  const double surv = survival(sd, t, x);
  double err = sd.accuracy_floor();
  if (!sd.complete()) {
    const double diag = kernel_diagonal(sd, t)[l];
    err += std::exp(-0.5 * sd.eigenvalues[sd.count() - 1] * t) * std::sqrt(std::max(diag, 0.0) * sd.mass.sum());
  }
  return std::min(1.0, 1.0 - surv + err);
}

}  // namespace

double ExhaustionLadder::c_hat(double t) const {
  if (sup_times.empty()) throw InvalidInput("ladder has no sup table");
  if (!(t > 0.0) || t > sup_times.back()) {
    std::ostringstream msg;
    msg << "time " << t << " outside the tabulated sup range (0, " << sup_times.back() << "]";
    throw InvalidInput(msg.str());
  }
  // Ladder points up to the first one at or beyond the cut keep the sampled
  // sup conservative for times between ladder points.
  auto upto = [&](double cut) {
    std::size_t k = 0;
    while (k + 1 < sup_times.size() && sup_times[k] < cut) ++k;
    return k;
  };
  const double r2 = radius * radius;
  const double cut = std::min(r2, t);
  double best = 0.0;
  const std::size_t k_out = upto(cut);
  for (std::size_t k = 0; k <= k_out; ++k) best = std::max(best, sup_outside[k]);
  if (t > r2) {
    const std::size_t k_any = upto(t);
    for (std::size_t k = 0; k <= k_any; ++k) {
      if (sup_times[k] >= r2 && !std::isnan(sup_anywhere[k])) best = std::max(best, sup_anywhere[k]);
    }
  }
  return best;
}

ExhaustionLadder build_ladder(std::shared_ptr<const Grid> grid, const Domain& domain, const LadderOptions& options) {
  if (!grid) throw InvalidInput("ladder needs a grid");
  if (options.schedule.empty()) throw InvalidInput("exhaustion schedule is empty");
  if (!(options.radius > 0.0)) throw InvalidInput("window radius R must be positive");
  if (!(options.eps > 0.0 && options.eps < 1.0)) throw InvalidInput("window eps must lie in (0, 1)");
  if (options.eigen_count < 1) throw InvalidInput("eigen count must be positive");

  ExhaustionLadder ladder;
  ladder.grid = grid;
  ladder.schedule = options.schedule;
  ladder.center = options.center;
  ladder.radius = options.radius;
  ladder.eps = options.eps;
  for (std::size_t n = 0; n < options.schedule.size(); ++n) {
    ladder.masks.push_back(truncate(*grid, options.schedule, options.scheme, n, options.center));
    if (ladder.masks.back().empty()) {
      std::ostringstream msg;
      msg << "truncation level " << n + 1 << " contains no cells";
      throw InvalidInput(msg.str());
    }
    if (n > 0 && !ladder.masks[n - 1].subset_of(ladder.masks[n])) throw InvalidInput("truncation masks are not nested");
  }
  const Mask enlarged = grid->ball(options.center, options.radius + 1.0, "D_R+1");
  if (!enlarged.subset_of(ladder.masks.front())) {
    throw InvalidInput("the first truncation must contain D_{R+1}; enlarge the schedule or shrink R");
  }
  ladder.ball = grid->ball(options.center, options.radius, "D_R");
  ladder.window = grid->interior_window(domain, options.center, options.radius, options.eps, "D_eps,R");
  if (ladder.window.empty()) throw InvalidInput("window D_{eps,R} contains no cells at this spacing");

  build_levels(ladder, options);
  for (std::size_t n = 1; n < ladder.depth(); ++n) {
    // Dirichlet monotonicity of the principal eigenvalue, up to solver accuracy.
    const double a = ladder.levels[n - 1].eigenvalues[0];
    const double b = ladder.levels[n].eigenvalues[0];
    if (a < b - 1e-8 * (1.0 + b)) throw NumericalFailure("principal eigenvalues are not monotone along the ladder");
  }
  tabulate_sup(ladder, options.t_max);
  return ladder;
}

CertifiedKernel certified_kernel(const ExhaustionLadder& ladder, std::size_t n, double t, int x, int y) {
  if (n >= ladder.depth()) throw InvalidInput("ladder level out of range");
  const std::size_t cells = ladder.grid->size();
  if (x < 0 || y < 0 || static_cast<std::size_t>(x) >= cells || static_cast<std::size_t>(y) >= cells) {
    throw InvalidInput("cell index out of range");
  }
  if (!ladder.window[static_cast<std::size_t>(y)]) throw InvalidInput("target cell lies outside the window D_{eps,R}");
  const SpectralDecomposition& sd = ladder.levels[n];
  const KernelEstimate k = heat_kernel(sd, t, x, y);
  CertifiedKernel out;
  out.level = n;
  out.t = t;
  out.x = x;
  out.y = y;
  out.value = k.value;
  out.tail = k.tail;
  out.exit_probability = exit_bound(sd, t, x);
  out.c_hat = ladder.c_hat(t);
  out.certificate = out.c_hat * out.exit_probability;
  return out;
}

LimitEstimate limit_kernel(const ExhaustionLadder& ladder, double t, int x, int y, double tol) {
  if (!(tol >= 0.0)) throw InvalidInput("tolerance must be nonnegative");
  LimitEstimate out;
  bool any = false;
  for (std::size_t n = 0; n < ladder.depth(); ++n) {
    if (t < ladder.levels[n].t_min) continue;
    const CertifiedKernel c = certified_kernel(ladder, n, t, x, y);
    out.kernel = {t, x, y, c.value, c.tail, KernelProvenance::exhaust_certified};
    out.level_used = n;
    out.certificate = c.certificate;
    any = true;
    if (tol > 0.0 && c.certificate <= tol) {
      out.reached = true;
      return out;
    }
  }
  if (!any) throw InvalidInput("time lies below t_min at every ladder level");
  return out;
}

KernelEstimate part_kernel(const Grid& grid, const Mask& u, double t, int x, int y, int eigen_count,
                           const EigenOptions& options) {
  const Operator op = assemble_part(grid, u);
  const SpectralDecomposition sd = eigensolve(op, std::min(eigen_count, op.rows()), options);
  return heat_kernel(sd, t, x, y);
}

}  // namespace rbm
