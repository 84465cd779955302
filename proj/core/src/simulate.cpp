#include "rbmlab/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>
#include <thread>

#include "rbmlab/error.hpp"

namespace rbm {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

constexpr std::size_t kChunk = 256;

// Runs body(path) for every path on `threads` workers; chunks are claimed
// dynamically but every path writes only its own slots.
template <class Body>
void for_paths(std::size_t paths, int threads, Body body) {
  const std::size_t chunks = (paths + kChunk - 1) / kChunk;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks && !failed; c = next++) {
      try {
        const std::size_t end = std::min(paths, (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) body(i);
      } catch (...) {
        if (!failed.exchange(true)) error = std::current_exception();
      }
    }
  };
  const int n = std::clamp(threads, 1, static_cast<int>(std::max<std::size_t>(chunks, 1)));
  std::vector<std::thread> pool;
  for (int i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

// Path-order summation keeps reductions independent of the worker count.
MeanSe mean_se(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  const double var = v.size() > 1 ? ss / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n)};
}

std::size_t step_index(double time, const SimulationSpec& spec, std::size_t steps) {
  if (time == spec.horizon) return steps;
  const double k = time / spec.step;
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-6 * std::max(1.0, r)) {
    std::ostringstream msg;
    msg << "checkpoint " << time << " is not a multiple of the step " << spec.step;
    throw InvalidInput(msg.str());
  }
  return static_cast<std::size_t>(r);
}

}  // namespace

PathRng::PathRng(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t state = seed;
  const std::uint64_t mixed = splitmix64(state) ^ (stream * 0xd1b54a32d192ed03ULL);
  state = mixed;
  for (auto& s : s_) s = splitmix64(state);
}

PathRng::result_type PathRng::operator()() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

ExitRegion ExitRegion::ball(Point center, double radius, std::string name) {
  if (!(radius > 0.0)) throw InvalidInput("exit ball radius must be positive");
  ExitRegion r;
  r.kind = Kind::ball;
  r.name = std::move(name);
  r.center = center;
  r.radius = radius;
  return r;
}

ExitRegion ExitRegion::x_below(double x_cut, std::string name) {
  ExitRegion r;
  r.kind = Kind::x_below;
  r.name = std::move(name);
  r.x_cut = x_cut;
  return r;
}

ExitRegion ExitRegion::cells(const Grid& grid, Mask mask) {
  if (mask.size() != grid.size()) throw InvalidInput("mask does not belong to this grid");
  ExitRegion r;
  r.kind = Kind::cells;
  r.name = mask.name();
  r.grid = &grid;
  r.mask = std::move(mask);
  return r;
}

bool ExitRegion::inside(Point p) const {
  switch (kind) {
    case Kind::ball: return distance(p, center) < radius;
    case Kind::x_below: return p.x < x_cut;
    case Kind::cells: {
      const auto c = grid->locate(p);
      return c && mask[static_cast<std::size_t>(*c)];
    }
  }
  return false;
}

PathEnsemble sample_paths(const Domain& domain, const SimulationSpec& spec) {
  if (!domain.contains_closure(spec.start, 1e-12)) throw InvalidInput("start point lies outside the closed domain");
  if (!(spec.horizon >= 0.0)) throw InvalidInput("horizon must be nonnegative");
  if (!(spec.step > 0.0)) throw InvalidInput("time step must be positive");
  if (spec.horizon > 0.0 && spec.step > spec.horizon) throw InvalidInput("time step exceeds the horizon");
  if (spec.paths == 0) throw InvalidInput("path count must be at least 1");
  for (double e : spec.strip_widths) {
    if (!(e > 0.0)) throw InvalidInput("strip width must be positive");
  }

  PathEnsemble out;
  out.spec = spec;
  const std::size_t steps =
      spec.horizon > 0.0 ? static_cast<std::size_t>(std::ceil(spec.horizon / spec.step - 1e-9)) : 0;
  out.steps = steps;
  std::vector<std::size_t> check_steps;
  for (double c : spec.checkpoints) {
    if (c < 0.0 || c > spec.horizon) throw InvalidInput("checkpoint outside [0, T]");
    check_steps.push_back(step_index(c, spec, steps));
  }
  for (double e : spec.strip_widths) out.strip_under_resolved |= spec.step >= e * e;

  const std::size_t n = spec.paths;
  const std::size_t n_check = check_steps.size();
  const std::size_t n_region = spec.regions.size();
  const std::size_t n_strip = spec.strip_widths.size();
  out.positions.assign(n_check, std::vector<Point>(n));
  out.exit_times.assign(n_region, std::vector<double>(n, kNotExited));
  out.local_time.assign(n_strip, std::vector<std::vector<double>>(n_check, std::vector<double>(n, 0.0)));
  const bool may_stop = spec.stop_when_exited && n_check == 0 && n_strip == 0 && n_region > 0;
  double max_strip = 0.0;
  for (double e : spec.strip_widths) max_strip = std::max(max_strip, e);

  auto body = [&](std::size_t path) {
    PathRng rng(spec.seed, path);
    std::normal_distribution<double> gauss;
    Point x = spec.start;
    std::vector<double> acc(n_strip, 0.0);
    std::size_t open = n_region;
    for (std::size_t c = 0; c < n_check; ++c) {
      if (check_steps[c] == 0) out.positions[c][path] = x;
    }
    for (std::size_t k = 0; k < steps; ++k) {
      const double dt = k + 1 < steps ? spec.step : spec.horizon - static_cast<double>(k) * spec.step;
      const double t_end = std::min(static_cast<double>(k + 1) * spec.step, spec.horizon);
      if (n_strip > 0 && distance(x, spec.strip_center) < spec.strip_radius) {
        const double d = domain.distance_to_boundary(x);
        if (d < max_strip) {
          for (std::size_t e = 0; e < n_strip; ++e) {
            if (d < spec.strip_widths[e]) acc[e] += dt;
          }
        }
      }
      const double sd = std::sqrt(dt);
      const double z1 = gauss(rng);
      const double z2 = gauss(rng);
      const Point proposal{x.x + sd * z1, x.y + sd * z2};
      const Point next = domain.reflect_step(x, proposal);
      for (std::size_t r = 0; r < n_region; ++r) {
        double& tau = out.exit_times[r][path];
        if (tau != kNotExited) continue;
        const ExitRegion& region = spec.regions[r];
        const bool still = region.kind == ExitRegion::Kind::cells ? region.inside(next) : region.inside(proposal);
        if (!still) {
          tau = t_end;
          --open;
        }
      }
      x = next;
      for (std::size_t c = 0; c < n_check; ++c) {
        if (check_steps[c] == k + 1) {
          out.positions[c][path] = x;
          for (std::size_t e = 0; e < n_strip; ++e) out.local_time[e][c][path] = acc[e] / spec.strip_widths[e];
        }
      }
      if (may_stop && open == 0) break;
    }
  };
  for_paths(n, spec.threads, body);
  return out;
}

std::vector<TailPoint> exit_tail(const PathEnsemble& ensemble, std::size_t region, const std::vector<double>& times) {
  if (region >= ensemble.exit_times.size()) throw InvalidInput("region index out of range");
  const auto& tau = ensemble.exit_times[region];
  const double n = static_cast<double>(tau.size());
  std::vector<TailPoint> out;
  for (double t : times) {
    if (t > ensemble.spec.horizon * (1.0 + 1e-12)) throw InvalidInput("tail time beyond the simulated horizon");
    std::size_t hits = 0;
    for (double s : tau) hits += s <= t * (1.0 + 1e-12);
    const double p = static_cast<double>(hits) / n;
    out.push_back({t, p, std::sqrt(p * (1.0 - p) / n)});
  }
  return out;
}

std::vector<TailPoint> mc_exit_tail(const Domain& domain, Point x, double r, const std::vector<double>& times,
                                    double delta, std::size_t paths, std::uint64_t seed, int threads) {
  if (times.empty()) throw InvalidInput("exit tail needs at least one time");
  SimulationSpec spec;
  spec.start = x;
  spec.horizon = *std::max_element(times.begin(), times.end());
  spec.step = delta;
  spec.paths = paths;
  spec.seed = seed;
  spec.regions.push_back(ExitRegion::ball(x, r));
  spec.stop_when_exited = true;
  spec.threads = threads;
  return exit_tail(sample_paths(domain, spec), 0, times);
}

ExitTimeStats exit_time_stats(const PathEnsemble& ensemble, std::size_t region) {
  if (region >= ensemble.exit_times.size()) throw InvalidInput("region index out of range");
  std::vector<double> exited;
  ExitTimeStats out;
  for (double s : ensemble.exit_times[region]) {
    if (s == kNotExited) ++out.censored;
    else exited.push_back(s);
  }
  if (exited.empty()) throw NumericalFailure("no path left the region before the horizon");
  const MeanSe m = mean_se(exited);
  out.mean = m.mean;
  out.std_error = m.se;
  return out;
}

TailPoint displacement_tail(const PathEnsemble& ensemble, std::size_t checkpoint, double r) {
  if (checkpoint >= ensemble.positions.size()) throw InvalidInput("checkpoint index out of range");
  const auto& pos = ensemble.positions[checkpoint];
  std::size_t far = 0;
  for (const Point& p : pos) far += distance(p, ensemble.spec.start) >= r;
  const double n = static_cast<double>(pos.size());
  const double p = static_cast<double>(far) / n;
  return {ensemble.spec.checkpoints[checkpoint], p, std::sqrt(p * (1.0 - p) / n)};
}

Histogram histogram(const PathEnsemble& ensemble, std::size_t checkpoint, const Grid& grid) {
  if (checkpoint >= ensemble.positions.size()) throw InvalidInput("checkpoint index out of range");
  Histogram h;
  h.t = ensemble.spec.checkpoints[checkpoint];
  h.counts.assign(grid.size(), 0);
  for (const Point& p : ensemble.positions[checkpoint]) {
    const auto c = grid.locate(p);
    ++h.counts[static_cast<std::size_t>(c ? *c : grid.nearest_cell(p))];
  }
  const double n = static_cast<double>(ensemble.positions[checkpoint].size());
  h.density.resize(grid.size());
  h.std_error.resize(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double m = grid.cells()[c].measure;
    const double p = static_cast<double>(h.counts[c]) / n;
    h.density[c] = p / m;
    h.std_error[c] = std::sqrt(p * (1.0 - p) / n) / m;
  }
  return h;
}

Histogram mc_kernel(const Domain& domain, Point x0, double t, const Grid& grid, double delta, std::size_t paths,
                    std::uint64_t seed, int threads) {
  if (t < 10.0 * delta) throw InvalidInput("histogram time must be at least 10 steps");
  SimulationSpec spec;
  spec.start = x0;
  spec.horizon = t;
  spec.step = delta;
  spec.paths = paths;
  spec.seed = seed;
  spec.checkpoints = {t};
  spec.threads = threads;
  return histogram(sample_paths(domain, spec), 0, grid);
}

std::vector<LocalTimeStats> mc_local_time(const Domain& domain, Point x0, double horizon, double eps, double delta,
                                          std::size_t paths, std::uint64_t seed, int threads,
                                          std::vector<double> checkpoints) {
  if (!(eps > 0.0)) throw InvalidInput("strip width must be positive");
  if (checkpoints.empty()) checkpoints.push_back(horizon);
  SimulationSpec spec;
  spec.start = x0;
  spec.horizon = horizon;
  spec.step = delta;
  spec.paths = paths;
  spec.seed = seed;
  spec.checkpoints = checkpoints;
  spec.strip_widths = {eps, 0.5 * eps};
  spec.threads = threads;
  const PathEnsemble ens = sample_paths(domain, spec);

  std::vector<LocalTimeStats> out;
  for (std::size_t c = 0; c < checkpoints.size(); ++c) {
    const auto& full = ens.local_time[0][c];
    const auto& half = ens.local_time[1][c];
    std::vector<double> diff(full.size()), rich(full.size());
    for (std::size_t i = 0; i < full.size(); ++i) {
      diff[i] = full[i] - half[i];
      rich[i] = 2.0 * half[i] - full[i];
    }
    const MeanSe a = mean_se(full), b = mean_se(half), d = mean_se(diff), r = mean_se(rich);
    LocalTimeStats s;
    s.t = checkpoints[c];
    s.eps = eps;
    s.mean = a.mean;
    s.std_error = a.se;
    s.half_mean = b.mean;
    s.half_std_error = b.se;
    s.difference_std_error = d.se;
    s.richardson = r.mean;
    s.richardson_std_error = r.se;
    s.under_resolved = ens.strip_under_resolved;
    out.push_back(s);
  }
  return out;
}

std::vector<ModulusPoint> kato_modulus(const SpectralDecomposition& sd, const Grid& grid, const Mask& k,
                                       const std::vector<double>& times) {
  if (k.size() != grid.size()) throw InvalidInput("mask does not belong to this grid");
  if (sd.local_of.size() != grid.size()) throw InvalidInput("decomposition does not belong to this grid");
  // b_k = sum over boundary faces in K of w_f phi_k(cell(f))
  Eigen::VectorXd b = Eigen::VectorXd::Zero(sd.count());
  for (const BoundaryFace& f : grid.boundary_faces()) {
    if (!k[static_cast<std::size_t>(f.cell)]) continue;
    const int l = sd.local_of[static_cast<std::size_t>(f.cell)];
    if (l < 0) continue;
    b += f.length * sd.eigenvectors.row(l).transpose();
  }
  std::vector<ModulusPoint> out;
  for (double t : times) {
    if (!(t > 0.0)) throw InvalidInput("modulus times must be positive");
    Eigen::VectorXd g(sd.count());
    for (int j = 0; j < sd.count(); ++j) {
      const double lam = sd.eigenvalues[j];
      g[j] = lam * t > 1e-12 ? -std::expm1(-lam * t) / lam : t;
    }
    const Eigen::VectorXd values = sd.eigenvectors * g.cwiseProduct(b);
    ModulusPoint p;
    p.t = t;
    Eigen::Index arg = 0;
    p.modulus = std::max(0.0, values.size() > 0 ? values.maxCoeff(&arg) : 0.0);
    p.argmax_cell = values.size() > 0 ? sd.cells[static_cast<std::size_t>(arg)] : -1;
    p.unreliable = t < sd.t_min;
    out.push_back(p);
  }
  return out;
}

}  // namespace rbm
