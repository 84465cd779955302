#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "rbmlab/geometry.hpp"
#include "rbmlab/grid.hpp"
#include "rbmlab/spectral.hpp"

namespace rbm {

/// xoshiro256** seeded through splitmix64; one independent stream per
/// (seed, path index) pair.
class PathRng {
 public:
  using result_type = std::uint64_t;
  PathRng(std::uint64_t seed, std::uint64_t stream);
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()();

 private:
  std::uint64_t s_[4];
};

/// Region whose first exit time is recorded. Ball and x-cut regions test the
/// pre-reflection proposal; cell masks test the reflected position.
struct ExitRegion {
  enum class Kind { ball, x_below, cells };
  Kind kind = Kind::ball;
  std::string name;
  Point center;
  double radius = 0.0;
  double x_cut = 0.0;
  const Grid* grid = nullptr;
  Mask mask;

  static ExitRegion ball(Point center, double radius, std::string name = "ball");
  static ExitRegion x_below(double x_cut, std::string name = "x-cut");
  static ExitRegion cells(const Grid& grid, Mask mask);
  bool inside(Point p) const;
};

struct SimulationSpec {
  Point start;
  double horizon = 0.0;  // T
  double step = 1e-4;    // delta
  std::size_t paths = 1;
  std::uint64_t seed = 0;
  std::vector<double> checkpoints;  // multiples of delta in [0, T]
  std::vector<ExitRegion> regions;
  std::vector<double> strip_widths;  // eps of each local-time accumulator
  /// Local time counts only steps whose position lies in this ball (K).
  Point strip_center;
  double strip_radius = std::numeric_limits<double>::infinity();
  /// Stop a path once every region has been exited (no checkpoints or strips).
  bool stop_when_exited = false;
  int threads = 1;
};

inline constexpr double kNotExited = std::numeric_limits<double>::infinity();

/// Simulated reflected paths: X_{k+1} = reflect(X_k, X_k + sqrt(delta) Z_k).
struct PathEnsemble {
  SimulationSpec spec;
  std::size_t steps = 0;
  /// positions[c][i]: path i at checkpoint c
  std::vector<std::vector<Point>> positions;
  /// exit_times[r][i]: first step time whose move leaves region r, or kNotExited
  std::vector<std::vector<double>> exit_times;
  /// local_time[e][c][i]: (1/eps) * sum of delta over steps in the strip up to checkpoint c
  std::vector<std::vector<std::vector<double>>> local_time;
  bool strip_under_resolved = false;  // some delta >= eps^2
};

/// Throws InvalidInput for a start outside the closure, delta > T, N = 0, or
/// checkpoints that are not multiples of delta. Results do not depend on
/// `threads`.
PathEnsemble sample_paths(const Domain& domain, const SimulationSpec& spec);

struct TailPoint {
  double t = 0.0;
  double p_hat = 0.0;
  double std_error = 0.0;
};

/// P_x(tau_{B(x,r)} <= t) for each t, with binomial standard errors.
std::vector<TailPoint> mc_exit_tail(const Domain& domain, Point x, double r, const std::vector<double>& times,
                                    double delta, std::size_t paths, std::uint64_t seed, int threads = 1);

/// Exit tails of an arbitrary region from one ensemble.
std::vector<TailPoint> exit_tail(const PathEnsemble& ensemble, std::size_t region, const std::vector<double>& times);

struct ExitTimeStats {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t censored = 0;  // paths still inside at the horizon
};
ExitTimeStats exit_time_stats(const PathEnsemble& ensemble, std::size_t region);

/// P_x(|X_t - x| >= r) at checkpoint c.
TailPoint displacement_tail(const PathEnsemble& ensemble, std::size_t checkpoint, double r);

struct Histogram {
  double t = 0.0;
  std::vector<double> density;  // per grid cell
  std::vector<double> std_error;  // per grid cell
  std::vector<std::size_t> counts;
};

/// Per-cell density count / (N * measure) of X_t.
Histogram mc_kernel(const Domain& domain, Point x0, double t, const Grid& grid, double delta, std::size_t paths,
                    std::uint64_t seed, int threads = 1);
Histogram histogram(const PathEnsemble& ensemble, std::size_t checkpoint, const Grid& grid);

struct LocalTimeStats {
  double t = 0.0;
  double eps = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  double half_mean = 0.0;  // same paths, strip eps / 2
  double half_std_error = 0.0;
  double difference_std_error = 0.0;  // paired standard error of mean - half_mean
  double richardson = 0.0;  // 2 * half_mean - mean
  double richardson_std_error = 0.0;
  bool under_resolved = false;
};

/// Strip estimator of E[L_t] at each checkpoint (or at T when none given).
std::vector<LocalTimeStats> mc_local_time(const Domain& domain, Point x0, double horizon, double eps, double delta,
                                          std::size_t paths, std::uint64_t seed, int threads = 1,
                                          std::vector<double> checkpoints = {});

struct ModulusPoint {
  double t = 0.0;
  double modulus = 0.0;
  int argmax_cell = -1;
  bool unreliable = false;  // t below the decomposition's t_min
};

/// max over cells x of sum_{boundary faces f in K} w_f int_0^t p_s(x, cell(f)) ds,
/// integrated in closed form per eigenmode: (1 - exp(-lambda t)) / lambda.
std::vector<ModulusPoint> kato_modulus(const SpectralDecomposition& sd, const Grid& grid, const Mask& k,
                                       const std::vector<double>& times);

}  // namespace rbm
