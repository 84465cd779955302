#pragma once

#include <map>
#include <string>
#include <vector>

#include "rbmlab/discretize.hpp"
#include "rbmlab/geometry.hpp"

namespace rbm {

/// Fitted constants of one of the paper's bound forms plus the diagnostics of
/// the post-fit majorization scan.
struct BoundFit {
  std::string kind;  // gaussian | exit | quarter | kato | sobolev
  std::map<std::string, double> constants;
  std::map<std::string, double> window;
  /// max over samples of data / bound - 1 (<= 0 when the bound dominates).
  double max_violation = 0.0;
  /// Fraction of samples within 1e-6 (relative) of equality.
  double boundary_fraction = 0.0;
  std::size_t samples = 0;
  bool passed = true;
  std::vector<std::string> flags;
  std::vector<std::string> diagnostics;
  std::map<std::string, std::vector<double>> series;  // per-point outputs
  std::string data_hash;                              // SHA-256 of the input table

  bool has_flag(const std::string& f) const;
  std::string to_json() const;
};

struct KernelSample {
  double t = 0.0;
  Point x;
  Point y;
  double p = 0.0;
};

/// Minimal a, then minimal b, with p <= a e^t t^-1 exp(-|x-y|^2 / (b t)) at
/// every sample; a is pinned to (1 + 1e-6) times its b -> infinity limit and
/// b found by bisection. `radius` (R, 0 to skip) enforces t < R^2.
BoundFit fit_gaussian_bound(const std::vector<KernelSample>& samples, double radius = 0.0, double eps = 0.0,
                            double slack = 0.05);

struct ExitSample {
  double r = 0.0;
  double t = 0.0;
  double p = 0.0;
  double std_error = 0.0;
};

/// Least squares of log p on r^2 / t over samples with p in [1e-3, 0.5], then
/// c inflated until c exp(-gamma r^2 / t) >= p + 2 stderr at every sample.
/// Throws InvalidInput with fewer than 4 usable points or no spread in r^2/t.
BoundFit fit_exit_bound(const std::vector<ExitSample>& samples, double slack = 0.05);

struct DisplacementSample {
  Point x;
  double r = 0.0;
  double t = 0.0;
  double p = 0.0;
  double std_error = 0.0;
};

/// Largest candidate delta such that every sample with t <= delta r^2 has
/// p + 2 stderr <= 1/4. Flags "floor" when no supported candidate passes and
/// "censored" when no sample fails (the threshold lies beyond the data).
BoundFit quarter_time(const std::vector<DisplacementSample>& samples, std::vector<double> candidates,
                      double radius = 0.0);

struct ModulusSample {
  double t = 0.0;
  double modulus = 0.0;
};

/// log-log regression modulus ~ C t^alpha. Needs >= 5 points spanning >= 2
/// decades; non-monotone input fails with a diagnostic.
BoundFit fit_kato_rate(const std::vector<ModulusSample>& curve);

struct SobolevScanOptions {
  double exponent = 4.0;
  double spacing = 0.02;
  SobolevOptions optimizer;
  std::size_t max_cells = 250000;
};

/// S-estimates on domain.truncated(X) for each X; asserts strict increase.
BoundFit sobolev_scan(const Domain& domain, const std::vector<double>& truncations,
                      const SobolevScanOptions& options);

}  // namespace rbm
