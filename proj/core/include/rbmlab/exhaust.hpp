#pragma once

#include <memory>
#include <string>
#include <vector>

#include "rbmlab/discretize.hpp"
#include "rbmlab/geometry.hpp"
#include "rbmlab/grid.hpp"
#include "rbmlab/spectral.hpp"

namespace rbm {

struct LadderOptions {
  std::vector<double> schedule;  // ball radii or x-cuts, strictly increasing
  TruncationScheme scheme = TruncationScheme::x_cut;
  Point center;                  // centre of B(R) and of ball truncations
  double radius = 1.0;           // R
  double eps = 0.2;              // window D_{eps,R}
  int eigen_count = 300;         // K per level, capped by the level size
  EigenOptions eigen;
  /// Largest time the sup constant is tabulated for.
  double t_max = 1.0;
  int threads = 1;
};

/// Nested truncations K_1 c K_2 c ... of one grid with the part-process
/// decomposition of every level and the sup constant of the window.
struct ExhaustionLadder {
  std::shared_ptr<const Grid> grid;
  std::vector<double> schedule;
  std::vector<Mask> masks;
  std::vector<SpectralDecomposition> levels;
  Point center;
  double radius = 0.0;
  double eps = 0.0;
  Mask ball;    // D_R
  Mask window;  // D_{eps,R}

  /// C_hat(t) = max over the time ladder s <= t of the deepest level's kernel
  /// plus its error bound, for x' outside D_R (s <= R^2 ^ t) or anywhere
  /// (R^2 ^ t < s <= t) and y' in the window.
  std::vector<double> sup_times;
  std::vector<double> sup_outside;  // running max of the x' outside D_R table
  std::vector<double> sup_anywhere;  // per-time max over all x'
  double sup_floor_time = 0.0;

  std::size_t depth() const { return levels.size(); }
  double c_hat(double t) const;
};

/// Builds every level (killed operator on its mask, K smallest eigenpairs).
/// Throws InvalidInput unless masks are nested and D_{R+1} lies in K_1.
ExhaustionLadder build_ladder(std::shared_ptr<const Grid> grid, const Domain& domain, const LadderOptions& options);

struct CertifiedKernel {
  std::size_t level = 0;  // zero-based
  double t = 0.0;
  int x = 0;
  int y = 0;
  double value = 0.0;
  double tail = 0.0;          // error bound of value
  double exit_probability = 0.0;  // 1 - survival at level n, plus its error bound
  double c_hat = 0.0;
  double certificate = 0.0;   // c_hat * exit_probability
};

/// Level-n kernel with the bound on p_t - p_t^n. Throws InvalidInput when y
/// lies outside the window or t is below the level's t_min.
CertifiedKernel certified_kernel(const ExhaustionLadder& ladder, std::size_t n, double t, int x, int y);

struct LimitEstimate {
  KernelEstimate kernel;
  std::size_t level_used = 0;
  double certificate = 0.0;
  bool reached = false;  // certificate <= tol at level_used
};

/// Value of the smallest level whose certificate is <= tol; the deepest level
/// flagged as not reached otherwise.
LimitEstimate limit_kernel(const ExhaustionLadder& ladder, double t, int x, int y, double tol);

/// Killed kernel of an arbitrary mask U (assembled and solved on demand).
KernelEstimate part_kernel(const Grid& grid, const Mask& u, double t, int x, int y, int eigen_count = 400,
                           const EigenOptions& options = {});

}  // namespace rbm
