#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rbmlab/discretize.hpp"

namespace rbm {

enum class EigenMethod { automatic, dense, lanczos };

struct EigenOptions {
  EigenMethod method = EigenMethod::automatic;
  /// automatic picks the dense solver up to this many rows.
  int dense_limit = 2500;
  int block_size = 8;
  std::uint64_t seed = 0x5eed;
  /// Required ||A phi - lambda M phi|| / ((1 + lambda) ||M phi||).
  double residual_tolerance = 1e-8;
};

/// Truncated eigendecomposition of A phi = lambda M phi, eigenvectors
/// M-orthonormal, eigenvalues ascending.
struct SpectralDecomposition {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // rows x count, local rows
  Eigen::VectorXd mass;
  std::vector<int> cells;
  std::vector<int> local_of;
  BoundaryCondition condition = BoundaryCondition::neumann;
  double max_residual = 0.0;  // largest relative residual over the pairs
  double t_min = 0.0;         // see compute_t_min
  std::string method;

  int rows() const { return static_cast<int>(eigenvectors.rows()); }
  int count() const { return static_cast<int>(eigenvalues.size()); }
  bool complete() const { return count() == rows(); }
  /// Relative size of rounding and eigenvector error in kernel sums.
  double accuracy_floor() const;
};

/// Computes the K smallest eigenpairs. Throws NumericalFailure with the
/// residual report when the solver cannot meet the residual tolerance.
SpectralDecomposition eigensolve(const Operator& op, int count, const EigenOptions& options = {});

enum class KernelProvenance { spectral, monte_carlo, exhaust_certified };

struct KernelEstimate {
  double t = 0.0;
  int i = 0;  // grid cells
  int j = 0;
  double value = 0.0;
  double tail = 0.0;
  KernelProvenance provenance = KernelProvenance::spectral;
};

/// Truncated series sum_k exp(-lambda_k t) phi_k(i) phi_k(j) with the
/// truncation bound exp(-lambda_K t / 2) sqrt(p_{t/2}(i,i) p_{t/2}(j,j)) plus
/// the accuracy floor. Cells outside the operator's mask give 0.
KernelEstimate heat_kernel(const SpectralDecomposition& sd, double t, int i, int j);

/// Kernel at arbitrary points: bilinear interpolation of cell values in both
/// arguments (see Grid::interpolation_weights).
KernelEstimate kernel_at(const SpectralDecomposition& sd, const Grid& grid, double t, Point x, Point y);
/// Kernel values for all pairs rows x cols (grid cells) at time t.
Eigen::MatrixXd kernel_block(const SpectralDecomposition& sd, double t, const std::vector<int>& rows,
                             const std::vector<int>& cols);
/// Matching truncation bounds for kernel_block.
Eigen::MatrixXd kernel_tail_block(const SpectralDecomposition& sd, double t, const std::vector<int>& rows,
                                  const std::vector<int>& cols);

/// Truncated diagonal p_t(i, i) for every local row.
Eigen::VectorXd kernel_diagonal(const SpectralDecomposition& sd, double t);
/// Truncation bound at (i, i) for every local row (without accuracy floor).
Eigen::VectorXd diagonal_tail(const SpectralDecomposition& sd, double t);

/// Smallest t with diagonal truncation bound <= 1e-3 times the diagonal
/// series value at every cell. Zero for a complete spectrum.
double compute_t_min(const SpectralDecomposition& sd);

/// Smallest t (on a fine geometric ladder above t_min) at which every pair of
/// cells has a truncated kernel exceeding its error bound, so that positivity
/// is certified for all pairs.
double certified_positivity_time(const SpectralDecomposition& sd, double t_upper = 10.0);

/// Dense discrete kernel exp(-t M^{-1} A) M^{-1} at t0, 2 t0, ..., 2^d t0,
/// computed by uniformization and squaring in nonnegative arithmetic only, so
/// entries keep full relative accuracy far below the spectral floor. `visit`
/// receives (t, kernel) with kernel(a, b) indexed by local rows.
void uniformized_ladder(const Operator& op, double t0, int doublings,
                        const std::function<void(double, const Eigen::MatrixXd&)>& visit);
/// sum_k exp(-lambda_k t) (phi_k^T M f) phi_k for a grid function f; zero on killed cells.
Eigen::VectorXd apply_semigroup(const SpectralDecomposition& sd, double t, const Eigen::VectorXd& f);

/// P_i(t < tau): semigroup applied to the indicator of the operator's cells,
/// clamped to [0, 1].
double survival(const SpectralDecomposition& sd, double t, int cell);
Eigen::VectorXd survival_all(const SpectralDecomposition& sd, double t);

}  // namespace rbm
