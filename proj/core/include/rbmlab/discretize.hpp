#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "rbmlab/grid.hpp"

namespace rbm {

using SparseMatrix = Eigen::SparseMatrix<double>;

enum class BoundaryCondition { neumann, killed };

/// Discrete generator of the form E(f, f) = 1/2 int |grad f|^2 dm on a set of
/// grid cells: f^T A f equals 1/2 sum over faces of w (f_a - f_b)^2.
///
/// Rows are local; `cells[r]` is the grid cell of row r and `local_of[c]` the
/// row of grid cell c (-1 when the cell is killed).
struct Operator {
  SparseMatrix stiffness;
  Eigen::VectorXd mass;
  std::vector<int> cells;
  std::vector<int> local_of;
  std::vector<Point> positions;  // centroid of each row's cell
  BoundaryCondition condition = BoundaryCondition::neumann;
  Mask mask;

  int rows() const { return static_cast<int>(cells.size()); }
  double energy(const Eigen::VectorXd& f) const { return f.dot(stiffness * f); }
  /// Lifts a row vector to a grid vector, zero on killed cells.
  Eigen::VectorXd to_grid(const Eigen::VectorXd& local) const;
  Eigen::VectorXd from_grid(const Eigen::VectorXd& grid_values) const;
};

/// Reflecting (Neumann) generator. Throws InvalidInput on a disconnected grid.
Operator assemble_neumann(const Grid& grid);

/// Part-process generator: rows and columns outside `mask` are removed while
/// the full face sum stays on the diagonal, so mass leaving the mask is lost.
Operator assemble_part(const Grid& grid, const Mask& mask);

struct SobolevEstimate {
  double ratio = 0.0;           // best ||f||_p / ||f||_H1 found
  double constant_ratio = 0.0;  // ratio of f = 1, m(D)^(1/p - 1/2)
  double exponent = 0.0;
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd maximizer;    // grid vector attaining `ratio`
};

struct SobolevOptions {
  double exponent = 4.0;
  int max_iterations = 400;
  int restarts = 20;
  std::uint64_t seed = 1;
  double tolerance = 1e-9;
};

/// Certified lower bound on the discrete Sobolev constant
/// sup ||f||_p / ||f||_H1 with ||f||_H1^2 = 2 f^T A f + f^T M f.
SobolevEstimate sobolev_constant(const Operator& op, const SobolevOptions& options);

/// Coordinate-format dump "row col value" of the stiffness matrix (upper and
/// lower triangle) and one mass value per line.
void write_matrix_coo(const Operator& op, std::ostream& matrix_out, std::ostream& mass_out);

}  // namespace rbm
