#include "rbmlab/discretize.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include <Eigen/SparseCholesky>

#include "rbmlab/error.hpp"

namespace rbm {

namespace {

Operator assemble(const Grid& grid, const Mask& mask, BoundaryCondition condition) {
  Operator op;
  op.condition = condition;
  op.mask = mask;
  op.local_of.assign(grid.size(), -1);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    if (mask[c]) {
      op.local_of[c] = static_cast<int>(op.cells.size());
      op.cells.push_back(static_cast<int>(c));
    }
  }
  const int n = op.rows();
  op.mass.resize(n);
  op.positions.resize(op.cells.size());
  for (int r = 0; r < n; ++r) {
    op.mass[r] = grid.cells()[op.cells[r]].measure;
    op.positions[r] = grid.cells()[op.cells[r]].centroid;
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(grid.faces().size() * 4);
  for (const Face& f : grid.faces()) {
    const double w = 0.5 * f.transmissibility;
    const int a = op.local_of[f.a];
    const int b = op.local_of[f.b];
    if (a >= 0) trip.emplace_back(a, a, w);
    if (b >= 0) trip.emplace_back(b, b, w);
    if (a >= 0 && b >= 0) {
      trip.emplace_back(a, b, -w);
      trip.emplace_back(b, a, -w);
    }
  }
  op.stiffness.resize(n, n);
  op.stiffness.setFromTriplets(trip.begin(), trip.end());
  op.stiffness.makeCompressed();
  return op;
}

double p_norm(const Eigen::VectorXd& f, const Eigen::VectorXd& mass, double p) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.size(); ++i) acc += mass[i] * std::pow(std::abs(f[i]), p);
  return std::pow(acc, 1.0 / p);
}

}  // namespace

Eigen::VectorXd Operator::to_grid(const Eigen::VectorXd& local) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(local_of.size()));
  for (int r = 0; r < rows(); ++r) out[cells[r]] = local[r];
  return out;
}

Eigen::VectorXd Operator::from_grid(const Eigen::VectorXd& grid_values) const {
  Eigen::VectorXd out(rows());
  for (int r = 0; r < rows(); ++r) out[r] = grid_values[cells[r]];
  return out;
}

Operator assemble_neumann(const Grid& grid) {
  if (!grid.connected()) {
    throw InvalidInput("grid graph is disconnected; the reflecting generator needs a connected domain");
  }
  return assemble(grid, grid.all_cells("all"), BoundaryCondition::neumann);
}

Operator assemble_part(const Grid& grid, const Mask& mask) {
  if (mask.size() != grid.size()) throw InvalidInput("mask does not belong to this grid");
  if (mask.empty()) throw InvalidInput("part operator requires a nonempty mask");
  const BoundaryCondition bc = mask.count() == grid.size() ? BoundaryCondition::neumann : BoundaryCondition::killed;
  return assemble(grid, mask, bc);
}

SobolevEstimate sobolev_constant(const Operator& op, const SobolevOptions& options) {
  if (!(options.exponent > 2.0)) throw InvalidInput("Sobolev exponent must satisfy p > 2");
  if (op.condition != BoundaryCondition::neumann) {
    throw InvalidInput("Sobolev constant is defined for the reflecting operator");
  }
  const double p = options.exponent;
  const int n = op.rows();
  const Eigen::VectorXd& mass = op.mass;

  // H^1 Gram matrix: 2A (A realizes half the Dirichlet integral) plus mass.
  SparseMatrix gram = 2.0 * op.stiffness;
  for (int i = 0; i < n; ++i) gram.coeffRef(i, i) += mass[i];
  Eigen::SimplicialLLT<SparseMatrix> chol(gram);
  if (chol.info() != Eigen::Success) throw NumericalFailure("H1 Gram matrix factorization failed");

  auto h1_norm = [&](const Eigen::VectorXd& f) { return std::sqrt(f.dot(gram * f)); };
  auto ratio = [&](const Eigen::VectorXd& f) { return p_norm(f, mass, p) / h1_norm(f); };

  SobolevEstimate out;
  out.exponent = p;
  const double area = mass.sum();
  out.constant_ratio = std::pow(area, 1.0 / p - 0.5);

  // Restart 0 is the constant function; the others are Gaussian bumps with
  // random centre cell and random width between one cell and the domain size.
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double span = 0.0;
  for (const Point& q : op.positions) span = std::max(span, distance(q, op.positions.front()));
  const double cell = std::sqrt(mass.maxCoeff());

  double best = -1.0;
  for (int restart = 0; restart < std::max(1, options.restarts); ++restart) {
    Eigen::VectorXd f(n);
    if (restart == 0) {
      f.setOnes();
    } else {
      const Point c = op.positions[static_cast<std::size_t>(unit(rng) * (n - 1))];
      const double width = cell * std::pow(std::max(span / cell, 1.0), unit(rng));
      for (int i = 0; i < n; ++i) {
        const double d = distance(op.positions[i], c) / width;
        f[i] = std::exp(-d * d) + 1e-3 * unit(rng);
      }
    }
    double current = ratio(f);
    bool converged = false;
    int it = 0;
    for (; it < options.max_iterations; ++it) {
      Eigen::VectorXd g(n);
      for (int i = 0; i < n; ++i) g[i] = mass[i] * std::pow(std::abs(f[i]), p - 2.0) * f[i];
      Eigen::VectorXd next = chol.solve(g);
      next /= h1_norm(next);
      const double r = ratio(next);
      f = std::move(next);
      const double change = std::abs(r - current) / std::max(r, 1e-300);
      current = std::max(current, r);
      if (change < options.tolerance) {
        converged = true;
        ++it;
        break;
      }
    }
    if (current > best) {
      best = current;
      out.ratio = current;
      out.converged = converged;
      out.iterations = it;
      out.maximizer = op.to_grid(f.cwiseAbs());
    }
  }
  if (out.ratio < out.constant_ratio) {
    // iterates never fall below their start; guard the certified lower bound anyway
    out.ratio = out.constant_ratio;
  }
  return out;
}

void write_matrix_coo(const Operator& op, std::ostream& matrix_out, std::ostream& mass_out) {
  matrix_out.precision(17);
  mass_out.precision(17);
  for (int k = 0; k < op.stiffness.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(op.stiffness, k); it; ++it) {
      matrix_out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  }
  for (int r = 0; r < op.rows(); ++r) mass_out << op.mass[r] << '\n';
}

}  // namespace rbm
