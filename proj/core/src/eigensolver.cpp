#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/SparseCholesky>

#include "rbmlab/error.hpp"
#include "rbmlab/spectral.hpp"

namespace rbm {

namespace {

// Polishing is attempted once the cheap Krylov residual estimate is this small.
constexpr double kKrylovGate = 1e-10;

struct Pairs {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // M-orthonormal columns
};

Eigen::VectorXd relative_residuals(const Operator& op, const Pairs& p) {
  const Eigen::MatrixXd av = op.stiffness * p.vectors;
  Eigen::VectorXd out(p.values.size());
  for (Eigen::Index k = 0; k < p.values.size(); ++k) {
    const Eigen::VectorXd mv = op.mass.cwiseProduct(p.vectors.col(k));
    const double lam = p.values[k];
    out[k] = (av.col(k) - lam * mv).norm() / ((1.0 + std::abs(lam)) * mv.norm());
  }
  return out;
}

Pairs dense_solve(const Operator& op, int count) {
  const Eigen::VectorXd isq = op.mass.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd b = Eigen::MatrixXd(op.stiffness);
  b = isq.asDiagonal() * b * isq.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  if (solver.info() != Eigen::Success) throw NumericalFailure("dense eigensolver did not converge");
  Pairs out;
  out.values = solver.eigenvalues().head(count);
  out.vectors = isq.asDiagonal() * solver.eigenvectors().leftCols(count);
  return out;
}

// Orthonormalizes the columns of w against basis[:, 0:used] (twice) and among
// themselves. Columns that collapse are replaced by fresh random directions.
void orthonormalize_block(const Eigen::MatrixXd& basis, Eigen::Index used, Eigen::MatrixXd& w,
                          std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  const Eigen::Index b = w.cols();
  for (int pass = 0; pass < 2; ++pass) {
    if (used > 0) {
      const Eigen::MatrixXd proj = basis.leftCols(used).transpose() * w;
      w.noalias() -= basis.leftCols(used) * proj;
    }
  }
  for (Eigen::Index j = 0; j < b; ++j) {
    const double scale = w.col(j).norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < j; ++i) {
        w.col(j) -= w.col(i).dot(w.col(j)) * w.col(i);
      }
    }
    double nrm = w.col(j).norm();
    if (!(nrm > 1e-10 * std::max(scale, 1e-300)) || nrm < 1e-300) {
      // deflated direction: replace by a random vector orthogonal to everything
      for (int attempt = 0; attempt < 8; ++attempt) {
        for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, j) = gauss(rng);
        for (int pass = 0; pass < 2; ++pass) {
          if (used > 0) w.col(j) -= basis.leftCols(used) * (basis.leftCols(used).transpose() * w.col(j));
          for (Eigen::Index i = 0; i < j; ++i) w.col(j) -= w.col(i).dot(w.col(j)) * w.col(i);
        }
        nrm = w.col(j).norm();
        if (nrm > 1e-8) break;
      }
      if (!(nrm > 1e-8)) throw NumericalFailure("Lanczos basis exhausted the space");
    }
    w.col(j) /= nrm;
  }
}

// Eigenvectors of the `take` largest eigenvalues of the symmetric h, largest first.
void top_eigenvectors(const Eigen::MatrixXd& h, Eigen::Index take, Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(h);
  if (solver.info() != Eigen::Success) throw NumericalFailure("projected eigenproblem failed");
  s = solver.eigenvectors().rightCols(take).rowwise().reverse();
}

Pairs lanczos_solve(const Operator& op, int count, const EigenOptions& options, double& worst) {
  const int n = op.rows();
  const int b = std::max(1, std::min(options.block_size, n));
  const Eigen::VectorXd sq = op.mass.cwiseSqrt();

  // Shift-invert in the symmetric form T = M^1/2 (A + sigma M)^-1 M^1/2, whose
  // largest eigenvalues 1 / (lambda + sigma) belong to the smallest lambda.
  const double sigma = 1.0;
  SparseMatrix shifted = op.stiffness;
  for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += sigma * op.mass[i];
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(shifted);
  if (ldlt.info() != Eigen::Success) throw NumericalFailure("shifted operator factorization failed");
  auto apply = [&](const Eigen::MatrixXd& x) {
    Eigen::MatrixXd y = sq.asDiagonal() * x;
    y = ldlt.solve(y);
    return Eigen::MatrixXd(sq.asDiagonal() * y);
  };

  const int wanted = std::min(n, count + b);
  const Eigen::Index cap = std::min<Eigen::Index>(n, std::max<Eigen::Index>(3 * wanted + 10 * b, wanted + 200));
  Eigen::MatrixXd basis(n, cap);
  Eigen::MatrixXd proj = Eigen::MatrixXd::Zero(cap, cap);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd block(n, b);
  for (Eigen::Index j = 0; j < b; ++j)
    for (Eigen::Index r = 0; r < n; ++r) block(r, j) = gauss(rng);
  orthonormalize_block(basis, 0, block, rng);

  Eigen::Index used = 0;
  Eigen::Index next_check = std::min<Eigen::Index>(cap, wanted + 2 * b);
  Pairs result;
  while (true) {
    const Eigen::Index width = std::min<Eigen::Index>(b, cap - used);
    basis.middleCols(used, width) = block.leftCols(width);
    const Eigen::Index start = used;
    used += width;

    Eigen::MatrixXd w = apply(basis.middleCols(start, width));
    // Projected matrix entries for the new columns are computed explicitly,
    // so the Rayleigh-Ritz step does not rely on the three-term recurrence.
    const Eigen::MatrixXd column = basis.leftCols(used).transpose() * w;
    proj.block(0, start, used, width) = column;
    proj.block(start, 0, width, used) = column.transpose();

    const bool full = used >= cap;
    Eigen::MatrixXd coupling;  // next block' * T * newest block
    if (!full) {
      Eigen::MatrixXd next = w;
      orthonormalize_block(basis, used, next, rng);
      coupling = next.transpose() * w;
      block = std::move(next);
    }

    if (full || used >= next_check) {
      // Ritz checks cost O(used^3); space them geometrically.
      next_check = std::max(next_check + b, static_cast<Eigen::Index>(1.15 * static_cast<double>(used)));
      const Eigen::Index take = std::min<Eigen::Index>(wanted, used);
      Eigen::MatrixXd s;
      top_eigenvectors(proj.topLeftCorner(used, used), take, s);

      // Krylov residual estimate ||T y - theta y|| / theta of every Ritz pair.
      double estimate = 0.0;
      if (!full) {
        const Eigen::MatrixXd r = coupling * s.bottomRows(width);
        const Eigen::MatrixXd ts = proj.topLeftCorner(used, used) * s;
        for (Eigen::Index k = 0; k < take; ++k) {
          const double theta = s.col(k).dot(ts.col(k));
          estimate = std::max(estimate, r.col(k).norm() / theta);
        }
      }
      if (full || estimate <= kKrylovGate) {
        Eigen::MatrixXd x = sq.cwiseInverse().asDiagonal() * (basis.leftCols(used) * s);
        // Rayleigh-Ritz polish on the original pencil (A, M).
        const Eigen::MatrixXd ap = x.transpose() * (op.stiffness * x);
        const Eigen::MatrixXd mp = x.transpose() * op.mass.asDiagonal() * x;
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> polish(0.5 * (ap + ap.transpose()),
                                                                         0.5 * (mp + mp.transpose()));
        if (polish.info() == Eigen::Success) {
          Pairs p;
          p.values = polish.eigenvalues().head(std::min<Eigen::Index>(count, take));
          p.vectors = x * polish.eigenvectors().leftCols(p.values.size());
          const Eigen::VectorXd res = relative_residuals(op, p);
          worst = res.maxCoeff();
          if (p.values.size() == count && worst <= options.residual_tolerance) return p;
          result = std::move(p);
        }
      }
    }
    if (full) break;
  }
  std::ostringstream msg;
  msg << "Lanczos eigensolver did not converge: " << result.values.size() << " of " << count
      << " pairs, worst relative residual " << worst << " (tolerance " << options.residual_tolerance
      << ", basis " << used << " of " << n << ")";
  throw NumericalFailure(msg.str());
}

void normalize_signs(Pairs& p, const Operator& op) {
  const Eigen::Index n = p.vectors.rows();
  for (Eigen::Index k = 0; k < p.vectors.cols(); ++k) {
    auto v = p.vectors.col(k);
    const double norm = std::sqrt(v.dot(op.mass.cwiseProduct(v)));
    v /= norm;
    double sign = 1.0;
    if (k == 0) {
      sign = v.sum() < 0.0 ? -1.0 : 1.0;
    } else {
      Eigen::Index arg = 0;
      double best = -1.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        // first index wins ties up to rounding so the choice is reproducible
        if (std::abs(v[r]) > best * (1.0 + 1e-9)) {
          best = std::abs(v[r]);
          arg = r;
        }
      }
      sign = v[arg] < 0.0 ? -1.0 : 1.0;
    }
    v *= sign;
  }
}

}  // namespace

double SpectralDecomposition::accuracy_floor() const {
  return std::max(static_cast<double>(count()) * 2.220446049250313e-16, max_residual);
}

SpectralDecomposition eigensolve(const Operator& op, int count, const EigenOptions& options) {
  const int n = op.rows();
  if (n == 0) throw InvalidInput("operator has no rows");
  if (count < 1 || count > n) {
    std::ostringstream msg;
    msg << "eigen count " << count << " must lie in [1, " << n << "]";
    throw InvalidInput(msg.str());
  }
  bool dense = false;
  switch (options.method) {
    case EigenMethod::dense: dense = true; break;
    case EigenMethod::lanczos: dense = false; break;
    case EigenMethod::automatic: dense = n <= options.dense_limit || count + options.block_size >= n; break;
  }

  Pairs pairs;
  double worst = 0.0;
  if (dense) {
    pairs = dense_solve(op, count);
  } else {
    pairs = lanczos_solve(op, count, options, worst);
  }
  normalize_signs(pairs, op);
  const Eigen::VectorXd res = relative_residuals(op, pairs);
  worst = res.maxCoeff();
  if (worst > options.residual_tolerance) {
    Eigen::Index k = 0;
    res.maxCoeff(&k);
    std::ostringstream msg;
    msg << "eigensolver residual check failed: pair " << k + 1 << " (lambda = " << pairs.values[k]
        << ") has relative residual " << worst << " > " << options.residual_tolerance;
    throw NumericalFailure(msg.str());
  }

  SpectralDecomposition sd;
  sd.eigenvalues = pairs.values;
  sd.eigenvectors = std::move(pairs.vectors);
  sd.mass = op.mass;
  sd.cells = op.cells;
  sd.local_of = op.local_of;
  sd.condition = op.condition;
  sd.max_residual = worst;
  sd.method = dense ? "dense" : "lanczos";
  sd.t_min = compute_t_min(sd);
  return sd;
}

}  // namespace rbm
