#include "rbmlab/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "rbmlab/error.hpp"

namespace rbm {

namespace {

constexpr double kTailRatio = 1e-3;

Eigen::VectorXd decay(const SpectralDecomposition& sd, double t, double offset = 0.0) {
  return (-(sd.eigenvalues.array() - offset) * t).exp().matrix();
}

// sum_k exp(-(lambda_k - offset) t) phi_k(r)^2 for every local row
Eigen::VectorXd diag_series(const SpectralDecomposition& sd, double t, double offset = 0.0) {
  return sd.eigenvectors.array().square().matrix() * decay(sd, t, offset);
}

double lambda_last(const SpectralDecomposition& sd) { return sd.eigenvalues[sd.count() - 1]; }

// Largest ratio (truncation bound) / (diagonal value) over the rows, computed
// relative to exp(-lambda_1 t) so killed spectra do not underflow.
double worst_tail_ratio(const SpectralDecomposition& sd, double t) {
  const double l1 = sd.eigenvalues[0];
  const Eigen::VectorXd half = diag_series(sd, 0.5 * t, l1);
  const Eigen::VectorXd full = diag_series(sd, t, l1);
  const double factor = std::exp(-0.5 * (lambda_last(sd) - l1) * t);
  double worst = 0.0;
  for (Eigen::Index r = 0; r < half.size(); ++r) {
    const double ratio = full[r] > 0.0 ? factor * half[r] / full[r] : std::numeric_limits<double>::infinity();
    worst = std::max(worst, ratio);
  }
  return worst;
}

Eigen::MatrixXd gather_rows(const SpectralDecomposition& sd, const std::vector<int>& cells) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells.size()), sd.count());
  for (std::size_t r = 0; r < cells.size(); ++r) {
    const int c = cells[r];
    if (c < 0 || c >= static_cast<int>(sd.local_of.size())) throw InvalidInput("cell index out of range");
    const int l = sd.local_of[c];
    if (l >= 0) out.row(static_cast<Eigen::Index>(r)) = sd.eigenvectors.row(l);
  }
  return out;
}

// Per-row factors u with truncation bound u_i u_j, and diagonal roots s with
// accuracy floor floor * s_i s_j.
void tail_factors(const SpectralDecomposition& sd, double t, Eigen::VectorXd& u, Eigen::VectorXd& s) {
  s = kernel_diagonal(sd, t).cwiseMax(0.0).cwiseSqrt();
  u = diagonal_tail(sd, t).cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

Eigen::VectorXd kernel_diagonal(const SpectralDecomposition& sd, double t) { return diag_series(sd, t); }

Eigen::VectorXd diagonal_tail(const SpectralDecomposition& sd, double t) {
  if (sd.complete()) return Eigen::VectorXd::Zero(sd.rows());
  return std::exp(-0.5 * lambda_last(sd) * t) * diag_series(sd, 0.5 * t);
}

double compute_t_min(const SpectralDecomposition& sd) {
  if (sd.complete()) return 0.0;
  double lo = 1e-10;
  if (worst_tail_ratio(sd, lo) <= kTailRatio) return lo;
  double hi = lo;
  const double step = std::pow(10.0, 0.125);
  while (worst_tail_ratio(sd, hi) > kTailRatio) {
    lo = hi;
    hi *= step;
    if (hi > 1e8) throw NumericalFailure("truncation bound never falls below the diagonal threshold");
  }
  for (int it = 0; it < 50; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (worst_tail_ratio(sd, mid) > kTailRatio) lo = mid;
    else hi = mid;
  }
  return hi;
}

KernelEstimate heat_kernel(const SpectralDecomposition& sd, double t, int i, int j) {
  if (!(t > 0.0) || t < sd.t_min) {
    std::ostringstream msg;
    msg << "time " << t << " is below the reliable range t_min = " << sd.t_min;
    throw InvalidInput(msg.str());
  }
  const int n = static_cast<int>(sd.local_of.size());
  if (i < 0 || j < 0 || i >= n || j >= n) throw InvalidInput("cell index out of range");
  KernelEstimate out;
  out.t = t;
  out.i = i;
  out.j = j;
  const int a = sd.local_of[i];
  const int b = sd.local_of[j];
  if (a < 0 || b < 0) return out;

  const Eigen::VectorXd e = decay(sd, t);
  const double value = sd.eigenvectors.row(a).cwiseProduct(sd.eigenvectors.row(b)).dot(e.transpose());
  const Eigen::VectorXd e_half = decay(sd, 0.5 * t);
  const double da = sd.eigenvectors.row(a).array().square().matrix().dot(e.transpose());
  const double db = sd.eigenvectors.row(b).array().square().matrix().dot(e.transpose());
  double tail = sd.accuracy_floor() * std::sqrt(std::max(da, 0.0) * std::max(db, 0.0));
  if (!sd.complete()) {
    const double ha = sd.eigenvectors.row(a).array().square().matrix().dot(e_half.transpose());
    const double hb = sd.eigenvectors.row(b).array().square().matrix().dot(e_half.transpose());
    tail += std::exp(-0.5 * lambda_last(sd) * t) * std::sqrt(std::max(ha, 0.0) * std::max(hb, 0.0));
  }
  out.tail = tail;
  if (value < 0.0) {
    if (-value > tail) {
      std::ostringstream msg;
      msg << "kernel value " << value << " at t = " << t << " is negative beyond its error bound " << tail
          << "; increase the eigen count";
      throw NumericalFailure(msg.str());
    }
    out.value = 0.0;
  } else {
    out.value = value;
  }
  return out;
}

KernelEstimate kernel_at(const SpectralDecomposition& sd, const Grid& grid, double t, Point x, Point y) {
  const auto wx = grid.interpolation_weights(x);
  const auto wy = grid.interpolation_weights(y);
  KernelEstimate out;
  out.t = t;
  out.i = grid.nearest_cell(x);
  out.j = grid.nearest_cell(y);
  for (const auto& [a, u] : wx) {
    for (const auto& [b, v] : wy) {
      const KernelEstimate k = heat_kernel(sd, t, a, b);
      out.value += u * v * k.value;
      out.tail += u * v * k.tail;
    }
  }
  return out;
}

Eigen::MatrixXd kernel_block(const SpectralDecomposition& sd, double t, const std::vector<int>& rows,
                             const std::vector<int>& cols) {
  const Eigen::MatrixXd pr = gather_rows(sd, rows);
  const Eigen::MatrixXd pc = gather_rows(sd, cols);
  return pr * decay(sd, t).asDiagonal() * pc.transpose();
}

Eigen::MatrixXd kernel_tail_block(const SpectralDecomposition& sd, double t, const std::vector<int>& rows,
                                  const std::vector<int>& cols) {
  Eigen::VectorXd u, s;
  tail_factors(sd, t, u, s);
  auto pick = [&](const Eigen::VectorXd& v, const std::vector<int>& cells) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cells.size()));
    for (std::size_t r = 0; r < cells.size(); ++r) {
      const int l = sd.local_of.at(static_cast<std::size_t>(cells[r]));
      if (l >= 0) out[static_cast<Eigen::Index>(r)] = v[l];
    }
    return out;
  };
  const Eigen::VectorXd ur = pick(u, rows), uc = pick(u, cols);
  const Eigen::VectorXd sr = pick(s, rows), sc = pick(s, cols);
  return ur * uc.transpose() + sd.accuracy_floor() * (sr * sc.transpose());
}

double certified_positivity_time(const SpectralDecomposition& sd, double t_upper) {
  const Eigen::Index n = sd.rows();
  auto positive = [&](double t) {
    const Eigen::VectorXd e = decay(sd, t);
    Eigen::VectorXd u, s;
    tail_factors(sd, t, u, s);
    const double floor = sd.accuracy_floor();
    const Eigen::MatrixXd right = e.asDiagonal() * sd.eigenvectors.transpose();
    constexpr Eigen::Index chunk = 256;
    for (Eigen::Index r0 = 0; r0 < n; r0 += chunk) {
      const Eigen::Index m = std::min(chunk, n - r0);
      const Eigen::MatrixXd block = sd.eigenvectors.middleRows(r0, m) * right;
      for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = 0; r < m; ++r) {
          const double bound = u[r0 + r] * u[c] + floor * s[r0 + r] * s[c];
          if (!(block(r, c) > bound)) return false;
        }
      }
    }
    return true;
  };

  double lo = std::max(sd.t_min, 1e-8);
  if (positive(lo)) return lo;
  const double step = std::pow(10.0, 0.125);
  double hi = lo * step;
  while (!positive(hi)) {
    lo = hi;
    hi *= step;
    if (hi > t_upper) return std::numeric_limits<double>::infinity();
  }
  for (int it = 0; it < 12; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (positive(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

void uniformized_ladder(const Operator& op, double t0, int doublings,
                        const std::function<void(double, const Eigen::MatrixXd&)>& visit) {
  if (!(t0 > 0.0) || doublings < 0) throw InvalidInput("uniformized ladder needs t0 > 0 and doublings >= 0");
  const Eigen::Index n = op.rows();
  if (n == 0) throw InvalidInput("operator has no rows");
  if (n > 6000) throw InvalidInput("uniformized kernels are dense; operator too large");
  const Eigen::VectorXd inv_mass = op.mass.cwiseInverse();

  // P = I - M^{-1} A / c is entrywise nonnegative for c = max_i A_ii / M_i.
  double c = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) c = std::max(c, op.stiffness.coeff(i, i) * inv_mass[i]);
  if (!(c > 0.0)) c = 1.0;
  SparseMatrix p = (inv_mass / -c).asDiagonal() * op.stiffness;
  for (Eigen::Index i = 0; i < n; ++i) p.coeffRef(i, i) = std::max(0.0, 1.0 + p.coeff(i, i));
  p.prune(0.0);

  int halvings = 0;
  double s = t0;
  while (c * s > 0.5) {
    s *= 0.5;
    ++halvings;
  }
  // exp(-s M^{-1} A) = e^{-cs} sum_n (cs)^n / n! P^n, Horner form; every
  // operation adds or multiplies nonnegative numbers.
  constexpr int terms = 30;
  Eigen::MatrixXd t = Eigen::MatrixXd::Identity(n, n);
  for (int k = terms; k >= 1; --k) {
    Eigen::MatrixXd next = (c * s / k) * (p * t);
    next.diagonal().array() += 1.0;
    t.swap(next);
  }
  t *= std::exp(-c * s);
  for (int k = 0; k < halvings; ++k) t = (t * t).eval();

  double time = t0;
  for (int d = 0;; ++d) {
    visit(time, t * inv_mass.asDiagonal());
    if (d == doublings) break;
    t = (t * t).eval();
    time *= 2.0;
  }
}

Eigen::VectorXd apply_semigroup(const SpectralDecomposition& sd, double t, const Eigen::VectorXd& f) {
  if (t < 0.0) throw InvalidInput("semigroup time must be nonnegative");
  if (f.size() != static_cast<Eigen::Index>(sd.local_of.size())) throw InvalidInput("function does not match grid");
  Eigen::VectorXd local(sd.rows());
  for (int r = 0; r < sd.rows(); ++r) local[r] = f[sd.cells[r]];
  const Eigen::VectorXd coeff = sd.eigenvectors.transpose() * sd.mass.cwiseProduct(local);
  const Eigen::VectorXd result = sd.eigenvectors * decay(sd, t).cwiseProduct(coeff);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(f.size());
  for (int r = 0; r < sd.rows(); ++r) out[sd.cells[r]] = result[r];
  return out;
}

Eigen::VectorXd survival_all(const SpectralDecomposition& sd, double t) {
  Eigen::VectorXd ind = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(sd.local_of.size()));
  for (int c : sd.cells) ind[c] = 1.0;
  if (t == 0.0) return ind;
  Eigen::VectorXd out = apply_semigroup(sd, t, ind);
  for (int c : sd.cells) out[c] = std::clamp(out[c], 0.0, 1.0);
  return out;
}

double survival(const SpectralDecomposition& sd, double t, int cell) {
  if (cell < 0 || cell >= static_cast<int>(sd.local_of.size())) throw InvalidInput("cell index out of range");
  const int l = sd.local_of[cell];
  if (l < 0) return 0.0;
  if (t == 0.0) return 1.0;
  Eigen::VectorXd local = Eigen::VectorXd::Ones(sd.rows());
  const Eigen::VectorXd coeff = sd.eigenvectors.transpose() * sd.mass.cwiseProduct(local);
  const double v = sd.eigenvectors.row(l).dot(decay(sd, t).cwiseProduct(coeff));
  return std::clamp(v, 0.0, 1.0);
}

}  // namespace rbm
