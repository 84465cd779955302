#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rbmlab/geometry.hpp"

namespace rbm {

/// A lattice cell clipped to the domain. Cut cells keep the lattice center of
/// their square but carry the exact clipped area and centroid.
struct Cell {
  int ix = 0;
  int iy = 0;
  Point center;
  Point centroid;
  double measure = 0.0;
  double boundary_length = 0.0;
};

/// Interface between two cells: `length` is the part of the shared lattice
/// edge inside the domain, transmissibility = length / spacing.
struct Face {
  int a = 0;
  int b = 0;
  double length = 0.0;
  double transmissibility = 0.0;
};

/// Surface-measure weight of a cell: total length of domain boundary inside it.
struct BoundaryFace {
  int cell = 0;
  double length = 0.0;
};

class Grid;

/// Named membership flags over the cells of one grid.
class Mask {
 public:
  Mask() = default;
  Mask(std::string name, std::vector<std::uint8_t> bits);

  const std::string& name() const { return name_; }
  std::size_t size() const { return bits_.size(); }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::vector<int> indices() const;

  bool subset_of(const Mask& other) const;
  Mask intersected(const Mask& other, std::string name) const;
  friend bool operator==(const Mask& a, const Mask& b) { return a.bits_ == b.bits_; }

 private:
  std::string name_;
  std::vector<std::uint8_t> bits_;
};

struct GridOptions {
  std::size_t max_cells = 250000;
  /// Cells with measure below this fraction of h^2 are merged into a neighbor.
  double sliver_fraction = 1e-6;
};

/// Clipped lattice over a domain: cell measures realize Lebesgue measure on D,
/// boundary face lengths realize surface measure on the boundary.
class Grid {
 public:
  double spacing() const { return spacing_; }
  Point origin() const { return origin_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t size() const { return cells_.size(); }

  const std::vector<Cell>& cells() const { return cells_; }
  const std::vector<Face>& faces() const { return faces_; }
  const std::vector<BoundaryFace>& boundary_faces() const { return boundary_faces_; }
  const std::string& domain_name() const { return domain_name_; }

  /// Cell whose lattice square contains `p`, if that square carries a cell.
  std::optional<int> locate(Point p) const;
  /// Cell whose centroid is nearest to `p`.
  int nearest_cell(Point p) const;

  /// Bilinear weights over the lattice centers surrounding `p`, renormalized
  /// over the squares that carry cells; the nearest cell when none does.
  std::vector<std::pair<int, double>> interpolation_weights(Point p) const;
  double total_measure() const;
  double boundary_length() const;
  bool connected() const;

  Mask all_cells(std::string name = "all") const;
  /// Cells whose centroid lies in the open ball B(center, radius).
  Mask ball(Point center, double radius, std::string name = "ball") const;
  /// Cells whose centroid satisfies x < x_cut.
  Mask x_below(double x_cut, std::string name = "x-cut") const;
  /// Cells y in D_R = D ∩ B(center, R) with dist(y, closure(D) \ B(center, R)) > eps * R.
  Mask interior_window(const Domain& domain, Point center, double radius, double eps,
                       std::string name = "window") const;
  /// Cells whose centroid is within `width` of the boundary.
  Mask boundary_strip(const Domain& domain, double width, std::string name = "strip") const;

 private:
  friend Grid build_grid(const Domain& domain, double h, const GridOptions& options);

  double spacing_ = 0.0;
  Point origin_;
  int nx_ = 0;
  int ny_ = 0;
  std::string domain_name_;
  std::vector<Cell> cells_;
  std::vector<Face> faces_;
  std::vector<BoundaryFace> boundary_faces_;
  std::vector<int> lattice_;  // nx*ny -> cell index or -1
};

/// Builds the clipped grid with spacing h. Throws InvalidInput when the
/// resulting cell count would exceed options.max_cells.
Grid build_grid(const Domain& domain, double h, const GridOptions& options = {});

enum class TruncationScheme { ball, x_cut };

/// Exhaustion mask K_n: cells inside B(center, schedule[n]) (ball scheme) or
/// with x < schedule[n] (x-cut scheme). `n` is zero-based.
Mask truncate(const Grid& grid, const std::vector<double>& schedule, TruncationScheme scheme,
              std::size_t n, Point center = {0.0, 0.0});

}  // namespace rbm
