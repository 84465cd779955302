#include "rbmlab/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <sstream>

#include "rbmlab/error.hpp"

namespace rbm {

namespace {

// Sutherland-Hodgman against one axis-aligned half-plane. `axis` 0 clips on x,
// 1 on y; keep_below keeps coordinate <= bound. Output edges created on the
// clip line carry the bound exactly, which the side classification relies on.
std::vector<Point> clip_axis(const std::vector<Point>& poly, int axis, double bound, bool keep_below) {
  std::vector<Point> out;
  if (poly.empty()) return out;
  out.reserve(poly.size() + 4);
  auto coord = [axis](Point p) { return axis == 0 ? p.x : p.y; };
  auto inside = [&](Point p) { return keep_below ? coord(p) <= bound : coord(p) >= bound; };
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = poly[i];
    const Point b = poly[(i + 1) % n];
    const bool a_in = inside(a);
    const bool b_in = inside(b);
    if (a_in) out.push_back(a);
    if (a_in != b_in) {
      const double s = (bound - coord(a)) / (coord(b) - coord(a));
      if (axis == 0) {
        out.push_back({bound, a.y + s * (b.y - a.y)});
      } else {
        out.push_back({a.x + s * (b.x - a.x), bound});
      }
    }
  }
  return out;
}

struct RawCell {
  double area = 0.0;
  Point centroid;
  double side[4] = {0.0, 0.0, 0.0, 0.0};  // right, top, left, bottom
  double boundary = 0.0;
};

RawCell measure_clipped(const std::vector<Point>& poly, double x0, double x1, double y0, double y1) {
  RawCell rc;
  const std::size_t n = poly.size();
  if (n < 3) return rc;
  const double tol = 1e-12 * std::max({1.0, std::abs(x0), std::abs(x1), std::abs(y0), std::abs(y1)});
  double a2 = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point u = poly[i];
    const Point v = poly[(i + 1) % n];
    const double c = cross(u, v);
    a2 += c;
    cx += (u.x + v.x) * c;
    cy += (u.y + v.y) * c;
    if (std::abs(u.x - x1) <= tol && std::abs(v.x - x1) <= tol) {
      rc.side[0] += v.y - u.y;
    } else if (std::abs(u.y - y1) <= tol && std::abs(v.y - y1) <= tol) {
      rc.side[1] += u.x - v.x;
    } else if (std::abs(u.x - x0) <= tol && std::abs(v.x - x0) <= tol) {
      rc.side[2] += u.y - v.y;
    } else if (std::abs(u.y - y0) <= tol && std::abs(v.y - y0) <= tol) {
      rc.side[3] += v.x - u.x;
    } else {
      rc.boundary += distance(u, v);
    }
  }
  rc.area = 0.5 * a2;
  if (rc.area > 0.0) rc.centroid = {cx / (3.0 * a2), cy / (3.0 * a2)};
  const double h = std::max(x1 - x0, y1 - y0);
  for (double& s : rc.side) s = std::clamp(s, 0.0, h);
  return rc;
}

int find_root(std::vector<int>& parent, int i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

}  // namespace

Mask::Mask(std::string name, std::vector<std::uint8_t> bits) : name_(std::move(name)), bits_(std::move(bits)) {}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; }));
}

std::vector<int> Mask::indices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i]) out.push_back(static_cast<int>(i));
  }
  return out;
}

bool Mask::subset_of(const Mask& other) const {
  if (other.size() != size()) return false;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    if (bits_[i] && !other.bits_[i]) return false;
  }
  return true;
}

Mask Mask::intersected(const Mask& other, std::string name) const {
  if (other.size() != size()) throw InvalidInput("mask size mismatch");
  std::vector<std::uint8_t> bits(size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = bits_[i] && other.bits_[i];
  return Mask(std::move(name), std::move(bits));
}

std::optional<int> Grid::locate(Point p) const {
  const double fx = (p.x - origin_.x) / spacing_;
  const double fy = (p.y - origin_.y) / spacing_;
  if (!(fx >= 0.0) || !(fy >= 0.0)) return std::nullopt;
  const int ix = std::min(static_cast<int>(fx), nx_ - 1);
  const int iy = std::min(static_cast<int>(fy), ny_ - 1);
  if (fx > nx_ || fy > ny_) return std::nullopt;
  const int c = lattice_[static_cast<std::size_t>(iy) * nx_ + ix];
  if (c < 0) return std::nullopt;
  return c;
}

int Grid::nearest_cell(Point p) const {
  if (auto c = locate(p)) return *c;
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const double d = distance(p, cells_[i].centroid);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

std::vector<std::pair<int, double>> Grid::interpolation_weights(Point p) const {
  const double fx = (p.x - origin_.x) / spacing_ - 0.5;
  const double fy = (p.y - origin_.y) / spacing_ - 0.5;
  const int ix = static_cast<int>(std::floor(fx));
  const int iy = static_cast<int>(std::floor(fy));
  const double u = fx - ix;
  const double v = fy - iy;
  std::vector<std::pair<int, double>> out;
  double total = 0.0;
  for (int dy = 0; dy < 2; ++dy) {
    for (int dx = 0; dx < 2; ++dx) {
      const int jx = ix + dx;
      const int jy = iy + dy;
      if (jx < 0 || jy < 0 || jx >= nx_ || jy >= ny_) continue;
      const int c = lattice_[static_cast<std::size_t>(jy) * nx_ + jx];
      const double w = (dx ? u : 1.0 - u) * (dy ? v : 1.0 - v);
      if (c < 0 || w <= 0.0) continue;
      out.emplace_back(c, w);
      total += w;
    }
  }
  if (out.empty()) return {{nearest_cell(p), 1.0}};
  for (auto& [c, w] : out) w /= total;
  return out;
}

double Grid::total_measure() const {
  double acc = 0.0;
  for (const Cell& c : cells_) acc += c.measure;
  return acc;
}

double Grid::boundary_length() const {
  double acc = 0.0;
  for (const BoundaryFace& f : boundary_faces_) acc += f.length;
  return acc;
}

bool Grid::connected() const {
  if (cells_.empty()) return false;
  std::vector<std::vector<int>> adj(cells_.size());
  for (const Face& f : faces_) {
    if (f.transmissibility <= 0.0) continue;
    adj[f.a].push_back(f.b);
    adj[f.b].push_back(f.a);
  }
  std::vector<char> seen(cells_.size(), 0);
  std::queue<int> todo;
  todo.push(0);
  seen[0] = 1;
  std::size_t reached = 1;
  while (!todo.empty()) {
    const int c = todo.front();
    todo.pop();
    for (int nb : adj[c]) {
      if (!seen[nb]) {
        seen[nb] = 1;
        ++reached;
        todo.push(nb);
      }
    }
  }
  return reached == cells_.size();
}

Mask Grid::all_cells(std::string name) const {
  return Mask(std::move(name), std::vector<std::uint8_t>(cells_.size(), 1));
}

Mask Grid::ball(Point center, double radius, std::string name) const {
  std::vector<std::uint8_t> bits(cells_.size(), 0);
  for (std::size_t i = 0; i < cells_.size(); ++i) bits[i] = distance(cells_[i].centroid, center) < radius;
  return Mask(std::move(name), std::move(bits));
}

Mask Grid::x_below(double x_cut, std::string name) const {
  std::vector<std::uint8_t> bits(cells_.size(), 0);
  for (std::size_t i = 0; i < cells_.size(); ++i) bits[i] = cells_[i].centroid.x < x_cut;
  return Mask(std::move(name), std::move(bits));
}

Mask Grid::interior_window(const Domain& domain, Point center, double radius, double eps, std::string name) const {
  if (!(radius > 0.0) || !(eps > 0.0) || !(eps < 1.0)) {
    throw InvalidInput("window requires R > 0 and eps in (0, 1)");
  }
  const double margin = eps * radius;
  const double reach = radius + margin;
  const double step = 0.25 * spacing_;
  // Sample closure(D) \ B(R) near the sphere: circle points in the closure
  // plus boundary ring points outside the ball.
  std::vector<Point> samples;
  const int n_circle = std::max(64, static_cast<int>(std::ceil(2.0 * M_PI * radius / step)));
  for (int k = 0; k < n_circle; ++k) {
    const double th = 2.0 * M_PI * k / n_circle;
    const Point z = center + Point{radius * std::cos(th), radius * std::sin(th)};
    if (domain.contains_closure(z, 1e-12)) samples.push_back(z);
  }
  const auto& ring = domain.boundary();
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Point a = ring[i];
    const Point b = ring[(i + 1) % ring.size()];
    const int pieces = std::max(1, static_cast<int>(std::ceil(distance(a, b) / step)));
    for (int k = 0; k <= pieces; ++k) {
      const Point z = a + (static_cast<double>(k) / pieces) * (b - a);
      const double r = distance(z, center);
      if (r >= radius && r < reach) samples.push_back(z);
    }
  }
  for (const Cell& c : cells_) {
    const double r = distance(c.centroid, center);
    if (r >= radius && r < reach) samples.push_back(c.centroid);
  }
  std::vector<std::uint8_t> bits(cells_.size(), 0);
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const Point y = cells_[i].centroid;
    if (!(distance(y, center) < radius)) continue;
    bool ok = true;
    for (const Point& z : samples) {
      if (distance(y, z) <= margin) {
        ok = false;
        break;
      }
    }
    bits[i] = ok;
  }
  return Mask(std::move(name), std::move(bits));
}

Mask Grid::boundary_strip(const Domain& domain, double width, std::string name) const {
  std::vector<std::uint8_t> bits(cells_.size(), 0);
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    bits[i] = domain.distance_to_boundary(cells_[i].centroid) < width;
  }
  return Mask(std::move(name), std::move(bits));
}

Grid build_grid(const Domain& domain, double h, const GridOptions& options) {
  if (!(h > 0.0) || !std::isfinite(h)) throw InvalidInput("grid spacing must be positive");
  const double estimate = domain.area() / (h * h);
  if (estimate > static_cast<double>(options.max_cells)) {
    std::ostringstream msg;
    msg << "grid would hold about " << static_cast<long long>(estimate) << " cells (limit "
        << options.max_cells << "); choose a coarser spacing";
    throw InvalidInput(msg.str());
  }

  const Box bb = domain.bounding_box();
  Grid g;
  g.spacing_ = h;
  g.origin_ = bb.lo;
  g.domain_name_ = domain.name();
  g.nx_ = std::max(1, static_cast<int>(std::ceil((bb.hi.x - bb.lo.x) / h - 1e-9)));
  g.ny_ = std::max(1, static_cast<int>(std::ceil((bb.hi.y - bb.lo.y) / h - 1e-9)));
  const int nx = g.nx_;
  const int ny = g.ny_;
  const std::size_t slots = static_cast<std::size_t>(nx) * ny;

  std::vector<RawCell> raw(slots);
  std::vector<char> present(slots, 0);
  const std::vector<Point>& ring = domain.boundary();
  for (int iy = 0; iy < ny; ++iy) {
    const double y0 = g.origin_.y + iy * h;
    const double y1 = g.origin_.y + (iy + 1) * h;
    std::vector<Point> strip = clip_axis(clip_axis(ring, 1, y0, false), 1, y1, true);
    if (strip.size() < 3) continue;
    // peel cells off the strip from left to right
    std::vector<Point> rest = strip;
    for (int ix = 0; ix < nx; ++ix) {
      if (rest.size() < 3) break;
      const double x0 = g.origin_.x + ix * h;
      const double x1 = g.origin_.x + (ix + 1) * h;
      std::vector<Point> piece = clip_axis(clip_axis(rest, 0, x0, false), 0, x1, true);
      const std::size_t s = static_cast<std::size_t>(iy) * nx + ix;
      raw[s] = measure_clipped(piece, x0, x1, y0, y1);
      if (raw[s].area > 0.0) present[s] = 1;
      rest = clip_axis(rest, 0, x1, false);
    }
  }

  // Pairwise interface lengths between lattice neighbours.
  struct RawFace {
    std::size_t a, b;
    double length;
  };
  std::vector<RawFace> raw_faces;
  std::vector<double> boundary(slots, 0.0);
  for (std::size_t s = 0; s < slots; ++s) {
    if (present[s]) boundary[s] = raw[s].boundary;
  }
  for (int iy = 0; iy < ny; ++iy) {
    for (int ix = 0; ix < nx; ++ix) {
      const std::size_t s = static_cast<std::size_t>(iy) * nx + ix;
      if (!present[s]) continue;
      // right neighbour
      if (ix + 1 < nx && present[s + 1]) {
        const double len = std::min(raw[s].side[0], raw[s + 1].side[2]);
        boundary[s] += raw[s].side[0] - len;
        if (len > 0.0) raw_faces.push_back({s, s + 1, len});
      } else {
        boundary[s] += raw[s].side[0];
      }
      if (ix == 0 || !present[s - 1]) boundary[s] += raw[s].side[2];
      else boundary[s] += raw[s].side[2] - std::min(raw[s - 1].side[0], raw[s].side[2]);
      // top neighbour
      const std::size_t up = s + static_cast<std::size_t>(nx);
      if (iy + 1 < ny && present[up]) {
        const double len = std::min(raw[s].side[1], raw[up].side[3]);
        boundary[s] += raw[s].side[1] - len;
        if (len > 0.0) raw_faces.push_back({s, up, len});
      } else {
        boundary[s] += raw[s].side[1];
      }
      if (iy == 0 || !present[s - nx]) boundary[s] += raw[s].side[3];
      else boundary[s] += raw[s].side[3] - std::min(raw[s - nx].side[1], raw[s].side[3]);
    }
  }

  // Merge slivers into their largest face neighbour.
  const double sliver = options.sliver_fraction * h * h;
  std::vector<int> parent(slots);
  std::iota(parent.begin(), parent.end(), 0);
  std::vector<std::vector<std::size_t>> nbrs(slots);
  for (const RawFace& f : raw_faces) {
    nbrs[f.a].push_back(f.b);
    nbrs[f.b].push_back(f.a);
  }
  for (std::size_t s = 0; s < slots; ++s) {
    if (!present[s] || raw[s].area >= sliver) continue;
    std::size_t host = slots;
    double best = -1.0;
    for (std::size_t nb : nbrs[s]) {
      if (raw[nb].area > best && raw[nb].area >= sliver) {
        best = raw[nb].area;
        host = nb;
      }
    }
    if (host == slots) {
      // no face neighbour: fall back to the largest lattice neighbour, diagonals included
      const int ix = static_cast<int>(s % nx);
      const int iy = static_cast<int>(s / nx);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int jx = ix + dx;
          const int jy = iy + dy;
          if ((dx == 0 && dy == 0) || jx < 0 || jy < 0 || jx >= nx || jy >= ny) continue;
          const std::size_t t = static_cast<std::size_t>(jy) * nx + jx;
          if (present[t] && raw[t].area >= sliver && raw[t].area > best) {
            best = raw[t].area;
            host = t;
          }
        }
      }
    }
    if (host != slots) parent[s] = static_cast<int>(host);
  }

  std::vector<int> cell_of(slots, -1);
  for (std::size_t s = 0; s < slots; ++s) {
    if (!present[s] || find_root(parent, static_cast<int>(s)) != static_cast<int>(s)) continue;
    cell_of[s] = static_cast<int>(g.cells_.size());
    Cell c;
    c.ix = static_cast<int>(s % nx);
    c.iy = static_cast<int>(s / nx);
    c.center = {g.origin_.x + (c.ix + 0.5) * h, g.origin_.y + (c.iy + 0.5) * h};
    g.cells_.push_back(c);
  }
  if (g.cells_.size() > options.max_cells) {
    throw InvalidInput("grid cell count exceeds the configured maximum; choose a coarser spacing");
  }
  if (g.cells_.empty()) throw InvalidInput("grid has no cells; spacing too coarse for the domain");

  std::vector<double> cx(g.cells_.size(), 0.0);
  std::vector<double> cy(g.cells_.size(), 0.0);
  for (std::size_t s = 0; s < slots; ++s) {
    if (!present[s]) continue;
    const int c = cell_of[static_cast<std::size_t>(find_root(parent, static_cast<int>(s)))];
    Cell& cell = g.cells_[c];
    cell.measure += raw[s].area;
    cell.boundary_length += boundary[s];
    cx[c] += raw[s].area * raw[s].centroid.x;
    cy[c] += raw[s].area * raw[s].centroid.y;
  }
  for (std::size_t c = 0; c < g.cells_.size(); ++c) {
    g.cells_[c].centroid = {cx[c] / g.cells_[c].measure, cy[c] / g.cells_[c].measure};
  }

  std::map<std::pair<int, int>, double> merged;
  for (const RawFace& f : raw_faces) {
    const int a = cell_of[static_cast<std::size_t>(find_root(parent, static_cast<int>(f.a)))];
    const int b = cell_of[static_cast<std::size_t>(find_root(parent, static_cast<int>(f.b)))];
    if (a == b) continue;
    merged[{std::min(a, b), std::max(a, b)}] += f.length;
  }
  g.faces_.reserve(merged.size());
  for (const auto& [key, len] : merged) g.faces_.push_back({key.first, key.second, len, len / h});

  for (std::size_t c = 0; c < g.cells_.size(); ++c) {
    if (g.cells_[c].boundary_length > 0.0) {
      g.boundary_faces_.push_back({static_cast<int>(c), g.cells_[c].boundary_length});
    }
  }

  g.lattice_.assign(slots, -1);
  for (std::size_t s = 0; s < slots; ++s) {
    if (present[s]) g.lattice_[s] = cell_of[static_cast<std::size_t>(find_root(parent, static_cast<int>(s)))];
  }
  return g;
}

Mask truncate(const Grid& grid, const std::vector<double>& schedule, TruncationScheme scheme, std::size_t n,
              Point center) {
  if (n >= schedule.size()) throw InvalidInput("truncation index beyond schedule");
  for (std::size_t i = 1; i < schedule.size(); ++i) {
    if (!(schedule[i] > schedule[i - 1])) throw InvalidInput("truncation schedule must be strictly increasing");
  }
  const std::string name = "K" + std::to_string(n + 1);
  if (scheme == TruncationScheme::ball) return grid.ball(center, schedule[n], name);
  return grid.x_below(schedule[n], name);
}

}  // namespace rbm
