#include "rbmlab/geometry.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "rbmlab/error.hpp"

namespace rbm {

namespace {

constexpr int kMaxReflections = 4;
constexpr double kHornSagitta = 1e-7;
constexpr double kHornMaxChord = 0.05;

// Proper or touching intersection of closed segments [p1,p2] and [q1,q2].
bool segments_intersect(Point p1, Point p2, Point q1, Point q2) {
  auto orient = [](Point a, Point b, Point c) {
    const double v = cross(b - a, c - a);
    return (v > 0.0) - (v < 0.0);
  };
  auto on_segment = [](Point a, Point b, Point c) {
    return std::min(a.x, b.x) <= c.x && c.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= c.y && c.y <= std::max(a.y, b.y);
  };
  const int o1 = orient(p1, p2, q1);
  const int o2 = orient(p1, p2, q2);
  const int o3 = orient(q1, q2, p1);
  const int o4 = orient(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

void require_simple(const std::vector<Point>& ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = ring[i];
    const Point b = ring[(i + 1) % n];
    if (a == b) {
      std::ostringstream msg;
      msg << "polygon has a repeated vertex at index " << i;
      throw InvalidInput(msg.str());
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      // adjacent edges share a vertex by construction
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(a, b, ring[j], ring[(j + 1) % n])) {
        std::ostringstream msg;
        msg << "polygon is self-intersecting: edge " << i << " crosses edge " << j;
        throw InvalidInput(msg.str());
      }
    }
  }
}

std::vector<Point> clip_half_plane_x(const std::vector<Point>& ring, double x_cut) {
  std::vector<Point> out;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = ring[i];
    const Point b = ring[(i + 1) % n];
    const bool a_in = a.x <= x_cut;
    const bool b_in = b.x <= x_cut;
    if (a_in) out.push_back(a);
    if (a_in != b_in) {
      const double s = (x_cut - a.x) / (b.x - a.x);
      out.push_back({x_cut, a.y + s * (b.y - a.y)});
    }
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.size() > 1 && out.front() == out.back()) out.pop_back();
  return out;
}

}  // namespace

double signed_area(std::span<const Point> ring) {
  double acc = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) acc += cross(ring[i], ring[(i + 1) % n]);
  return 0.5 * acc;
}

double perimeter(std::span<const Point> ring) {
  double acc = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) acc += distance(ring[i], ring[(i + 1) % n]);
  return acc;
}

Point closest_on_segment(Point p, Point a, Point b) {
  const Point ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 == 0.0) return a;
  const double s = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return a + s * ab;
}

double HornProfile::area() const {
  if (std::abs(exponent - 1.0) < 1e-14) return 2.0 * scale * std::log(x_max);
  return 2.0 * scale * (std::pow(x_max, 1.0 - exponent) - 1.0) / (1.0 - exponent);
}

Domain Domain::rectangle(double width, double height, std::string name) {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw InvalidInput("rectangle requires width > 0 and height > 0");
  }
  Domain d;
  d.kind_ = DomainKind::rectangle;
  d.name_ = std::move(name);
  d.width_ = width;
  d.height_ = height;
  d.ring_ = {{0.0, 0.0}, {width, 0.0}, {width, height}, {0.0, height}};
  d.finish();
  return d;
}

Domain Domain::polygon(std::vector<Point> ccw_vertices, std::string name) {
  if (ccw_vertices.size() >= 2 && ccw_vertices.front() == ccw_vertices.back()) {
    ccw_vertices.pop_back();
  }
  if (ccw_vertices.size() < 3) throw InvalidInput("polygon needs at least 3 vertices");
  for (const Point& p : ccw_vertices) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw InvalidInput("polygon vertex is not finite");
    }
  }
  require_simple(ccw_vertices);
  if (!(signed_area(ccw_vertices) > 0.0)) {
    throw InvalidInput("polygon must have positive signed area (counterclockwise order)");
  }
  Domain d;
  d.kind_ = DomainKind::polygon;
  d.name_ = std::move(name);
  d.ring_ = std::move(ccw_vertices);
  d.finish();
  return d;
}

Domain Domain::horn(double exponent, double scale, double x_max, std::string name) {
  if (!(exponent > 0.0)) throw InvalidInput("horn profile exponent must be > 0");
  if (!(scale > 0.0)) throw InvalidInput("horn scale must be > 0");
  if (!(x_max > 1.0) || !std::isfinite(x_max)) throw InvalidInput("horn x_max must be finite and > 1");
  Domain d;
  d.kind_ = DomainKind::horn;
  d.name_ = std::move(name);
  d.horn_ = HornProfile{exponent, scale, x_max};
  const HornProfile& hp = *d.horn_;

  std::vector<double> xs{1.0};
  while (xs.back() < x_max) {
    const double x = xs.back();
    const double curvature = scale * exponent * (exponent + 1.0) * std::pow(x, -exponent - 2.0);
    double dx = std::min(kHornMaxChord, std::sqrt(8.0 * kHornSagitta / curvature));
    if (x + dx > x_max || x_max - (x + dx) < 0.25 * dx) dx = x_max - x;
    xs.push_back(x + dx);
  }
  xs.back() = x_max;

  std::vector<Point> ring;
  ring.reserve(2 * xs.size());
  for (double x : xs) ring.push_back({x, -hp.height(x)});
  for (auto it = xs.rbegin(); it != xs.rend(); ++it) ring.push_back({*it, hp.height(*it)});
  d.ring_ = std::move(ring);
  d.finish();
  return d;
}

void Domain::finish() {
  Box b{{std::numeric_limits<double>::max(), std::numeric_limits<double>::max()},
        {std::numeric_limits<double>::lowest(), std::numeric_limits<double>::lowest()}};
  for (const Point& p : ring_) {
    b.lo.x = std::min(b.lo.x, p.x);
    b.lo.y = std::min(b.lo.y, p.y);
    b.hi.x = std::max(b.hi.x, p.x);
    b.hi.y = std::max(b.hi.y, p.y);
  }
  bbox_ = b;
}

double Domain::area() const {
  switch (kind_) {
    case DomainKind::rectangle:
      return width_ * height_;
    case DomainKind::horn:
      return horn_->area();
    case DomainKind::polygon:
      break;
  }
  return signed_area(ring_);
}

double Domain::perimeter() const { return rbm::perimeter(ring_); }

bool Domain::polygon_contains(Point p) const {
  // crossing number
  bool inside = false;
  const std::size_t n = ring_.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point a = ring_[i];
    const Point b = ring_[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_at = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_at) inside = !inside;
    }
  }
  return inside;
}

bool Domain::contains(Point p) const {
  switch (kind_) {
    case DomainKind::rectangle:
      return p.x > 0.0 && p.x < width_ && p.y > 0.0 && p.y < height_;
    case DomainKind::horn:
      return p.x > 1.0 && p.x < horn_->x_max && std::abs(p.y) < horn_->height(p.x);
    case DomainKind::polygon:
      break;
  }
  return polygon_contains(p) && distance_to_boundary(p) > 0.0;
}

bool Domain::contains_closure(Point p, double tol) const {
  if (kind_ == DomainKind::rectangle) {
    return p.x >= -tol && p.x <= width_ + tol && p.y >= -tol && p.y <= height_ + tol;
  }
  if (p.x < bbox_.lo.x - tol || p.x > bbox_.hi.x + tol || p.y < bbox_.lo.y - tol ||
      p.y > bbox_.hi.y + tol) {
    return false;
  }
  if (polygon_contains(p)) return true;
  return distance_to_boundary(p) <= tol;
}

Point Domain::closest_boundary_point(Point p) const {
  Point best = ring_.front();
  double best_d2 = std::numeric_limits<double>::max();
  const std::size_t n = ring_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point c = closest_on_segment(p, ring_[i], ring_[(i + 1) % n]);
    const Point diff = p - c;
    const double d2 = dot(diff, diff);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = c;
    }
  }
  return best;
}

double Domain::distance_to_boundary(Point p) const {
  if (kind_ == DomainKind::rectangle) {
    const double dx = std::min(std::abs(p.x), std::abs(width_ - p.x));
    const double dy = std::min(std::abs(p.y), std::abs(height_ - p.y));
    if (p.x >= 0.0 && p.x <= width_ && p.y >= 0.0 && p.y <= height_) return std::min(dx, dy);
  }
  return distance(p, closest_boundary_point(p));
}

Point Domain::reflect_step(Point from, Point to) const {
  if (contains_closure(to, 0.0)) return to;
  Point p = from;
  Point q = to;
  const std::size_t n = ring_.size();
  std::size_t last_edge = n;  // edge reflected on in the previous pass
  for (int pass = 0; pass < kMaxReflections; ++pass) {
    const Point dir = q - p;
    double best_s = std::numeric_limits<double>::infinity();
    std::size_t best_edge = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (i == last_edge) continue;
      const Point a = ring_[i];
      const Point e = ring_[(i + 1) % n] - a;
      const double denom = cross(dir, e);
      if (denom == 0.0) continue;
      const Point ap = a - p;
      const double s = cross(ap, e) / denom;    // along p->q
      const double u = cross(ap, dir) / denom;  // along edge
      if (s >= 0.0 && s <= 1.0 && u >= 0.0 && u <= 1.0 && s < best_s) {
        best_s = s;
        best_edge = i;
      }
    }
    if (best_edge == n) break;
    const Point a = ring_[best_edge];
    const Point e = ring_[(best_edge + 1) % n] - a;
    const Point c = p + best_s * dir;
    const double len = norm(e);
    const Point normal{-e.y / len, e.x / len};
    const double overshoot = dot(q - c, normal);
    q = q - (2.0 * overshoot) * normal;
    p = c;
    last_edge = best_edge;
    if (contains_closure(q, 0.0)) return q;
  }
  if (contains_closure(q, 0.0)) return q;
  return closest_boundary_point(q);
}

Domain Domain::truncated(double x_cut) const {
  if (x_cut >= bbox_.hi.x) return *this;
  if (kind_ == DomainKind::horn) {
    if (!(x_cut > 1.0)) throw InvalidInput("horn truncation must lie beyond x = 1");
    return horn(horn_->exponent, horn_->scale, x_cut, name_);
  }
  if (!(x_cut > bbox_.lo.x)) throw InvalidInput("truncation removes the whole domain");
  Domain d;
  d.kind_ = DomainKind::polygon;
  d.name_ = name_;
  d.ring_ = clip_half_plane_x(ring_, x_cut);
  if (d.ring_.size() < 3 || !(signed_area(d.ring_) > 0.0)) {
    throw InvalidInput("truncation leaves a degenerate domain");
  }
  d.finish();
  return d;
}

}  // namespace rbm
