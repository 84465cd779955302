#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rbm {

struct Point {
  double x = 0.0;
  double y = 0.0;

  friend Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
  friend Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
  friend Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point a, Point b) = default;
};

inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline double distance(Point a, Point b) { return norm(a - b); }

struct Box {
  Point lo;
  Point hi;
};

/// Signed shoelace area; positive for counterclockwise vertex order.
double signed_area(std::span<const Point> ring);
double perimeter(std::span<const Point> ring);

/// Closest point to `p` on segment [a, b].
Point closest_on_segment(Point p, Point a, Point b);

enum class DomainKind { rectangle, polygon, horn };

/// Profile H(x) = scale * x^(-exponent) of the horn {1 < x < x_max, |y| < H(x)}.
struct HornProfile {
  double exponent = 1.0;
  double scale = 1.0;
  double x_max = 2.0;

  double height(double x) const { return scale * std::pow(x, -exponent); }
  /// Exact area 2 * int_1^x_max H(x) dx.
  double area() const;
};

/// A bounded 2-D Lipschitz domain D together with a polygonal boundary
/// used by the grid, reflection and distance queries.
///
/// Rectangles occupy [0, width] x [0, height]. Polygons are stored as given
/// (counterclockwise, simple). Horns keep their exact profile for membership
/// and area; the boundary ring is a fine polyline through points of the
/// profile whose chord sagitta stays below 1e-7.
class Domain {
 public:
  static Domain rectangle(double width, double height, std::string name = "rectangle");
  static Domain polygon(std::vector<Point> ccw_vertices, std::string name = "polygon");
  static Domain horn(double exponent, double scale, double x_max, std::string name = "horn");

  DomainKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  const std::optional<HornProfile>& horn_profile() const { return horn_; }
  double width() const { return width_; }
  double height() const { return height_; }

  /// Counterclockwise boundary ring (no repeated closing vertex).
  const std::vector<Point>& boundary() const { return ring_; }
  Box bounding_box() const { return bbox_; }

  /// Area of D (exact profile integral for horns).
  double area() const;
  /// Length of the polygonal boundary ring.
  double perimeter() const;

  /// True iff `p` lies in the open domain D.
  bool contains(Point p) const;
  /// True iff `p` lies in the closure of the polygonal domain, up to `tol`.
  bool contains_closure(Point p, double tol = 1e-12) const;

  double distance_to_boundary(Point p) const;
  Point closest_boundary_point(Point p) const;

  /// One reflected move: specular reflection of the overshoot across the
  /// first boundary segment crossed, at most four times, then projection
  /// onto the closure.
  Point reflect_step(Point from, Point to) const;

  /// Domain restricted to {x < x_cut}. Horns are re-profiled; other kinds are
  /// clipped. Returns *this when the cut lies beyond the domain.
  Domain truncated(double x_cut) const;

 private:
  Domain() = default;
  void finish();
  bool polygon_contains(Point p) const;

  DomainKind kind_ = DomainKind::polygon;
  std::string name_;
  double width_ = 0.0;
  double height_ = 0.0;
  std::optional<HornProfile> horn_;
  std::vector<Point> ring_;
  Box bbox_;
};

/// Parses a JSON domain description: {"name", "kind", "params"}.
/// kind = "rectangle" (width, height) | "polygon" (vertices: [[x,y],...])
///      | "horn" (exponent, scale, x_max).
Domain build_domain(std::string_view spec_text);
Domain load_domain(const std::string& path);
std::string domain_to_json(const Domain& d);

}  // namespace rbm
