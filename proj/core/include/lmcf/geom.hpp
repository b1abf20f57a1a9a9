#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "lmcf/numerics.hpp"

namespace lmcf {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Vec2 {
  double x = 0.0, y = 0.0;
  Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}
  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2 operator/(double s) const { return {x / s, y / s}; }
  Vec2 operator-() const { return {-x, -y}; }
  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
  bool operator==(const Vec2&) const = default;
};
inline Vec2 operator*(double s, Vec2 v) { return v * s; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double norm2(Vec2 a) { return a.x * a.x + a.y * a.y; }
// complex structure: multiplication by i
inline Vec2 J(Vec2 a) { return {-a.y, a.x}; }
inline Vec2 unit(double angle) { return {std::cos(angle), std::sin(angle)}; }
inline Vec2 rotate(Vec2 a, double ang) {
  double c = std::cos(ang), s = std::sin(ang);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}

enum class Topology { ClosedLoop, OpenArc };

struct AsymptoticRay {
  double angle = 0.0;  // outward direction of the ray, radians in [0, 2pi)
  double reach = 1.0;  // length beyond the end vertex identified with the ray
};

// Open arcs carry rays[0] (beyond the first vertex) and rays[1] (beyond the last vertex).
struct PolyCurve {
  std::vector<Vec2> vertices;
  Topology topology = Topology::ClosedLoop;
  std::vector<AsymptoticRay> rays;
  double h = 0.0;

  bool closed() const { return topology == Topology::ClosedLoop; }
  std::size_t size() const { return vertices.size(); }
  std::size_t edge_count() const { return closed() ? vertices.size() : vertices.size() - 1; }
  Vec2 edge(std::size_t i) const {
    return vertices[(i + 1) % vertices.size()] - vertices[i];
  }
};

PolyCurve make_closed(std::vector<Vec2> v, double h);
PolyCurve make_open(std::vector<Vec2> v, double h, AsymptoticRay start, AsymptoticRay end);

struct ValidationOptions {
  bool check_edge_bounds = true;
  std::size_t min_vertices = 16;
};
// Throws GeometryError describing the first violated invariant.
void validate(const PolyCurve& c, const ValidationOptions& opt = {});

double wrap_angle(double a);       // into (-pi, pi]
double wrap_angle_2pi(double a);   // into [0, 2pi)

std::vector<double> edge_lengths(const PolyCurve& c);
std::vector<double> cumulative_length(const PolyCurve& c);  // size n (+1 for loops: total at end)
double total_length(const PolyCurve& c);
double shoelace_area(const PolyCurve& c);

// Unit tangents at vertices from arc-length weighted central differences.
std::vector<Vec2> vertex_tangents(const PolyCurve& c);

struct AngleLift {
  std::vector<double> theta;
  double increment = 0.0;  // theta change once around a loop (0 for arcs)
  int turning_number = 0;
  bool zero_maslov = true;
};
AngleLift lagrangian_angle(const PolyCurve& c);
// Lift with theta[0] on the branch nearest to `reference`.
AngleLift lagrangian_angle(const PolyCurve& c, double reference);

struct Primitive {
  std::vector<double> beta;
  double period = 0.0;
  bool exact = true;
};
Primitive liouville_primitive(const PolyCurve& c, double tol = 1e-8);

struct CurvatureData {
  std::vector<double> kappa;
  std::vector<Vec2> normal;  // N = J T
  std::vector<Vec2> H;       // kappa N
};
CurvatureData curvature(const PolyCurve& c);

struct LagrangianFields {
  std::vector<double> theta, beta, kappa, arclen;
  double beta_period = 0.0;
  double theta_increment = 0.0;
  int turning_number = 0;
  bool zero_maslov = true;
  bool exact = true;
};
LagrangianFields compute_fields(const PolyCurve& c, double exact_tol = 1e-8);

struct IntegralResult {
  double finite = 0.0;
  double ray = 0.0;
  double total() const { return finite + ray; }
  bool ray_included = false;
};
using PointFn = std::function<double(Vec2)>;
// Integral of f over the half-line origin + s*dir, s >= 0.
using RayFn = std::function<double(Vec2 origin, Vec2 dir)>;
IntegralResult curve_integral(const PolyCurve& c, const PointFn& f, int order = 5,
                              const RayFn& ray = nullptr, bool include_rays = false);

// Cubic-spline representation of a polyline in chord-length parameter.
class CurveSpline {
 public:
  explicit CurveSpline(const PolyCurve& c);
  Vec2 point(double u) const;
  Vec2 derivative(double u) const;
  double length() const { return length_; }
  const std::vector<double>& knots() const { return u_; }
  bool closed() const { return closed_; }

 private:
  std::vector<double> u_;
  CubicSpline sx_, sy_;
  double length_ = 0.0;
  bool closed_ = true;
};

PolyCurve resample(const PolyCurve& c, double h);
// Same as resample but also returns the chord parameter of each new vertex on the input spline.
PolyCurve resample(const PolyCurve& c, double h, std::vector<double>& new_params, double& spline_length);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b, double* t = nullptr);
double point_ray_distance(Vec2 p, Vec2 origin, Vec2 dir);
// Distance from p to the curve, including its asymptotic rays for open arcs.
double distance_to_curve(Vec2 p, const PolyCurve& c, bool include_rays = true);

struct HausdorffResult {
  double value = 0.0;
  Vec2 where;
};
// Symmetric Hausdorff distance; the optional mask restricts which points of each curve are probed.
HausdorffResult hausdorff(const PolyCurve& a, const PolyCurve& b, bool include_rays = true,
                          const std::function<bool(Vec2)>& mask = nullptr);

struct EmbeddingReport {
  bool embedded = true;
  std::size_t seg_a = 0, seg_b = 0;
};
EmbeddingReport check_embedded(const PolyCurve& c);

// Piecewise smooth parametric pieces sampled at near-uniform arc length with vertices exactly on the pieces.
struct ParamPiece {
  std::function<Vec2(double)> f;
  double t0 = 0.0, t1 = 1.0;
};
struct PieceParam {
  std::size_t piece;
  double t;
};
// Optionally reports, for each output vertex, the piece and parameter it was evaluated at.
std::vector<Vec2> sample_pieces(const std::vector<ParamPiece>& pieces, double h, bool closed,
                                int oversample = 32, std::vector<PieceParam>* where = nullptr);

// Length of the part of segment [a,b] inside the disk B_r(x).
double segment_disk_length(Vec2 a, Vec2 b, Vec2 x, double r);
double length_in_ball(const PolyCurve& c, Vec2 x, double r);

// Uniform grid over segments for proximity queries.
class SegmentGrid {
 public:
  SegmentGrid(const PolyCurve& c, double cell);
  template <class F>
  void for_near(Vec2 p, double radius, F&& f) const {
    int ix0 = cell_x(p.x - radius), ix1 = cell_x(p.x + radius);
    int iy0 = cell_y(p.y - radius), iy1 = cell_y(p.y + radius);
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix)
        for (std::size_t s : bucket(ix, iy)) f(s);
  }
  double nearest(Vec2 p, double* t = nullptr, std::size_t* seg = nullptr) const;

 private:
  int cell_x(double x) const;
  int cell_y(double y) const;
  const std::vector<std::size_t>& bucket(int ix, int iy) const;
  const PolyCurve* curve_;
  double cell_, x0_, y0_;
  int nx_, ny_;
  std::vector<std::vector<std::size_t>> cells_;
  std::vector<std::size_t> empty_;
};

}  // namespace lmcf
