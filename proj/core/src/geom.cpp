#include "lmcf/geom.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace lmcf {

namespace {
constexpr double kPi = std::numbers::pi;
}

PolyCurve make_closed(std::vector<Vec2> v, double h) {
  PolyCurve c;
  c.vertices = std::move(v);
  c.topology = Topology::ClosedLoop;
  c.h = h;
  return c;
}

PolyCurve make_open(std::vector<Vec2> v, double h, AsymptoticRay start, AsymptoticRay end) {
  PolyCurve c;
  c.vertices = std::move(v);
  c.topology = Topology::OpenArc;
  c.rays = {start, end};
  c.h = h;
  return c;
}

void validate(const PolyCurve& c, const ValidationOptions& opt) {
  if (c.vertices.size() < opt.min_vertices) {
    std::ostringstream os;
    os << "curve has " << c.vertices.size() << " vertices, need at least " << opt.min_vertices;
    throw GeometryError(os.str());
  }
  if (c.closed() && !c.rays.empty()) throw GeometryError("closed loop must not carry rays");
  if (!c.closed()) {
    if (c.rays.size() != 2) throw GeometryError("open arc needs two asymptotic rays");
    for (const auto& r : c.rays)
      if (!(r.reach > 0.0)) throw GeometryError("asymptotic ray reach must be positive");
  }
  for (std::size_t i = 0; i < c.edge_count(); ++i) {
    double l = norm(c.edge(i));
    if (l == 0.0) throw GeometryError("consecutive vertices coincide at index " + std::to_string(i));
    if (opt.check_edge_bounds && c.h > 0.0 && (l < 0.25 * c.h || l > 4.0 * c.h)) {
      std::ostringstream os;
      os << "edge " << i << " has length " << l << " outside [h/4, 4h] with h=" << c.h;
      throw GeometryError(os.str());
    }
  }
}

double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

double wrap_angle_2pi(double a) {
  double r = std::fmod(a, 2.0 * kPi);
  if (r < 0) r += 2.0 * kPi;
  if (r >= 2.0 * kPi) r -= 2.0 * kPi;
  return r;
}

std::vector<double> edge_lengths(const PolyCurve& c) {
  std::vector<double> l(c.edge_count());
  for (std::size_t i = 0; i < l.size(); ++i) l[i] = norm(c.edge(i));
  return l;
}

std::vector<double> cumulative_length(const PolyCurve& c) {
  auto l = edge_lengths(c);
  std::vector<double> s(l.size() + 1, 0.0);
  for (std::size_t i = 0; i < l.size(); ++i) s[i + 1] = s[i] + l[i];
  return s;
}

double total_length(const PolyCurve& c) {
  double s = 0;
  for (std::size_t i = 0; i < c.edge_count(); ++i) s += norm(c.edge(i));
  return s;
}

double shoelace_area(const PolyCurve& c) {
  double a = 0;
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < n; ++i) a += cross(c.vertices[i], c.vertices[(i + 1) % n]);
  return 0.5 * a;
}

std::vector<Vec2> vertex_tangents(const PolyCurve& c) {
  const std::size_t n = c.size();
  std::vector<Vec2> T(n);
  const auto& v = c.vertices;
  auto deriv3 = [](Vec2 pm, Vec2 p, Vec2 pp, double hm, double hp) {
    // first derivative of the quadratic through three points, evaluated at the middle one
    return ((pp - p) * (hm / (hp * (hm + hp)))) + ((p - pm) * (hp / (hm * (hm + hp))));
  };
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 d;
    if (c.closed() || (i > 0 && i + 1 < n)) {
      Vec2 pm = v[(i + n - 1) % n], p = v[i], pp = v[(i + 1) % n];
      d = deriv3(pm, p, pp, norm(p - pm), norm(pp - p));
    } else if (i == 0) {
      Vec2 p0 = v[0], p1 = v[1], p2 = v[2];
      double h1 = norm(p1 - p0), h2 = norm(p2 - p1);
      // one-sided second-order stencil
      d = (p1 - p0) * ((h1 + h2) / (h1 * h2)) - (p2 - p0) * (h1 / (h2 * (h1 + h2)));
    } else {
      Vec2 p0 = v[n - 1], p1 = v[n - 2], p2 = v[n - 3];
      double h1 = norm(p1 - p0), h2 = norm(p2 - p1);
      d = -((p1 - p0) * ((h1 + h2) / (h1 * h2)) - (p2 - p0) * (h1 / (h2 * (h1 + h2))));
    }
    double l = norm(d);
    if (l == 0.0) throw GeometryError("degenerate tangent stencil at vertex " + std::to_string(i));
    T[i] = d / l;
  }
  return T;
}

AngleLift lagrangian_angle(const PolyCurve& c, double reference) {
  auto T = vertex_tangents(c);
  AngleLift out;
  const std::size_t n = T.size();
  out.theta.resize(n);
  double a0 = std::atan2(T[0].y, T[0].x);
  out.theta[0] = reference + wrap_angle(a0 - reference);
  for (std::size_t i = 1; i < n; ++i) {
    double a = std::atan2(T[i].y, T[i].x);
    out.theta[i] = out.theta[i - 1] + wrap_angle(a - out.theta[i - 1]);
  }
  if (c.closed()) {
    double a = std::atan2(T[0].y, T[0].x);
    double back = out.theta[n - 1] + wrap_angle(a - out.theta[n - 1]);
    out.increment = back - out.theta[0];
    out.turning_number = static_cast<int>(std::lround(out.increment / (2.0 * kPi)));
    out.zero_maslov = out.turning_number == 0;
  }
  return out;
}

AngleLift lagrangian_angle(const PolyCurve& c) { return lagrangian_angle(c, 0.0); }

Primitive liouville_primitive(const PolyCurve& c, double tol) {
  auto T = vertex_tangents(c);
  const std::size_t n = c.size();
  const auto& v = c.vertices;
  Primitive p;
  p.beta.assign(n, 0.0);
  auto lam = [&](std::size_t i) { return dot(J(v[i]), T[i]); };
  for (std::size_t i = 1; i < n; ++i) {
    double ds = norm(v[i] - v[i - 1]);
    p.beta[i] = p.beta[i - 1] + 0.5 * ds * (lam(i - 1) + lam(i));
  }
  if (c.closed()) {
    double ds = norm(v[0] - v[n - 1]);
    p.period = p.beta[n - 1] + 0.5 * ds * (lam(n - 1) + lam(0));
    p.exact = std::abs(p.period) <= tol;
  }
  return p;
}

CurvatureData curvature(const PolyCurve& c) {
  const std::size_t n = c.size();
  const auto& v = c.vertices;
  if (n < 3) throw GeometryError("curvature needs at least three vertices");
  CurvatureData out;
  out.kappa.resize(n);
  out.normal.resize(n);
  out.H.resize(n);
  auto T = vertex_tangents(c);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t im, ip, ic;
    if (c.closed()) {
      im = (i + n - 1) % n, ic = i, ip = (i + 1) % n;
    } else if (i == 0) {
      im = 0, ic = 1, ip = 2;
    } else if (i + 1 == n) {
      im = n - 3, ic = n - 2, ip = n - 1;
    } else {
      im = i - 1, ic = i, ip = i + 1;
    }
    Vec2 pm = v[im], p = v[ic], pp = v[ip];
    double hm = norm(p - pm), hp = norm(pp - p);
    if (hm == 0.0 || hp == 0.0) throw GeometryError("degenerate curvature stencil at vertex " + std::to_string(i));
    Vec2 d1 = ((pp - p) * (hm / (hp * (hm + hp)))) + ((p - pm) * (hp / (hm * (hm + hp))));
    Vec2 d2 = ((pp - p) / hp - (p - pm) / hm) * (2.0 / (hm + hp));
    double sp = norm(d1);
    double k = cross(d1, d2) / (sp * sp * sp);
    if (!c.closed() && (i == 0 || i + 1 == n)) {
      // linear extrapolation from the two nearest interior estimates is done below
    }
    out.kappa[i] = k;
    out.normal[i] = J(T[i]);
  }
  if (!c.closed() && n >= 4) {
    // one-sided: extrapolate from interior values (second order on smooth curves)
    auto interior = [&](std::size_t j) {
      Vec2 pm = v[j - 1], p = v[j], pp = v[j + 1];
      double hm = norm(p - pm), hp = norm(pp - p);
      Vec2 d1 = ((pp - p) * (hm / (hp * (hm + hp)))) + ((p - pm) * (hp / (hm * (hm + hp))));
      Vec2 d2 = ((pp - p) / hp - (p - pm) / hm) * (2.0 / (hm + hp));
      double sp = norm(d1);
      return cross(d1, d2) / (sp * sp * sp);
    };
    double k1 = interior(1), k2 = interior(2);
    double h0 = norm(v[1] - v[0]), h1 = norm(v[2] - v[1]);
    out.kappa[0] = k1 + (k1 - k2) * h0 / h1;
    double kn1 = interior(n - 2), kn2 = interior(n - 3);
    double g0 = norm(v[n - 1] - v[n - 2]), g1 = norm(v[n - 2] - v[n - 3]);
    out.kappa[n - 1] = kn1 + (kn1 - kn2) * g0 / g1;
  }
  for (std::size_t i = 0; i < n; ++i) out.H[i] = out.normal[i] * out.kappa[i];
  return out;
}

LagrangianFields compute_fields(const PolyCurve& c, double exact_tol) {
  LagrangianFields f;
  auto lift = lagrangian_angle(c);
  auto prim = liouville_primitive(c, exact_tol);
  auto curv = curvature(c);
  f.theta = std::move(lift.theta);
  f.theta_increment = lift.increment;
  f.turning_number = lift.turning_number;
  f.zero_maslov = lift.zero_maslov;
  f.beta = std::move(prim.beta);
  f.beta_period = prim.period;
  f.exact = prim.exact;
  f.kappa = std::move(curv.kappa);
  auto s = cumulative_length(c);
  f.arclen.assign(s.begin(), s.begin() + c.size());
  return f;
}

IntegralResult curve_integral(const PolyCurve& c, const PointFn& f, int order, const RayFn& ray,
                              bool include_rays) {
  const auto& g = gauss_legendre(order);
  IntegralResult r;
  for (std::size_t i = 0; i < c.edge_count(); ++i) {
    Vec2 a = c.vertices[i], b = c.vertices[(i + 1) % c.size()];
    double len = norm(b - a);
    Vec2 mid = (a + b) * 0.5, half = (b - a) * 0.5;
    double acc = 0;
    for (std::size_t k = 0; k < g.nodes.size(); ++k) acc += g.weights[k] * f(mid + half * g.nodes[k]);
    r.finite += 0.5 * len * acc;
  }
  if (include_rays && !c.closed()) {
    if (!ray) throw GeometryError("integrand has no closed-form ray restriction");
    r.ray += ray(c.vertices.front(), unit(c.rays[0].angle));
    r.ray += ray(c.vertices.back(), unit(c.rays[1].angle));
    r.ray_included = true;
  }
  return r;
}

CurveSpline::CurveSpline(const PolyCurve& c) : closed_(c.closed()) {
  const std::size_t n = c.size();
  if (n < 3) throw GeometryError("spline needs three vertices");
  u_.resize(n);
  u_[0] = 0;
  for (std::size_t i = 1; i < n; ++i) u_[i] = u_[i - 1] + norm(c.vertices[i] - c.vertices[i - 1]);
  std::vector<double> xs(n), ys(n);
  for (std::size_t i = 0; i < n; ++i) xs[i] = c.vertices[i].x, ys[i] = c.vertices[i].y;
  if (closed_) {
    length_ = u_.back() + norm(c.vertices[0] - c.vertices[n - 1]);
    sx_ = CubicSpline(u_, xs, true, length_);
    sy_ = CubicSpline(u_, ys, true, length_);
  } else {
    length_ = u_.back();
    sx_ = CubicSpline(u_, xs, false);
    sy_ = CubicSpline(u_, ys, false);
  }
}

Vec2 CurveSpline::point(double u) const { return {sx_(u), sy_(u)}; }
Vec2 CurveSpline::derivative(double u) const { return {sx_.derivative(u), sy_.derivative(u)}; }

PolyCurve resample(const PolyCurve& c, double h, std::vector<double>& params, double& spline_length) {
  if (!(h > 0.0)) throw GeometryError("resample: h must be positive");
  CurveSpline sp(c);
  double L = sp.length();
  spline_length = L;
  PolyCurve out;
  out.topology = c.topology;
  out.rays = c.rays;
  out.h = h;
  if (c.closed()) {
    auto m = static_cast<std::size_t>(std::lround(L / h));
    if (m < 16) throw GeometryError("curve too short to hold 16 vertices at this resolution");
    params.resize(m);
    out.vertices.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      params[j] = L * static_cast<double>(j) / m;
      out.vertices[j] = sp.point(params[j]);
    }
  } else {
    auto m = static_cast<std::size_t>(std::lround(L / h));
    if (m + 1 < 16) throw GeometryError("curve too short to hold 16 vertices at this resolution");
    params.resize(m + 1);
    out.vertices.resize(m + 1);
    for (std::size_t j = 0; j <= m; ++j) {
      params[j] = L * static_cast<double>(j) / m;
      out.vertices[j] = sp.point(params[j]);
    }
    out.vertices.front() = c.vertices.front();
    out.vertices.back() = c.vertices.back();
  }
  return out;
}

PolyCurve resample(const PolyCurve& c, double h) {
  std::vector<double> p;
  double L;
  return resample(c, h, p, L);
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b, double* t) {
  Vec2 ab = b - a;
  double l2 = norm2(ab);
  double s = l2 > 0 ? std::clamp(dot(p - a, ab) / l2, 0.0, 1.0) : 0.0;
  if (t) *t = s;
  return norm(p - (a + ab * s));
}

double point_ray_distance(Vec2 p, Vec2 origin, Vec2 dir) {
  double s = std::max(0.0, dot(p - origin, dir));
  return norm(p - (origin + dir * s));
}

double distance_to_curve(Vec2 p, const PolyCurve& c, bool include_rays) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < c.edge_count(); ++i)
    best = std::min(best, point_segment_distance(p, c.vertices[i], c.vertices[(i + 1) % c.size()]));
  if (include_rays && !c.closed()) {
    best = std::min(best, point_ray_distance(p, c.vertices.front(), unit(c.rays[0].angle)));
    best = std::min(best, point_ray_distance(p, c.vertices.back(), unit(c.rays[1].angle)));
  }
  return best;
}

SegmentGrid::SegmentGrid(const PolyCurve& c, double cell) : curve_(&c), cell_(cell) {
  double xmin = 1e300, ymin = 1e300, xmax = -1e300, ymax = -1e300;
  for (auto v : c.vertices) {
    xmin = std::min(xmin, v.x), xmax = std::max(xmax, v.x);
    ymin = std::min(ymin, v.y), ymax = std::max(ymax, v.y);
  }
  x0_ = xmin - cell;
  y0_ = ymin - cell;
  nx_ = std::max(1, static_cast<int>((xmax - x0_) / cell) + 2);
  ny_ = std::max(1, static_cast<int>((ymax - y0_) / cell) + 2);
  if (static_cast<double>(nx_) * ny_ > 4e7) {
    cell_ = std::sqrt((xmax - xmin + 2 * cell) * (ymax - ymin + 2 * cell) / 4e7) + cell;
    nx_ = std::max(1, static_cast<int>((xmax - x0_) / cell_) + 2);
    ny_ = std::max(1, static_cast<int>((ymax - y0_) / cell_) + 2);
  }
  cells_.resize(static_cast<std::size_t>(nx_) * ny_);
  for (std::size_t s = 0; s < c.edge_count(); ++s) {
    Vec2 a = c.vertices[s], b = c.vertices[(s + 1) % c.size()];
    int ix0 = cell_x(std::min(a.x, b.x)), ix1 = cell_x(std::max(a.x, b.x));
    int iy0 = cell_y(std::min(a.y, b.y)), iy1 = cell_y(std::max(a.y, b.y));
    for (int iy = iy0; iy <= iy1; ++iy)
      for (int ix = ix0; ix <= ix1; ++ix) cells_[static_cast<std::size_t>(iy) * nx_ + ix].push_back(s);
  }
}

int SegmentGrid::cell_x(double x) const {
  return std::clamp(static_cast<int>(std::floor((x - x0_) / cell_)), 0, nx_ - 1);
}
int SegmentGrid::cell_y(double y) const {
  return std::clamp(static_cast<int>(std::floor((y - y0_) / cell_)), 0, ny_ - 1);
}
const std::vector<std::size_t>& SegmentGrid::bucket(int ix, int iy) const {
  return cells_[static_cast<std::size_t>(iy) * nx_ + ix];
}

double SegmentGrid::nearest(Vec2 p, double* t, std::size_t* seg) const {
  const auto& c = *curve_;
  double best = std::numeric_limits<double>::infinity();
  double radius = cell_;
  for (int round = 0; round < 64; ++round) {
    for_near(p, radius, [&](std::size_t s) {
      double tt;
      double d = point_segment_distance(p, c.vertices[s], c.vertices[(s + 1) % c.size()], &tt);
      if (d < best) {
        best = d;
        if (t) *t = tt;
        if (seg) *seg = s;
      }
    });
    if (best <= radius) return best;
    radius *= 2.0;
    if (radius > 1e6) break;
  }
  return best;
}

HausdorffResult hausdorff(const PolyCurve& a, const PolyCurve& b, bool include_rays,
                          const std::function<bool(Vec2)>& mask) {
  HausdorffResult r;
  auto one_side = [&](const PolyCurve& p, const PolyCurve& q) {
    double cell = std::max(1e-6, std::max(p.h, q.h) * 4.0);
    if (!(cell > 0)) cell = 0.05;
    SegmentGrid grid(q, cell);
    for (auto v : p.vertices) {
      if (mask && !mask(v)) continue;
      double d = grid.nearest(v);
      if (include_rays && !q.closed()) {
        d = std::min(d, point_ray_distance(v, q.vertices.front(), unit(q.rays[0].angle)));
        d = std::min(d, point_ray_distance(v, q.vertices.back(), unit(q.rays[1].angle)));
      }
      if (d > r.value) {
        r.value = d;
        r.where = v;
      }
    }
  };
  one_side(a, b);
  one_side(b, a);
  return r;
}

namespace {
bool segments_intersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
  double d1 = cross(q2 - q1, p1 - q1), d2 = cross(q2 - q1, p2 - q1);
  double d3 = cross(p2 - p1, q1 - p1), d4 = cross(p2 - p1, q2 - p1);
  // cross products at roundoff level are treated as zero
  double lp = norm(p2 - p1), lq = norm(q2 - q1);
  double eps = 1e-12 * lp * lq + 1e-300;
  auto sgn = [eps](double u) { return u > eps ? 1 : (u < -eps ? -1 : 0); };
  int s1 = sgn(d1), s2 = sgn(d2), s3 = sgn(d3), s4 = sgn(d4);
  if (s1 == 0 && s2 == 0) {
    // collinear: intersect only if the projections overlap
    Vec2 e = (p2 - p1) / std::max(lp, 1e-300);
    double a0 = 0, a1 = lp, b0 = dot(q1 - p1, e), b1 = dot(q2 - p1, e);
    if (b0 > b1) std::swap(b0, b1);
    return std::min(a1, b1) - std::max(a0, b0) > -1e-12 * (lp + lq);
  }
  return s1 * s2 <= 0 && s3 * s4 <= 0;
}
}  // namespace

EmbeddingReport check_embedded(const PolyCurve& c) {
  EmbeddingReport rep;
  const std::size_t m = c.edge_count();
  const std::size_t n = c.size();
  double cell = 0;
  for (std::size_t i = 0; i < m; ++i) cell = std::max(cell, norm(c.edge(i)));
  SegmentGrid grid(c, std::max(cell, 1e-9) * 2.0);
  for (std::size_t s = 0; s < m; ++s) {
    Vec2 a = c.vertices[s], b = c.vertices[(s + 1) % n];
    Vec2 mid = (a + b) * 0.5;
    bool hit = false;
    grid.for_near(mid, norm(b - a), [&](std::size_t t) {
      if (hit || t <= s) return;
      if (t == s + 1 || (c.closed() && (t + 1) % m == s) || (c.closed() && (s + 1) % m == t)) return;
      if (segments_intersect(a, b, c.vertices[t], c.vertices[(t + 1) % n])) {
        hit = true;
        rep.seg_a = s;
        rep.seg_b = t;
      }
    });
    if (hit) {
      rep.embedded = false;
      return rep;
    }
  }
  return rep;
}

std::vector<Vec2> sample_pieces(const std::vector<ParamPiece>& pieces, double h, bool closed,
                                int oversample, std::vector<PieceParam>* where) {
  // dense sampling to tabulate arc length against (piece, parameter)
  struct Node {
    std::size_t piece;
    double t, s;
  };
  std::vector<Node> nodes;
  double s = 0;
  Vec2 prev;
  bool first = true;
  for (std::size_t k = 0; k < pieces.size(); ++k) {
    const auto& pc = pieces[k];
    Vec2 a = pc.f(pc.t0);
    // rough length estimate to choose the dense count
    double rough = 0;
    Vec2 q = a;
    for (int j = 1; j <= 64; ++j) {
      Vec2 p = pc.f(pc.t0 + (pc.t1 - pc.t0) * j / 64.0);
      rough += norm(p - q);
      q = p;
    }
    int m = std::max(8, static_cast<int>(std::ceil(rough / h * oversample)));
    for (int j = (k == 0 ? 0 : 1); j <= m; ++j) {
      double t = pc.t0 + (pc.t1 - pc.t0) * j / m;
      Vec2 p = pc.f(t);
      if (!first) s += norm(p - prev);
      first = false;
      prev = p;
      nodes.push_back({k, t, s});
    }
  }
  double L = s;
  if (closed) L += norm(pieces.front().f(pieces.front().t0) - prev);
  std::size_t count = static_cast<std::size_t>(std::max<long>(2, std::lround(L / h)));
  std::vector<Vec2> out;
  if (where) where->clear();
  auto emit = [&](std::size_t piece, double t) {
    out.push_back(pieces[piece].f(t));
    if (where) where->push_back({piece, t});
  };
  std::size_t last = closed ? count : count + 1;
  std::size_t idx = 0;
  for (std::size_t j = 0; j < last; ++j) {
    double target = L * static_cast<double>(j) / count;
    if (!closed && j == count) {
      emit(pieces.size() - 1, pieces.back().t1);
      break;
    }
    while (idx + 1 < nodes.size() && nodes[idx + 1].s < target) ++idx;
    if (idx + 1 >= nodes.size()) {
      emit(pieces.size() - 1, pieces.back().t1);
      continue;
    }
    const Node& n0 = nodes[idx];
    const Node& n1 = nodes[idx + 1];
    double w = n1.s > n0.s ? (target - n0.s) / (n1.s - n0.s) : 0.0;
    w = std::clamp(w, 0.0, 1.0);
    if (n0.piece == n1.piece) {
      emit(n1.piece, n0.t + w * (n1.t - n0.t));
    } else {
      // n0 is the last node of the previous piece, which coincides with the start of this one
      const auto& pc = pieces[n1.piece];
      emit(n1.piece, pc.t0 + w * (n1.t - pc.t0));
    }
  }
  return out;
}

double segment_disk_length(Vec2 a, Vec2 b, Vec2 x, double r) {
  Vec2 d = b - a;
  double L = norm(d);
  if (L == 0) return 0;
  Vec2 u = d / L;
  Vec2 w = a - x;
  double bq = dot(w, u);
  double cq = norm2(w) - r * r;
  double disc = bq * bq - cq;
  if (disc <= 0) return 0;
  double sq = std::sqrt(disc);
  double t0 = std::max(0.0, -bq - sq), t1 = std::min(L, -bq + sq);
  return std::max(0.0, t1 - t0);
}

double length_in_ball(const PolyCurve& c, Vec2 x, double r) {
  double acc = 0;
  for (std::size_t i = 0; i < c.edge_count(); ++i)
    acc += segment_disk_length(c.vertices[i], c.vertices[(i + 1) % c.size()], x, r);
  return acc;
}

}  // namespace lmcf
