#include "lmcf/monotone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "lmcf/density.hpp"
#include "lmcf/numerics.hpp"

namespace lmcf {

namespace {
const double pi = std::numbers::pi;
const double inf = std::numeric_limits<double>::infinity();

double three_point(double t0, double t1, double t2, double f0, double f1, double f2) {
  double h1 = t1 - t0, h2 = t2 - t1;
  return -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 + h1 / (h2 * (h1 + h2)) * f2;
}

// dual lengths of the vertices
std::vector<double> vertex_weights(const PolyCurve& c) {
  auto lens = edge_lengths(c);
  const std::size_t n = c.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (c.closed()) w[i] = 0.5 * (lens[i] + lens[(i + n - 1) % n]);
    else w[i] = 0.5 * ((i > 0 ? lens[i - 1] : 0.0) + (i + 1 < n ? lens[i] : 0.0));
  }
  return w;
}

// length of {o + u e : u >= 0} inside B_R(0)
double ray_length_in_ball(Vec2 o, Vec2 e, double R) {
  double b = dot(o, e), c = norm2(o) - R * R;
  double disc = b * b - c;
  if (disc <= 0) return 0.0;
  double sq = std::sqrt(disc);
  double u0 = std::max(0.0, -b - sq), u1 = -b + sq;
  return std::max(0.0, u1 - u0);
}

// runs of consecutive indices with inside[i], cyclic for loops
std::vector<std::vector<std::size_t>> runs_of(const std::vector<char>& inside, bool closed) {
  std::vector<std::vector<std::size_t>> out;
  const std::size_t n = inside.size();
  if (n == 0) return out;
  std::size_t start = 0;
  if (closed) {
    bool all = std::all_of(inside.begin(), inside.end(), [](char c) { return c != 0; });
    if (all) {
      std::vector<std::size_t> r(n);
      for (std::size_t i = 0; i < n; ++i) r[i] = i;
      out.push_back(r);
      return out;
    }
    while (inside[start]) start = (start + 1) % n;  // start on an outside vertex
  }
  std::vector<std::size_t> cur;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t i = closed ? (start + k) % n : k;
    if (inside[i]) cur.push_back(i);
    else if (!cur.empty()) out.push_back(std::move(cur)), cur.clear();
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// open curves continued along their rays out to radius R_far
std::vector<Vec2> extended_chain(const PolyCurve& c, double R_far, double spacing) {
  if (c.closed()) return c.vertices;
  std::vector<Vec2> head, out;
  auto extend = [&](Vec2 o, Vec2 e, std::vector<Vec2>& dst) {
    for (double u = spacing; norm(o + e * u) <= R_far + spacing && u < 1e6; u += spacing) dst.push_back(o + e * u);
  };
  extend(c.vertices.front(), unit(c.rays[0].angle), head);
  std::reverse(head.begin(), head.end());
  out = head;
  out.insert(out.end(), c.vertices.begin(), c.vertices.end());
  extend(c.vertices.back(), unit(c.rays[1].angle), out);
  return out;
}
}  // namespace

CutoffValue3 ball_cutoff(double r) {
  auto st = smooth_step(r - 2.0);
  return {1.0 - st.value, -st.d1, -st.d2};
}

double ball_cutoff_hessian_max() {
  // radial eigenvalues phi'' and phi'/r, r in [2, 3]
  return std::max(smooth_step_max_d2(), smooth_step_max_d1() / 2.0);
}

double ball_cutoff_constant() { return 9.0 * ball_cutoff_hessian_max(); }

std::vector<double> alpha_field(const FlowState& st, double s) {
  const std::size_t n = st.curve.size();
  double w = 2 * (s + st.t);
  std::vector<double> a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = st.beta[i] + w * st.theta[i];
  if (!st.curve.closed()) return a;
  double jump = st.beta_jump + w * st.theta_jump;
  std::vector<char> inside(n);
  for (std::size_t i = 0; i < n; ++i) inside[i] = norm(st.curve.vertices[i]) < 3.0;
  for (const auto& run : runs_of(inside, true)) {
    if (run.size() == n) {
      if (std::abs(jump) > 1e-8 * (1 + std::abs(a[0]))) throw MonotoneError("curve is not exact in B_3");
      return a;
    }
    // a run crossing the wrap continues with the jump added after index n-1
    bool wrapped = false;
    for (std::size_t k = 1; k < run.size(); ++k)
      if (run[k] < run[k - 1]) wrapped = true;
    if (!wrapped) continue;
    bool after = false;
    for (std::size_t k = 0; k < run.size(); ++k) {
      if (k > 0 && run[k] < run[k - 1]) after = true;
      if (after) a[run[k]] += jump;
    }
  }
  return a;
}

double alpha_gradient_defect(const FlowState& st, double s) {
  const auto& c = st.curve;
  const std::size_t n = c.size();
  double w = 2 * (s + st.t);
  auto lens = edge_lengths(c);
  auto T = vertex_tangents(c);
  double jump = st.fields.beta_period + w * st.fields.theta_increment;
  auto alpha = [&](std::size_t i) { return st.fields.beta[i] + w * st.fields.theta[i]; };
  double worst = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (norm(c.vertices[i]) >= 3.0) continue;
    if (!c.closed() && (i == 0 || i + 1 == n)) continue;
    std::size_t im = (i + n - 1) % n, ip = (i + 1) % n;
    double fm = alpha(im), f0 = alpha(i), fp = alpha(ip);
    if (c.closed() && i == 0) fm -= jump;
    if (c.closed() && i + 1 == n) fp += jump;
    double h1 = lens[im], h2 = lens[i];
    double d = (h1 * h1 * fp - h2 * h2 * fm + (h2 * h2 - h1 * h1) * f0) / (h1 * h2 * (h1 + h2));
    Vec2 N = J(T[i]);
    double expect = -dot(c.vertices[i], N) + w * st.fields.kappa[i];
    worst = std::max(worst, std::abs(d - expect));
  }
  return worst;
}

AlphaReport alpha_monotonicity_check(const FlowRun& run, double t0, double t1, double T0, double slack) {
  AlphaReport rep;
  const auto& snaps = run.snapshots;
  if (snaps.size() < 3) throw MonotoneError("need at least three snapshots");
  for (const auto& p : exactness_audit(run, {0, 0}, 3.0))
    if (p.beta_period > 1e-6) throw MonotoneError("exactness fails in B_3 at t = " + std::to_string(p.t));
  double h = snaps.front().h, dt = flow_dt(run.cfg);
  rep.C = ball_cutoff_constant();
  rep.max_excess = -inf;
  rep.T0 = T0;
  rep.slack = slack >= 0 ? slack : 20 * (h * h + dt);
  const double s = run.s;

  auto integral = [&](std::size_t k) {
    const auto& st = snaps[k];
    auto a = alpha_field(st, s);
    auto w = vertex_weights(st.curve);
    double acc = 0;
    for (std::size_t i = 0; i < st.curve.size(); ++i) {
      Vec2 x = st.curve.vertices[i];
      double phi = ball_cutoff(norm(x)).value;
      if (phi == 0) continue;
      acc += w[i] * phi * a[i] * a[i] * gaussian({0, 0}, T0 - st.t, x);
    }
    return acc;
  };

  std::vector<double> I(snaps.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t k = 1; k + 1 < snaps.size(); ++k) {
    const auto& st = snaps[k];
    if (st.t < t0 - 1e-12 || st.t > t1 + 1e-12 || !(snaps[k + 1].t < T0)) continue;
    for (std::size_t j : {k - 1, k, k + 1})
      if (std::isnan(I[j])) I[j] = integral(j);
    AlphaRow row;
    row.t = st.t;
    row.lhs = three_point(snaps[k - 1].t, st.t, snaps[k + 1].t, I[k - 1], I[k], I[k + 1]);
    auto a = alpha_field(st, s);
    auto w = vertex_weights(st.curve);
    auto cd = curvature(st.curve);
    double tt = s + st.t;
    for (std::size_t i = 0; i < st.curve.size(); ++i) {
      Vec2 x = st.curve.vertices[i];
      double r = norm(x);
      double phi = ball_cutoff(r).value;
      if (phi == 0) continue;
      double rho = gaussian({0, 0}, T0 - st.t, x);
      double m = 2 * tt * cd.kappa[i] - dot(x, cd.normal[i]);
      row.deviation_term += w[i] * phi * m * m * rho;
      if (r > 2.0) row.cutoff_term += w[i] * a[i] * a[i] * rho;
    }
    row.rhs = -row.deviation_term + rep.C * row.cutoff_term;
    row.excess = row.lhs - row.rhs;
    rep.max_excess = std::max(rep.max_excess, row.excess);
    rep.max_scale = std::max({rep.max_scale, std::abs(row.lhs), std::abs(row.rhs)});
    rep.rows.push_back(row);
  }
  if (rep.rows.empty()) throw MonotoneError("no snapshots in the requested window");
  rep.holds = rep.max_excess <= rep.slack;
  return rep;
}

Deviation expander_deviation(const PolyCurve& c, double R) { return expander_deviation(std::vector<PolyCurve>{c}, R); }

Deviation expander_deviation(const std::vector<PolyCurve>& parts, double R) {
  Deviation d;
  for (const auto& c : parts) {
    auto cd = curvature(c);
    auto w = vertex_weights(c);
    for (std::size_t i = 0; i < c.size(); ++i) {
      Vec2 x = c.vertices[i];
      if (norm(x) > R) continue;
      double m = cd.kappa[i] - dot(x, cd.normal[i]);
      d.integral += w[i] * m * m;
      d.sup = std::max(d.sup, std::abs(m));
    }
    if (!c.closed()) {
      for (int e = 0; e < 2; ++e) {
        Vec2 o = e == 0 ? c.vertices.front() : c.vertices.back();
        Vec2 dir = unit(c.rays[e].angle);
        double len = ray_length_in_ball(o, dir, R);
        if (len <= 0) continue;
        double off = cross(dir, o);
        d.integral += off * off * len;
        d.sup = std::max(d.sup, std::abs(off));
      }
    }
  }
  return d;
}

Deviation expander_deviation(const ExpanderArc& arc, double R) {
  Deviation d;
  const std::size_t n = arc.x.size();
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 x = arc.x[i];
    if (norm(x) > R) continue;
    Vec2 N = J(unit(arc.theta[i]));
    double m = arc.kappa[i] - dot(x, N);
    double ds = 0;
    if (i > 0) ds += 0.5 * (arc.sigma[i] - arc.sigma[i - 1]);
    if (i + 1 < n) ds += 0.5 * (arc.sigma[i + 1] - arc.sigma[i]);
    d.integral += ds * m * m;
    d.sup = std::max(d.sup, std::abs(m));
  }
  return d;
}

double time_averaged_deviation(const FlowRun& run, double T, double a, double R) {
  if (!(a > 1) || !(T > 0)) throw MonotoneError("time average needs T > 0 and a > 1");
  const auto& snaps = run.snapshots;
  if (snaps.empty() || snaps.back().t < a * T - 1e-12 || snaps.front().t > T)
    throw MonotoneError("window [T, aT] exceeds the run");
  auto rescaled = [&](const FlowState& st) {
    double q = std::sqrt(2 * (run.s + st.t));
    if (!(q > 0)) throw MonotoneError("rescaling needs s + t > 0");
    PolyCurve c = st.curve;
    for (auto& v : c.vertices) v = v / q;
    c.h /= q;
    return expander_deviation(c, R).integral;
  };
  std::vector<double> ts, vs;
  std::vector<double> all(snaps.size(), std::numeric_limits<double>::quiet_NaN());
  auto value = [&](std::size_t k) {
    if (std::isnan(all[k])) all[k] = rescaled(snaps[k]);
    return all[k];
  };
  auto at = [&](double t) {
    std::size_t k = 0;
    while (k + 1 < snaps.size() && snaps[k + 1].t <= t) ++k;
    if (std::abs(snaps[k].t - t) < 1e-12 || k + 1 >= snaps.size()) return value(k);
    double w = (t - snaps[k].t) / (snaps[k + 1].t - snaps[k].t);
    return value(k) * (1 - w) + value(k + 1) * w;
  };
  ts.push_back(T);
  vs.push_back(at(T));
  for (std::size_t k = 0; k < snaps.size(); ++k)
    if (snaps[k].t > T + 1e-12 && snaps[k].t < a * T - 1e-12) ts.push_back(snaps[k].t), vs.push_back(value(k));
  ts.push_back(a * T);
  vs.push_back(at(a * T));
  double acc = 0;
  for (std::size_t i = 1; i < ts.size(); ++i) acc += 0.5 * (vs[i] + vs[i - 1]) * (ts[i] - ts[i - 1]);
  return acc / ((a - 1) * T);
}

double distance_to_pair(Vec2 y, const LinePair& p) {
  return std::min(std::abs(cross(unit(p.phi1), y)), std::abs(cross(unit(p.phi2), y)));
}

double proximity_constant(double d, double y2, double nu) {
  double delta = d - nu;
  if (delta <= 0) return 0.0;
  auto g = [&](double C) { return C * std::exp(-y2 / C); };
  double lo = delta, hi = std::max(delta, 1e-300) * 2;
  if (g(lo) >= delta) return lo;
  while (g(hi) < delta) {
    lo = hi;
    hi *= 2;
    if (hi > 1e300) return inf;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) >= delta ? hi : lo) = mid;
  }
  return hi;
}

ProximityReport proximity_check(const FlowRun& run, const LinePair& pair, const ProximityOptions& opt) {
  ProximityReport rep;
  rep.density_bound = 1 + opt.eps0 / 2 + opt.nu;
  bool any = false;
  for (const auto& st : run.snapshots) {
    double st_sum = run.s + st.t;
    if (!(st_sum > 0)) throw MonotoneError("rescaling needs s + t > 0");
    double q = std::sqrt(2 * st_sum);
    double outer = std::pow(st_sum, -1.0 / 8);
    ProximityRow row;
    row.t = st.t;
    for (auto x : st.curve.vertices) {
      Vec2 y = x / q;
      double r = norm(y);
      if (r < opt.r1 || r > outer) continue;
      ++row.points;
      double d = distance_to_pair(y, pair);
      row.max_dist = std::max(row.max_dist, d);
      row.C1 = std::max(row.C1, proximity_constant(d, r * r, opt.nu));
    }
    if (row.points > 0) any = true;
    if (opt.density && row.points > 0 && outer > opt.r1) {
      DensityOptions dopt;
      dopt.error_estimate = false;
      for (int ci = 0; ci < opt.circles; ++ci) {
        double rr = opt.r1 * std::pow(outer / opt.r1, opt.circles > 1 ? static_cast<double>(ci) / (opt.circles - 1) : 0.0);
        for (int k = 0; k < opt.centers_per_circle; ++k) {
          Vec2 y0 = unit(2 * pi * k / opt.centers_per_circle) * rr;
          for (double r : opt.radii) {
            if (r < dopt.guard * st.curve.h / q) continue;
            double v = rescaled_density(st.curve, run.s, st.t, y0, r, dopt).value;
            row.max_density = std::max(row.max_density, v);
          }
        }
      }
    }
    rep.C1 = std::max(rep.C1, row.C1);
    rep.max_density = std::max(rep.max_density, row.max_density);
    rep.rows.push_back(row);
  }
  if (!any) throw MonotoneError("annulus is empty at this resolution");
  rep.density_ok = rep.max_density <= rep.density_bound;
  return rep;
}

namespace {
struct Sheet {
  std::vector<double> u, v, dv;  // graph over the common line, increasing u
  bool reaches_inner = false;
  double mean = 0.0;
};

struct Chains {
  std::vector<std::vector<Vec2>> pts;
  std::vector<bool> closed;
};

// portions of the chains inside B_radius(p)
std::vector<std::vector<Vec2>> portions(const Chains& ch, Vec2 p, double radius) {
  std::vector<std::vector<Vec2>> out;
  for (std::size_t c = 0; c < ch.pts.size(); ++c) {
    const auto& v = ch.pts[c];
    std::vector<char> inside(v.size());
    bool any = false;
    for (std::size_t i = 0; i < v.size(); ++i) {
      inside[i] = norm2(v[i] - p) < radius * radius;
      any = any || inside[i];
    }
    if (!any) continue;
    for (const auto& run : runs_of(inside, ch.closed[c])) {
      std::vector<Vec2> part;
      for (std::size_t i : run) part.push_back(v[i]);
      out.push_back(std::move(part));
    }
  }
  return out;
}

Vec2 principal_direction(const std::vector<std::vector<Vec2>>& parts) {
  Vec2 m{0, 0};
  std::size_t n = 0;
  for (const auto& p : parts)
    for (auto v : p) m = m + v, ++n;
  m = m / static_cast<double>(n);
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& p : parts)
    for (auto v : p) {
      Vec2 d = v - m;
      sxx += d.x * d.x, sxy += d.x * d.y, syy += d.y * d.y;
    }
  double ang = 0.5 * std::atan2(2 * sxy, sxx - syy);
  return unit(ang);
}

// graph decomposition over the line p + R e; false if some portion is not a graph
bool as_sheets(const std::vector<std::vector<Vec2>>& parts, Vec2 p, Vec2 e, std::vector<Sheet>& out) {
  out.clear();
  Vec2 n = J(e);
  for (const auto& part : parts) {
    Sheet s;
    for (auto v : part) {
      s.u.push_back(dot(v - p, e));
      s.v.push_back(dot(v - p, n));
      if (norm2(v - p) < 1.0) s.reaches_inner = true;
    }
    if (s.u.size() >= 2 && s.u.back() < s.u.front()) {
      std::reverse(s.u.begin(), s.u.end());
      std::reverse(s.v.begin(), s.v.end());
    }
    for (std::size_t i = 1; i < s.u.size(); ++i)
      if (!(s.u[i] > s.u[i - 1])) return false;
    const std::size_t m = s.u.size();
    s.dv.assign(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      if (m < 2) break;
      if (i == 0) s.dv[i] = (s.v[1] - s.v[0]) / (s.u[1] - s.u[0]);
      else if (i + 1 == m) s.dv[i] = (s.v[i] - s.v[i - 1]) / (s.u[i] - s.u[i - 1]);
      else {
        double h1 = s.u[i] - s.u[i - 1], h2 = s.u[i + 1] - s.u[i];
        s.dv[i] = (h1 * h1 * s.v[i + 1] - h2 * h2 * s.v[i - 1] + (h2 * h2 - h1 * h1) * s.v[i]) / (h1 * h2 * (h1 + h2));
      }
    }
    double acc = 0;
    for (double x : s.v) acc += x;
    s.mean = acc / static_cast<double>(m);
    out.push_back(std::move(s));
  }
  return true;
}

double interp(const std::vector<double>& u, const std::vector<double>& f, double x) {
  auto it = std::upper_bound(u.begin(), u.end(), x);
  if (it == u.begin()) return f.front();
  if (it == u.end()) return f.back();
  std::size_t i = static_cast<std::size_t>(it - u.begin());
  double w = (x - u[i - 1]) / (u[i] - u[i - 1]);
  return f[i - 1] * (1 - w) + f[i] * w;
}

// C^{1,alpha} norm of the difference of two sheets over their common domain within |u| < 1; -1 if no overlap
double difference_norm(const Sheet& a, const Sheet& b, double alpha) {
  double lo = std::max({a.u.front(), b.u.front(), -1.0}), hi = std::min({a.u.back(), b.u.back(), 1.0});
  if (a.u.size() < 2 || b.u.size() < 2 || hi - lo < 0.1) return -1.0;
  const int M = 33;
  std::vector<double> x(M), w(M), dw(M);
  for (int i = 0; i < M; ++i) {
    x[i] = lo + (hi - lo) * i / (M - 1);
    w[i] = interp(a.u, a.v, x[i]) - interp(b.u, b.v, x[i]);
    dw[i] = interp(a.u, a.dv, x[i]) - interp(b.u, b.dv, x[i]);
  }
  double s0 = 0, s1 = 0, hold = 0;
  for (int i = 0; i < M; ++i) s0 = std::max(s0, std::abs(w[i])), s1 = std::max(s1, std::abs(dw[i]));
  for (int step = 1; step < M; step *= 2)
    for (int i = 0; i + step < M; ++i)
      hold = std::max(hold, std::abs(dw[i + step] - dw[i]) / std::pow(x[i + step] - x[i], alpha));
  return s0 + s1 + hold;
}

// worst norm pairing each inner sheet with the nearest sheet of the other curve; inf when a sheet has no partner
double pair_sheets(const std::vector<Sheet>& S, const std::vector<Sheet>& O, double alpha) {
  double worst = 0;
  for (const auto& a : S) {
    if (!a.reaches_inner) continue;
    double best = inf, best_norm = inf;
    for (const auto& b : O) {
      double lo = std::max(a.u.front(), b.u.front()), hi = std::min(a.u.back(), b.u.back());
      if (hi <= lo) continue;
      double gap = std::abs(interp(a.u, a.v, 0.5 * (lo + hi)) - interp(b.u, b.v, 0.5 * (lo + hi)));
      if (gap < best) {
        best = gap;
        best_norm = difference_norm(a, b, alpha);
      }
    }
    if (best_norm < 0) continue;  // overlap too short to compare
    worst = std::max(worst, best_norm);
  }
  return worst;
}

Chains prepare(const std::vector<PolyCurve>& curves, double eps, double R_far) {
  Chains ch;
  for (const auto& c0 : curves) {
    double target = eps / 8;
    PolyCurve c = c0;
    double longest = 0;
    for (double l : edge_lengths(c)) longest = std::max(longest, l);
    if (longest > 1.5 * target) c = resample(c, target);
    auto pts = extended_chain(c, R_far, target);
    for (auto& v : pts) v = v / eps;
    ch.pts.push_back(std::move(pts));
    ch.closed.push_back(c.closed());
  }
  return ch;
}
}  // namespace

ClosenessReport c1alpha_closeness(const PolyCurve& A, const PolyCurve& B, double eps, double alpha, const Ball& W) {
  return c1alpha_closeness(std::vector<PolyCurve>{A}, std::vector<PolyCurve>{B}, eps, alpha, W);
}

ClosenessReport c1alpha_closeness(const std::vector<PolyCurve>& A, const std::vector<PolyCurve>& B, double eps,
                                  double alpha, const Ball& W) {
  ClosenessReport rep;
  rep.eps = eps;
  rep.alpha = alpha;
  if (!(eps > 0)) throw MonotoneError("closeness scale must be positive");
  double R_far = norm(W.center) + W.radius + 4 * eps;
  Chains ca = prepare(A, eps, R_far), cb = prepare(B, eps, R_far);
  Vec2 c = W.center / eps;
  double Rw = W.radius / eps;
  // unit balls on the half-unit lattice that meet either curve and whose centers cover W / eps
  std::map<std::pair<long, long>, char> centers;
  auto mark = [&](const Chains& ch) {
    for (const auto& pts : ch.pts)
      for (auto v : pts) {
        if (norm(v - c) > Rw + 1.0) continue;
        long i0 = static_cast<long>(std::floor((v.x - 1) * 2)), i1 = static_cast<long>(std::ceil((v.x + 1) * 2));
        long j0 = static_cast<long>(std::floor((v.y - 1) * 2)), j1 = static_cast<long>(std::ceil((v.y + 1) * 2));
        for (long i = i0; i <= i1; ++i)
          for (long j = j0; j <= j1; ++j) {
            Vec2 p{0.5 * i, 0.5 * j};
            if (norm(p - c) <= Rw + 0.36 && norm(p - v) < 1.0) centers[{i, j}] = 1;
          }
      }
  };
  mark(ca);
  mark(cb);
  for (const auto& [key, unused] : centers) {
    (void)unused;
    Vec2 p{0.5 * key.first, 0.5 * key.second};
    ++rep.balls;
    auto pa = portions(ca, p, 4.0), pb = portions(cb, p, 4.0);
    auto ia = portions(ca, p, 1.0), ib = portions(cb, p, 1.0);
    if (ia.empty() && ib.empty()) continue;
    std::vector<Sheet> sa, sb;
    bool ok = false;
    // direction fitted on the radius-2 portion of a curve that enters the unit ball
    auto fa = portions(ca, p, 2.0), fb = portions(cb, p, 2.0);
    for (const auto* src : {ia.empty() ? &fb : &fa, ia.empty() ? &fa : &fb}) {
      if (ok || src->empty()) continue;
      Vec2 e = principal_direction(*src);
      ok = as_sheets(pa, p, e, sa) && as_sheets(pb, p, e, sb);
    }
    if (!ok) {
      rep.structural_failure = true;
      rep.pass = false;
      std::ostringstream os;
      os << "not graphical over a common line near (" << p.x * eps << ", " << p.y * eps << ")";
      rep.note = os.str();
      rep.worst = inf;
      rep.worst_center = p * eps;
      return rep;
    }
    double value = std::max(pair_sheets(sa, sb, alpha), pair_sheets(sb, sa, alpha));
    ++rep.compared;
    if (value > rep.worst) {
      rep.worst = value;
      rep.worst_center = p * eps;
    }
  }
  rep.pass = rep.worst <= 1.0;
  if (std::isinf(rep.worst) && rep.note.empty()) rep.note = "a sheet has no counterpart in the other curve";
  return rep;
}

std::vector<PolyCurve> expander_pair(const ExpanderArc& arc, double h) {
  auto c = arc.curve(h);
  return {c, reflect_through_origin(c)};
}

StabilityReport stability_hypotheses_check(const std::vector<PolyCurve>& L, const ExpanderArc& arc,
                                           const StabilityParams& p) {
  StabilityReport rep;
  const auto& pair = arc.pair;
  double h = 0;
  for (const auto& c : L) h = std::max(h, c.h);
  // (i)
  for (const auto& c : L) {
    auto cd = curvature(c);
    for (std::size_t i = 0; i < c.size(); ++i)
      if (norm(c.vertices[i]) <= p.R) rep.max_curvature = std::max(rep.max_curvature, std::abs(cd.kappa[i]));
  }
  rep.i = rep.max_curvature <= p.M;
  // (ii)
  DensityOptions dopt;
  dopt.error_estimate = false;
  int m = static_cast<int>(std::floor(p.R / p.x_spacing));
  for (int a = -m; a <= m; ++a)
    for (int b = -m; b <= m; ++b) {
      Vec2 x{a * p.x_spacing, b * p.x_spacing};
      if (norm(x) > p.R) continue;
      for (double r = p.tau; r >= dopt.guard * h && r >= p.tau / 8 - 1e-15; r /= 2)
        rep.max_density = std::max(rep.max_density, density_ratio(L, x, r, dopt).value);
    }
  rep.ii = rep.max_density <= 1 + p.eps0;
  // (iii)
  rep.deviation = expander_deviation(L, p.R).integral;
  rep.iii = rep.deviation <= p.eta;
  // (iv)
  double rays[4] = {pair.phi1, pair.phi2, pair.phi1 + pi, pair.phi2 + pi};
  int hits[4] = {0, 0, 0, 0};
  rep.components = 0;
  rep.max_proximity_excess = -inf;
  for (const auto& c : L) {
    auto pts = extended_chain(c, p.R + 1, c.h > 0 ? c.h : 0.01);
    std::vector<char> inside(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double r = norm(pts[i]);
      inside[i] = r >= p.r && r <= p.R;
      if (inside[i]) {
        double bound = p.nu + p.C * std::exp(-r * r / p.C);
        rep.max_proximity_excess = std::max(rep.max_proximity_excess, distance_to_pair(pts[i], pair) - bound);
      }
    }
    for (const auto& run : runs_of(inside, c.closed())) {
      ++rep.components;
      Vec2 m{0, 0};
      for (std::size_t i : run) m = m + pts[i] / norm(pts[i]);
      double ang = std::atan2(m.y, m.x);
      int best = 0;
      for (int k = 1; k < 4; ++k)
        if (std::abs(wrap_angle(ang - rays[k])) < std::abs(wrap_angle(ang - rays[best]))) best = k;
      ++hits[best];
    }
  }
  bool bijective = rep.components == 4;
  for (int k = 0; k < 4; ++k) bijective = bijective && hits[k] == 1;
  rep.iv = bijective && rep.max_proximity_excess <= 0;
  if (!bijective) rep.note = "annulus components do not match the four rays";
  rep.closeness = c1alpha_closeness(L, expander_pair(arc, std::min(h > 0 ? h : 0.01, 0.01)), p.eps, p.alpha,
                                    Ball{{0, 0}, p.R});
  return rep;
}

}  // namespace lmcf
