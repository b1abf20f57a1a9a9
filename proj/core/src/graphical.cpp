#include "lmcf/graphical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "lmcf/density.hpp"
#include "lmcf/monotone.hpp"
#include "lmcf/numerics.hpp"

namespace lmcf {

namespace {
const double inf = std::numeric_limits<double>::infinity();

struct Chain {
  std::vector<Vec2> pts;
  std::vector<double> kappa;
  bool closed = false;
};

Chain chain_of(const PolyCurve& c, double reach) {
  Chain ch;
  ch.closed = c.closed();
  auto cd = curvature(c);
  if (ch.closed) {
    ch.pts = c.vertices;
    ch.kappa = cd.kappa;
    return ch;
  }
  double step = c.h > 0 ? c.h : 0.01;
  std::vector<Vec2> head;
  Vec2 o = c.vertices.front(), e = unit(c.rays[0].angle);
  for (double u = step; norm(o + e * u) <= reach; u += step) head.push_back(o + e * u);
  std::reverse(head.begin(), head.end());
  ch.pts = head;
  ch.kappa.assign(head.size(), 0.0);
  ch.pts.insert(ch.pts.end(), c.vertices.begin(), c.vertices.end());
  ch.kappa.insert(ch.kappa.end(), cd.kappa.begin(), cd.kappa.end());
  o = c.vertices.back(), e = unit(c.rays[1].angle);
  for (double u = step; norm(o + e * u) <= reach; u += step) ch.pts.push_back(o + e * u), ch.kappa.push_back(0.0);
  return ch;
}

double three_point(double t0, double t1, double t2, double f0, double f1, double f2) {
  double h1 = t1 - t0, h2 = t2 - t1;
  return -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 + h1 / (h2 * (h1 + h2)) * f2;
}

double second_difference(double h1, double h2, double fm, double f0, double fp) {
  return 2 * (h1 * fp - (h1 + h2) * f0 + h2 * fm) / (h1 * h2 * (h1 + h2));
}

template <class T>
T at_index(const std::vector<T>& v, double m, bool closed) {
  const std::size_t n = v.size();
  double fl = std::floor(m);
  double f = m - fl;
  long i = static_cast<long>(fl);
  if (closed) {
    long nn = static_cast<long>(n);
    long i0 = ((i % nn) + nn) % nn;
    return v[i0] * (1 - f) + v[(i0 + 1) % n] * f;
  }
  if (i < 0) return v.front();
  if (static_cast<std::size_t>(i) >= n - 1) return v.back();
  return v[i] * (1 - f) + v[i + 1] * f;
}

// where the segment from a (inside) to b leaves the box |xi| < r, |u| < H, in frame coordinates
Vec2 clip_exit(Vec2 a, Vec2 b, double r, double H) {
  double lo = 0, hi = 1;
  for (int it = 0; it < 60; ++it) {
    double mid = 0.5 * (lo + hi);
    Vec2 p = a + (b - a) * mid;
    if (std::abs(p.x) < r && std::abs(p.y) < H) lo = mid;
    else hi = mid;
  }
  return a + (b - a) * (0.5 * (lo + hi));
}

struct FramedPatch {
  GraphicalPatch patch;
  std::vector<double> kappa;
};

FramedPatch framed(const PolyCurve& c, Vec2 base, Vec2 dir, double r, double height) {
  if (!(r > 0)) throw GraphicalError("cylinder radius must be positive");
  double H = height > 0 ? height : r;
  dir = dir / norm(dir);
  Vec2 nrm = J(dir);
  Chain ch = chain_of(c, norm(base) + 2 * (r + H));
  const std::size_t n = ch.pts.size();
  std::vector<Vec2> loc(n);
  std::vector<char> inside(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec2 d = ch.pts[i] - base;
    loc[i] = {dot(d, dir), dot(d, nrm)};
    inside[i] = std::abs(loc[i].x) < r && std::abs(loc[i].y) < H;
  }
  // runs of consecutive inside vertices
  std::vector<std::vector<std::size_t>> runs;
  {
    std::size_t start = 0;
    bool all = std::all_of(inside.begin(), inside.end(), [](char v) { return v != 0; });
    if (all && ch.closed) throw GraphicalError("closed component inside the cylinder (vertical tangent)");
    if (ch.closed)
      while (inside[start]) start = (start + 1) % n;
    std::vector<std::size_t> cur;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t i = ch.closed ? (start + k) % n : k;
      if (inside[i]) cur.push_back(i);
      else if (!cur.empty()) runs.push_back(cur), cur.clear();
    }
    if (!cur.empty()) runs.push_back(cur);
  }
  if (runs.empty()) throw GraphicalError("empty cylinder");
  if (runs.size() > 1) throw GraphicalError("multi-sheet cylinder (" + std::to_string(runs.size()) + " sheets)");
  auto run = runs.front();
  if (run.size() >= 2 && loc[run.back()].x < loc[run.front()].x) std::reverse(run.begin(), run.end());
  for (std::size_t k = 1; k < run.size(); ++k)
    if (!(loc[run[k]].x > loc[run[k - 1]].x)) throw GraphicalError("vertical tangent in the cylinder");

  auto neighbour = [&](std::size_t i, int side) -> long {
    // index adjacent to i along the chain, in the direction that continues the run
    long step = side;
    if (run.size() >= 2) {
      long a = static_cast<long>(run[0]), b = static_cast<long>(run[1]);
      long d = b - a;
      if (ch.closed && std::abs(d) > 1) d = d > 0 ? -1 : 1;
      step = side * (d > 0 ? 1 : -1);
    }
    long j = static_cast<long>(i) + step;
    if (ch.closed) return (j % static_cast<long>(n) + static_cast<long>(n)) % static_cast<long>(n);
    if (j < 0 || j >= static_cast<long>(n)) return -1;
    return j;
  };

  FramedPatch fp;
  auto& P = fp.patch;
  P.base = base, P.dir = dir, P.r = r, P.height = H;
  std::vector<Vec2> pts;
  long before = neighbour(run.front(), -1), after = neighbour(run.back(), +1);
  bool left = false, right = false;
  if (before >= 0) {
    Vec2 q = clip_exit(loc[run.front()], loc[before], r, H);
    pts.push_back(q);
    left = std::abs(std::abs(q.x) - r) < 1e-9 * (1 + r) && q.x < 0;
  }
  for (std::size_t i : run) pts.push_back(loc[i]);
  if (after >= 0) {
    Vec2 q = clip_exit(loc[run.back()], loc[after], r, H);
    pts.push_back(q);
    right = std::abs(std::abs(q.x) - r) < 1e-9 * (1 + r) && q.x > 0;
  }
  P.spans = left && right;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    double dx = pts[k].x - pts[k - 1].x;
    if (!(dx > 0)) throw GraphicalError("vertical tangent in the cylinder");
    P.lipschitz = std::max(P.lipschitz, std::abs(pts[k].y - pts[k - 1].y) / dx);
  }
  for (auto q : pts) P.max_height = std::max(P.max_height, std::abs(q.y));

  for (std::size_t k = 0; k < run.size(); ++k) {
    std::size_t i = run[k];
    long im = k > 0 ? static_cast<long>(run[k - 1]) : before;
    long ip = k + 1 < run.size() ? static_cast<long>(run[k + 1]) : after;
    Vec2 x = loc[i];
    double du = 0, d2u = 0;
    if (im >= 0 && ip >= 0) {
      Vec2 a = loc[im], b = loc[ip];
      double h1 = x.x - a.x, h2 = b.x - x.x;
      if (h1 > 0 && h2 > 0) {
        du = (h1 * h1 * b.y - h2 * h2 * a.y + (h2 * h2 - h1 * h1) * x.y) / (h1 * h2 * (h1 + h2));
        d2u = second_difference(h1, h2, a.y, x.y, b.y);
      }
    } else if (im >= 0 || ip >= 0) {
      Vec2 a = loc[im >= 0 ? im : ip];
      du = (x.y - a.y) / (x.x - a.x);
    }
    P.xi.push_back(x.x);
    P.u.push_back(x.y);
    P.du.push_back(du);
    P.d2u.push_back(d2u);
    P.eta.push_back(1 / std::sqrt(1 + du * du));
    fp.kappa.push_back(ch.kappa[i]);
  }
  return fp;
}

Vec2 best_fit_direction(const PolyCurve& c, Vec2 center, double r) {
  Chain ch = chain_of(c, norm(center) + 2 * r);
  Vec2 m{0, 0};
  std::vector<Vec2> pts;
  for (auto v : ch.pts)
    if (norm(v - center) < r) pts.push_back(v), m = m + v;
  if (pts.size() < 2) throw GraphicalError("empty cylinder");
  m = m / static_cast<double>(pts.size());
  double sxx = 0, sxy = 0, syy = 0;
  for (auto v : pts) {
    Vec2 d = v - m;
    sxx += d.x * d.x, sxy += d.x * d.y, syy += d.y * d.y;
  }
  return unit(0.5 * std::atan2(2 * sxy, sxx - syy));
}

double run_dt(const FlowRun& run) { return flow_dt(run.cfg); }
double run_h(const FlowRun& run) { return run.snapshots.empty() ? run.cfg.h : run.snapshots.front().h; }
}  // namespace

GraphicalPatch patch_over(const PolyCurve& c, Vec2 base, Vec2 dir, double r, double height) {
  return framed(c, base, dir, r, height).patch;
}

GraphicalPatch extract_patch(const PolyCurve& c, Vec2 center, double r) {
  if (r < 4 * c.h) throw GraphicalError("cylinder radius below 4h");
  return patch_over(c, center, best_fit_direction(c, center, r), r, r);
}

PersistenceReport graphical_persistence_check(const FlowRun& run, Vec2 center, const std::vector<double>& delta_grid,
                                              double eta, double eps, double r0) {
  const auto& snaps = run.snapshots;
  if (snaps.size() < 2) throw GraphicalError("run too short");
  PersistenceReport rep;
  rep.center = center;
  rep.eta = eta;
  auto init = extract_patch(snaps.front().curve, center, r0);
  rep.dir = init.dir;
  rep.eps = init.lipschitz;
  if (!(init.lipschitz < eps)) throw GraphicalError("initial patch Lipschitz constant is not below eps");
  auto grid = delta_grid;
  std::sort(grid.begin(), grid.end());
  for (double d : grid) {
    PersistenceRow row;
    row.delta = d;
    row.holds = true;
    for (const auto& st : snaps) {
      if (!(st.t < d * d)) break;
      row.t_checked = st.t;
      try {
        auto p = patch_over(st.curve, center, rep.dir, d, d);
        row.lipschitz = std::max(row.lipschitz, p.lipschitz);
        row.max_height = std::max(row.max_height, p.max_height);
        if (!p.spans || !(p.lipschitz < eta) || !(p.max_height < eta * d)) row.holds = false;
      } catch (const GraphicalError&) {
        row.holds = false;
        row.lipschitz = inf;
      }
      if (!row.holds) break;
    }
    if (row.holds) rep.delta = d;
    rep.rows.push_back(row);
  }
  rep.limited_by_run = rep.delta > 0 && rep.delta * rep.delta > snaps.back().t;
  return rep;
}

EtaReport eta_evolution_check(const FlowRun& run, Vec2 center, double r, double p, double eps, double slack,
                              double t_max) {
  const auto& snaps = run.snapshots;
  if (snaps.size() < 3) throw GraphicalError("need at least three snapshots");
  if (snaps.front().material.empty()) throw GraphicalError("material points not tracked");
  EtaReport rep;
  rep.p = p, rep.eps = eps;
  double h = run_h(run), dt = run_dt(run);
  rep.slack = slack >= 0 ? slack : 20 * (h * h + dt);
  rep.min_residual = inf;
  Vec2 dir = extract_patch(snaps.front().curve, center, r).dir;
  double factor = p / 2 - p * (p - 1) * eps;

  auto eta_p_at = [&](const FlowState& st, const std::vector<Vec2>& T, double m) {
    Vec2 t = at_index(T, m, st.curve.closed());
    return std::pow(std::abs(dot(t / norm(t), dir)), p);
  };

  for (std::size_t k = 1; k + 1 < snaps.size(); ++k) {
    const auto& st = snaps[k];
    if (t_max >= 0 && snaps[k + 1].t > t_max + 1e-12) break;
    if (snaps[k + 1].resamples != snaps[k - 1].resamples) continue;
    GraphicalPatch patch;
    try {
      patch = patch_over(st.curve, center, dir, r, r);
    } catch (const GraphicalError& e) {
      throw GraphicalError(std::string("graphicality lost at t = ") + std::to_string(st.t) + ": " + e.what());
    }
    for (double du : patch.du)
      if (!(du * du < eps)) throw GraphicalError("determinant condition violated at t = " + std::to_string(st.t));

    const auto& c = st.curve;
    const std::size_t n = c.size();
    auto T = vertex_tangents(c);
    auto Tm = vertex_tangents(snaps[k - 1].curve), Tp = vertex_tangents(snaps[k + 1].curve);
    auto lens = edge_lengths(c);
    std::vector<double> ep(n), lap(n, 0.0), ds(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) ep[i] = std::pow(std::abs(dot(T[i], dir)), p);
    for (std::size_t i = 0; i < n; ++i) {
      if (!c.closed() && (i == 0 || i + 1 == n)) continue;
      std::size_t im = (i + n - 1) % n, ip = (i + 1) % n;
      double h1 = lens[im], h2 = lens[i];
      lap[i] = second_difference(h1, h2, ep[im], ep[i], ep[ip]);
      ds[i] = (h1 * h1 * ep[ip] - h2 * h2 * ep[im] + (h2 * h2 - h1 * h1) * ep[i]) / (h1 * h2 * (h1 + h2));
    }
    auto pm = snaps[k - 1].material_positions();
    auto p0 = st.material_positions();
    auto pp = snaps[k + 1].material_positions();
    double tm = snaps[k - 1].t, t = st.t, tp = snaps[k + 1].t;
    Vec2 nrm = J(dir);
    double worst = inf;
    for (std::size_t j = 0; j < p0.size(); ++j) {
      Vec2 d = p0[j] - center;
      if (!(std::abs(dot(d, dir)) < r && std::abs(dot(d, nrm)) < r)) continue;
      double m = st.material[j];
      if (!c.closed() && (m < 1 || m > static_cast<double>(n) - 2)) continue;
      Vec2 Tj = at_index(T, m, c.closed());
      Tj = Tj / norm(Tj);
      double kap = at_index(st.fields.kappa, m, c.closed());
      double e0 = at_index(ep, m, c.closed());
      double lhs = three_point(tm, t, tp, eta_p_at(snaps[k - 1], Tm, snaps[k - 1].material[j]), e0,
                               eta_p_at(snaps[k + 1], Tp, snaps[k + 1].material[j]));
      Vec2 vel{three_point(tm, t, tp, pm[j].x, p0[j].x, pp[j].x), three_point(tm, t, tp, pm[j].y, p0[j].y, pp[j].y)};
      lhs -= at_index(ds, m, c.closed()) * dot(vel, Tj);
      double rhs = at_index(lap, m, c.closed()) + factor * e0 * kap * kap;
      worst = std::min(worst, lhs - rhs);
      rep.max_rhs = std::max(rep.max_rhs, std::abs(rhs));
      ++rep.samples;
    }
    if (std::isinf(worst)) continue;
    rep.t.push_back(t);
    rep.residual.push_back(worst);
    rep.min_residual = std::min(rep.min_residual, worst);
  }
  if (rep.samples == 0) throw GraphicalError("no material points inside the patch");
  rep.holds = rep.min_residual >= -rep.slack;
  return rep;
}

InteriorEstimateReport interior_estimate_check(const FlowRun& run, Vec2 y0, double R, double theta_frac, double c,
                                               double p, double T, double eps) {
  const auto& snaps = run.snapshots;
  if (snaps.empty()) throw GraphicalError("empty run");
  if (!(theta_frac > 0 && theta_frac < 1)) throw GraphicalError("theta_frac must lie in (0, 1)");
  InteriorEstimateReport rep;
  rep.R = R, rep.theta_frac = theta_frac, rep.p = p, rep.c = c, rep.y0 = y0, rep.eps = eps;
  rep.T = T >= 0 ? T : snaps.back().t;
  rep.dir = extract_patch(snaps.front().curve, y0, R).dir;
  double inf_eta2p = inf;
  std::vector<FramedPatch> patches;
  for (const auto& st : snaps) {
    if (st.t > rep.T + 1e-12) break;
    FramedPatch fp;
    try {
      fp = framed(st.curve, y0, rep.dir, R, 2 * R);
    } catch (const GraphicalError& e) {
      throw GraphicalError(std::string("graphicality lost at t = ") + std::to_string(st.t) + ": " + e.what());
    }
    if (!fp.patch.spans) throw GraphicalError("graphicality lost at t = " + std::to_string(st.t) + ": patch leaves the cylinder");
    const auto& P = fp.patch;
    for (std::size_t i = 0; i < P.xi.size(); ++i) {
      double g = 1 + P.du[i] * P.du[i];
      rep.max_det = std::max(rep.max_det, g);
      rep.sup_eta_m4p = std::max(rep.sup_eta_m4p, std::pow(g, 2 * p));
      inf_eta2p = std::min(inf_eta2p, std::pow(g, -p));
      if (std::abs(P.xi[i]) <= theta_frac * R) rep.lhs = std::max(rep.lhs, fp.kappa[i] * fp.kappa[i]);
    }
    patches.push_back(std::move(fp));
  }
  rep.kappa_phi = 0.5 * inf_eta2p;
  double w = (1 - theta_frac) * (1 - theta_frac);
  const auto& P0 = patches.front().patch;
  for (std::size_t i = 0; i < P0.xi.size(); ++i) {
    double x = std::pow(1 + P0.du[i] * P0.du[i], p);  // eta^(-2p)
    double phi = x / (1 - rep.kappa_phi * x);
    double k = patches.front().kappa[i];
    rep.bound_initial = std::max(rep.bound_initial, k * k * phi / w);
  }
  rep.bound_c = c / (R * R * w) * rep.sup_eta_m4p;
  rep.rhs = std::min(rep.bound_c, rep.bound_initial);
  rep.required_c = rep.lhs * R * R * w / rep.sup_eta_m4p;
  rep.hypothesis_ok = rep.max_det < 1 + eps;
  rep.pass = rep.lhs <= rep.rhs * (1 + 1e-9);
  return rep;
}

double calibrate_interior_constant(const std::vector<InteriorEstimateReport>& family) {
  double c = 0;
  for (const auto& r : family) c = std::max(c, r.required_c);
  return c;
}

std::vector<InteriorEstimateReport> circle_calibration_family(double h_rel) {
  const std::vector<double> radii = {0.5, 1.0, 2.0};
  std::vector<std::vector<InteriorEstimateReport>> out(radii.size());
  parallel_for(radii.size(), [&](std::size_t k) {
    double R0 = radii[k], h = h_rel * R0;
    int n = static_cast<int>(std::lround(2 * std::numbers::pi * R0 / h));
    std::vector<Vec2> v;
    for (int i = 0; i < n; ++i) v.push_back(unit(2 * std::numbers::pi * i / n) * R0);
    FlowConfig cfg;
    cfg.h = h;
    cfg.dt = h * h;
    EvolveOptions o;
    o.T = 0.1 * R0 * R0;
    o.snap_every = o.T / 10;
    auto run = evolve(make_closed(v, h), cfg, o);
    for (double x : {0.1, 0.2, 0.3})
      for (double th : {0.25, 0.5, 0.75}) out[k].push_back(interior_estimate_check(run, {R0, 0}, x * R0, th, 0.0));
  });
  std::vector<InteriorEstimateReport> all;
  for (auto& o : out) all.insert(all.end(), o.begin(), o.end());
  return all;
}

DensityBoundReport c1alpha_density_bound(const FlowRun& run, const std::vector<PolyCurve>& sigma, double eps,
                                         const DensityBoundOptions& opt) {
  const auto& snaps = run.snapshots;
  if (snaps.empty()) throw GraphicalError("empty run");
  const double lam = opt.scale;
  PolyCurve m0 = snaps.front().curve;
  for (auto& v : m0.vertices) v = v / lam;
  m0.h /= lam;
  auto close = c1alpha_closeness(std::vector<PolyCurve>{m0}, sigma, eps, opt.alpha, Ball{{0, 0}, opt.R});
  if (!close.pass) {
    std::ostringstream os;
    os << "closeness precondition fails (norm " << close.worst << ")";
    if (!close.note.empty()) os << ": " << close.note;
    throw GraphicalError(os.str());
  }
  std::vector<Vec2> ys;
  int m = static_cast<int>(std::floor((opt.R - 1) / opt.y_spacing + 1e-9));
  for (int a = -m; a <= m; ++a)
    for (int b = -m; b <= m; ++b) {
      Vec2 y{a * opt.y_spacing, b * opt.y_spacing};
      if (norm(y) <= opt.R - 1 + 1e-12) ys.push_back(y);
    }
  struct Q {
    double level, theta, r, t;
    Vec2 y;
  };
  std::vector<std::vector<Q>> per(snaps.size());
  DensityOptions dopt;
  dopt.error_estimate = false;
  parallel_for(snaps.size(), [&](std::size_t k) {
    const auto& st = snaps[k];
    double tM = st.t / (lam * lam);
    for (double r : opt.r_grid) {
      if (r * lam < dopt.guard * st.curve.h) continue;
      for (Vec2 y : ys) {
        double th = density_ratio(st.curve, y * lam, r * lam, dopt).value;
        per[k].push_back({std::max(r * r, tM), th, r, tM, y});
      }
    }
  });
  DensityBoundReport rep;
  double first = inf;
  for (const auto& v : per)
    for (const auto& q : v) {
      ++rep.queries;
      if (q.theta > 1 + opt.eps0) first = std::min(first, q.level);
    }
  double rmax = 0;
  for (double r : opt.r_grid) rmax = std::max(rmax, r * r);
  double tend = snaps.back().t / (lam * lam);
  if (std::isinf(first)) {
    rep.q1 = std::min(rmax, tend);
  } else {
    rep.first_violation = first;
    for (const auto& v : per)
      for (const auto& q : v)
        if (q.level < first) rep.q1 = std::max(rep.q1, q.level);
  }
  rep.limited_by_run = std::isinf(first) && tend <= rmax;
  for (const auto& v : per)
    for (const auto& q : v)
      if (q.level <= rep.q1 && q.theta > rep.max_theta) {
        rep.max_theta = q.theta;
        rep.argmax_y = q.y, rep.argmax_r = q.r, rep.argmax_t = q.t;
      }
  return rep;
}

}  // namespace lmcf
