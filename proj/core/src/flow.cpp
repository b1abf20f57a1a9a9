#include "lmcf/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace lmcf {

namespace {
const double pi = std::numbers::pi;

struct Stencil {
  std::vector<double> lo, up;  // coefficients of the neighbors in the arc-length Laplacian
};

// lens[i] = |v[i+1] - v[i]| (edge_lengths)
Stencil laplacian(const PolyCurve& c, const std::vector<double>& lens) {
  const std::size_t n = c.size();
  Stencil L;
  L.lo.assign(n, 0.0);
  L.up.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!c.closed() && (i == 0 || i + 1 == n)) continue;
    double lm = lens[(i + n - 1) % n], lp = lens[i];
    L.lo[i] = 2.0 / (lm * (lm + lp));
    L.up[i] = 2.0 / (lp * (lm + lp));
  }
  return L;
}

// (I - dt Lap) y = rhs; loops use y_{i+n} = y_i + jump, arcs keep their end values
class ImplicitOperator {
 public:
  ImplicitOperator(const PolyCurve& c, const Stencil& L, double dt) : L_(L), dt_(dt), closed_(c.closed()),
      factor_(make(c, L, dt)) {}
  void solve(std::vector<double>& rhs, double jump) const { solve({&rhs}, {jump}); }
  void solve(std::vector<std::vector<double>*> rhs, std::vector<double> jumps) const {
    for (std::size_t j = 0; j < rhs.size(); ++j) {
      auto& r = *rhs[j];
      const std::size_t n = r.size();
      if (closed_) {
        r[0] -= dt_ * L_.lo[0] * jumps[j];
        r[n - 1] += dt_ * L_.up[n - 1] * jumps[j];
      }
    }
    factor_.solve(rhs);
  }

 private:
  static TridiagonalFactor make(const PolyCurve& c, const Stencil& L, double dt) {
    const std::size_t n = c.size();
    std::vector<double> a(n), b(n), cc(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = -dt * L.lo[i];
      cc[i] = -dt * L.up[i];
      b[i] = 1.0 + dt * (L.lo[i] + L.up[i]);
    }
    return TridiagonalFactor(a, b, cc, c.closed());
  }
  const Stencil& L_;
  double dt_;
  bool closed_;
  TridiagonalFactor factor_;
};

// central arc-length derivative of a lifted field
std::vector<double> arc_derivative(const PolyCurve& c, const std::vector<double>& lens, const std::vector<double>& f,
                                   double jump) {
  const std::size_t n = f.size();
  std::vector<double> d(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!c.closed() && (i == 0 || i + 1 == n)) continue;
    std::size_t im = (i + n - 1) % n, ip = (i + 1) % n;
    double fm = f[im] - (i == 0 ? jump : 0.0), fp = f[ip] + (i + 1 == n ? jump : 0.0);
    double lm = lens[im], lp = lens[i];
    // nonuniform three-point first derivative
    d[i] = (lm * lm * (fp - f[i]) + lp * lp * (f[i] - fm)) / (lm * lp * (lm + lp));
  }
  return d;
}

// four-point Lagrange interpolation of knot values at parameter p
double lagrange4(const std::vector<double>& knot, const std::vector<double>& f, double period, double jump,
                 bool closed, double p) {
  const long n = static_cast<long>(f.size());
  long i = static_cast<long>(std::upper_bound(knot.begin(), knot.begin() + n, p) - knot.begin()) - 1;
  if (i < 0) i = 0;
  auto at = [&](long k, double& u, double& y) {
    if (closed) {
      long w = ((k % n) + n) % n;
      long turns = (k - w) / n;
      u = knot[w] + turns * period;
      y = f[w] + turns * jump;
    } else {
      long w = std::clamp(k, 0L, n - 1);
      u = knot[w];
      y = f[w];
    }
  };
  long k0 = i - 1;
  if (!closed) k0 = std::clamp(k0, 0L, std::max(0L, n - 4));
  double u[4], y[4];
  for (int j = 0; j < 4; ++j) at(k0 + j, u[j], y[j]);
  double r = 0;
  for (int j = 0; j < 4; ++j) {
    double w = 1.0;
    for (int m = 0; m < 4; ++m)
      if (m != j) w *= (p - u[m]) / (u[j] - u[m]);
    r += w * y[j];
  }
  return r;
}

Vec2 interpolate_index(const PolyCurve& c, double u) {
  const std::size_t n = c.size();
  if (c.closed()) {
    u = std::fmod(u, static_cast<double>(n));
    if (u < 0) u += n;
  } else {
    u = std::clamp(u, 0.0, static_cast<double>(n - 1));
  }
  auto i = static_cast<std::size_t>(std::floor(u));
  if (i >= n) i = n - 1;
  double f = u - i;
  if (!c.closed() && i == n - 1) return c.vertices[i];
  return c.vertices[i] * (1.0 - f) + c.vertices[(i + 1) % n] * f;
}

double wrap_index(const PolyCurve& c, double u) {
  double n = static_cast<double>(c.size());
  if (c.closed()) {
    u = std::fmod(u, n);
    return u < 0 ? u + n : u;
  }
  return std::clamp(u, 0.0, n - 1);
}

double max_turning_curvature(const PolyCurve& c) {
  const std::size_t n = c.size();
  const auto& v = c.vertices;
  double k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!c.closed() && (i == 0 || i + 1 == n)) continue;
    Vec2 a = v[i] - v[(i + n - 1) % n], b = v[(i + 1) % n] - v[i];
    // Menger curvature of the three vertices
    k = std::max(k, 2.0 * std::abs(cross(a, b)) / std::sqrt(norm2(a) * norm2(b) * norm2(a + b)));
  }
  return k;
}

}  // namespace

void refresh_geometry(FlowState& s) {
  double ref = s.fields.theta.empty() ? (s.theta.empty() ? 0.0 : s.theta[0]) : s.theta[0];
  s.fields = compute_fields(s.curve);
  double shift = 2.0 * pi * std::round((ref - s.fields.theta[0]) / (2.0 * pi));
  for (double& th : s.fields.theta) th += shift;
  if (!s.beta.empty()) {
    double off = 0;
    for (std::size_t i = 0; i < s.beta.size(); ++i) off += s.beta[i] - s.fields.beta[i];
    off /= static_cast<double>(s.beta.size());
    for (double& b : s.fields.beta) b += off;
  }
  s.fresh = true;
  s.max_kappa = 0;
  for (double k : s.fields.kappa) s.max_kappa = std::max(s.max_kappa, std::abs(k));
}

namespace {

bool edges_out_of_range(const std::vector<double>& lens, double h) {
  for (double l : lens)
    if (l < 0.5 * h || l > 2.0 * h) return true;
  return false;
}

void do_resample(FlowState& s, double h) {
  const PolyCurve& old = s.curve;
  std::vector<double> params;
  double L;
  PolyCurve fresh = resample(old, h, params, L);
  auto cum = cumulative_length(old);
  std::vector<double> knot(cum.begin(), cum.begin() + old.size());
  bool closed = old.closed();
  std::vector<double> th(fresh.size()), be(fresh.size());
  for (std::size_t j = 0; j < fresh.size(); ++j) {
    th[j] = lagrange4(knot, s.theta, L, s.theta_jump, closed, params[j]);
    be[j] = lagrange4(knot, s.beta, L, s.beta_jump, closed, params[j]);
  }
  if (!closed) {
    th.front() = s.theta.front();
    th.back() = s.theta.back();
    be.front() = s.beta.front();
    be.back() = s.beta.back();
  }
  // material index: old index -> chord parameter -> new index
  const std::size_t n = old.size(), m = fresh.size();
  for (double& u : s.material) {
    double uu = wrap_index(old, u);
    auto i = std::min(static_cast<std::size_t>(std::floor(uu)), n - 1);
    double f = uu - i;
    double next = (i + 1 < n) ? knot[i + 1] : (closed ? L : knot[i]);
    double p = knot[i] + f * (next - knot[i]);
    auto it = std::upper_bound(params.begin(), params.end(), p);
    std::size_t j = static_cast<std::size_t>(it - params.begin());
    j = j == 0 ? 0 : j - 1;
    double pn = (j + 1 < m) ? params[j + 1] : (closed ? L : params[j]);
    double w = pn > params[j] ? (p - params[j]) / (pn - params[j]) : 0.0;
    u = wrap_index(fresh, j + w);
  }
  s.curve = std::move(fresh);
  s.theta = std::move(th);
  s.beta = std::move(be);
  s.h = h;
  ++s.resamples;
}
}  // namespace

double flow_dt(const FlowConfig& cfg) {
  double dt = cfg.dt > 0 ? cfg.dt : cfg.dt_factor * cfg.h * cfg.h;
  if (dt > cfg.cfl * cfg.h * cfg.h * (1 + 1e-12))
    throw FlowError("time step exceeds the stability cap cfl * h^2");
  return dt;
}

std::vector<Vec2> FlowState::material_positions() const {
  std::vector<Vec2> out;
  out.reserve(material.size());
  for (double u : material) out.push_back(interpolate_index(curve, u));
  return out;
}

FlowState initial_state(const PolyCurve& c, const FlowConfig& cfg) {
  if (!(cfg.h > 0)) throw FlowError("h must be positive");
  FlowState s;
  s.curve = c;
  s.h = cfg.h;
  s.dt = flow_dt(cfg);
  s.cfl_ratio = s.dt / (cfg.h * cfg.h);
  s.fields = compute_fields(c);
  s.theta = s.fields.theta;
  s.beta = s.fields.beta;
  if (c.closed()) {
    s.theta_jump = 2.0 * pi * s.fields.turning_number;
    s.beta_jump = s.fields.beta_period;
  }
  if (cfg.track_material) {
    s.origin = c.vertices;
    s.material.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) s.material[i] = static_cast<double>(i);
  }
  if (edges_out_of_range(edge_lengths(s.curve), s.h)) {
    do_resample(s, s.h);
    refresh_geometry(s);
  }
  return s;
}

FlowState step(const FlowState& s, double dt, const FlowConfig& cfg) {
  FlowState out = s;
  advance(out, dt, cfg);
  return out;
}

void advance(FlowState& out, double dt, const FlowConfig& cfg) {
  if (!(dt > 0)) throw FlowError("dt must be positive");
  if (dt > cfg.cfl * out.h * out.h * (1 + 1e-12)) throw FlowError("time step exceeds the stability cap cfl * h^2");
  const PolyCurve c = out.curve;
  const FlowState& s = out;
  const std::size_t n = c.size();
  auto lens0 = edge_lengths(c);
  auto L = laplacian(c, lens0);
  ImplicitOperator op(c, L, dt);

  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = c.vertices[i].x, y[i] = c.vertices[i].y;
  std::vector<double> th = out.theta;
  op.solve({&x, &y, &th}, {0.0, 0.0, out.theta_jump});

  out.t = s.t + dt;
  out.dt = dt;
  out.cfl_ratio = dt / (s.h * s.h);
  PolyCurve moved = c;
  for (std::size_t i = 0; i < n; ++i) moved.vertices[i] = {x[i], y[i]};

  // tangential speed of each vertex along the new curve
  auto T = vertex_tangents(moved);
  std::vector<double> tau(n);
  for (std::size_t i = 0; i < n; ++i) tau[i] = dot(moved.vertices[i] - c.vertices[i], T[i]) / dt;
  if (!c.closed()) tau.front() = tau.back() = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw FlowError("linear solve produced non-finite values");
  }
  auto dth = arc_derivative(c, lens0, s.theta, s.theta_jump);
  auto dbe = arc_derivative(c, lens0, s.beta, s.beta_jump);
  std::vector<double> be(n);
  for (std::size_t i = 0; i < n; ++i) be[i] = s.beta[i] - 2.0 * dt * th[i];
  if (!c.closed()) {
    be.front() = s.beta.front() - 2.0 * dt * s.theta.front();
    be.back() = s.beta.back() - 2.0 * dt * s.theta.back();
  }
  double beta_jump = s.beta_jump - 2.0 * dt * s.theta_jump;
  op.solve(be, beta_jump);
  for (std::size_t i = 0; i < n; ++i) {
    th[i] += dt * tau[i] * dth[i];
    be[i] += dt * tau[i] * dbe[i];
  }
  out.curve = std::move(moved);
  out.theta = std::move(th);
  out.beta = std::move(be);
  out.beta_jump = beta_jump;

  // material points follow the normal motion: undo the tangential drift
  auto lens = edge_lengths(out.curve);
  if (!out.material.empty()) {
    for (double& u : out.material) {
      double uu = wrap_index(out.curve, u);
      auto i = std::min(static_cast<std::size_t>(std::floor(uu)), n - 1);
      double f = uu - i;
      std::size_t ip = c.closed() ? (i + 1) % n : std::min(i + 1, n - 1);
      double tv = tau[i] * (1 - f) + tau[ip] * f;
      std::size_t e = c.closed() ? i : std::min(i, n - 2);
      u = wrap_index(out.curve, uu - tv * dt / lens[e]);
    }
  }

  if (edges_out_of_range(lens, out.h)) do_resample(out, out.h);
  out.max_kappa = max_turning_curvature(out.curve);
  out.fresh = false;
}

FieldDiscrepancy field_discrepancy(const FlowState& s) {
  if (!s.fresh) throw FlowError("geometric fields are stale; call refresh_geometry first");
  FieldDiscrepancy d;
  for (std::size_t i = 0; i < s.theta.size(); ++i) {
    d.theta = std::max(d.theta, std::abs(s.theta[i] - s.fields.theta[i]));
    d.beta = std::max(d.beta, std::abs(s.beta[i] - s.fields.beta[i]));
  }
  return d;
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::TimeReached: return "time_reached";
    case Termination::CurvatureBlowup: return "curvature_blowup";
    case Termination::EmbeddednessLoss: return "embeddedness_loss";
  }
  return "unknown";
}

FlowRun evolve(const PolyCurve& c, const FlowConfig& cfg, const EvolveOptions& opt) {
  FlowRun run;
  run.s = opt.s;
  run.cfg = cfg;
  FlowState st = initial_state(c, cfg);
  const double dt0 = flow_dt(cfg);
  run.snapshots.push_back(st);
  auto max_kh = [](const FlowState& x) { return x.max_kappa * x.h; };
  bool refined = false;
  double dt = dt0;
  double next_snap = opt.snap_every > 0 ? opt.snap_every : opt.T;
  const double eps = 1e-12 * std::max(1.0, opt.T);
  std::vector<double> extra = opt.extra_times;
  std::sort(extra.begin(), extra.end());
  std::size_t next_extra = 0;
  while (st.t < opt.T - eps) {
    while (next_extra < extra.size() && extra[next_extra] <= st.t + eps) ++next_extra;
    double target = std::min(next_snap, opt.T);
    bool extra_target = next_extra < extra.size() && extra[next_extra] < target - eps;
    if (extra_target) target = extra[next_extra];
    double d = std::min(dt, target - st.t);
    advance(st, d, cfg);
    ++run.steps;
    bool at_snap = st.t >= target - eps;
    if (opt.discrepancy_every_step || at_snap) refresh_geometry(st);
    if (opt.discrepancy_every_step) {
      auto fd = field_discrepancy(st);
      run.max_discrepancy_theta = std::max(run.max_discrepancy_theta, fd.theta);
      run.max_discrepancy_beta = std::max(run.max_discrepancy_beta, fd.beta);
    }
    double kh = max_kh(st);
    if (kh > cfg.blowup) {
      if (cfg.refine && !refined) {
        refined = true;
        do_resample(st, 0.5 * st.h);
        refresh_geometry(st);
        dt = std::min(dt, cfg.cfl * st.h * st.h);
        if (max_kh(st) <= cfg.blowup) continue;
      }
      run.reason = Termination::CurvatureBlowup;
      run.detail = "max|kappa| h = " + std::to_string(max_kh(st)) + " at t = " + std::to_string(st.t);
      if (!st.fresh) refresh_geometry(st);
      run.snapshots.push_back(st);
      return run;
    }
    if (at_snap) {
      if (cfg.check_embedded && !check_embedded(st.curve).embedded) {
        run.reason = Termination::EmbeddednessLoss;
        run.detail = "self-intersection at t = " + std::to_string(st.t);
        run.snapshots.push_back(st);
        return run;
      }
      run.snapshots.push_back(st);
      if (!extra_target) next_snap += opt.snap_every > 0 ? opt.snap_every : opt.T;
    }
  }
  if (run.snapshots.back().t < st.t) {
    if (!st.fresh) refresh_geometry(st);
    run.snapshots.push_back(st);
  }
  run.reason = Termination::TimeReached;
  return run;
}

std::vector<ExactnessPoint> exactness_audit(const FlowRun& run, Vec2 center, double radius) {
  std::vector<ExactnessPoint> out;
  for (const auto& st : run.snapshots) {
    ExactnessPoint p;
    p.t = st.t;
    const auto& v = st.curve.vertices;
    const std::size_t n = v.size();
    std::size_t inside = 0;
    for (auto x : v)
      if (norm(x - center) < radius) ++inside;
    if (inside == n && st.curve.closed()) {
      // the whole loop lies in the ball
      p.components = 1;
      p.beta_period = std::abs(st.fields.beta_period);
    } else if (inside > 0) {
      // every component is an arc, on which the primitive is single-valued
      std::size_t runs = 0;
      for (std::size_t i = 0; i < n; ++i) {
        bool in = norm(v[i] - center) < radius;
        std::size_t im = st.curve.closed() ? (i + n - 1) % n : i - 1;
        bool prev_in = (i == 0 && !st.curve.closed()) ? false : norm(v[im] - center) < radius;
        if (in && !prev_in) ++runs;
      }
      p.components = static_cast<int>(runs);
      p.beta_period = 0.0;
    }
    out.push_back(p);
  }
  return out;
}

NormalDeviation normal_deviation(const FlowRun& run, double r_in, double r_out, double t_max) {
  NormalDeviation d;
  if (run.snapshots.empty() || run.snapshots.front().material.empty()) throw FlowError("material points not tracked");
  if (!(run.s > 0)) throw FlowError("normal deviation needs s > 0");
  const auto& first = run.snapshots.front();
  double q0 = std::sqrt(2.0 * run.s);
  std::vector<std::size_t> chosen;
  for (std::size_t j = 0; j < first.origin.size(); ++j) {
    double r = norm(first.origin[j]) / q0;
    if (r >= r_in && r <= r_out) chosen.push_back(j);
  }
  if (chosen.empty()) return d;
  d.empty = false;
  for (const auto& st : run.snapshots) {
    if (st.t > t_max + 1e-12) break;
    double q = std::sqrt(2.0 * (run.s + st.t));
    for (std::size_t j : chosen) {
      Vec2 now = interpolate_index(st.curve, st.material[j]) / q;
      Vec2 start = first.origin[j] / q0;
      double dev = norm(now - start);
      if (dev > d.value) {
        d.value = dev;
        d.t = st.t;
        d.where = start;
      }
    }
  }
  return d;
}

AnnulusBounds annulus_bounds(const FlowRun& run, double r_in, double r_out) {
  AnnulusBounds b;
  for (const auto& st : run.snapshots) {
    double sup = 0;
    for (std::size_t i = 0; i < st.curve.size(); ++i) {
      double r = norm(st.curve.vertices[i]);
      if (r < r_in || r > r_out) continue;
      b.empty = false;
      sup = std::max(sup, std::abs(st.fields.kappa[i]) + std::abs(st.theta[i]) + std::abs(st.beta[i]));
    }
    b.t.push_back(st.t);
    b.sup.push_back(sup);
    b.D4 = std::max(b.D4, sup);
  }
  return b;
}

}  // namespace lmcf
