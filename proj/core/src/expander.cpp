#include "lmcf/expander.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace lmcf {

namespace {
constexpr double kPi = std::numbers::pi;

struct State {
  double x, y, th;
};
State operator+(State a, State b) { return {a.x + b.x, a.y + b.y, a.th + b.th}; }
State operator*(double s, State a) { return {s * a.x, s * a.y, s * a.th}; }

State rhs(const State& s) {
  double c = std::cos(s.th), sn = std::sin(s.th);
  return {c, sn, -s.x * sn + s.y * c};
}

State rk4(const State& s, double h) {
  State k1 = rhs(s);
  State k2 = rhs(s + (0.5 * h) * k1);
  State k3 = rhs(s + (0.5 * h) * k2);
  State k4 = rhs(s + h * k3);
  return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double radius(const State& s) { return std::hypot(s.x, s.y); }

// integral of p beyond radius R using the exact invariant p exp(r^2/2)
double tail_turn(const State& s) {
  double R = radius(s);
  double p = -s.x * std::sin(s.th) + s.y * std::cos(s.th);
  return p * std::exp(0.5 * R * R) * std::sqrt(kPi / 2) * std::erfc(R / std::sqrt(2.0));
}

// Adaptive RK4 by step doubling. With grid > 0 the steps land on multiples of grid and
// on_grid(k, state) is called at each; the run stops at the first grid point with r >= r_stop.
template <class F>
State integrate(State s, double dir, double r_stop, double tol, double grid, F&& on_grid) {
  double sig = 0.0;
  double h = grid > 0 ? grid : 0.02;
  long k = 0;
  if (grid > 0) on_grid(0L, s);
  for (int guard = 0; guard < 2000000; ++guard) {
    double target = grid > 0 ? (k + 1) * grid : 1e300;
    double step = std::min(h, target - sig);
    State big = rk4(s, dir * step);
    State half = rk4(s, dir * step * 0.5);
    State small = rk4(half, dir * step * 0.5);
    double err = std::max({std::abs(big.x - small.x), std::abs(big.y - small.y), std::abs(big.th - small.th)}) / 15.0;
    if (err > tol && step > 1e-9) {
      h = step * std::max(0.1, 0.9 * std::pow(tol / err, 0.2));
      continue;
    }
    s = small + (1.0 / 15.0) * State{small.x - big.x, small.y - big.y, small.th - big.th};
    sig += step;
    if (err > 0) h = std::min(0.25, step * std::min(4.0, 0.9 * std::pow(tol / err, 0.2)));
    else h = std::min(0.25, step * 4.0);
    if (grid > 0) {
      if (std::abs(sig - target) < 1e-12 * std::max(1.0, target)) {
        sig = target;
        ++k;
        on_grid(k, s);
        if (radius(s) >= r_stop) return s;
      }
    } else if (radius(s) >= r_stop) {
      return s;
    }
    if (sig > 400.0) throw ExpanderError("expander integration did not leave the ball");
  }
  throw ExpanderError("expander integration exceeded the step budget");
}

struct Frame {
  double a, omega, mu;
};

Frame frame_of(const LinePair& p) {
  Frame f;
  f.a = p.sector_start();
  f.omega = p.opening();
  f.mu = f.a + 0.5 * f.omega;
  return f;
}

State start_state(const Frame& f, double d, double psi) {
  return {d * std::cos(f.mu), d * std::sin(f.mu), f.mu + 0.5 * kPi + psi};
}

// residuals of the asymptotic angle conditions, on the continuous lift
void shooting_residual(const Frame& f, const ExpanderConfig& cfg, double d, double psi, double out[2]) {
  auto none = [](long, const State&) {};
  State s0 = start_state(f, d, psi);
  State fw = integrate(s0, 1.0, cfg.r_cut, cfg.ode_tol, 0.0, none);
  State bw = integrate(s0, -1.0, cfg.r_cut, cfg.ode_tol, 0.0, none);
  out[0] = fw.th + tail_turn(fw) - (f.mu + 0.5 * f.omega);
  out[1] = bw.th - tail_turn(bw) - (f.mu + kPi - 0.5 * f.omega);
}

double sixth_d1(const std::vector<Vec2>& p, std::size_t i, double ds, int comp) {
  static const double c[7] = {-1.0 / 60, 3.0 / 20, -3.0 / 4, 0.0, 3.0 / 4, -3.0 / 20, 1.0 / 60};
  double acc = 0;
  for (int k = 0; k < 7; ++k) acc += c[k] * (comp == 0 ? p[i + k - 3].x : p[i + k - 3].y);
  return acc / ds;
}
double sixth_d2(const std::vector<Vec2>& p, std::size_t i, double ds, int comp) {
  static const double c[7] = {1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90};
  double acc = 0;
  for (int k = 0; k < 7; ++k) acc += c[k] * (comp == 0 ? p[i + k - 3].x : p[i + k - 3].y);
  return acc / (ds * ds);
}
}  // namespace

double LinePair::alpha() const {
  double d = std::fmod(phi2 - phi1, kPi);
  if (d < 0) d += kPi;
  return d;
}

bool LinePair::straight() const {
  double a = wrap_angle_2pi(pairing == 0 ? phi1 : phi2);
  double b = wrap_angle_2pi(pairing == 0 ? phi2 : phi1 + kPi);
  return std::abs(std::abs(wrap_angle(b - a)) - kPi) < 1e-12;
}

double LinePair::sector_start() const {
  double a = pairing == 0 ? phi1 : phi2;
  double b = pairing == 0 ? phi2 : phi1 + kPi;
  double w = wrap_angle_2pi(b - a);
  if (w > kPi + 1e-12) return wrap_angle_2pi(b);
  return wrap_angle_2pi(a);
}

double LinePair::opening() const {
  if (straight()) return kPi;
  double a = pairing == 0 ? phi1 : phi2;
  double b = pairing == 0 ? phi2 : phi1 + kPi;
  double w = wrap_angle_2pi(b - a);
  return w > kPi ? 2 * kPi - w : w;
}

void validate(const LinePair& p) {
  if (p.pairing != 0 && p.pairing != 1) throw ExpanderError("pairing must be 0 or 1");
  if (!std::isfinite(p.phi1) || !std::isfinite(p.phi2)) throw ExpanderError("line angles must be finite");
  if (p.straight()) return;
  double al = p.alpha();
  double t = std::min(al, kPi - al);
  if (t < p.alpha_min) {
    std::ostringstream os;
    os << "transversality angle " << t << " below alpha_min " << p.alpha_min;
    throw ExpanderError(os.str());
  }
}

void decaying_mode(double xi, double& y, double& dy, double& d2y) {
  const double c = std::sqrt(kPi / 2);
  double e = std::exp(-0.5 * xi * xi);
  double ec = std::erfc(xi / std::sqrt(2.0));
  dy = -c * ec;
  d2y = e;
  if (xi <= 10.0) {
    y = e - xi * c * ec;
  } else {
    double q = 1.0 / (xi * xi);
    y = e * q * (1 - q * (3 - q * (15 - q * (105 - q * (945 - q * 10395)))));
  }
}

ShootingOutcome shoot(const LinePair& pair, const ExpanderConfig& cfg, double d0, double psi0, bool allow_fallback) {
  validate(pair);
  Frame f = frame_of(pair);
  ShootingOutcome out;
  if (pair.straight()) {
    out.converged = true;
    return out;
  }
  double d = d0, psi = psi0, F[2];
  shooting_residual(f, cfg, d, psi, F);
  double nrm = std::hypot(F[0], F[1]);
  for (int it = 0; it < cfg.max_newton && nrm > 1e-13; ++it) {
    out.iterations = it + 1;
    const double eps = 1e-7;
    double Fd[2], Fp[2];
    shooting_residual(f, cfg, d + eps, psi, Fd);
    shooting_residual(f, cfg, d, psi + eps, Fp);
    double j00 = (Fd[0] - F[0]) / eps, j10 = (Fd[1] - F[1]) / eps;
    double j01 = (Fp[0] - F[0]) / eps, j11 = (Fp[1] - F[1]) / eps;
    double det = j00 * j11 - j01 * j10;
    if (!std::isfinite(det) || std::abs(det) < 1e-14) break;
    double dd = -(j11 * F[0] - j01 * F[1]) / det;
    double dp = -(-j10 * F[0] + j00 * F[1]) / det;
    double lam = 1.0;
    bool improved = false;
    for (int k = 0; k < 30; ++k) {
      double nd = d + lam * dd, np = psi + lam * dp;
      if (nd > 0 && std::abs(np) < 0.5 * kPi) {
        double G[2];
        shooting_residual(f, cfg, nd, np, G);
        double gn = std::hypot(G[0], G[1]);
        if (gn < nrm) {
          d = nd, psi = np, F[0] = G[0], F[1] = G[1], nrm = gn;
          improved = true;
          break;
        }
      }
      lam *= 0.5;
    }
    if (!improved) break;
    if (std::abs(lam * dd) < 1e-15 && std::abs(lam * dp) < 1e-15) break;
  }
  out.d = d, out.psi = psi, out.residual = nrm;
  out.converged = nrm < 1e-10;
  if (out.converged || !allow_fallback) return out;

  // symmetric one-parameter family: bisect on d with psi = 0
  auto g = [&](double dd) {
    double G[2];
    shooting_residual(f, cfg, dd, 0.0, G);
    return G[0];
  };
  double lo = 1e-6, hi = 0.5;
  while (g(hi) > 0) {
    hi *= 2;
    if (hi > 50) throw ExpanderError("shooting bracket not found");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    double mid = 0.5 * (lo + hi);
    (g(mid) > 0 ? lo : hi) = mid;
  }
  out.d = 0.5 * (lo + hi);
  out.psi = 0.0;
  shooting_residual(f, cfg, out.d, 0.0, F);
  out.residual = std::hypot(F[0], F[1]);
  out.converged = out.residual < 1e-10;
  out.used_fallback = true;
  if (!out.converged) {
    std::ostringstream os;
    os << "shooting diverged: last iterate d=" << out.d << " psi=" << out.psi << " residual=" << out.residual;
    throw ExpanderError(os.str());
  }
  return out;
}

double expander_residual(const std::vector<Vec2>& p, double ds, double* l2) {
  double sup = 0, acc = 0;
  for (std::size_t i = 3; i + 3 < p.size(); ++i) {
    Vec2 d1{sixth_d1(p, i, ds, 0), sixth_d1(p, i, ds, 1)};
    Vec2 d2{sixth_d2(p, i, ds, 0), sixth_d2(p, i, ds, 1)};
    double sp = norm(d1);
    double k = cross(d1, d2) / (sp * sp * sp);
    Vec2 N = J(d1 / sp);
    double r = k - dot(p[i], N);
    sup = std::max(sup, std::abs(r));
    acc += r * r * ds;
  }
  if (l2) *l2 = acc;
  return sup;
}

namespace {

void build_tail(ExpanderArc& arc, int end) {
  ExpanderTail& t = arc.tails[end];
  t.ray_angle = end == 0 ? arc.a : arc.a + arc.omega;
  Vec2 e = unit(t.ray_angle), ie = J(e);
  const std::size_t n = arc.sigma.size();
  std::size_t i0 = 0;
  while (i0 + 1 < n && arc.sigma[i0] < 0) ++i0;  // index of sigma = 0
  std::vector<std::size_t> idx;
  if (end == 1)
    for (std::size_t i = i0; i < n; ++i) idx.push_back(i);
  else
    for (std::size_t i = i0 + 1; i-- > 0;) idx.push_back(i);
  std::vector<double> xi, g, dg, d2g;
  for (std::size_t i : idx) {
    double q = dot(arc.x[i], e);
    if (!xi.empty() && q <= xi.back()) throw ExpanderError("expander tail is not graphical over its ray");
    double c = std::cos(arc.theta[i] - t.ray_angle);
    if (std::abs(c) < 1e-3) throw ExpanderError("expander tail has a vertical tangent over its ray");
    xi.push_back(q);
    g.push_back(dot(arc.x[i], ie));
    dg.push_back(std::tan(arc.theta[i] - t.ray_angle));
    d2g.push_back(arc.kappa[i] / (c * c * c));
  }
  t.xi_min = xi.front();
  t.xi_cut = xi.back();
  t.g = QuinticHermite(xi, g, dg, d2g);
  double y, dy, d2y;
  decaying_mode(t.xi_cut, y, dy, d2y);
  t.amplitude = arc.straight ? 0.0 : g.back() / y;
  t.flat = arc.straight;
  std::vector<double> V(xi.size());
  V.back() = t.amplitude * 0.5 * (dy + t.xi_cut * y);
  const auto& gl = gauss_legendre(6);
  for (std::size_t k = xi.size() - 1; k-- > 0;) {
    double lo = xi[k], hi = xi[k + 1], acc = 0;
    for (std::size_t q = 0; q < gl.nodes.size(); ++q)
      acc += gl.weights[q] * t.g.value(0.5 * (lo + hi) + 0.5 * (hi - lo) * gl.nodes[q]);
    V[k] = V[k + 1] - 0.5 * (hi - lo) * acc;
  }
  t.V = QuinticHermite(xi, V, g, dg);
}

ExpanderArc build_arc(const LinePair& pair, const ExpanderConfig& cfg, const ShootingOutcome& shot) {
  ExpanderArc arc;
  arc.pair = pair;
  arc.config = cfg;
  Frame f = frame_of(pair);
  arc.a = f.a;
  arc.omega = f.omega;
  arc.b = f.a + f.omega;
  arc.straight = pair.straight();
  arc.shot = shot;
  const double ds = cfg.table_ds;
  std::vector<State> fw, bw;
  if (arc.straight) {
    long m = static_cast<long>(std::ceil(cfg.r_cut / ds));
    double th = arc.b;
    for (long k = -m; k <= m; ++k) {
      double sg = k * ds;
      arc.sigma.push_back(sg);
      arc.x.push_back(unit(th) * sg);
      arc.theta.push_back(th);
      arc.kappa.push_back(0.0);
    }
  } else {
    State s0 = start_state(f, shot.d, shot.psi);
    integrate(s0, 1.0, cfg.r_cut, cfg.ode_tol, ds, [&](long, const State& s) { fw.push_back(s); });
    integrate(s0, -1.0, cfg.r_cut, cfg.ode_tol, ds, [&](long, const State& s) { bw.push_back(s); });
    for (std::size_t k = bw.size(); k-- > 1;) {
      arc.sigma.push_back(-static_cast<double>(k) * ds);
      arc.x.push_back({bw[k].x, bw[k].y});
      arc.theta.push_back(bw[k].th);
    }
    for (std::size_t k = 0; k < fw.size(); ++k) {
      arc.sigma.push_back(static_cast<double>(k) * ds);
      arc.x.push_back({fw[k].x, fw[k].y});
      arc.theta.push_back(fw[k].th);
    }
    for (std::size_t i = 0; i < arc.x.size(); ++i) arc.kappa.push_back(dot(arc.x[i], J(unit(arc.theta[i]))));
  }
  std::vector<double> xs, ys, dxs, dys, d2xs, d2ys;
  for (std::size_t i = 0; i < arc.x.size(); ++i) {
    Vec2 T = unit(arc.theta[i]);
    Vec2 a2 = J(T) * arc.kappa[i];
    xs.push_back(arc.x[i].x), ys.push_back(arc.x[i].y);
    dxs.push_back(T.x), dys.push_back(T.y);
    d2xs.push_back(a2.x), d2ys.push_back(a2.y);
  }
  arc.hx = QuinticHermite(arc.sigma, xs, dxs, d2xs);
  arc.hy = QuinticHermite(arc.sigma, ys, dys, d2ys);

  std::vector<Vec2> coarse;
  for (std::size_t i = 0; i < arc.x.size(); i += 2) coarse.push_back(arc.x[i]);
  arc.residual_sup = expander_residual(coarse, 2 * ds, &arc.residual_l2);
  arc.residual_sup_fine = expander_residual(arc.x, ds);

  build_tail(arc, 0);
  build_tail(arc, 1);
  double closest = 1e300;
  for (auto p : arc.x) closest = std::min(closest, norm(p));
  arc.r0 = arc.straight ? 0.5 : cfg.graphical_margin * closest;
  if (!arc.straight)
    for (int e = 0; e < 2; ++e)
      if (dot(arc.point(arc.seam_sigma(e, arc.r0)), unit(arc.tails[e].ray_angle)) <= arc.tails[e].xi_min)
        throw ExpanderError("expander is not graphical outside the chosen radius");
  arc.decay = decay_fit(arc, std::max(2.0, arc.r0));
  return arc;
}

}  // namespace

ExpanderArc expander_solve(const LinePair& pair, const ExpanderConfig& cfg) {
  validate(pair);
  double omega = pair.opening();
  double d0 = (kPi - omega) / std::sqrt(2 * kPi);
  ShootingOutcome shot = shoot(pair, cfg, d0, 0.0, true);
  ExpanderArc arc = build_arc(pair, cfg, shot);
  if (arc.residual_sup > cfg.tol) {
    std::ostringstream os;
    os << "expander residual " << arc.residual_sup << " above tolerance " << cfg.tol;
    throw ExpanderError(os.str());
  }
  return arc;
}

Vec2 ExpanderArc::point(double sig) const {
  if (sig <= sigma.front()) return x.front() + unit(theta.front()) * (sig - sigma.front());
  if (sig >= sigma.back()) return x.back() + unit(theta.back()) * (sig - sigma.back());
  return {hx.value(sig), hy.value(sig)};
}

Vec2 ExpanderArc::tangent(double sig) const {
  if (sig <= sigma.front()) return unit(theta.front());
  if (sig >= sigma.back()) return unit(theta.back());
  double f, df, d2f;
  Vec2 T;
  hx.eval(sig, f, df, d2f);
  T.x = df;
  hy.eval(sig, f, df, d2f);
  T.y = df;
  return T / norm(T);
}

double ExpanderArc::seam_sigma(int end, double r) const {
  // |x| grows monotonically from the bisector toward either end
  double lo = end == 1 ? 0.0 : sigma.front(), hi = end == 1 ? sigma.back() : 0.0;
  double far = end == 1 ? hi : lo;
  if (r >= norm(point(far))) throw ExpanderError("seam radius beyond the tabulated arc");
  if (r <= norm(point(0.0))) throw ExpanderError("seam radius inside the arc's closest approach");
  for (int it = 0; it < 200; ++it) {
    double m = 0.5 * (lo + hi);
    bool inside = norm(point(m)) < r;
    if (end == 1) (inside ? lo : hi) = m;
    else (inside ? hi : lo) = m;
  }
  return 0.5 * (lo + hi);
}

double ExpanderArc::offset(int end, double xi, double* d1, double* d2) const {
  const ExpanderTail& t = tails[end];
  if (t.flat) {
    if (d1) *d1 = 0;
    if (d2) *d2 = 0;
    return 0.0;
  }
  if (xi < t.xi_min - 1e-12) throw ExpanderError("offset requested inside the non-graphical core");
  if (xi <= t.xi_cut) {
    double f, df, d2f;
    t.g.eval(std::max(xi, t.xi_min), f, df, d2f);
    if (d1) *d1 = df;
    if (d2) *d2 = d2f;
    return f;
  }
  double y, dy, d2y;
  decaying_mode(xi, y, dy, d2y);
  if (d1) *d1 = t.amplitude * dy;
  if (d2) *d2 = t.amplitude * d2y;
  return t.amplitude * y;
}

double ExpanderArc::potential(int end, double xi) const {
  const ExpanderTail& t = tails[end];
  if (t.flat) return 0.0;
  if (xi < t.xi_min - 1e-12) throw ExpanderError("potential requested inside the non-graphical core");
  if (xi <= t.xi_cut) return t.V.value(std::max(xi, t.xi_min));
  double y, dy, d2y;
  decaying_mode(xi, y, dy, d2y);
  return t.amplitude * 0.5 * (dy + xi * y);
}

PolyCurve ExpanderArc::curve(double h) const {
  ParamPiece p{[this](double s) { return point(s); }, sigma.front(), sigma.back()};
  auto v = sample_pieces({p}, h, false);
  return make_open(std::move(v), h, {wrap_angle_2pi(a), 1.0}, {wrap_angle_2pi(b), 1.0});
}

PolyCurve reflect_through_origin(const PolyCurve& c) {
  PolyCurve r = c;
  for (auto& v : r.vertices) v = -v;
  for (auto& ray : r.rays) ray.angle = wrap_angle_2pi(ray.angle + kPi);
  return r;
}

DecayFit decay_fit(const ExpanderArc& arc, double r_min, double r_max) {
  DecayFit fit;
  if (arc.straight) {
    fit.exact = true;
    fit.quality = 1.0;
    return fit;
  }
  std::vector<double> X, Y;
  for (int end = 0; end < 2; ++end) {
    const auto& t = arc.tails[end];
    double hi = r_max > 0 ? std::min(r_max, t.xi_cut) : t.xi_cut - 0.5;
    double lo = std::max(r_min, t.xi_min);
    if (lo < t.xi_min) throw ExpanderError("tail not graphical beyond r_min");
    if (hi <= lo) continue;
    int m = std::max(8, static_cast<int>((hi - lo) / 0.05));
    for (int k = 0; k <= m; ++k) {
      double xi = lo + (hi - lo) * k / m;
      double g = std::abs(arc.offset(end, xi));
      if (g <= 1e-300) continue;
      X.push_back(xi * xi);
      Y.push_back(std::log(g));
    }
  }
  if (r_min < std::min(arc.tails[0].xi_min, arc.tails[1].xi_min))
    throw ExpanderError("tail not graphical beyond r_min");
  if (X.size() < 4) throw ExpanderError("decay fit window holds too few samples");
  auto lf = fit_line(X, Y);
  fit.b = -lf.slope;
  fit.C = std::exp(lf.intercept);
  fit.quality = lf.r2;
  fit.samples = static_cast<int>(X.size());
  return fit;
}

PolyCurve expander_flow(const PolyCurve& sigma, double t) {
  if (!(t > 0)) throw ExpanderError("expander flow needs t > 0");
  double k = std::sqrt(2 * t);
  PolyCurve out = sigma;
  for (auto& v : out.vertices) v = v * k;
  for (auto& r : out.rays) r.reach *= k;
  out.h = sigma.h * k;
  return out;
}

UniquenessProbe multi_start_probe(const LinePair& pair, const ExpanderConfig& cfg, int seeds, std::uint64_t rng_seed) {
  UniquenessProbe pr;
  pr.seeds = seeds;
  ExpanderArc ref = expander_solve(pair, cfg);
  PolyCurve rc = ref.curve(0.001);
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> ud(0.5, 1.5), up(-0.25, 0.25);
  std::vector<double> d0(seeds), p0(seeds);
  for (int i = 0; i < seeds; ++i) {
    d0[i] = ud(rng) * std::max(ref.shot.d, 0.1);
    p0[i] = up(rng);
  }
  std::vector<double> dist(seeds, 0.0);
  std::vector<int> conv(seeds, 0), fb(seeds, 0);
  parallel_for(static_cast<std::size_t>(seeds), [&](std::size_t i) {
    ShootingOutcome s = shoot(pair, cfg, d0[i], p0[i], true);
    conv[i] = s.converged;
    fb[i] = s.used_fallback;
    ExpanderArc arc = build_arc(pair, cfg, s);
    PolyCurve c = arc.curve(0.001);
    dist[i] = hausdorff(c, rc, false).value;
  });
  for (int i = 0; i < seeds; ++i) {
    pr.converged += conv[i];
    pr.fallbacks += fb[i];
    pr.max_hausdorff = std::max(pr.max_hausdorff, dist[i]);
  }
  return pr;
}

}  // namespace lmcf
