#include "lmcf/gluing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace lmcf {

namespace {
const double pi = std::numbers::pi;

// tangent jump between two directions, ignoring orientation
double line_jump(Vec2 t1, Vec2 t2) {
  double d = std::atan2(cross(t1, t2), dot(t1, t2));
  return std::abs(wrap_angle(2.0 * d)) / 2.0;
}

Vec2 graph_point(double phi, double rho, double offset) {
  Vec2 e = unit(phi);
  return e * rho + J(e) * offset;
}

struct ExpanderPart {
  double w, dw, d2w, d3w;
};

ExpanderPart expander_part(const ExpanderArc& arc, double s, int end, double rho) {
  double q = std::sqrt(2.0 * s);
  double xi = rho / q;
  double g1, g2;
  double g = arc.offset(end, xi, &g1, &g2);
  return {2.0 * s * arc.potential(end, xi), q * g, g1, g2 / q};
}
}  // namespace

double audit_rate(const ExpanderArc& arc) {
  return arc.straight ? 0.45 : std::min(arc.decay.b, 0.45);
}

double RayFrame::angle(int k) const {
  double base = (k % 2 == 0) ? a : a + omega;
  return base + (k >= 2 ? pi : 0.0);
}

void SingularInitial::u(int k, double rho, double out[4]) const {
  double c = sign(k) * c3;
  out[0] = c * rho * rho * rho;
  out[1] = 3.0 * c * rho * rho;
  out[2] = 6.0 * c * rho;
  out[3] = 6.0 * c;
}

double SingularInitial::lobe_start(int lobe) const { return frame.angle(lobe == 0 ? 1 : 3); }
double SingularInitial::lobe_end(int lobe) const { return frame.a + pi * (lobe == 0 ? 1.0 : 2.0); }

Vec2 SingularInitial::lobe_point(int lobe, double psi) const {
  double A = lobe_start(lobe), B = lobe_end(lobe);
  double Om = B - A;
  double ag = std::atan(3.0 * c3 * x_graph);
  double dl = std::min(blend, 0.5 * (Om - 2.0 * ag));
  double u1 = (psi - (A + ag)) / dl, u2 = (psi - (B - ag - dl)) / dl;
  double chi1 = smooth_step(u1).value, chi2 = smooth_step(u2).value;
  double r = (chi1 - chi2) * r_cap;
  if (chi1 < 1.0) {
    double t = psi - A;
    r += (1.0 - chi1) * std::sin(t) / (3.0 * c3 * std::cos(t) * std::cos(t));
  }
  if (chi2 > 0.0) {
    double t = B - psi;
    r += chi2 * std::sin(t) / (3.0 * c3 * std::cos(t) * std::cos(t));
  }
  return unit(psi) * r;
}

double SingularInitial::lobe_angle_at(int lobe, bool at_end, double rho) const {
  double t = std::atan(3.0 * c3 * rho);
  return at_end ? lobe_end(lobe) - t : lobe_start(lobe) + t;
}

PolyCurve SingularInitial::curve(double h) const {
  std::vector<ParamPiece> pieces;
  pieces.push_back({[this](double p) { return lobe_point(0, p); }, lobe_start(0), lobe_end(0)});
  pieces.push_back({[this](double p) { return lobe_point(1, p); }, lobe_end(1), lobe_start(1)});
  return make_closed(sample_pieces(pieces, h, true), h);
}

SingularInitial make_figure_eight(const LinePair& pair, double c3) {
  validate(pair);
  if (pair.straight()) throw GluingError("the singular curve needs two distinct lines");
  SingularInitial init;
  init.pair = pair;
  init.frame.a = pair.sector_start();
  init.frame.omega = pair.opening();
  double Om = pi - init.frame.omega;
  init.c3 = std::min(c3, std::tan(Om / 4.0) / (3.0 * init.x_graph));
  if (!(init.c3 > 0)) throw GluingError("invalid cubic coefficient");
  return init;
}

double cubic_constant(const SingularInitial& init) {
  double C = 0;
  double u[4];
  for (int k = 0; k < 4; ++k)
    for (int i = 1; i <= 400; ++i) {
      double rho = 4.0 * i / 400.0;
      init.u(k, rho, u);
      C = std::max({C, std::abs(u[0]) / (rho * rho * rho), std::abs(u[1]) / (rho * rho), std::abs(u[2]) / rho});
    }
  return C;
}

CutoffValue cutoff(double xnorm, double s) {
  double q = std::pow(s, 0.25);
  auto S = smooth_step(xnorm / q - 1.0);
  return {1.0 - S.value, -S.d1 / q, -S.d2 / (q * q), -S.d3 / (q * q * q)};
}

double cutoff_max_d1() { return smooth_step_max_d1(); }
double cutoff_max_d2() { return smooth_step_max_d2(); }

double max_scale(double r0) {
  double lim = 1.0;
  if (r0 > 0) lim = std::min(lim, 1.0 / (4.0 * std::pow(r0, 4)));
  return lim * (1.0 - 1e-12);
}

void validate(const GluingConfig& cfg, const ExpanderArc& arc) {
  double r0 = cfg.r0 > 0 ? cfg.r0 : arc.r0;
  if (!(cfg.s > 0) || !(cfg.s < 1.0)) throw GluingError("scale s must lie in (0, 1)");
  if (!(cfg.h > 0)) throw GluingError("spacing h must be positive");
  double q = std::pow(cfg.s, 0.25);
  if (!(r0 * std::sqrt(2.0 * cfg.s) < q)) throw GluingError("inner seam lies outside the cutoff region");
  if (!(2.0 * q < 4.0)) throw GluingError("cutoff reaches the outer seam");
  if (r0 <= 0) throw GluingError("graphical radius must be positive");
}

PotentialSample glued_potential(const SingularInitial& init, const ExpanderArc& arc, double s, int ray,
                                double rho) {
  auto phi = cutoff(rho, s);
  PotentialSample out;
  int end = init.frame.arc_end(ray);
  if (phi.value == 1.0) {
    auto E = expander_part(arc, s, end, rho);
    out = {E.w, E.dw, E.d2w, E.d3w, Branch::Expander};
    return out;
  }
  double U[4];
  init.u(ray, rho, U);
  if (phi.value == 0.0) return {U[0], U[1], U[2], U[3], Branch::Initial};
  auto E = expander_part(arc, s, end, rho);
  double D0 = E.w - U[0], D1 = E.dw - U[1], D2 = E.d2w - U[2], D3 = E.d3w - U[3];
  double f0 = phi.value, f1 = phi.d1, f2 = phi.d2, f3 = phi.d3;
  out.w = U[0] + f0 * D0;
  out.dw = U[1] + f1 * D0 + f0 * D1;
  out.d2w = U[2] + f2 * D0 + 2.0 * f1 * D1 + f0 * D2;
  out.d3w = U[3] + f3 * D0 + 3.0 * f2 * D1 + 3.0 * f1 * D2 + f0 * D3;
  out.branch = Branch::Blend;
  return out;
}

double expander_offset_scaled(const ExpanderArc& arc, double s, int ray, double rho) {
  return expander_part(arc, s, ray % 2, rho).dw;
}

GluedCurve glue(const SingularInitial& init, const ExpanderArc& arc, const GluingConfig& cfg) {
  validate(cfg, arc);
  GluedCurve G;
  G.s = cfg.s;
  G.r0 = cfg.r0 > 0 ? cfg.r0 : arc.r0;
  G.b = cfg.b > 0 ? cfg.b : audit_rate(arc);
  const double s = cfg.s, q = std::sqrt(2.0 * s);
  double sig[2];
  for (int e = 0; e < 2; ++e) {
    sig[e] = arc.seam_sigma(e, G.r0);
    G.rho_seam[e] = dot(arc.point(sig[e]), unit(arc.tails[e].ray_angle));
    if (G.rho_seam[e] <= arc.tails[e].xi_min)
      throw GluingError("inner seam is not graphical");
  }

  auto ray_piece = [&](int k, bool inward) {
    double rin = q * G.rho_seam[k % 2];
    double phi = init.frame.angle(k);
    auto f = [&init, &arc, s, k, phi](double rho) {
      return graph_point(phi, rho, glued_potential(init, arc, s, k, rho).dw);
    };
    return inward ? ParamPiece{f, 4.0, rin} : ParamPiece{f, rin, 4.0};
  };
  double psim = 0.5 * (init.lobe_start(0) + init.lobe_end(0));
  std::vector<ParamPiece> pieces;
  pieces.push_back({[&init](double p) { return init.lobe_point(0, p); }, psim, init.lobe_angle_at(0, true, 4.0)});
  pieces.push_back(ray_piece(2, true));
  pieces.push_back({[&arc, q](double t) { return arc.point(t) * (-q); }, sig[0], sig[1]});
  pieces.push_back(ray_piece(3, false));
  pieces.push_back({[&init](double p) { return init.lobe_point(1, p); }, init.lobe_angle_at(1, false, 4.0),
                    init.lobe_angle_at(1, true, 4.0)});
  pieces.push_back(ray_piece(0, true));
  pieces.push_back({[&arc, q](double t) { return arc.point(t) * q; }, sig[0], sig[1]});
  pieces.push_back(ray_piece(1, false));
  pieces.push_back({[&init](double p) { return init.lobe_point(0, p); }, init.lobe_angle_at(0, false, 4.0), psim});

  std::vector<PieceParam> where;
  auto verts = sample_pieces(pieces, cfg.h, true, 32, &where);
  G.curve = make_closed(std::move(verts), cfg.h);
  const int piece_ray[9] = {-1, 2, -1, 3, -1, 0, -1, 1, -1};
  const int piece_comp[9] = {-1, 1, 1, 1, -1, 0, 0, 0, -1};
  for (const auto& w : where) {
    std::size_t p = w.piece;
    G.region.push_back(piece_comp[p] < 0 ? Region::Outer : (piece_ray[p] < 0 ? Region::Core : Region::Annulus));
    G.ray.push_back(piece_ray[p]);
    G.component.push_back(piece_comp[p]);
    G.param.push_back(w.t);
  }

  // tangent jumps at the seams, from second-order one-sided derivatives of the adjacent pieces
  auto tangent_of = [](const ParamPiece& pc, bool at_start) {
    double t = at_start ? pc.t0 : pc.t1;
    double dt = (pc.t1 - pc.t0) * (at_start ? 1e-4 : -1e-4);
    Vec2 d = pc.f(t) * (-3.0) + pc.f(t + dt) * 4.0 - pc.f(t + 2 * dt);
    return at_start ? d : d * -1.0;
  };
  auto jump = [&](std::size_t i, std::size_t j) {
    return line_jump(tangent_of(pieces[i], false), tangent_of(pieces[j], true));
  };
  G.seam_jump_outer = std::max({jump(0, 1), jump(3, 4), jump(4, 5), jump(7, 8)});
  for (int k = 0; k < 4; ++k) {
    int e = k % 2;
    auto P = glued_potential(init, arc, s, k, q * G.rho_seam[e]);
    Vec2 er = unit(init.frame.angle(k));
    G.seam_jump_inner = std::max(G.seam_jump_inner, line_jump(er + J(er) * P.d2w, arc.tangent(sig[e])));
  }
  return G;
}

namespace {

struct BallMeter {
  const PolyCurve& c;
  SegmentGrid grid;
  mutable std::vector<unsigned> stamp;
  mutable unsigned tick = 0;
  BallMeter(const PolyCurve& cc, double cell) : c(cc), grid(cc, cell), stamp(cc.edge_count(), 0) {}
  double length(Vec2 x, double r) const {
    ++tick;
    double L = 0;
    std::size_t n = c.size();
    grid.for_near(x, r, [&](std::size_t e) {
      if (stamp[e] == tick) return;
      stamp[e] = tick;
      L += segment_disk_length(c.vertices[e], c.vertices[(e + 1) % n], x, r);
    });
    return L;
  }
};

struct RunSpan {
  std::size_t first = 0, last = 0;
  bool found = false;
};

// consecutive vertex range of a B_4 component (never wraps since vertex 0 lies outside)
RunSpan component_span(const GluedCurve& g, int comp) {
  RunSpan r;
  for (std::size_t i = 0; i < g.component.size(); ++i)
    if (g.component[i] == comp) {
      if (!r.found) r.first = i;
      r.last = i;
      r.found = true;
    }
  return r;
}

// theta and beta along a component, theta lifted continuously and beta integrated from the incoming end
void component_fields(const GluedCurve& g, const SingularInitial& init, const RunSpan& sp, std::vector<double>& th,
                      std::vector<double>& be) {
  const auto& v = g.curve.vertices;
  std::size_t n = sp.last - sp.first + 1;
  th.assign(n, 0);
  be.assign(n, 0);
  auto T = vertex_tangents(g.curve);
  for (std::size_t j = 0; j < n; ++j) {
    Vec2 t = T[sp.first + j];
    double a = std::atan2(t.y, t.x);
    th[j] = j == 0 ? wrap_angle(a) : th[j - 1] + wrap_angle(a - th[j - 1]);
  }
  int k = g.ray[sp.first];
  double U[4];
  init.u(k, 4.0, U);
  be[0] = -2.0 * U[0] + 4.0 * U[1];
  for (std::size_t j = 1; j < n; ++j) {
    Vec2 a = v[sp.first + j - 1], b = v[sp.first + j];
    Vec2 d = b - a;
    be[j] = be[j - 1] + 0.5 * (dot(J(a), d) + dot(J(b), d));
  }
}

double spread(const std::vector<double>& x) {
  if (x.empty()) return 0;
  auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *hi - *lo;
}

bool within_factor(const std::vector<double>& x, double f) {
  if (x.empty()) return false;
  auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return *lo > 0 && *hi <= f * *lo;
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(n);
  for (int i = 0; i < n; ++i) g[i] = lo * std::pow(hi / lo, static_cast<double>(i) / (n - 1));
  return g;
}

}  // namespace

HypothesesReport check_hypotheses(const SingularInitial& init, const ExpanderArc& arc,
                                  const std::vector<GluedCurve>& family, const HypothesesOptions& opt) {
  HypothesesReport R;
  if (family.empty()) throw GluingError("empty family");
  std::vector<const GluedCurve*> sorted;
  for (const auto& g : family) sorted.push_back(&g);
  std::sort(sorted.begin(), sorted.end(), [](auto* x, auto* y) { return x->s > y->s; });

  bool comp_ok = true, embedded = true;
  for (const GluedCurve* gp : sorted) {
    const GluedCurve& g = *gp;
    const double s = g.s, q = std::sqrt(2.0 * s);
    R.s_values.push_back(s);

    // area ratio over a dyadic family of balls
    BallMeter meter(g.curve, std::max(0.05, 2 * g.curve.h));
    std::vector<Vec2> centers;
    std::size_t stride = std::max<std::size_t>(1, g.curve.size() / 300);
    for (std::size_t i = 0; i < g.curve.size(); i += stride) centers.push_back(g.curve.vertices[i]);
    for (double x = -4; x <= 4; x += 0.5)
      for (double y = -4; y <= 4; y += 0.5)
        if (x * x + y * y < 16) centers.push_back({x, y});
    for (std::size_t i = 0; i < g.curve.size(); ++i)
      if (g.region[i] == Region::Core) centers.push_back(g.curve.vertices[i]);
    double d1 = 0;
    Vec2 d1w;
    for (Vec2 c : centers)
      for (double r = 4.0; r >= 2 * g.curve.h; r *= 0.5) {
        double ratio = meter.length(c, r) / r;
        if (ratio > d1) {
          d1 = ratio;
          d1w = c;
        }
      }
    R.D1_per_s.push_back(d1);
    if (d1 > R.h1_worst.value) R.h1_worst = {d1, s, d1w};

    // local exactness and zero Maslov on each B_4 component
    double d2 = 0;
    Vec2 d2w;
    for (int comp = 0; comp < 2; ++comp) {
      auto sp = component_span(g, comp);
      if (!sp.found) {
        comp_ok = false;
        continue;
      }
      std::vector<double> th, be;
      component_fields(g, init, sp, th, be);
      for (std::size_t j = 0; j < th.size(); ++j) {
        Vec2 x = g.curve.vertices[sp.first + j];
        double ratio = (std::abs(th[j]) + std::abs(be[j])) / (norm2(x) + 1.0);
        if (ratio > d2) {
          d2 = ratio;
          d2w = x;
        }
      }
    }
    R.D2_per_s.push_back(d2);
    if (d2 > R.h2_worst.value) R.h2_worst = {d2, s, d2w};

    // closeness of the rescaled curve to the expander on a fixed ball
    double close = 0, angle_sum = 0, curv = 0;
    Vec2 cw;
    for (int k = 0; k < 2; ++k) {
      double lo = g.rho_seam[k];
      double hi = std::min(opt.closeness_radius, 4.0 / q);
      for (int i = 0; i <= 2000; ++i) {
        double xi = lo + (hi - lo) * i / 2000.0;
        auto P = glued_potential(init, arc, s, k, q * xi);
        double gg1, gg2;
        double gg = arc.offset(k, xi, &gg1, &gg2);
        double gt = P.dw / q, gt1 = P.d2w, gt2 = P.d3w * q;
        double wt = P.w / (2 * s), V = arc.potential(k, xi);
        double dist = std::max(std::abs(gt - gg), std::abs(gt1 - gg1));
        if (dist > close) {
          close = dist;
          cw = graph_point(init.frame.angle(k), q * xi, P.dw);
        }
        double dev = (std::atan(gt1) - std::atan(gg1)) - 2.0 * (wt - V) + xi * (gt1 - gg1);
        angle_sum = std::max(angle_sum, std::abs(dev));
        curv = std::max(curv, std::abs(gt2) / std::pow(1.0 + gt1 * gt1, 1.5));
      }
    }
    for (double kap : arc.kappa) curv = std::max(curv, std::abs(kap));
    R.closeness_per_s.push_back(close);
    R.angle_sum_per_s.push_back(angle_sum);
    R.curvature_per_s.push_back(curv);
    if (close > R.h3_worst.value) R.h3_worst = {close, s, cw};

    // graphical annulus with the decaying bound
    int runs = 0;
    bool prev_in = false;
    std::size_t n = g.curve.size();
    std::vector<int> run_rays;
    for (std::size_t i = 0; i <= n; ++i) {
      std::size_t ii = i % n;
      double r = norm(g.curve.vertices[ii]);
      bool in = r >= g.r0 * q && r <= 4.0;
      if (in && !prev_in && i < n) {
        ++runs;
        run_rays.push_back(g.ray[ii]);
      }
      prev_in = in;
    }
    std::sort(run_rays.begin(), run_rays.end());
    if (runs != 4 || run_rays != std::vector<int>({0, 1, 2, 3})) comp_ok = false;
    if (!check_embedded(g.curve).embedded) embedded = false;
    double d3 = 0;
    Vec2 d3w;
    for (int k = 0; k < 4; ++k)
      for (double rho : log_grid(q * g.rho_seam[k % 2], 4.0, 3000)) {
        auto P = glued_potential(init, arc, s, k, rho);
        double den = rho * rho + q * std::exp(-g.b * rho * rho / (2 * s));
        double val = (std::abs(P.dw) + rho * std::abs(P.d2w) + rho * rho * std::abs(P.d3w)) / den;
        if (val > d3) {
          d3 = val;
          d3w = graph_point(init.frame.angle(k), rho, P.dw);
        }
      }
    R.D3_per_s.push_back(d3);
    if (d3 > R.h4_worst.value) R.h4_worst = {d3, s, d3w};
  }
  R.component_match = comp_ok && embedded;
  R.D1 = *std::max_element(R.D1_per_s.begin(), R.D1_per_s.end());
  R.D2 = *std::max_element(R.D2_per_s.begin(), R.D2_per_s.end());
  R.D3 = *std::max_element(R.D3_per_s.begin(), R.D3_per_s.end());
  double f = opt.uniform_factor;
  R.h1 = within_factor(R.D1_per_s, f);
  R.h2 = within_factor(R.D2_per_s, f) && comp_ok;
  bool decreasing = true;
  for (std::size_t i = 1; i < R.closeness_per_s.size(); ++i)
    if (!(R.closeness_per_s[i] < R.closeness_per_s[i - 1])) decreasing = false;
  R.h3 = decreasing && R.angle_sum_per_s.back() < R.angle_sum_per_s.front() &&
         R.curvature_per_s.back() <= R.curvature_per_s.front();
  R.h4 = within_factor(R.D3_per_s, f) && R.component_match;
  if (!comp_ok) R.note += "B_4 components do not match the four graphical pieces; ";
  if (!embedded) R.note += "a glued curve is not embedded; ";
  if (!decreasing) R.note += "closeness to the expander is not strictly decreasing in s; ";
  if (!(R.curvature_per_s.back() <= R.curvature_per_s.front())) R.note += "rescaled curvature grows as s decreases; ";
  return R;
}

BetaAudit beta_on_glue(const SingularInitial& init, const ExpanderArc& arc, const GluedCurve& g) {
  BetaAudit A;
  const double s = g.s, q = std::sqrt(2.0 * s);
  const auto& v = g.curve.vertices;
  A.beta.assign(v.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (g.region[i] == Region::Annulus) {
      auto P = glued_potential(init, arc, s, g.ray[i], g.param[i]);
      A.beta[i] = -2.0 * P.w + g.param[i] * P.dw;
    }
  for (int comp = 0; comp < 2; ++comp) {
    auto sp = component_span(g, comp);
    if (!sp.found) continue;
    std::vector<double> beta(sp.last - sp.first + 1, 0.0);
    for (std::size_t j = 1; j < beta.size(); ++j) {
      Vec2 a = v[sp.first + j - 1], b = v[sp.first + j];
      Vec2 d = b - a;
      beta[j] = beta[j - 1] + 0.5 * (dot(J(a), d) + dot(J(b), d));
    }
    // per-ray offset between the primitive and the formula
    std::vector<double> off_in, off_out;
    int ray_in = g.ray[sp.first];
    for (std::size_t j = 0; j < beta.size(); ++j) {
      std::size_t i = sp.first + j;
      if (g.region[i] != Region::Annulus) continue;
      (g.ray[i] == ray_in ? off_in : off_out).push_back(beta[j] - A.beta[i]);
    }
    A.max_spread = std::max({A.max_spread, spread(off_in), spread(off_out)});
    if (!off_in.empty() && !off_out.empty()) {
      double mean_in = 0, mean_out = 0;
      for (double x : off_in) mean_in += x;
      for (double x : off_out) mean_out += x;
      mean_in /= off_in.size();
      mean_out /= off_out.size();
      // traversing the core from the incoming ray to the outgoing one
      double expected = 2.0 * s * (pi - arc.omega);
      A.jump_error = std::max(A.jump_error, std::abs(std::abs(mean_out - mean_in) - expected));
    }
    // in the core the primitive is the rescaled expander primitive: beta + 2s theta is constant
    std::vector<double> core;
    double th_prev = 0;
    bool first = true;
    for (std::size_t j = 0; j < beta.size(); ++j) {
      std::size_t i = sp.first + j;
      if (g.region[i] != Region::Core) continue;
      Vec2 t = arc.tangent(g.param[i]);
      double a = std::atan2(t.y, t.x);
      double th = first ? a : th_prev + wrap_angle(a - th_prev);
      first = false;
      th_prev = th;
      core.push_back(beta[j] + 2.0 * s * th);
    }
    A.core_error = std::max(A.core_error, spread(core));
    (void)q;
  }
  return A;
}

EstimatesAudit glue_estimates_audit(const SingularInitial& init, const ExpanderArc& arc, double s, double b) {
  EstimatesAudit E;
  const double q = std::sqrt(2.0 * s);
  if (b <= 0) b = audit_rate(arc);
  double r0 = arc.r0;
  double outer = 2.0 * std::pow(s, 0.25);
  for (int k = 0; k < 4; ++k) {
    int end = k % 2;
    double rho_in = q * dot(arc.point(arc.seam_sigma(end, r0)), unit(arc.tails[end].ray_angle));
    for (double rho : log_grid(rho_in, 4.0, 3000)) {
      auto P = glued_potential(init, arc, s, k, rho);
      double ex = std::exp(-b * rho * rho / (2 * s));
      E.star1 = std::max(E.star1, std::abs(P.dw) / (q * ex + rho * rho));
      E.star2 = std::max(E.star2, std::abs(P.d2w) / (q / rho * ex + rho));
      E.star3 = std::max(E.star3, std::abs(P.d3w) / (q / (rho * rho) * ex + 1.0));
      E.D3 = std::max(E.D3, (std::abs(P.dw) + rho * std::abs(P.d2w) + rho * rho * std::abs(P.d3w)) /
                                (rho * rho + q * ex));
      if (rho <= outer) {
        double xi = rho / q;
        double g1, g2;
        double g = arc.offset(end, xi, &g1, &g2);
        E.rescaled = std::max(E.rescaled, std::abs(g) * std::exp(b * xi * xi));
        E.nabla2 = std::max(E.nabla2, std::abs(g1) * xi * std::exp(0.5 * b * xi * xi));
        E.nabla3 = std::max(E.nabla3, std::abs(g2) * xi * xi * std::exp(b * xi * xi));
      }
    }
    auto inside = glued_potential(init, arc, s, k, outer * (1.0 - 1e-9));
    double U[4];
    init.u(k, outer * (1.0 - 1e-9), U);
    E.seam_continuity = std::max(E.seam_continuity, std::abs(inside.dw - U[1]));
  }
  return E;
}

}  // namespace lmcf
