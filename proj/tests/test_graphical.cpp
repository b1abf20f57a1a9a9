#include "doctest.h"
#include "lmcf/expander.hpp"
#include "lmcf/gluing.hpp"
#include "lmcf/graphical.hpp"
#include "lmcf/monotone.hpp"

#include <cmath>
#include <numbers>

using namespace lmcf;

namespace {
const double pi = std::numbers::pi;

PolyCurve line(double angle, Vec2 through, double half, double h) {
  Vec2 e = unit(angle);
  std::vector<Vec2> v;
  int m = static_cast<int>(std::lround(2 * half / h));
  for (int i = 0; i <= m; ++i) v.push_back(through + e * (-half + 2 * half * i / m));
  return make_open(v, h, {wrap_angle_2pi(angle + pi), 1.0}, {wrap_angle_2pi(angle), 1.0});
}

PolyCurve circle(double R, double h) {
  int n = static_cast<int>(std::lround(2 * pi * R / h));
  std::vector<Vec2> v;
  for (int i = 0; i < n; ++i) v.push_back(unit(2 * pi * i / n) * R);
  return make_closed(v, h);
}

PolyCurve sine_graph(double a, double h) {
  std::vector<Vec2> v;
  int m = static_cast<int>(std::lround(6 / h));
  for (int i = 0; i <= m; ++i) {
    double x = -3 + 6.0 * i / m;
    v.push_back({x, a * std::sin(pi * x)});
  }
  return make_open(v, h, {pi, 1.0}, {0.0, 1.0});
}

FlowRun flow(const PolyCurve& c, double h, double dt, double T, double snap, double s = 0) {
  FlowConfig cfg;
  cfg.h = h;
  cfg.dt = dt;
  EvolveOptions o;
  o.T = T;
  o.snap_every = snap;
  o.s = s;
  return evolve(c, cfg, o);
}

// residual of the eta^p inequality on a circle of radius R at distance xi from the patch center
double circle_eta_residual(double R, double xi, double p, double eps) {
  double k2 = 1 / (R * R), e2 = 1 - xi * xi / (R * R);
  return p / 2 * std::pow(e2, p / 2) * k2 + p * (p - 1) * k2 * std::pow(e2, p / 2 - 1) * (eps * e2 - (1 - e2));
}
}  // namespace

TEST_CASE("patch extraction") {
  auto l = line(0.4, {0.1, 0.2}, 3.0, 0.01);
  auto pl = extract_patch(l, {0.1, 0.2}, 0.5);
  CHECK(pl.lipschitz < 1e-12);
  CHECK(pl.spans);
  for (double e : pl.eta) CHECK(e == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(cross(pl.dir, unit(0.4))) < 1e-12);

  // an arc of 20 degrees
  auto c = circle(1.0, 0.001);
  double r = std::sin(10 * pi / 180);
  auto pa = extract_patch(c, {1, 0}, r);
  CHECK(pa.lipschitz == doctest::Approx(std::tan(10 * pi / 180)).epsilon(1e-3));
  CHECK(pa.max_height == doctest::Approx(1 - std::cos(10 * pi / 180)).epsilon(1e-3));
  CHECK(pa.spans);
  for (std::size_t i = 0; i < pa.xi.size(); ++i) CHECK(pa.eta[i] <= 1.0);

  auto fig = make_figure_eight(LinePair{}).curve(0.01);
  CHECK_THROWS_AS(extract_patch(fig, {0, 0}, 0.1), GraphicalError);
  CHECK_THROWS_AS(extract_patch(l, {0.1, 0.2}, 0.03), GraphicalError);
  CHECK_THROWS_AS(extract_patch(l, {3, -3}, 0.5), GraphicalError);
  CHECK_THROWS_AS(extract_patch(circle(0.1, 0.005), {0, 0}, 0.5), GraphicalError);
}

TEST_CASE("graph curvature matches polygon curvature") {
  std::vector<double> err;
  for (double h : {0.02, 0.01, 0.005}) {
    auto c = circle(1.0, h);
    double e = 0;
    auto p = patch_over(c, {1, 0}, {0, 1}, 0.3);
    auto cd = curvature(c);
    for (std::size_t i = 0; i < p.xi.size(); ++i) {
      double a2 = p.d2u[i] * p.d2u[i] / std::pow(1 + p.du[i] * p.du[i], 3);
      e = std::max(e, std::abs(a2 - 1.0));
    }
    (void)cd;
    err.push_back(e);
  }
  CHECK(err[2] < 1e-4);
  CHECK(std::log2(err[0] / err[1]) >= 1.8);
  CHECK(std::log2(err[1] / err[2]) >= 1.8);
}

TEST_CASE("persistence on a line and a shrinking circle") {
  auto l = flow(line(0.0, {0, 0}, 4.0, 0.02), 0.02, 4e-4, 0.05, 0.005);
  auto rl = graphical_persistence_check(l, {0, 0}, {0.1, 0.2, 0.5}, 0.1);
  CHECK(rl.delta == 0.5);
  CHECK(rl.limited_by_run);
  CHECK(rl.eps < 1e-12);

  double h = 0.005;
  auto c = flow(circle(1.0, h), h, h * h, 0.1, 0.0025);
  std::vector<double> grid;
  for (int i = 1; i <= 30; ++i) grid.push_back(0.01 * i);
  double eta = 0.3;
  auto rc = graphical_persistence_check(c, {1, 0}, grid, eta, 0.5, 0.3);
  // closed form: the graph of the circle of radius R(t) over the tangent line at (1, 0)
  double oracle = 0;
  for (double d : grid) {
    bool ok = true;
    for (const auto& st : c.snapshots) {
      if (!(st.t < d * d)) break;
      double R = std::sqrt(1 - 2 * st.t);
      if (!(R > d) || !(d / std::sqrt(R * R - d * d) < eta) || !(1 - std::sqrt(R * R - d * d) < eta * d)) ok = false;
    }
    if (ok) oracle = d;
  }
  CHECK(rc.delta == doctest::Approx(oracle));
  CHECK(rc.delta > 0.05);
  CHECK_FALSE(rc.limited_by_run);
  CHECK_THROWS_AS(graphical_persistence_check(c, {1, 0}, grid, eta, 0.1, 0.3), GraphicalError);
}

TEST_CASE("eta inequality") {
  auto l = flow(line(0.0, {0, 0}, 4.0, 0.02), 0.02, 4e-4, 0.02, 0.002);
  auto rl = eta_evolution_check(l, {0, 0}, 0.5);
  CHECK(rl.holds);
  CHECK(std::abs(rl.min_residual) < 1e-10);
  CHECK(rl.max_rhs < 1e-10);

  // convex patch: the residual approaches the closed form
  std::vector<double> gap;
  for (double h : {0.02, 0.01, 0.005}) {
    auto c = flow(circle(1.0, h), h, h * h, 0.02, 0.002);
    auto rc = eta_evolution_check(c, {1, 0}, 0.3);
    CHECK(rc.holds);
    CHECK(rc.min_residual > 0);
    double worst = 0;
    for (std::size_t k = 0; k < rc.t.size(); ++k) {
      double R = std::sqrt(1 - 2 * rc.t[k]);
      double oracle = circle_eta_residual(R, 0.3, 2.0, 0.2);
      worst = std::max(worst, std::abs(rc.residual[k] - oracle));
    }
    gap.push_back(worst);
  }
  CHECK(gap[2] < gap[1]);
  CHECK(gap[1] < gap[0]);
  CHECK(gap[2] < 0.02);

  // sine graph with an inflection at the center: the residual tends to zero from above
  std::vector<double> res;
  for (double h : {0.02, 0.01, 0.005}) {
    auto s = flow(sine_graph(0.05, h), h, h * h, 0.01, 0.001);
    auto rs = eta_evolution_check(s, {0, 0}, 0.5);
    CHECK(rs.holds);
    res.push_back(rs.min_residual);
  }
  CHECK(std::abs(res[2]) < std::abs(res[0]));

  auto steep = flow(circle(1.0, 0.02), 0.02, 4e-4, 0.01, 0.002);
  CHECK_THROWS_AS(eta_evolution_check(steep, {1, 0}, 0.6), GraphicalError);
}

TEST_CASE("interior estimate") {
  auto l = flow(line(0.3, {0, 0}, 4.0, 0.02), 0.02, 4e-4, 0.02, 0.005);
  auto rl = interior_estimate_check(l, {0, 0}, 0.5, 0.5, 1.0);
  CHECK(rl.lhs < 1e-20);
  CHECK(rl.pass);
  CHECK(rl.hypothesis_ok);

  auto fam = circle_calibration_family();
  REQUIRE(fam.size() == 27);
  double c = calibrate_interior_constant(fam);
  CHECK(c > 0);
  for (const auto& r : fam) {
    CHECK(r.hypothesis_ok);
    // closed form: |A|^2 = 1 / R(T)^2 and eta^-2 = 1 / (1 - R^2 / R(T)^2) at the patch edge
    double R0 = r.y0.x, RT2 = R0 * R0 - 2 * r.T;
    CHECK(r.lhs == doctest::Approx(1 / RT2).epsilon(2e-3));
    CHECK(r.sup_eta_m4p == doctest::Approx(std::pow(1 - r.R * r.R / RT2, -4.0)).epsilon(2e-2));
  }
  // the same ratios at two scales: |A|^2 and the R^-2 bound both scale by 4
  for (std::size_t i = 0; i < 9; ++i) {
    const auto& a = fam[9 + i];
    const auto& b = fam[18 + i];
    CHECK(a.lhs == doctest::Approx(4 * b.lhs).epsilon(1e-3));
    double ba = 1 / (a.R * a.R * (1 - a.theta_frac) * (1 - a.theta_frac)) * a.sup_eta_m4p;
    double bb = 1 / (b.R * b.R * (1 - b.theta_frac) * (1 - b.theta_frac)) * b.sup_eta_m4p;
    CHECK(ba == doctest::Approx(4 * bb).epsilon(1e-3));
    CHECK(a.required_c == doctest::Approx(b.required_c).epsilon(2e-3));
  }
  // circles pass with their own calibration
  double h = 0.01;
  auto cr = flow(circle(1.0, h), h, h * h, 0.1, 0.01);
  auto rc = interior_estimate_check(cr, {1, 0}, 0.2, 0.5, c);
  CHECK(rc.pass);
  CHECK(rc.bound_initial >= rc.lhs);
  CHECK_THROWS_AS(interior_estimate_check(cr, {1, 0}, 0.2, 1.5, c), GraphicalError);
  // the patch leaves its cylinder
  auto fast = flow(circle(0.5, 0.005), 0.005, 2.5e-5, 0.1, 0.01);
  CHECK_THROWS_AS(interior_estimate_check(fast, {0.5, 0}, 0.02, 0.5, c), GraphicalError);
}

TEST_CASE("density bound under closeness") {
  auto arc = expander_solve(LinePair{});
  auto sigma = expander_pair(arc, 0.01);
  DensityBoundOptions o;
  o.R = 2.0;
  o.y_spacing = 0.5;

  auto l = flow(line(0.0, {0, 0}, 4.0, 0.02), 0.02, 4e-4, 0.05, 0.01);
  auto rl = c1alpha_density_bound(l, {line(0.0, {0, 0}, 4.0, 0.02)}, 0.05, o);
  CHECK(rl.q1 == doctest::Approx(0.05));
  CHECK(rl.limited_by_run);
  CHECK(rl.max_theta == doctest::Approx(1.0).epsilon(1e-9));

  // Sigma itself flows by dilation
  double h = 0.02;
  FlowConfig cfg;
  cfg.h = h;
  cfg.dt = h * h;
  cfg.check_embedded = false;
  EvolveOptions eo;
  eo.T = 0.25;
  eo.snap_every = 0.0625;
  eo.s = 0.5;
  auto run = evolve(arc.curve(h), cfg, eo);
  auto rs = c1alpha_density_bound(run, {arc.curve(0.01)}, 0.05, o);
  CHECK(rs.q1 >= 1.0 / 16);
  CHECK(rs.max_theta <= 1.05);

  // not close: refused
  CHECK_THROWS_AS(c1alpha_density_bound(l, {arc.curve(0.01)}, 0.05, o), GraphicalError);
}
