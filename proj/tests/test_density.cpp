#include "doctest.h"
#include "lmcf/density.hpp"
#include "lmcf/expander.hpp"
#include "lmcf/gluing.hpp"

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

PolyCurve wobbly_loop(double h) {
  std::vector<Vec2> v;
  for (int i = 0; i < 2000; ++i) {
    double a = 2 * pi * i / 2000;
    double r = 1 + 0.2 * std::cos(3 * a) + 0.1 * std::sin(2 * a);
    v.push_back(unit(a) * r);
  }
  return resample(make_closed(v, 0.001), h);
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

template <class Rows>
double value_near(const Rows& t, const std::vector<double>& v, double at) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::abs(t[i] - at) < std::abs(t[best] - at)) best = i;
  return v[best];
}

// Gaussian integral over the offset line {x0 + d n + u e}, by direct 1-d quadrature
double offset_line_oracle(double d, double r) {
  double sum = 0, du = r / 200;
  for (double u = -40 * r; u <= 40 * r; u += du)
    sum += std::exp(-(d * d + u * u) / (4 * r * r)) / std::sqrt(4 * pi * r * r) * du;
  return sum;
}
}  // namespace

TEST_CASE("heat kernel") {
  CHECK(heat_kernel({0, 0}, 1.0 / (4 * pi), {0, 0}, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  double tau = 0.3;
  Vec2 x{std::sqrt(4 * tau), 0};
  CHECK(heat_kernel({0, 0}, tau, x, 0.0) == doctest::Approx(std::exp(-1.0) / std::sqrt(4 * pi * tau)));
  CHECK(heat_kernel({0, 0}, 1e-4, {10, 0}, 0.0) == 0.0);
  CHECK_THROWS_AS(heat_kernel({0, 0}, 1.0, {0, 0}, 1.0), DensityError);
  CHECK(gaussian({1, 2}, 0.5, {1.3, 2}) == heat_kernel({1, 2}, 0.7, {1.3, 2}, 0.2));
}

TEST_CASE("lines have density one") {
  for (double ang : {0.0, 0.4, 2.0}) {
    Vec2 through{0.3, -0.2};
    auto l = line(ang, through, 1.5, 0.01);
    for (double r : {0.05, 0.2, 1.0, 5.0}) {
      auto d = density_ratio(l, through + unit(ang) * 0.7, r);
      CHECK(std::abs(d.value - 1.0) < 1e-9);
      CHECK(d.error < 1e-9);
    }
  }
  auto l = line(0.0, {0, 0}, 1.0, 0.01);
  CHECK(density_ratio(l, {0, 0}, 3.0).tail > 0.5);
}

TEST_CASE("offset line and unions") {
  auto l = line(0.3, {0, 0}, 2.0, 0.01);
  for (double d : {0.1, 0.5, 1.5})
    for (double r : {0.1, 0.4}) {
      Vec2 x0 = J(unit(0.3)) * d;
      double v = density_ratio(l, x0, r).value;
      CHECK(v == doctest::Approx(std::exp(-d * d / (4 * r * r))).epsilon(1e-9));
      CHECK(v == doctest::Approx(offset_line_oracle(d, r)).epsilon(1e-6));
    }
  std::vector<PolyCurve> pair{line(0.0, {0, 0}, 2.0, 0.01), line(1.1, {0, 0}, 2.0, 0.01)};
  CHECK(std::abs(density_ratio(pair, {0, 0}, 0.3).value - 2.0) < 1e-9);
  std::vector<PolyCurve> three{line(0.0, {0, 0}, 2.0, 0.01), line(1.0, {0, 0}, 2.0, 0.01), line(2.0, {0, 0}, 2.0, 0.01)};
  CHECK(std::abs(density_ratio(three, {0, 0}, 0.5).value - 3.0) < 1e-9);
  // far from the node the pair looks like one line
  Vec2 far{4, 0};
  CHECK(density_ratio(pair, far, 0.3).value <= 1 + std::exp(-std::pow(4 * std::sin(1.1), 2) / (4 * 0.09)) + 1e-9);
}

TEST_CASE("resolution guard and rescaling") {
  auto c = circle(1.0, 0.02);
  CHECK_THROWS_AS(density_ratio(c, {1, 0}, 0.03), DensityError);
  CHECK_NOTHROW(density_ratio(c, {1, 0}, 0.04));
  FlowState st;
  st.curve = c;
  st.t = 0.2;
  for (double s : {0.05, 0.3}) {
    auto id = rescaled_identity_check(st, s, {0.4, 0.9}, 0.3);
    CHECK(id.relative <= 1e-12);
  }
  auto same = rescaled_identity_check(st, 0.3, {0.4, 0.9}, 0.3);
  CHECK(same.lhs == same.rhs);
  st.t = 0;
  CHECK_THROWS_AS(rescaled_identity_check(st, 0.0, {0, 0}, 0.3), DensityError);
}

TEST_CASE("plain and modified ratios agree at snapshot times") {
  auto run = flow(circle(1.0, 0.02), 0.02, 4e-4, 0.1, 0.01, 0.05);
  for (double r : {0.1, 0.2, 0.3}) {
    double t0 = 0.01 * std::round((0.1 - r * r) / 0.01) + r * r;
    DensityQuery plain{{0.9, 0.1}, t0, r, DensityVariant::Plain};
    DensityQuery mod{{0.9, 0.1}, t0 - r * r, r, DensityVariant::Modified};
    DensityQuery res{{0.9, 0.1}, t0 - r * r, r, DensityVariant::Rescaled};
    double a = evaluate(run, plain), b = evaluate(run, mod);
    CHECK(std::abs(a - b) <= 1e-12 * b);
    double q = std::sqrt(2 * (0.05 + t0 - r * r));
    res.x0 = res.x0 / q;
    res.r /= q;
    CHECK(std::abs(evaluate(run, res) - b) <= 1e-12 * b);
  }
}

TEST_CASE("huisken: static line and shrinking circle") {
  auto l = flow(line(0.5, {0, 0}, 3.0, 0.02), 0.02, 4e-4, 0.1, 0.004);
  auto hl = huisken_check(l, unit(0.5) * 0.3, 0.1, {0.2, 0.25, 0.3});
  CHECK(hl.max_residual < 1e-12);
  CHECK(hl.max_rhs < 1e-12);
  for (double v : hl.theta) CHECK(std::abs(v - 1) < 1e-9);

  std::vector<double> hs, res;
  for (double h : {0.04, 0.02, 0.01}) {
    auto run = flow(circle(1.0, h), h, h * h / 4, 0.45, 0.005);
    auto hr = huisken_check(run, {0, 0}, 0.5, {0.3, 0.4, 0.5, 0.6, 0.7});
    CHECK(hr.monotone);
    for (double v : hr.theta) CHECK(v == doctest::Approx(std::sqrt(2 * pi / std::exp(1.0))).epsilon(5e-4));
    hs.push_back(h);
    res.push_back(hr.max_residual);
  }
  CHECK(observed_order(hs, res) >= 1.8);
}

TEST_CASE("huisken: perturbed loop") {
  std::vector<double> hs, res;
  for (double h : {0.04, 0.02, 0.01}) {
    auto run = flow(wobbly_loop(h), h, h * h, 0.04, 2 * h * h);
    auto hr = huisken_check(run, {0.8, 0.3}, 0.1, {0.25, 0.28, 0.3});
    CHECK(hr.monotone);
    std::vector<double> t, r;
    for (const auto& row : hr.rows) t.push_back(row.t), r.push_back(row.residual);
    hs.push_back(h);
    res.push_back(value_near(t, r, 0.02));
  }
  CHECK(observed_order(hs, res) >= 1.8);
  CHECK_THROWS_AS(huisken_check(flow(wobbly_loop(0.04), 0.04, 0.0016, 0.04, 0.02), {0.8, 0.3}, 0.1, {0.25, 0.3}),
                  DensityError);
}

TEST_CASE("evolution of rho along the flow") {
  auto l = flow(line(0.5, {0, 0}, 3.0, 0.02), 0.02, 4e-4, 0.02, 8e-4);
  auto rl = rho_evolution_check(l, unit(0.5) * 0.3 + J(unit(0.5)) * 0.1, 0.1);
  CHECK(rl.max_residual < 1e-4 * rl.max_rhs);

  std::vector<double> hs, res;
  for (double h : {0.04, 0.02, 0.01}) {
    auto run = flow(wobbly_loop(h), h, h * h, 0.02, 2 * h * h);
    auto re = rho_evolution_check(run, {0.8, 0.3}, 0.1);
    hs.push_back(h);
    res.push_back(value_near(re.t, re.residual, 0.01));
  }
  CHECK(observed_order(hs, res) >= 1.8);
  CHECK(res.back() < 1e-3 * 4.8);
  auto c = flow(circle(1.0, 0.02), 0.02, 4e-4, 0.4, 0.4);
  CHECK_THROWS_AS(rho_evolution_check(c, {0, 0}, 0.5), DensityError);
}

TEST_CASE("density sweep on crossing and glued curves") {
  // a static figure-eight keeps density 2 at its node
  auto init = make_figure_eight(LinePair{});
  FlowRun fig;
  fig.s = 0.01;
  for (double t : {0.0, 0.01, 0.02, 0.04}) {
    FlowState st;
    st.t = t;
    st.curve = init.curve(0.01);
    fig.snapshots.push_back(st);
  }
  SweepGrid g;
  g.x0_spacing = 0.25;
  auto bad = density_sweep({&fig}, g);
  CHECK(bad.empty);
  CHECK_FALSE(bad.violation.empty());
  CHECK(bad.max_theta > 1 + g.eps0);

  LinePair p;
  auto arc = expander_solve(p);
  std::vector<FlowRun> runs;
  for (int j : {4, 6}) {
    double s = std::ldexp(1.0, -j);
    GluingConfig gc;
    gc.s = s;
    gc.h = 0.01;
    runs.push_back(flow(glue(init, arc, gc).curve, 0.01, 1e-4, 0.06, 0.005, s));
  }
  std::vector<const FlowRun*> ptr{&runs[0], &runs[1]};
  g.x0_spacing = 0.1;
  g.max_times = 6;
  auto cert = density_sweep(ptr, g);
  REQUIRE_FALSE(cert.empty);
  CHECK(cert.s0 == 1.0 / 16);
  CHECK(cert.delta0 > 0);
  CHECK(cert.tau > 0);
  CHECK(cert.max_theta <= 1 + g.eps0);
  CHECK(cert.max_theta >= 1.0);
  CHECK(cert.refused > 0);

  // fewer centers never shrink the certified region
  SweepGrid coarse = g;
  coarse.x0_spacing = 0.2;
  auto c2 = density_sweep(ptr, coarse);
  REQUIRE_FALSE(c2.empty);
  for (std::size_t k = 0; k < g.tau.size(); ++k) CHECK(c2.delta_per_tau[k] >= cert.delta_per_tau[k]);
  CHECK(c2.tau * c2.delta0 >= cert.tau * cert.delta0);
  CHECK(c2.max_theta <= cert.max_theta);

  std::vector<double> C;
  for (const auto& r : runs) C.push_back(white_check(r, cert).C_emp);
  CHECK(uniformity_ratio(C) <= 2.0);
}

TEST_CASE("white check scaling") {
  auto arc = expander_solve(LinePair{});
  double s = 0.25;
  FlowConfig cfg;
  cfg.h = 0.01;
  cfg.check_embedded = false;
  EvolveOptions o;
  o.T = 0.05;
  o.snap_every = 0.01;
  o.s = s;
  auto run = evolve(expander_flow(arc.curve(0.01), s), cfg, o);
  Certificate cert;
  cert.empty = false;
  cert.delta0 = 0.05;
  double kmax = 0;
  for (double k : arc.kappa) kmax = std::max(kmax, std::abs(k));
  auto w = white_check(run, cert, 1.0, s);
  CHECK(w.C_emp == doctest::Approx(kmax / std::sqrt(2.0)).epsilon(5e-3));

  auto l = flow(line(0.2, {0, 0}, 2.0, 0.02), 0.02, 4e-4, 0.05, 0.01);
  CHECK(white_check(l, cert).C_emp < 1e-12);
  cert.empty = true;
  CHECK_THROWS_AS(white_check(l, cert), DensityError);
  CHECK(uniformity_ratio({1.0, 1.5, 2.0}) == 2.0);
  CHECK(std::isinf(uniformity_ratio({1.0, INFINITY})));
}
