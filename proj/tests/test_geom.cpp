#include "doctest.h"
#include "lmcf/geom.hpp"

#include <cmath>
#include <numbers>

using namespace lmcf;

namespace {
const double pi = std::numbers::pi;

PolyCurve circle(double R, int n, Vec2 c = {0, 0}) {
  std::vector<Vec2> v;
  for (int i = 0; i < n; ++i) {
    double a = 2 * pi * i / n;
    v.push_back(c + Vec2{R * std::cos(a), R * std::sin(a)});
  }
  return make_closed(v, 2 * pi * R / n);
}

PolyCurve ellipse(double a, double b, int n) {
  std::vector<Vec2> v;
  for (int i = 0; i < n; ++i) {
    double t = 2 * pi * i / n;
    v.push_back({a * std::cos(t), b * std::sin(t)});
  }
  return make_closed(v, 0);
}
}  // namespace

TEST_CASE("resample circle keeps radius") {
  auto c = resample(circle(1.0, 400), 0.1);
  CHECK(c.size() >= 62);
  CHECK(c.size() <= 64);
  for (auto v : c.vertices) CHECK(std::abs(norm(v) - 1.0) < 1e-3);
  for (double l : edge_lengths(c)) {
    CHECK(l > 0.8 * 0.1);
    CHECK(l < 1.2 * 0.1);
  }
  CHECK_THROWS_AS(resample(circle(0.1, 100), 0.1), GeometryError);
}

TEST_CASE("resample keeps a straight segment collinear") {
  std::vector<Vec2> v;
  for (int i = 0; i <= 40; ++i) v.push_back({0.05 * i, 0.05 * i});
  auto c = make_open(v, 0.05, {5 * pi / 4, 1.0}, {pi / 4, 1.0});
  auto r = resample(c, 0.031);
  for (auto p : r.vertices) CHECK(std::abs(p.x - p.y) < 1e-14);
}

TEST_CASE("lagrangian angle on line and circle") {
  std::vector<Vec2> v;
  for (int i = 0; i < 20; ++i) v.push_back({0.1 * i - 1.0, 0.1 * i - 1.0});
  auto line = make_open(v, 0.1414, {5 * pi / 4, 1}, {pi / 4, 1});
  for (double th : lagrangian_angle(line).theta) CHECK(th == doctest::Approx(pi / 4).epsilon(1e-14));

  auto c = circle(1.0, 200);
  auto lift = lagrangian_angle(c);
  CHECK(lift.turning_number == 1);
  CHECK_FALSE(lift.zero_maslov);
  for (int i = 0; i < 200; ++i) {
    double phi = 2 * pi * i / 200;
    CHECK(std::abs(wrap_angle(lift.theta[i] - (phi + pi / 2))) < 1e-12);
  }
}

TEST_CASE("figure eight lift closes up") {
  std::vector<Vec2> v;
  const int n = 400;
  for (int i = 0; i < n; ++i) {
    double t = 2 * pi * i / n;
    v.push_back({std::sin(t), std::sin(t) * std::cos(t)});
  }
  auto c = make_closed(v, 0);
  // independent oracle: winding number of the tangent image, by summing turning angles of edges
  double turn = 0;
  for (int i = 0; i < n; ++i) {
    Vec2 e0 = c.edge(i), e1 = c.edge((i + 1) % n);
    turn += std::atan2(cross(e0, e1), dot(e0, e1));
  }
  CHECK(std::lround(turn / (2 * pi)) == 0);
  auto lift = lagrangian_angle(c);
  CHECK(lift.turning_number == 0);
  CHECK(lift.zero_maslov);
}

TEST_CASE("liouville primitive") {
  std::vector<Vec2> v;
  for (int i = 0; i < 30; ++i) v.push_back({0.1 * i, -0.05 * i});
  auto through0 = make_open(v, 0.11, {pi, 1}, {0, 1});
  for (double b : liouville_primitive(through0).beta) CHECK(std::abs(b) < 1e-15);

  Vec2 a{0.3, 1.2};
  Vec2 dir = unit(0.4);
  std::vector<Vec2> w;
  for (int i = 0; i < 30; ++i) w.push_back(a + dir * (0.1 * i));
  auto shifted = make_open(w, 0.1, {0.4 + pi, 1}, {0.4, 1});
  auto p = liouville_primitive(shifted);
  for (int i = 0; i < 30; ++i) CHECK(p.beta[i] == doctest::Approx(dot(J(a), dir) * 0.1 * i).epsilon(1e-12));

  std::vector<double> hs, errs;
  for (int n : {100, 200, 400}) {
    auto c = ellipse(2.0, 1.0, n);
    auto pr = liouville_primitive(c);
    CHECK_FALSE(pr.exact);
    hs.push_back(1.0 / n);
    errs.push_back(std::abs(pr.period - 2 * shoelace_area(c)));
  }
  CHECK(errs.back() < 1e-3);
  CHECK(observed_order(hs, errs) >= 1.8);
  auto cr = circle(1.5, 800);
  CHECK(liouville_primitive(cr).period == doctest::Approx(2 * pi * 1.5 * 1.5).epsilon(1e-4));
}

TEST_CASE("curvature") {
  double R = 2.0;
  auto c = circle(R, static_cast<int>(std::lround(2 * pi * 50)));
  auto k = curvature(c);
  for (double kk : k.kappa) CHECK(std::abs(kk * R - 1.0) < 1e-3);
  for (std::size_t i = 0; i < c.size(); ++i) CHECK(dot(k.H[i], c.vertices[i]) < 0);

  std::vector<Vec2> v;
  for (int i = 0; i < 20; ++i) v.push_back({0.1 * i, 0.0});
  auto line = make_open(v, 0.1, {pi, 1}, {0, 1});
  for (double kk : curvature(line).kappa) CHECK(kk == 0.0);

  // kappa against the derivative of the tangent angle along arc length
  std::vector<double> hs, errs;
  for (int n : {100, 200, 400}) {
    auto e = ellipse(1.5, 1.0, n);
    auto kap = curvature(e).kappa;
    auto th = lagrangian_angle(e).theta;
    auto s = cumulative_length(e);
    double L = s.back(), err = 0;
    for (int i = 0; i < n; ++i) {
      int ip = (i + 1) % n, im = (i + n - 1) % n;
      double thp = th[ip] + (ip == 0 ? 2 * pi : 0), thm = th[im] - (i == 0 ? 2 * pi : 0);
      double sp = s[i + 1], sm = i == 0 ? -(L - s[n - 1]) : s[i - 1];
      double dth = (thp - thm) / (sp - sm);
      err = std::max(err, std::abs(kap[i] - dth));
    }
    hs.push_back(L / n);
    errs.push_back(err);
  }
  CHECK(observed_order(hs, errs) >= 1.8);
}

TEST_CASE("curve integrals") {
  auto c = circle(1.0, 2000);
  auto r = curve_integral(c, [](Vec2) { return 1.0; });
  CHECK(r.total() == doctest::Approx(2 * pi * std::sin(pi / 2000) * 2000 / pi).epsilon(1e-12));
  CHECK(std::abs(r.total() - 2 * pi) < 1e-5);

  std::vector<Vec2> v;
  for (int i = 0; i <= 20; ++i) v.push_back({0.1 * i, 0});
  auto arc = make_open(v, 0.1, {pi, 2.0}, {0, 2.0});
  auto one = curve_integral(arc, [](Vec2) { return 1.0; }, 5,
                            [](Vec2, Vec2) { return 3.0; }, true);
  CHECK(one.finite == doctest::Approx(2.0));
  CHECK(one.ray == doctest::Approx(6.0));
  CHECK(one.ray_included);
  CHECK_THROWS_AS(curve_integral(arc, [](Vec2) { return 1.0; }, 5, nullptr, true), GeometryError);
}

TEST_CASE("validation") {
  auto c = circle(1.0, 10);
  CHECK_THROWS_AS(validate(c), GeometryError);
  auto ok = circle(1.0, 64);
  CHECK_NOTHROW(validate(ok));
  ok.rays.push_back({0, 1});
  CHECK_THROWS_AS(validate(ok), GeometryError);
}

TEST_CASE("embeddedness and hausdorff") {
  auto c = circle(1.0, 200);
  CHECK(check_embedded(c).embedded);
  std::vector<Vec2> v;
  for (int i = 0; i < 400; ++i) {
    double t = 2 * pi * i / 400;
    v.push_back({std::sin(t), std::sin(t) * std::cos(t)});
  }
  CHECK_FALSE(check_embedded(make_closed(v, 0)).embedded);
  auto c2 = circle(1.1, 200);
  c.h = c2.h = 0.03;
  CHECK(hausdorff(c, c2).value == doctest::Approx(0.1).epsilon(1e-3));
}
