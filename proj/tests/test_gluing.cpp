#include "doctest.h"
#include "lmcf/gluing.hpp"

#include <cmath>
#include <numbers>

using namespace lmcf;

namespace {
const double pi = std::numbers::pi;

struct Fixture {
  LinePair pair;
  ExpanderArc arc;
  SingularInitial init;
  Fixture() : arc(expander_solve(pair)), init(make_figure_eight(pair)) {}
};

const Fixture& fx() {
  static Fixture f;
  return f;
}

GluingConfig config(double s) {
  GluingConfig c;
  c.s = s;
  c.h = std::min(0.01, 0.1 * std::sqrt(2 * s));
  return c;
}

const std::vector<GluedCurve>& family() {
  static std::vector<GluedCurve> fam = [] {
    std::vector<GluedCurve> f;
    for (int j = 4; j <= 10; ++j) f.push_back(glue(fx().init, fx().arc, config(std::ldexp(1.0, -j))));
    return f;
  }();
  return fam;
}
}  // namespace

TEST_CASE("cutoff profile") {
  double s = 1.0 / 256;
  double q = std::pow(s, 0.25);
  CHECK(cutoff(0.0, s).value == 1.0);
  CHECK(cutoff(q, s).value == 1.0);
  CHECK(cutoff(0.999 * q, s).d1 == 0.0);
  CHECK(cutoff(2 * q, s).value == 0.0);
  CHECK(cutoff(3 * q, s).value == 0.0);
  CHECK(cutoff(1.5 * q, s).value == doctest::Approx(0.5).epsilon(1e-12));
  double prev = 1.0;
  for (int i = 1; i < 50; ++i) {
    double v = cutoff(q * (1 + i / 50.0), s).value;
    CHECK(v <= prev);
    prev = v;
  }
  CHECK(cutoff_max_d1() > 1.0);
  CHECK(cutoff_max_d2() > 0.0);
}

TEST_CASE("figure eight initial curve") {
  const auto& I = fx().init;
  CHECK(I.frame.angle(0) == doctest::Approx(0.0));
  CHECK(I.frame.angle(1) == doctest::Approx(pi / 2));
  CHECK(I.frame.angle(3) == doctest::Approx(3 * pi / 2));
  auto L = I.curve(0.01);
  CHECK(lagrangian_angle(L).turning_number == 0);
  CHECK_FALSE(check_embedded(L).embedded);
  double rmin = 1e9;
  for (auto v : L.vertices) rmin = std::min(rmin, norm(v));
  CHECK(rmin < 0.01);
  // near the node the lobes are the graphs rho e + u'(rho) Je
  for (double rho : {0.5, 2.0, 3.5, 4.0}) {
    for (int lobe = 0; lobe < 2; ++lobe) {
      int kA = lobe == 0 ? 1 : 3, kB = lobe == 0 ? 2 : 0;
      Vec2 eA = unit(I.frame.angle(kA)), eB = unit(I.frame.angle(kB));
      Vec2 gA = eA * rho + J(eA) * (3 * 0.02 * rho * rho);
      Vec2 gB = eB * rho - J(eB) * (3 * 0.02 * rho * rho);
      CHECK(norm(I.lobe_point(lobe, I.lobe_angle_at(lobe, false, rho)) - gA) < 1e-12);
      CHECK(norm(I.lobe_point(lobe, I.lobe_angle_at(lobe, true, rho)) - gB) < 1e-12);
    }
  }
  CHECK(cubic_constant(I) == doctest::Approx(6 * 0.02));
}

TEST_CASE("scale constraints") {
  const auto& A = fx().arc;
  double smax = max_scale(A.r0);
  CHECK(A.r0 * std::sqrt(2 * smax) < std::pow(smax, 0.25));
  GluingConfig c = config(0.5);
  CHECK_THROWS_AS(validate(c, A), GluingError);
  c.s = 0.01;
  CHECK_NOTHROW(validate(c, A));
  c.h = 0;
  CHECK_THROWS_AS(validate(c, A), GluingError);
}

TEST_CASE("glued potential branches are exact") {
  const auto& F = fx();
  double s = 1.0 / 64, q = std::sqrt(2 * s), c = std::pow(s, 0.25);
  for (int k = 0; k < 4; ++k) {
    for (double rho : {0.9 * q * 1.2, 0.5 * c, 0.99 * c}) {
      auto P = glued_potential(F.init, F.arc, s, k, rho);
      CHECK(P.branch == Branch::Expander);
      CHECK(P.dw == q * F.arc.offset(k % 2, rho / q));
      CHECK(P.dw == expander_offset_scaled(F.arc, s, k, rho));
    }
    for (double rho : {2 * c, 3.0, 4.0}) {
      auto P = glued_potential(F.init, F.arc, s, k, rho);
      CHECK(P.branch == Branch::Initial);
      double sign = k % 2 == 1 ? 1.0 : -1.0;
      CHECK(P.dw == doctest::Approx(sign * 3 * 0.02 * rho * rho).epsilon(1e-15));
    }
    // derivatives in the blend against central differences
    for (double rho : {1.2 * c, 1.5 * c, 1.8 * c}) {
      auto P = glued_potential(F.init, F.arc, s, k, rho);
      CHECK(P.branch == Branch::Blend);
      double e = 1e-5;
      auto Pp = glued_potential(F.init, F.arc, s, k, rho + e), Pm = glued_potential(F.init, F.arc, s, k, rho - e);
      CHECK((Pp.w - Pm.w) / (2 * e) == doctest::Approx(P.dw).epsilon(1e-6));
      CHECK((Pp.dw - Pm.dw) / (2 * e) == doctest::Approx(P.d2w).epsilon(1e-6));
      CHECK((Pp.d2w - Pm.d2w) / (2 * e) == doctest::Approx(P.d3w).epsilon(1e-5));
    }
  }
}

TEST_CASE("flat data glue to the plane") {
  LinePair p;
  p.phi1 = 0.2;
  p.phi2 = 0.2 + pi;
  auto arc = expander_solve(p);
  SingularInitial I;
  I.pair = p;
  I.frame.a = p.sector_start();
  I.frame.omega = p.opening();
  I.c3 = 0.0;
  for (double s : {1.0 / 16, 1.0 / 256})
    for (int k = 0; k < 4; ++k)
      for (double rho = 0.05; rho <= 4.0; rho += 0.05) {
        auto P = glued_potential(I, arc, s, k, rho);
        CHECK(P.dw == 0.0);
        CHECK(P.w == 0.0);
      }
}

TEST_CASE("glued family: seams, regions, embeddedness") {
  const auto& F = fx();
  for (const auto& g : family()) {
    CAPTURE(g.s);
    CHECK(g.seam_jump_inner <= 1e-6);
    CHECK(g.seam_jump_outer <= 1e-6);
    CHECK(check_embedded(g.curve).embedded);
    double q = std::sqrt(2 * g.s);
    for (std::size_t i = 0; i < g.curve.size(); ++i) {
      Vec2 v = g.curve.vertices[i];
      if (g.region[i] == Region::Core) {
        Vec2 x = F.arc.point(g.param[i]) * q;
        CHECK(v == (g.component[i] == 0 ? x : x * -1.0));
        CHECK(norm(v) <= g.r0 * q * (1 + 1e-9));
      } else if (g.region[i] == Region::Annulus) {
        CHECK(g.param[i] >= q * g.rho_seam[g.ray[i] % 2] * (1 - 1e-12));
        CHECK(g.param[i] <= 4.0 + 1e-12);
      } else {
        CHECK(norm(v) >= 4.0 - 1e-9);
      }
    }
  }
}

TEST_CASE("hypotheses hold uniformly on the family") {
  auto R = check_hypotheses(fx().init, fx().arc, family());
  MESSAGE("D1 " << R.D1 << " D2 " << R.D2 << " D3 " << R.D3 << " note: " << R.note);
  CHECK(R.h1);
  CHECK(R.h2);
  CHECK(R.h3);
  CHECK(R.h4);
  CHECK(R.component_match);
  for (std::size_t i = 1; i < R.closeness_per_s.size(); ++i) CHECK(R.closeness_per_s[i] < R.closeness_per_s[i - 1]);
}

TEST_CASE("liouville primitive on the glued curve") {
  const auto& F = fx();
  std::vector<double> hs, errs;
  for (double h : {0.02, 0.01, 0.005}) {
    GluingConfig c = config(1.0 / 64);
    c.h = h;
    auto g = glue(F.init, F.arc, c);
    auto A = beta_on_glue(F.init, F.arc, g);
    hs.push_back(h);
    errs.push_back(A.max_spread);
    CHECK(A.jump_error < 1e-3);
    CHECK(A.core_error < 1e-3);
  }
  CHECK(observed_order(hs, errs) >= 1.8);
}

TEST_CASE("estimates audit constants do not grow") {
  const auto& F = fx();
  auto a = glue_estimates_audit(F.init, F.arc, 1.0 / 16, 0);
  auto b = glue_estimates_audit(F.init, F.arc, 1.0 / 1024, 0);
  CHECK(b.D3 <= 2 * a.D3);
  CHECK(b.nabla2 <= 2 * a.nabla2);
  CHECK(b.nabla3 <= 2 * a.nabla3);
  CHECK(b.seam_continuity < 1e-12);
  CHECK(audit_rate(F.arc) < 0.5);
}
