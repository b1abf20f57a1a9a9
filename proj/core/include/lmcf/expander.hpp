#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "lmcf/geom.hpp"

namespace lmcf {

struct ExpanderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Two transverse lines through the origin. pairing 0 joins the rays phi1 and phi2 (and their
// reflections through the origin); pairing 1 joins phi2 and phi1 + pi.
struct LinePair {
  double phi1 = 0.0;
  double phi2 = 1.5707963267948966;
  int pairing = 0;
  double alpha_min = 0.1;

  // angle from line 1 to line 2, in [0, pi)
  double alpha() const;
  // the sector [a, a + omega] holding the arc that joins the paired rays; omega in (0, pi]
  double sector_start() const;
  double opening() const;
  bool straight() const;
};
void validate(const LinePair& p);

struct ExpanderConfig {
  double tol = 1e-8;
  double r_cut = 6.0;
  double table_ds = 0.005;
  double ode_tol = 1e-13;
  int max_newton = 60;
  double graphical_margin = 1.25;
};

struct ShootingOutcome {
  double d = 0.0, psi = 0.0;
  int iterations = 0;
  bool converged = false;
  bool used_fallback = false;
  double residual = 0.0;
};

struct DecayFit {
  double b = 0.0, C = 0.0, quality = 0.0;
  bool exact = false;
  int samples = 0;
};

// Tail of the arc written as a graph g(xi) over one of its rays, xi = <x, e>.
struct ExpanderTail {
  double ray_angle = 0.0;
  double xi_min = 0.0, xi_cut = 0.0;
  double amplitude = 0.0;  // coefficient of the decaying linearized solution beyond xi_cut
  QuinticHermite g;        // g, g', g'' on [xi_min, xi_cut]
  QuinticHermite V;        // potential with V' = g, V(inf) = 0
  bool flat = false;
};

// Decaying solution of g'' = g - xi g' and its derivatives.
void decaying_mode(double xi, double& y, double& dy, double& d2y);

class ExpanderArc {
 public:
  LinePair pair;
  ExpanderConfig config;
  double a = 0.0, b = 0.0, omega = 0.0;
  bool straight = false;
  ShootingOutcome shot;

  // uniform arclength table, sigma = 0 at the bisector crossing
  std::vector<double> sigma;
  std::vector<Vec2> x;
  std::vector<double> theta, kappa;

  double residual_sup = 0.0;       // on the ds = 2*table_ds grid
  double residual_sup_fine = 0.0;  // on the table grid itself
  double residual_l2 = 0.0;
  DecayFit decay;
  double r0 = 0.0;  // outside B_r0 the arc splits into two graphs over its rays
  ExpanderTail tails[2];  // 0: start ray a, 1: end ray b
  QuinticHermite hx, hy;  // position along the table

  Vec2 point(double sig) const;
  Vec2 tangent(double sig) const;
  double sigma_min() const { return sigma.front(); }
  double sigma_max() const { return sigma.back(); }
  // arclength at which |x| = r along the tail of the given end
  double seam_sigma(int end, double r) const;
  // offset and its first two xi-derivatives of the graph over ray `end`, any xi >= xi_min
  double offset(int end, double xi, double* d1 = nullptr, double* d2 = nullptr) const;
  double potential(int end, double xi) const;
  // open-arc polyline with spacing near h, ends at |x| ~ r_cut, carrying both rays
  PolyCurve curve(double h) const;
};

ShootingOutcome shoot(const LinePair& pair, const ExpanderConfig& cfg, double d0, double psi0,
                      bool allow_fallback = true);
ExpanderArc expander_solve(const LinePair& pair, const ExpanderConfig& cfg = {});
// The reflected arc -Sigma completing the four-ray expander.
PolyCurve reflect_through_origin(const PolyCurve& c);

DecayFit decay_fit(const ExpanderArc& arc, double r_min, double r_max = 0.0);

// sqrt(2t) Sigma
PolyCurve expander_flow(const PolyCurve& sigma, double t);

struct UniquenessProbe {
  int seeds = 0;
  int converged = 0;
  int fallbacks = 0;
  double max_hausdorff = 0.0;
};
UniquenessProbe multi_start_probe(const LinePair& pair, const ExpanderConfig& cfg, int seeds,
                                  std::uint64_t rng_seed);

// Sup of |kappa - <x, N>| from sixth-order differences on a uniform arclength grid.
double expander_residual(const std::vector<Vec2>& pts, double ds, double* l2 = nullptr);

}  // namespace lmcf
