#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "lmcf/flow.hpp"
#include "lmcf/geom.hpp"

namespace lmcf {

struct GraphicalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// portion of a curve inside the cylinder |xi| < r, |u| < height written as u(xi) over base + xi e
struct GraphicalPatch {
  Vec2 base, dir;
  double r = 0.0, height = 0.0;
  std::vector<double> xi, u, du, d2u, eta;  // vertices inside the cylinder
  double lipschitz = 0.0;                   // largest secant slope, boundary crossings included
  double max_height = 0.0;                  // sup |u|
  bool spans = false;                       // the sheet leaves through both sides |xi| = r
};

// best-fit line of the portion in B_r(center), cylinder of radius r around center
GraphicalPatch extract_patch(const PolyCurve& c, Vec2 center, double r);
// fixed frame; height <= 0 means height = r
GraphicalPatch patch_over(const PolyCurve& c, Vec2 base, Vec2 dir, double r, double height = 0.0);

struct PersistenceRow {
  double delta = 0.0;
  bool holds = false;
  double lipschitz = 0.0, max_height = 0.0;  // worst over t < delta^2
  double t_checked = 0.0;                    // last snapshot time inside the window
};
struct PersistenceReport {
  Vec2 center, dir;
  double eps = 0.0;  // initial Lipschitz constant in the unit cylinder
  double eta = 0.0;
  double delta = 0.0;  // largest delta of the grid for which the conclusion holds
  bool limited_by_run = false;
  std::vector<PersistenceRow> rows;
};
// M_t in C_delta(center) is a graph over the initial line with Lipschitz < eta and height < eta delta for t < delta^2
PersistenceReport graphical_persistence_check(const FlowRun& run, Vec2 center, const std::vector<double>& delta_grid,
                                              double eta, double eps = 0.5, double r0 = 1.0);

struct EtaReport {
  double p = 2.0, eps = 0.2;
  double min_residual = 0.0;  // inf over samples of lhs - rhs
  double max_rhs = 0.0;
  double slack = 0.0;
  int samples = 0;
  std::vector<double> t, residual;  // min residual per snapshot
  bool holds = false;
};
// (d/dt - Lap) eta^p - (p/2 - p (p - 1) eps) eta^p |A|^2 >= -slack on the material points inside the patch.
// slack < 0 selects 20 (h^2 + dt). Throws if the determinant condition 1 + u'^2 < 1 + eps fails.
EtaReport eta_evolution_check(const FlowRun& run, Vec2 center, double r, double p = 2.0, double eps = 0.2,
                              double slack = -1.0, double t_max = -1.0);

struct InteriorEstimateReport {
  double R = 0.0, theta_frac = 0.5, p = 2.0, c = 0.0, T = 0.0;
  Vec2 y0, dir;
  double lhs = 0.0;             // sup |A|^2 over |xi| <= theta R, t in [0, T], cylinder height 2R
  double sup_eta_m4p = 0.0;     // sup eta^(-4p) over |xi| <= R, t in [0, T]
  double kappa_phi = 0.0;       // half the inf of eta^(2p)
  double bound_c = 0.0;         // c / (R^2 (1 - theta)^2) sup eta^(-4p)
  double bound_initial = 0.0;   // sup over t = 0 of |A|^2 phi(eta^(-2p)) / (1 - theta)^2
  double rhs = 0.0;             // min of the two
  double required_c = 0.0;      // smallest c with bound_c >= lhs
  double max_det = 0.0;         // sup 1 + u'^2
  double eps = 0.2;
  bool hypothesis_ok = false;   // max_det < 1 + eps; the estimate claims nothing otherwise
  bool pass = false;
};
InteriorEstimateReport interior_estimate_check(const FlowRun& run, Vec2 y0, double R, double theta_frac, double c,
                                               double p = 2.0, double T = -1.0, double eps = 0.2);
// largest required_c over a calibration family
double calibrate_interior_constant(const std::vector<InteriorEstimateReport>& family);
// shrinking circles R0 in {1/2, 1, 2}, patch R = x R0 with x in {0.1, 0.2, 0.3} at (R0, 0), theta_frac in {1/4, 1/2, 3/4},
// T = R0^2 / 10, h = h_rel R0, dt = h^2
std::vector<InteriorEstimateReport> circle_calibration_family(double h_rel = 0.01);

struct DensityBoundReport {
  double q1 = 0.0;
  double max_theta = 0.0;  // over r^2, t <= q1
  Vec2 argmax_y;
  double argmax_r = 0.0, argmax_t = 0.0;
  bool limited_by_run = false;
  double first_violation = 0.0;  // max(r^2, t) of the earliest violation, 0 if none
  long queries = 0;
};
struct DensityBoundOptions {
  double eps0 = 0.05;
  double alpha = 0.5;
  double R = 3.0;           // closeness on B_R, density centers in B_(R-1)
  double y_spacing = 0.25;
  std::vector<double> r_grid = {1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
  double scale = 1.0;       // the run is lambda M with lambda = scale, times scaled by lambda^2
};
// q1: largest q with Theta_t(y, r) <= 1 + eps0 for r^2, t <= q and y in B_(R-1)
DensityBoundReport c1alpha_density_bound(const FlowRun& run, const std::vector<PolyCurve>& sigma, double eps,
                                         const DensityBoundOptions& opt = {});

}  // namespace lmcf
