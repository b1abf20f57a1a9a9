#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "lmcf/expander.hpp"
#include "lmcf/flow.hpp"
#include "lmcf/geom.hpp"

namespace lmcf {

struct MonotoneError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// cutoff supported on B_3, equal to 1 on B_2
struct CutoffValue3 {
  double value = 0, radial_d1 = 0, radial_d2 = 0;
};
CutoffValue3 ball_cutoff(double r);
double ball_cutoff_hessian_max();
// C(phi) = max|D^2 phi| + 4 * 2 max|D^2 phi|, from |D phi|^2 / phi <= 2 max|D^2 phi|
double ball_cutoff_constant();

// alpha = beta + 2 (s + t) theta from the evolved fields, continuous along each component of the curve in B_3
std::vector<double> alpha_field(const FlowState& st, double s);
// max |d_s alpha - (-<x, N> + 2 (s + t) kappa)| over vertices in B_3, from the recomputed fields
double alpha_gradient_defect(const FlowState& st, double s);

struct AlphaRow {
  double t = 0.0, lhs = 0.0, rhs = 0.0, excess = 0.0;  // excess = lhs - rhs
  double deviation_term = 0.0, cutoff_term = 0.0;
};
struct AlphaReport {
  std::vector<AlphaRow> rows;
  double C = 0.0, T0 = 0.0, slack = 0.0;
  double max_excess = 0.0;
  double max_scale = 0.0;  // largest |lhs| or |rhs| seen
  bool holds = true;
};
// d/dt int phi alpha^2 rho <= -int phi |2(s+t) H - x^perp|^2 rho + C int_{B_3 \ B_2} alpha^2 rho with rho = rho_(0, T0),
// on snapshots with t0 <= t <= t1. slack < 0 selects 20 (h^2 + dt).
AlphaReport alpha_monotonicity_check(const FlowRun& run, double t0, double t1, double T0, double slack = -1.0);

struct Deviation {
  double integral = 0.0, sup = 0.0;
};
// int over c in B_R of |H - x^perp|^2 (rays included) and the sup of |H - x^perp|
Deviation expander_deviation(const PolyCurve& c, double R);
Deviation expander_deviation(const std::vector<PolyCurve>& parts, double R);
// same on the solver's own table
Deviation expander_deviation(const ExpanderArc& arc, double R);

// (1/((a-1)T)) int_T^{aT} of the deviation of L_t / sqrt(2(s+t)) in B_R, trapezoid in time
double time_averaged_deviation(const FlowRun& run, double T, double a, double R);

double distance_to_pair(Vec2 y, const LinePair& p);

struct ProximityRow {
  double t = 0.0;
  double max_dist = 0.0;  // sup dist(y, P) over the rescaled annulus
  double C1 = 0.0;        // smallest C1 for this snapshot
  double max_density = 0.0;
  int points = 0;
};
struct ProximityReport {
  std::vector<ProximityRow> rows;
  double C1 = 0.0;
  double max_density = 0.0;
  double density_bound = 0.0;  // 1 + eps0 / 2 + nu
  bool density_ok = true;
};
struct ProximityOptions {
  double nu = 0.0;
  double r1 = 1.0;
  double eps0 = 0.05;
  std::vector<double> radii = {0.0625, 0.125, 0.25};
  int centers_per_circle = 16;
  int circles = 4;
  bool density = true;
};
// smallest C with d <= nu + C exp(-|y|^2 / C); 0 if d <= nu
double proximity_constant(double d, double y2, double nu);
ProximityReport proximity_check(const FlowRun& run, const LinePair& pair, const ProximityOptions& opt = {});

struct Ball {
  Vec2 center;
  double radius = 1.0;
};
struct ClosenessReport {
  double eps = 0.0, alpha = 0.5;
  int balls = 0, compared = 0;
  double worst = 0.0;  // largest C^{1,alpha} norm of the graph difference
  Vec2 worst_center;
  bool pass = false;
  bool structural_failure = false;
  std::string note;
};
ClosenessReport c1alpha_closeness(const std::vector<PolyCurve>& A, const std::vector<PolyCurve>& B, double eps,
                                  double alpha, const Ball& W);
ClosenessReport c1alpha_closeness(const PolyCurve& A, const PolyCurve& B, double eps, double alpha, const Ball& W);

struct StabilityParams {
  double R = 3.0;      // radius of the ball
  double r = 1.0;      // inner radius of the annulus
  double tau = 0.25;   // largest density scale
  double M = 10.0;     // curvature bound
  double eps0 = 0.05;
  double eta = 1e-3;
  double nu = 0.05;
  double C = 2.0;
  double eps = 0.05;   // closeness scale for the conclusion
  double alpha = 0.5;
  double x_spacing = 0.25;
};
struct StabilityReport {
  bool i = false, ii = false, iii = false, iv = false;
  double max_curvature = 0.0, max_density = 0.0, deviation = 0.0, max_proximity_excess = 0.0;
  int components = 0, components_expected = 4;
  ClosenessReport closeness;
  std::string note;
  bool all() const { return i && ii && iii && iv; }
};
StabilityReport stability_hypotheses_check(const std::vector<PolyCurve>& L, const ExpanderArc& arc,
                                           const StabilityParams& p = {});

// Sigma and its reflection as open polylines
std::vector<PolyCurve> expander_pair(const ExpanderArc& arc, double h);

}  // namespace lmcf
