#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "lmcf/expander.hpp"
#include "lmcf/geom.hpp"

namespace lmcf {

struct GluingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rays of the pair, in the order a, b, a + pi, b + pi, where [a, a + omega] is the sector of the
// expander arc (ray 0 and 1 are its ends; rays 2 and 3 belong to the reflected arc).
struct RayFrame {
  double a = 0.0, omega = 0.0;
  double angle(int k) const;
  int arc_end(int k) const { return k % 2; }
};

// Figure-eight with a transverse node at the origin. Near the node each lobe is the graph of
// u = sign * c3 * rho^3 over its two rays; the lobes close up through polar caps of radius r_cap.
struct SingularInitial {
  LinePair pair;
  RayFrame frame;
  double c3 = 0.02;
  double x_graph = 4.2;
  double r_cap = 5.25;
  double blend = 0.35;

  // sign of u on ray k: rays b and b + pi bend toward increasing angle, rays a and a + pi toward decreasing
  double sign(int k) const { return (k % 2 == 1) ? 1.0 : -1.0; }
  // potential over ray k and its first three rho-derivatives
  void u(int k, double rho, double out[4]) const;
  // lobe 0 spans [b, a + pi], lobe 1 spans [b + pi, a + 2 pi]
  double lobe_start(int lobe) const;
  double lobe_end(int lobe) const;
  Vec2 lobe_point(int lobe, double psi) const;
  // angle at which the lobe reaches distance rho along its start (or end) ray
  double lobe_angle_at(int lobe, bool at_end, double rho) const;
  // the singular curve itself, passing through the node twice
  PolyCurve curve(double h) const;
};

SingularInitial make_figure_eight(const LinePair& pair, double c3 = 0.02);
// smallest C with |d^k u| <= C |x|^{3-k}, k = 0, 1, 2, measured on a grid over B_4
double cubic_constant(const SingularInitial& init);

struct CutoffValue {
  double value, d1, d2, d3;
};
// phi(s^{-1/4} |x|) and its derivatives in |x|
CutoffValue cutoff(double xnorm, double s);
double cutoff_max_d1();
double cutoff_max_d2();

// decay rate used by the gluing bounds: the fitted rate, capped below the asymptotic rate 1/2 of the tails
double audit_rate(const ExpanderArc& arc);

struct GluingConfig {
  double s = 0.01;
  double r0 = 0.0;  // 0: take the expander's graphical radius
  double h = 0.01;
  double b = 0.0;   // 0: audit_rate(arc)
};
// largest s for which r0 sqrt(2s) < s^{1/4} < 2 s^{1/4} < 4
double max_scale(double r0);
void validate(const GluingConfig& cfg, const ExpanderArc& arc);

enum class Branch { Expander = 0, Blend = 1, Initial = 2 };
struct PotentialSample {
  double w = 0, dw = 0, d2w = 0, d3w = 0;  // w_s and its rho-derivatives; dw is the graph offset
  Branch branch = Branch::Blend;
};
PotentialSample glued_potential(const SingularInitial& init, const ExpanderArc& arc, double s, int ray, double rho);
// sqrt(2s) times the expander offset at rho / sqrt(2s)
double expander_offset_scaled(const ExpanderArc& arc, double s, int ray, double rho);

enum class Region { Core = 0, Annulus = 1, Outer = 2 };
struct GluedCurve {
  PolyCurve curve;
  double s = 0.0, r0 = 0.0, b = 0.0;
  std::vector<Region> region;
  std::vector<int> ray;        // ray index for annulus vertices, -1 elsewhere
  std::vector<double> param;   // rho on the annulus, expander arclength in the core, polar angle outside
  std::vector<int> component;  // B_4 component (0: the arc, 1: its reflection) for core/annulus, -1 outside
  double rho_seam[2] = {0, 0}; // graph parameter of the inner seam on the rays of each arc end
  double seam_jump_inner = 0.0;  // tangent jump at r0 sqrt(2s), radians
  double seam_jump_outer = 0.0;  // tangent jump at 4
};
GluedCurve glue(const SingularInitial& init, const ExpanderArc& arc, const GluingConfig& cfg);

struct WorstCase {
  double value = 0.0;
  double s = 0.0;
  Vec2 where;
};

struct HypothesesReport {
  double D1 = 0, D2 = 0, D3 = 0;
  std::vector<double> s_values, D1_per_s, D2_per_s, D3_per_s;
  std::vector<double> closeness_per_s, curvature_per_s, angle_sum_per_s;
  bool component_match = true;
  bool h1 = false, h2 = false, h3 = false, h4 = false;
  WorstCase h1_worst, h2_worst, h3_worst, h4_worst;
  std::string note;
  bool all() const { return h1 && h2 && h3 && h4; }
};

struct HypothesesOptions {
  double uniform_factor = 2.0;  // constants may vary by at most this factor across the family
  double closeness_radius = 5.0;
};
HypothesesReport check_hypotheses(const SingularInitial& init, const ExpanderArc& arc,
                                  const std::vector<GluedCurve>& family, const HypothesesOptions& opt = {});

struct BetaAudit {
  std::vector<double> beta;  // formula value at annulus vertices, NaN elsewhere
  double max_spread = 0.0;   // per-ray spread of (primitive - formula)
  double jump_error = 0.0;   // |measured core jump - 2s (pi - omega)|
  double core_error = 0.0;   // |beta^s - 2s beta_Sigma| in the core, after matching constants
};
BetaAudit beta_on_glue(const SingularInitial& init, const ExpanderArc& arc, const GluedCurve& g);

struct EstimatesAudit {
  double D3 = 0.0;            // smallest constant in the combined bound
  double star1 = 0, star2 = 0, star3 = 0;
  double rescaled = 0.0;      // sup |2s d(v(x/sqrt(2s)))| e^{b|x|^2/2s} / sqrt(2s)
  double nabla2 = 0.0, nabla3 = 0.0;
  double seam_continuity = 0.0;  // |gamma_s - gamma| at 2 s^{1/4}
};
EstimatesAudit glue_estimates_audit(const SingularInitial& init, const ExpanderArc& arc, double s, double b);

}  // namespace lmcf
