#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "lmcf/flow.hpp"
#include "lmcf/geom.hpp"

namespace lmcf {

struct DensityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// backwards heat kernel rho_(x0, t0)(x, t), one-dimensional
double heat_kernel(Vec2 x0, double t0, Vec2 x, double t);
// Phi(x0, var)(x) = rho_(x0, 0)(x, -var)
double gaussian(Vec2 x0, double var, Vec2 x);
// integral of Phi(x0, var) over the half-line origin + u dir, u >= 0 (dir a unit vector)
double gaussian_ray(Vec2 x0, double var, Vec2 origin, Vec2 dir);

enum class DensityVariant { Plain, Modified, Rescaled };

struct DensityQuery {
  Vec2 x0;
  double t = 0.0;  // t0 for the plain ratio, the flow time otherwise
  double r = 0.0;
  DensityVariant variant = DensityVariant::Modified;
};

struct DensityOptions {
  int order = 5;
  bool error_estimate = true;  // repeat with doubled quadrature order
  double cutoff = 10.0;        // segments farther than cutoff * r from x0 are skipped
  double guard = 2.0;          // refuse r < guard * h
  bool include_rays = true;
};

struct DensityReport {
  double value = 0.0;
  double error = 0.0;  // |value - value at doubled order|
  double tail = 0.0;   // ray contribution
  std::vector<double> r_grid, table;
};

// integral of Phi(x0, r^2) over the curve (and its rays)
DensityReport density_ratio(const PolyCurve& c, Vec2 x0, double r, const DensityOptions& opt = {});
DensityReport density_ratio(const std::vector<PolyCurve>& parts, Vec2 x0, double r, const DensityOptions& opt = {});
// same with the r-table filled for the given grid
DensityReport density_table(const PolyCurve& c, Vec2 x0, const std::vector<double>& r_grid,
                            const DensityOptions& opt = {});

// density of L_t / sqrt(2(s + t)) at (y0, r); the curve is the unscaled snapshot
DensityReport rescaled_density(const PolyCurve& c, double s, double t, Vec2 y0, double r,
                               const DensityOptions& opt = {});
// Theta(x0, t0, r): the modified ratio on the flow at time t0 - r^2, linear in time between snapshots
double plain_density(const FlowRun& run, Vec2 x0, double t0, double r, const DensityOptions& opt = {});
// evaluates a query against a run
double evaluate(const FlowRun& run, const DensityQuery& q, const DensityOptions& opt = {});

struct RescaledIdentity {
  double lhs = 0.0, rhs = 0.0, relative = 0.0;
};
RescaledIdentity rescaled_identity_check(const FlowState& snapshot, double s, Vec2 x0, double r,
                                         const DensityOptions& opt = {});

struct HuiskenRow {
  double t = 0.0, lhs = 0.0, rhs = 0.0, residual = 0.0;
};
struct HuiskenReport {
  std::vector<double> r, theta;
  bool monotone = true;
  double max_violation = 0.0;  // largest decrease of theta between consecutive r
  double slack = 0.0;
  std::vector<HuiskenRow> rows;
  double max_residual = 0.0;
  double max_rhs = 0.0;
};
// d/dt of the heat-kernel integral against minus the integral of |H - (x0 - x)^perp / 2(t0 - t)|^2 rho,
// and theta(x0, t0, r) over r_grid. slack < 0 selects 1e-6 + 5 (h^2 + dt).
HuiskenReport huisken_check(const FlowRun& run, Vec2 x0, double t0, const std::vector<double>& r_grid,
                            double slack = -1.0);

struct RhoEvolutionReport {
  std::vector<double> t, residual;  // max residual per snapshot
  double max_residual = 0.0;
  double max_rhs = 0.0;
  int samples = 0;
};
// material derivative of rho along the flow against -Lap rho - |H - (x0 - x)^perp / 2(t0 - t)|^2 rho + H^2 rho
RhoEvolutionReport rho_evolution_check(const FlowRun& run, Vec2 x0, double t0);

struct SweepGrid {
  double eps0 = 0.05;
  double x0_spacing = 0.1;
  double x0_radius = 1.0;
  std::vector<double> tau = {1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
  int max_times = 12;  // snapshots used per run, geometrically spaced
  DensityOptions density{5, false, 10.0, 2.0, true};
};
std::vector<Vec2> sweep_centers(const SweepGrid& g);

struct DensityArgmax {
  double s = 0.0, t = 0.0, r = 0.0;
  Vec2 x0;
};
struct Certificate {
  bool empty = true;
  double s0 = 0.0, delta0 = 0.0, tau = 0.0, eps0 = 0.05, K0 = 0.0;
  double max_theta = 0.0;
  DensityArgmax argmax;
  std::string violation;
  std::vector<double> s_values;
  std::vector<double> delta_per_tau;  // delta0 for each tau of the grid over the certified family
  long queries = 0, refused = 0;
};
Certificate density_sweep(const std::vector<const FlowRun*>& runs, const SweepGrid& grid);

struct WhiteResult {
  double C_emp = 0.0;
  double t = 0.0;
  Vec2 where;
};
// sup |A| sqrt(t + shift) over snapshots 0 < t <= delta0 and vertices in B_radius
WhiteResult white_check(const FlowRun& run, const Certificate& cert, double radius = 1.0, double shift = 0.0);
// largest over smallest; pass iff finite and within the factor
double uniformity_ratio(const std::vector<double>& values);

}  // namespace lmcf
