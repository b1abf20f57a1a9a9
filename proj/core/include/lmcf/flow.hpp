#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "lmcf/geom.hpp"

namespace lmcf {

struct FlowError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FlowConfig {
  double h = 0.01;
  double dt = 0.0;          // 0: dt_factor * h^2
  double dt_factor = 1.0;
  double cfl = 5.0;         // dt may not exceed cfl * h^2
  double blowup = 0.5;      // terminate once max|kappa| h exceeds this
  bool refine = true;       // halve h once before terminating on curvature
  bool check_embedded = true;
  bool track_material = true;
};

// Time step actually used for a configuration.
double flow_dt(const FlowConfig& cfg);

struct FlowState {
  double t = 0.0;
  PolyCurve curve;
  LagrangianFields fields;  // recomputed from the geometry; beta carries the tracked constant
  // theta and beta advanced by their own evolution equations
  std::vector<double> theta, beta;
  double theta_jump = 0.0, beta_jump = 0.0;  // increments once around a loop
  // material points: initial positions and continuous vertex index on the current curve
  std::vector<Vec2> origin;
  std::vector<double> material;
  double dt = 0.0, h = 0.0, cfl_ratio = 0.0;
  int resamples = 0;
  double max_kappa = 0.0;  // cheap turning-angle estimate, updated every step
  bool fresh = true;       // fields match the current curve

  std::vector<Vec2> material_positions() const;
};

FlowState initial_state(const PolyCurve& c, const FlowConfig& cfg);
// Recompute the geometric fields, lifting theta and fixing the beta constant against the evolved ones.
void refresh_geometry(FlowState& s);

// One semi-implicit step: (I - dt Lap) X_new = X_old with the arc-length Laplacian of the current curve.
// theta and beta are advanced implicitly by d theta/dt = Lap theta and d beta/dt = Lap beta - 2 theta,
// plus the advection caused by the tangential motion of the vertices.
FlowState step(const FlowState& s, double dt, const FlowConfig& cfg);
void advance(FlowState& s, double dt, const FlowConfig& cfg);

struct FieldDiscrepancy {
  double theta = 0.0, beta = 0.0;
  double max() const { return theta > beta ? theta : beta; }
};
// |evolved - recomputed| over vertices; beta is compared after removing the mean offset. Needs fresh fields.
FieldDiscrepancy field_discrepancy(const FlowState& s);

enum class Termination { TimeReached, CurvatureBlowup, EmbeddednessLoss };
const char* to_string(Termination t);

struct FlowRun {
  double s = 0.0;  // rescaled flow divides by sqrt(2(s + t))
  FlowConfig cfg;
  std::vector<FlowState> snapshots;
  Termination reason = Termination::TimeReached;
  std::string detail;
  int steps = 0;
  double max_discrepancy_theta = 0.0, max_discrepancy_beta = 0.0;
  double end_time() const { return snapshots.empty() ? 0.0 : snapshots.back().t; }
};

struct EvolveOptions {
  double T = 0.2;
  double snap_every = 0.005;
  double s = 0.0;
  bool discrepancy_every_step = false;
  std::vector<double> extra_times;  // additional snapshot times inside (0, T)
};
FlowRun evolve(const PolyCurve& c, const FlowConfig& cfg, const EvolveOptions& opt);

struct ExactnessPoint {
  double t = 0.0;
  double beta_period = 0.0;  // largest |loop integral of lambda| over components inside the ball
  int components = 0;
};
std::vector<ExactnessPoint> exactness_audit(const FlowRun& run, Vec2 center, double radius);

struct NormalDeviation {
  double value = 0.0;
  double t = 0.0;
  Vec2 where;
  bool empty = true;
};
// sup |F~_0 - F~_t| over material points whose rescaled start lies in the annulus A(r_in, r_out), t <= t_max
NormalDeviation normal_deviation(const FlowRun& run, double r_in, double r_out, double t_max);

struct AnnulusBounds {
  std::vector<double> t, sup;
  double D4 = 0.0;
  bool empty = true;
};
// sup over A(r_in, r_out) of |A| + |theta| + |beta| per snapshot, from the evolved fields
AnnulusBounds annulus_bounds(const FlowRun& run, double r_in = 1.0 / 3.0, double r_out = 3.0);

}  // namespace lmcf
