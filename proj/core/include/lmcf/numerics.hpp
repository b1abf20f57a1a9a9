#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

namespace lmcf {

struct NumericsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
const GaussRule& gauss_legendre(int order);

// Solves a tridiagonal system in place; a: sub, b: diag, c: super.
void solve_tridiagonal(std::vector<double> a, std::vector<double> b, std::vector<double> c,
                       std::vector<double>& rhs);
// Periodic variant: a[0] couples row 0 to the last unknown, c[n-1] couples the last row to unknown 0.
void solve_cyclic_tridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                              const std::vector<double>& c, std::vector<double>& rhs);

// Factorization of a (possibly cyclic) tridiagonal matrix, reusable across right-hand sides.
class TridiagonalFactor {
 public:
  TridiagonalFactor(const std::vector<double>& a, const std::vector<double>& b, const std::vector<double>& c,
                    bool cyclic);
  void solve(std::vector<double>& rhs) const;
  // solves several right-hand sides in one interleaved sweep
  void solve(std::vector<std::vector<double>*> rhs) const;

 private:
  void thomas(std::vector<double>& r) const;
  std::vector<double> a_, cp_, inv_;  // sub-diagonal, modified super-diagonal, inverse pivots
  std::vector<double> u_;            // solution for the rank-one correction
  double beta_ = 0.0, gamma_ = 0.0, denom_ = 1.0;
  bool cyclic_ = false;
};

// Cubic spline through (u_i, y_i); periodic splines expect y to close up with period `period` in u.
class CubicSpline {
 public:
  CubicSpline() = default;
  CubicSpline(std::vector<double> u, std::vector<double> y, bool periodic, double period_u = 0.0);
  double operator()(double u) const;
  double derivative(double u) const;
  double second_derivative(double u) const;
  double u_min() const { return u_.front(); }
  double u_max() const { return periodic_ ? u_.front() + period_ : u_.back(); }

 private:
  std::size_t locate(double& u) const;
  std::vector<double> u_, y_, m_;
  bool periodic_ = false;
  double period_ = 0.0;
};

// Quintic Hermite interpolation from samples of f, f', f''.
class QuinticHermite {
 public:
  QuinticHermite() = default;
  QuinticHermite(std::vector<double> x, std::vector<double> f, std::vector<double> df,
                 std::vector<double> d2f);
  // Returns f, f', f'' at x.
  void eval(double x, double& f, double& df, double& d2f) const;
  double value(double x) const;
  double x_min() const { return x_.front(); }
  double x_max() const { return x_.back(); }
  bool empty() const { return x_.empty(); }

 private:
  std::vector<double> x_, f_, df_, d2f_;
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Least-squares slope of log(err) against log(step).
double observed_order(const std::vector<double>& steps, const std::vector<double>& errs);

// Smooth step: 0 for u <= 0, 1 for u >= 1, built from the normalized integral of exp(-1/(1-v^2)).
struct StepValue {
  double value, d1, d2, d3;
};
StepValue smooth_step(double u);
double smooth_step_max_d1();
double smooth_step_max_d2();

// Number of workers from LMCF_WORKERS (default 1).
int worker_count();
// Runs f(i) for i in [0, n) over the worker pool; results must be written to per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

double erfc_scaled_tail(double a);  // integral_0^inf exp(-(a+t)^2) dt
}  // namespace lmcf
