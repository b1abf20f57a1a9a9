#include "lmcf/numerics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numbers>
#include <thread>

namespace lmcf {

const GaussRule& gauss_legendre(int order) {
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(order);
  if (it != cache.end()) return it->second;
  if (order < 1) throw NumericsError("gauss_legendre: order must be positive");
  GaussRule rule;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0, p1 = x;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 2.0;
  }
  return cache.emplace(order, std::move(rule)).first->second;
}

void solve_tridiagonal(std::vector<double> a, std::vector<double> b, std::vector<double> c,
                       std::vector<double>& rhs) {
  const std::size_t n = b.size();
  if (n == 0) return;
  for (std::size_t i = 1; i < n; ++i) {
    if (b[i - 1] == 0.0) throw NumericsError("tridiagonal solve: zero pivot");
    double m = a[i] / b[i - 1];
    b[i] -= m * c[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  if (b[n - 1] == 0.0) throw NumericsError("tridiagonal solve: zero pivot");
  rhs[n - 1] /= b[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] = (rhs[i] - c[i] * rhs[i + 1]) / b[i];
}

void solve_cyclic_tridiagonal(const std::vector<double>& a, const std::vector<double>& b,
                              const std::vector<double>& c, std::vector<double>& rhs) {
  const std::size_t n = b.size();
  if (n < 3) throw NumericsError("cyclic tridiagonal solve needs n >= 3");
  // Sherman-Morrison with the corner entries folded into a rank-one update.
  double alpha = c[n - 1], beta = a[0];
  double gamma = -b[0];
  std::vector<double> bb(b);
  bb[0] = b[0] - gamma;
  bb[n - 1] = b[n - 1] - alpha * beta / gamma;
  std::vector<double> aa(a), cc(c);
  aa[0] = 0.0;
  cc[n - 1] = 0.0;
  std::vector<double> x(rhs);
  solve_tridiagonal(aa, bb, cc, x);
  std::vector<double> u(n, 0.0);
  u[0] = gamma;
  u[n - 1] = alpha;
  solve_tridiagonal(aa, bb, cc, u);
  double fact = (x[0] + beta * x[n - 1] / gamma) / (1.0 + u[0] + beta * u[n - 1] / gamma);
  for (std::size_t i = 0; i < n; ++i) rhs[i] = x[i] - fact * u[i];
}

TridiagonalFactor::TridiagonalFactor(const std::vector<double>& a, const std::vector<double>& b,
                                     const std::vector<double>& c, bool cyclic)
    : a_(a), cyclic_(cyclic) {
  const std::size_t n = b.size();
  if (n < (cyclic ? 3u : 1u)) throw NumericsError("tridiagonal system too small");
  std::vector<double> bb(b), cc(c);
  double alpha = 0;
  if (cyclic) {
    alpha = c[n - 1];
    beta_ = a[0];
    gamma_ = -b[0];
    bb[0] = b[0] - gamma_;
    bb[n - 1] = b[n - 1] - alpha * beta_ / gamma_;
  }
  a_[0] = 0.0;
  cc[n - 1] = 0.0;
  cp_.resize(n);
  inv_.resize(n);
  double piv = bb[0];
  if (piv == 0.0) throw NumericsError("zero pivot in tridiagonal factorization");
  inv_[0] = 1.0 / piv;
  cp_[0] = cc[0] * inv_[0];
  for (std::size_t i = 1; i < n; ++i) {
    piv = bb[i] - a_[i] * cp_[i - 1];
    if (piv == 0.0) throw NumericsError("zero pivot in tridiagonal factorization");
    inv_[i] = 1.0 / piv;
    cp_[i] = cc[i] * inv_[i];
  }
  if (cyclic) {
    u_.assign(n, 0.0);
    u_[0] = gamma_;
    u_[n - 1] = alpha;
    thomas(u_);
    denom_ = 1.0 + u_[0] + beta_ * u_[n - 1] / gamma_;
  }
}

void TridiagonalFactor::thomas(std::vector<double>& r) const {
  const std::size_t n = r.size();
  r[0] *= inv_[0];
  for (std::size_t i = 1; i < n; ++i) r[i] = (r[i] - a_[i] * r[i - 1]) * inv_[i];
  for (std::size_t i = n - 1; i-- > 0;) r[i] -= cp_[i] * r[i + 1];
}

void TridiagonalFactor::solve(std::vector<double>& rhs) const {
  if (rhs.size() != inv_.size()) throw NumericsError("right-hand side has the wrong size");
  thomas(rhs);
  if (!cyclic_) return;
  const std::size_t n = rhs.size();
  double fact = (rhs[0] + beta_ * rhs[n - 1] / gamma_) / denom_;
  for (std::size_t i = 0; i < n; ++i) rhs[i] -= fact * u_[i];
}

void TridiagonalFactor::solve(std::vector<std::vector<double>*> rhs) const {
  const std::size_t n = inv_.size(), k = rhs.size();
  std::vector<double*> r(k);
  for (std::size_t j = 0; j < k; ++j) {
    if (rhs[j]->size() != n) throw NumericsError("right-hand side has the wrong size");
    r[j] = rhs[j]->data();
  }
  for (std::size_t j = 0; j < k; ++j) r[j][0] *= inv_[0];
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < k; ++j) r[j][i] = (r[j][i] - a_[i] * r[j][i - 1]) * inv_[i];
  for (std::size_t i = n - 1; i-- > 0;)
    for (std::size_t j = 0; j < k; ++j) r[j][i] -= cp_[i] * r[j][i + 1];
  if (!cyclic_) return;
  for (std::size_t j = 0; j < k; ++j) {
    double fact = (r[j][0] + beta_ * r[j][n - 1] / gamma_) / denom_;
    for (std::size_t i = 0; i < n; ++i) r[j][i] -= fact * u_[i];
  }
}

CubicSpline::CubicSpline(std::vector<double> u, std::vector<double> y, bool periodic,
                         double period_u)
    : u_(std::move(u)), y_(std::move(y)), periodic_(periodic), period_(period_u) {
  const std::size_t n = u_.size();
  if (n < 3 || y_.size() != n) throw NumericsError("spline needs at least 3 samples");
  m_.assign(n, 0.0);
  if (periodic_) {
    std::vector<double> a(n), b(n), c(n), r(n);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t ip = (i + 1) % n, im = (i + n - 1) % n;
      double hp = (ip == 0 ? u_[0] + period_ : u_[ip]) - u_[i];
      double hm = u_[i] - (i == 0 ? u_[n - 1] - period_ : u_[im]);
      a[i] = hm / 6.0;
      b[i] = (hm + hp) / 3.0;
      c[i] = hp / 6.0;
      r[i] = (y_[ip] - y_[i]) / hp - (y_[i] - y_[im]) / hm;
    }
    solve_cyclic_tridiagonal(a, b, c, r);
    m_ = r;
  } else {
    // not-a-knot would need a pentadiagonal solve; natural end conditions suffice for open arcs
    std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0), r(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      double hp = u_[i + 1] - u_[i], hm = u_[i] - u_[i - 1];
      a[i] = hm / 6.0;
      b[i] = (hm + hp) / 3.0;
      c[i] = hp / 6.0;
      r[i] = (y_[i + 1] - y_[i]) / hp - (y_[i] - y_[i - 1]) / hm;
    }
    solve_tridiagonal(a, b, c, r);
    m_ = r;
  }
}

std::size_t CubicSpline::locate(double& u) const {
  if (periodic_) {
    double lo = u_.front();
    u = lo + std::fmod(std::fmod(u - lo, period_) + period_, period_);
  } else {
    u = std::clamp(u, u_.front(), u_.back());
  }
  auto it = std::upper_bound(u_.begin(), u_.end(), u);
  std::size_t i = it == u_.begin() ? 0 : static_cast<std::size_t>(it - u_.begin()) - 1;
  if (!periodic_ && i >= u_.size() - 1) i = u_.size() - 2;
  return i;
}

double CubicSpline::operator()(double u) const {
  std::size_t i = locate(u);
  std::size_t ip = i + 1;
  double u1 = ip == u_.size() ? u_.front() + period_ : u_[ip];
  if (ip == u_.size()) ip = 0;
  double h = u1 - u_[i];
  double A = (u1 - u) / h, B = (u - u_[i]) / h;
  return A * y_[i] + B * y_[ip] + ((A * A * A - A) * m_[i] + (B * B * B - B) * m_[ip]) * h * h / 6.0;
}

double CubicSpline::derivative(double u) const {
  std::size_t i = locate(u);
  std::size_t ip = i + 1;
  double u1 = ip == u_.size() ? u_.front() + period_ : u_[ip];
  if (ip == u_.size()) ip = 0;
  double h = u1 - u_[i];
  double A = (u1 - u) / h, B = (u - u_[i]) / h;
  return (y_[ip] - y_[i]) / h - (3.0 * A * A - 1.0) / 6.0 * h * m_[i] +
         (3.0 * B * B - 1.0) / 6.0 * h * m_[ip];
}

double CubicSpline::second_derivative(double u) const {
  std::size_t i = locate(u);
  std::size_t ip = i + 1;
  double u1 = ip == u_.size() ? u_.front() + period_ : u_[ip];
  if (ip == u_.size()) ip = 0;
  double h = u1 - u_[i];
  double A = (u1 - u) / h, B = (u - u_[i]) / h;
  return A * m_[i] + B * m_[ip];
}

QuinticHermite::QuinticHermite(std::vector<double> x, std::vector<double> f, std::vector<double> df,
                               std::vector<double> d2f)
    : x_(std::move(x)), f_(std::move(f)), df_(std::move(df)), d2f_(std::move(d2f)) {
  if (x_.size() < 2) throw NumericsError("quintic Hermite needs two nodes");
  for (std::size_t i = 1; i < x_.size(); ++i)
    if (!(x_[i] > x_[i - 1])) throw NumericsError("quintic Hermite nodes must increase");
}

void QuinticHermite::eval(double x, double& f, double& df, double& d2f) const {
  x = std::clamp(x, x_.front(), x_.back());
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t i = it == x_.begin() ? 0 : static_cast<std::size_t>(it - x_.begin()) - 1;
  if (i >= x_.size() - 1) i = x_.size() - 2;
  double h = x_[i + 1] - x_[i];
  double t = (x - x_[i]) / h;
  double p0 = f_[i], p1 = f_[i + 1];
  double v0 = df_[i] * h, v1 = df_[i + 1] * h;
  double a0 = d2f_[i] * h * h, a1 = d2f_[i + 1] * h * h;
  // coefficients of the quintic in t
  double c0 = p0, c1 = v0, c2 = 0.5 * a0;
  double c3 = 10.0 * (p1 - p0) - 6.0 * v0 - 4.0 * v1 - 1.5 * a0 + 0.5 * a1;
  double c4 = -15.0 * (p1 - p0) + 8.0 * v0 + 7.0 * v1 + 1.5 * a0 - a1;
  double c5 = 6.0 * (p1 - p0) - 3.0 * v0 - 3.0 * v1 - 0.5 * a0 + 0.5 * a1;
  f = c0 + t * (c1 + t * (c2 + t * (c3 + t * (c4 + t * c5))));
  df = (c1 + t * (2.0 * c2 + t * (3.0 * c3 + t * (4.0 * c4 + t * 5.0 * c5)))) / h;
  d2f = (2.0 * c2 + t * (6.0 * c3 + t * (12.0 * c4 + t * 20.0 * c5))) / (h * h);
}

double QuinticHermite::value(double x) const {
  double f, df, d2f;
  eval(x, f, df, d2f);
  return f;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw NumericsError("fit_line needs two points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ssr = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - (fit.intercept + fit.slope * x[i]);
    ssr += r * r;
  }
  fit.r2 = syy > 0 ? 1.0 - ssr / syy : 1.0;
  return fit;
}

double observed_order(const std::vector<double>& steps, const std::vector<double>& errs) {
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    lx.push_back(std::log(steps[i]));
    ly.push_back(std::log(std::max(errs[i], 1e-300)));
  }
  return fit_line(lx, ly).slope;
}

namespace {
double bump(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  return std::exp(-1.0 / (4.0 * u * (1.0 - u)));
}
double bump_d(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  double q = 4.0 * u * (1.0 - u);
  return bump(u) * 4.0 * (1.0 - 2.0 * u) / (q * q);
}
double bump_dd(double u) {
  if (u <= 0.0 || u >= 1.0) return 0.0;
  double q = 4.0 * u * (1.0 - u), dq = 4.0 * (1.0 - 2.0 * u);
  double q2 = q * q;
  return bump(u) * (dq * dq / (q2 * q2) - 8.0 / q2 - 2.0 * dq * dq / (q2 * q));
}

struct StepTable {
  QuinticHermite interp;
  double norm = 1.0;
  double max_d1 = 0.0, max_d2 = 0.0;
  StepTable() {
    const int n = 4096;
    const auto& g = gauss_legendre(12);
    std::vector<double> x(n + 1), f(n + 1), df(n + 1), d2f(n + 1);
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      x[i] = static_cast<double>(i) / n;
      if (i > 0) {
        double a = x[i - 1], b = x[i];
        for (std::size_t k = 0; k < g.nodes.size(); ++k)
          acc += 0.5 * (b - a) * g.weights[k] * bump(0.5 * (a + b) + 0.5 * (b - a) * g.nodes[k]);
      }
      f[i] = acc;
    }
    norm = acc;
    for (int i = 0; i <= n; ++i) {
      f[i] /= norm;
      df[i] = bump(x[i]) / norm;
      d2f[i] = bump_d(x[i]) / norm;
      max_d1 = std::max(max_d1, std::abs(df[i]));
      max_d2 = std::max(max_d2, std::abs(d2f[i]));
    }
    f[n] = 1.0;
    interp = QuinticHermite(x, f, df, d2f);
  }
};
const StepTable& step_table() {
  static const StepTable t;
  return t;
}
}  // namespace

StepValue smooth_step(double u) {
  if (u <= 0.0) return {0.0, 0.0, 0.0, 0.0};
  if (u >= 1.0) return {1.0, 0.0, 0.0, 0.0};
  const auto& t = step_table();
  double f, df, d2f;
  t.interp.eval(u, f, df, d2f);
  return {f, bump(u) / t.norm, bump_d(u) / t.norm, bump_dd(u) / t.norm};
}

double smooth_step_max_d1() { return step_table().max_d1; }
double smooth_step_max_d2() { return step_table().max_d2; }

int worker_count() {
  const char* env = std::getenv("LMCF_WORKERS");
  if (!env) return 1;
  int n = std::atoi(env);
  return std::clamp(n, 1, 256);
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f) {
  int workers = std::min<int>(worker_count(), static_cast<int>(n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          f(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!err) err = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

double erfc_scaled_tail(double a) { return 0.5 * std::sqrt(std::numbers::pi) * std::erfc(a); }

}  // namespace lmcf
