#include "lmcf/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "lmcf/numerics.hpp"

namespace lmcf {

namespace {
const double pi = std::numbers::pi;

double segment_integral(Vec2 a, Vec2 b, Vec2 x0, double var, const GaussRule& g) {
  Vec2 mid = (a + b) * 0.5, half = (b - a) * 0.5;
  double acc = 0;
  for (std::size_t k = 0; k < g.nodes.size(); ++k) acc += g.weights[k] * gaussian(x0, var, mid + half * g.nodes[k]);
  return acc * norm(b - a) * 0.5;
}

// polyline part, skipping segments beyond the cutoff
double polyline_integral(const PolyCurve& c, Vec2 x0, double var, int order, double cutoff) {
  const auto& g = gauss_legendre(order);
  double reach = cutoff * std::sqrt(var);
  double sum = 0;
  const std::size_t n = c.size();
  for (std::size_t i = 0; i < c.edge_count(); ++i) {
    Vec2 a = c.vertices[i], b = c.vertices[(i + 1) % n];
    double half = 0.5 * norm(b - a);
    if (norm((a + b) * 0.5 - x0) - half > reach) continue;
    sum += segment_integral(a, b, x0, var, g);
  }
  return sum;
}

double ray_part(const PolyCurve& c, Vec2 x0, double var) {
  if (c.closed() || c.rays.size() < 2) return 0.0;
  return gaussian_ray(x0, var, c.vertices.front(), unit(c.rays[0].angle)) +
         gaussian_ray(x0, var, c.vertices.back(), unit(c.rays[1].angle));
}

void check_scale(const PolyCurve& c, double r, const DensityOptions& opt) {
  if (!(r > 0)) throw DensityError("density scale must be positive");
  if (c.h > 0 && r < opt.guard * c.h) {
    std::ostringstream os;
    os << "scale r = " << r << " is below the resolution guard " << opt.guard << " h = " << opt.guard * c.h;
    throw DensityError(os.str());
  }
}

double three_point_derivative(double t0, double t1, double t2, double f0, double f1, double f2) {
  double h1 = t1 - t0, h2 = t2 - t1;
  return -h2 / (h1 * (h1 + h2)) * f0 + (h2 - h1) / (h1 * h2) * f1 + h1 / (h2 * (h1 + h2)) * f2;
}

// linear interpolation of a vertex quantity at a continuous index
template <class T>
T at_index(const std::vector<T>& v, double m, bool closed) {
  const std::size_t n = v.size();
  double fl = std::floor(m);
  double f = m - fl;
  long i = static_cast<long>(fl);
  if (closed) {
    long nn = static_cast<long>(n);
    long i0 = ((i % nn) + nn) % nn;
    return v[i0] * (1 - f) + v[(i0 + 1) % n] * f;
  }
  if (i < 0) return v.front();
  if (static_cast<std::size_t>(i) >= n - 1) return v.back();
  return v[i] * (1 - f) + v[i + 1] * f;
}

double run_h(const FlowRun& run) { return run.snapshots.empty() ? run.cfg.h : run.snapshots.front().h; }

std::vector<std::size_t> sweep_times(const FlowRun& run, int max_times) {
  std::vector<std::size_t> pos;
  for (std::size_t k = 0; k < run.snapshots.size(); ++k)
    if (run.snapshots[k].t > 0) pos.push_back(k);
  if (static_cast<int>(pos.size()) <= max_times || max_times < 2) return pos;
  double t_first = run.snapshots[pos.front()].t, t_last = run.snapshots[pos.back()].t;
  std::vector<std::size_t> out;
  for (int j = 0; j < max_times; ++j) {
    double target = t_first * std::pow(t_last / t_first, static_cast<double>(j) / (max_times - 1));
    std::size_t best = pos.front();
    for (std::size_t k : pos)
      if (std::abs(run.snapshots[k].t - target) < std::abs(run.snapshots[best].t - target)) best = k;
    if (out.empty() || out.back() != best) out.push_back(best);
  }
  return out;
}
}  // namespace

double heat_kernel(Vec2 x0, double t0, Vec2 x, double t) {
  if (!(t < t0)) throw DensityError("heat kernel needs t < t0");
  return gaussian(x0, t0 - t, x);
}

double gaussian(Vec2 x0, double var, Vec2 x) {
  double e = norm2(x - x0) / (4 * var);
  if (e > 690) return 0.0;
  double v = std::exp(-e) / std::sqrt(4 * pi * var);
  return v < 1e-300 ? 0.0 : v;
}

double gaussian_ray(Vec2 x0, double var, Vec2 origin, Vec2 dir) {
  Vec2 w = origin - x0;
  double p = dot(w, dir);
  double d2 = std::max(0.0, norm2(w) - p * p);
  double r2 = 2 * std::sqrt(var);
  return 0.5 * std::exp(-d2 / (4 * var)) * std::erfc(p / r2);
}

DensityReport density_ratio(const PolyCurve& c, Vec2 x0, double r, const DensityOptions& opt) {
  return density_ratio(std::vector<PolyCurve>{c}, x0, r, opt);
}

DensityReport density_ratio(const std::vector<PolyCurve>& parts, Vec2 x0, double r, const DensityOptions& opt) {
  DensityReport rep;
  double var = r * r;
  double fine = 0;
  for (const auto& c : parts) {
    check_scale(c, r, opt);
    rep.value += polyline_integral(c, x0, var, opt.order, opt.cutoff);
    if (opt.error_estimate) fine += polyline_integral(c, x0, var, 2 * opt.order, opt.cutoff);
    if (opt.include_rays) rep.tail += ray_part(c, x0, var);
  }
  if (opt.error_estimate) rep.error = std::abs(fine - rep.value);
  rep.value += rep.tail;
  return rep;
}

DensityReport density_table(const PolyCurve& c, Vec2 x0, const std::vector<double>& r_grid, const DensityOptions& opt) {
  if (r_grid.empty()) throw DensityError("empty r grid");
  DensityReport rep = density_ratio(c, x0, r_grid.front(), opt);
  rep.r_grid = r_grid;
  for (double r : r_grid) rep.table.push_back(density_ratio(c, x0, r, opt).value);
  return rep;
}

DensityReport rescaled_density(const PolyCurve& c, double s, double t, Vec2 y0, double r, const DensityOptions& opt) {
  if (!(s + t > 0)) throw DensityError("rescaling needs s + t > 0");
  double q = std::sqrt(2 * (s + t));
  PolyCurve sc = c;
  for (auto& v : sc.vertices) v = v / q;
  sc.h = c.h / q;
  return density_ratio(sc, y0, r, opt);
}

double plain_density(const FlowRun& run, Vec2 x0, double t0, double r, const DensityOptions& opt) {
  double t = t0 - r * r;
  const auto& snaps = run.snapshots;
  if (snaps.empty()) throw DensityError("run has no snapshots");
  if (t < -1e-12 || t > snaps.back().t + 1e-12)
    throw DensityError("time t0 - r^2 = " + std::to_string(t) + " is outside the run");
  std::size_t k = 0;
  while (k + 1 < snaps.size() && snaps[k + 1].t <= t + 1e-12) ++k;
  double v0 = density_ratio(snaps[k].curve, x0, r, opt).value;
  if (std::abs(snaps[k].t - t) <= 1e-12 || k + 1 >= snaps.size()) return v0;
  double v1 = density_ratio(snaps[k + 1].curve, x0, r, opt).value;
  double w = (t - snaps[k].t) / (snaps[k + 1].t - snaps[k].t);
  return v0 * (1 - w) + v1 * w;
}

double evaluate(const FlowRun& run, const DensityQuery& q, const DensityOptions& opt) {
  if (q.variant == DensityVariant::Plain) return plain_density(run, q.x0, q.t, q.r, opt);
  std::size_t best = 0;
  for (std::size_t k = 0; k < run.snapshots.size(); ++k)
    if (std::abs(run.snapshots[k].t - q.t) < std::abs(run.snapshots[best].t - q.t)) best = k;
  const auto& st = run.snapshots.at(best);
  if (std::abs(st.t - q.t) > 1e-9) throw DensityError("no snapshot at t = " + std::to_string(q.t));
  if (q.variant == DensityVariant::Modified) return density_ratio(st.curve, q.x0, q.r, opt).value;
  return rescaled_density(st.curve, run.s, st.t, q.x0, q.r, opt).value;
}

RescaledIdentity rescaled_identity_check(const FlowState& snapshot, double s, Vec2 x0, double r,
                                         const DensityOptions& opt) {
  if (!(s + snapshot.t > 0)) throw DensityError("rescaling needs s + t > 0");
  double q = std::sqrt(2 * (s + snapshot.t));
  RescaledIdentity id;
  id.lhs = density_ratio(snapshot.curve, x0, r, opt).value;
  id.rhs = rescaled_density(snapshot.curve, s, snapshot.t, x0 / q, r / q, opt).value;
  id.relative = std::abs(id.lhs - id.rhs) / std::max(std::abs(id.lhs), 1e-300);
  return id;
}

HuiskenReport huisken_check(const FlowRun& run, Vec2 x0, double t0, const std::vector<double>& r_grid, double slack) {
  HuiskenReport rep;
  if (r_grid.empty()) throw DensityError("empty r grid");
  const auto& snaps = run.snapshots;
  if (snaps.size() < 3) throw DensityError("need at least three snapshots");
  double h = run_h(run);
  rep.slack = slack >= 0 ? slack : 1e-6 + 5 * (h * h + flow_dt(run.cfg));
  rep.r = r_grid;
  std::sort(rep.r.begin(), rep.r.end());
  DensityOptions opt;
  opt.error_estimate = false;
  for (double r : rep.r) rep.theta.push_back(plain_density(run, x0, t0, r, opt));
  for (std::size_t i = 0; i + 1 < rep.theta.size(); ++i)
    rep.max_violation = std::max(rep.max_violation, rep.theta[i] - rep.theta[i + 1]);
  rep.monotone = rep.max_violation <= rep.slack;

  double r_min = rep.r.front(), r_max = rep.r.back();
  double t_lo = t0 - r_max * r_max, t_hi = t0 - std::max(4 * h * h, r_min * r_min);
  double gap = 0;
  for (std::size_t k = 1; k < snaps.size(); ++k)
    if (snaps[k].t >= t_lo - 1e-12 && snaps[k - 1].t <= t0) gap = std::max(gap, snaps[k].t - snaps[k - 1].t);
  if (gap > r_min * r_min / 8 + 1e-12)
    throw DensityError("snapshot cadence " + std::to_string(gap) + " exceeds r^2/8 = " + std::to_string(r_min * r_min / 8));

  auto mass = [&](std::size_t k) {
    const auto& c = snaps[k].curve;
    double var = t0 - snaps[k].t;
    return polyline_integral(c, x0, var, 5, 12.0) + ray_part(c, x0, var);
  };
  for (std::size_t k = 1; k + 1 < snaps.size(); ++k) {
    double t = snaps[k].t;
    if (t < t_lo - 1e-12 || t > t_hi || snaps[k + 1].t >= t0) continue;
    HuiskenRow row;
    row.t = t;
    row.lhs = three_point_derivative(snaps[k - 1].t, t, snaps[k + 1].t, mass(k - 1), mass(k), mass(k + 1));
    const auto& c = snaps[k].curve;
    double tau = t0 - t;
    auto cd = curvature(c);
    auto lens = edge_lengths(c);
    const std::size_t n = c.size();
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double w;
      if (c.closed()) w = 0.5 * (lens[i] + lens[(i + n - 1) % n]);
      else w = 0.5 * ((i > 0 ? lens[i - 1] : 0.0) + (i + 1 < n ? lens[i] : 0.0));
      Vec2 x = c.vertices[i];
      double m = cd.kappa[i] - dot(x0 - x, cd.normal[i]) / (2 * tau);
      acc += w * m * m * gaussian(x0, tau, x);
    }
    if (!c.closed() && c.rays.size() >= 2) {
      for (int e = 0; e < 2; ++e) {
        Vec2 o = e == 0 ? c.vertices.front() : c.vertices.back();
        Vec2 dir = unit(c.rays[e].angle);
        double dn = cross(dir, x0 - o) / (2 * tau);
        acc += dn * dn * gaussian_ray(x0, tau, o, dir);
      }
    }
    row.rhs = -acc;
    row.residual = std::abs(row.lhs - row.rhs);
    rep.max_residual = std::max(rep.max_residual, row.residual);
    rep.max_rhs = std::max(rep.max_rhs, std::abs(row.rhs));
    rep.rows.push_back(row);
  }
  if (rep.rows.empty()) throw DensityError("insufficient snapshots for the time derivative");
  return rep;
}

RhoEvolutionReport rho_evolution_check(const FlowRun& run, Vec2 x0, double t0) {
  RhoEvolutionReport rep;
  const auto& snaps = run.snapshots;
  if (snaps.size() < 3) throw DensityError("need at least three snapshots");
  if (snaps.front().material.empty()) throw DensityError("material points not tracked");
  double h = run_h(run);
  for (std::size_t k = 1; k + 1 < snaps.size(); ++k) {
    const auto& st = snaps[k];
    if (t0 - snaps[k + 1].t < 4 * h * h) continue;
    if (snaps[k + 1].t - snaps[k - 1].t > (t0 - snaps[k + 1].t) / 4) continue;
    if (snaps[k + 1].resamples != snaps[k - 1].resamples) continue;
    auto pm = snaps[k - 1].material_positions();
    auto p0 = st.material_positions();
    auto pp = snaps[k + 1].material_positions();
    auto tangents = vertex_tangents(st.curve);
    const auto& kappa = st.fields.kappa;
    double tm = snaps[k - 1].t, t = st.t, tp = snaps[k + 1].t;
    double tau = t0 - t;
    double worst = 0;
    for (std::size_t j = 0; j < p0.size(); ++j) {
      double m = st.material[j];
      Vec2 T = at_index(tangents, m, st.curve.closed());
      T = T / norm(T);
      Vec2 N = J(T);
      double kap = at_index(kappa, m, st.curve.closed());
      Vec2 x = p0[j];
      double rho = gaussian(x0, tau, x);
      Vec2 y = x - x0;
      Vec2 grad = y * (-rho / (2 * tau));
      double d2tt = (dot(y, T) * dot(y, T) / (4 * tau * tau) - 1 / (2 * tau)) * rho;
      double lap = d2tt + kap * dot(grad, N);
      double mm = kap - dot(x0 - x, N) / (2 * tau);
      double rhs = -lap - mm * mm * rho + kap * kap * rho;
      double lhs = three_point_derivative(tm, t, tp, gaussian(x0, t0 - tm, pm[j]), rho, gaussian(x0, t0 - tp, pp[j]));
      Vec2 vel{three_point_derivative(tm, t, tp, pm[j].x, x.x, pp[j].x),
               three_point_derivative(tm, t, tp, pm[j].y, x.y, pp[j].y)};
      lhs -= dot(grad, T) * dot(vel, T);
      worst = std::max(worst, std::abs(lhs - rhs));
      rep.max_rhs = std::max(rep.max_rhs, std::abs(rhs));
      ++rep.samples;
    }
    rep.t.push_back(t);
    rep.residual.push_back(worst);
    rep.max_residual = std::max(rep.max_residual, worst);
  }
  if (rep.samples == 0) throw DensityError("no snapshot far enough from t0 for the snapshot cadence");
  return rep;
}

std::vector<Vec2> sweep_centers(const SweepGrid& g) {
  std::vector<Vec2> out;
  int m = static_cast<int>(std::floor(g.x0_radius / g.x0_spacing + 1e-9));
  for (int i = -m; i <= m; ++i)
    for (int j = -m; j <= m; ++j) {
      Vec2 p{i * g.x0_spacing, j * g.x0_spacing};
      if (norm(p) <= g.x0_radius + 1e-12) out.push_back(p);
    }
  return out;
}

namespace {
struct Cell {
  double max_theta = -1.0;  // over x0 at this (time, tau); -1 when every query was refused
  Vec2 where;
  std::vector<double> violations;  // |x0| of queries above 1 + eps0
};
struct RunTable {
  const FlowRun* run = nullptr;
  std::vector<std::size_t> times;
  std::vector<std::vector<Cell>> cells;  // [time][tau]
  long queries = 0, refused = 0;
};

RunTable tabulate(const FlowRun& run, const SweepGrid& g, const std::vector<Vec2>& centers) {
  RunTable tab;
  tab.run = &run;
  tab.times = sweep_times(run, g.max_times);
  tab.cells.assign(tab.times.size(), std::vector<Cell>(g.tau.size()));
  std::vector<long> q(tab.times.size(), 0), ref(tab.times.size(), 0);
  parallel_for(tab.times.size(), [&](std::size_t ti) {
    const auto& st = run.snapshots[tab.times[ti]];
    const auto& c = st.curve;
    double r_top = 0;
    for (double tau : g.tau) r_top = std::max(r_top, std::sqrt(tau * st.t));
    double reach = g.density.cutoff * r_top;
    const std::size_t n = c.size();
    std::vector<std::pair<Vec2, Vec2>> local;
    for (Vec2 x0 : centers) {
      local.clear();
      for (std::size_t i = 0; i < c.edge_count(); ++i) {
        Vec2 a = c.vertices[i], b = c.vertices[(i + 1) % n];
        if (norm((a + b) * 0.5 - x0) - 0.5 * norm(b - a) <= reach) local.emplace_back(a, b);
      }
      for (std::size_t k = 0; k < g.tau.size(); ++k) {
        double r = std::sqrt(g.tau[k] * st.t);
        ++q[ti];
        if (r < g.density.guard * c.h) {
          ++ref[ti];
          continue;
        }
        double var = r * r;
        const auto& rule = gauss_legendre(g.density.order);
        double v = g.density.include_rays ? ray_part(c, x0, var) : 0.0;
        for (const auto& [a, b] : local) v += segment_integral(a, b, x0, var, rule);
        auto& cell = tab.cells[ti][k];
        if (v > cell.max_theta) {
          cell.max_theta = v;
          cell.where = x0;
        }
        if (v > 1 + g.eps0) cell.violations.push_back(norm(x0));
      }
    }
  });
  for (std::size_t i = 0; i < q.size(); ++i) tab.queries += q[i], tab.refused += ref[i];
  return tab;
}

// largest sampled time before the first failure at tau index k (failures include every r^2 <= tau t)
double delta_for(const RunTable& tab, std::size_t k, double eps0) {
  double last = 0;
  for (std::size_t ti = 0; ti < tab.times.size(); ++ti) {
    for (std::size_t j = 0; j <= k; ++j)
      if (tab.cells[ti][j].max_theta > 1 + eps0) return last;
    // a scale below the resolution guard cannot certify anything
    if (tab.cells[ti][k].max_theta < 0) return last;
    last = tab.run->snapshots[tab.times[ti]].t;
  }
  return last;
}
}  // namespace

Certificate density_sweep(const std::vector<const FlowRun*>& runs, const SweepGrid& grid) {
  Certificate cert;
  cert.eps0 = grid.eps0;
  if (runs.empty()) throw DensityError("no runs to sweep");
  if (grid.tau.empty() || !std::is_sorted(grid.tau.begin(), grid.tau.end())) throw DensityError("tau grid must be sorted");
  auto centers = sweep_centers(grid);
  std::vector<RunTable> tabs;
  for (const auto* r : runs) tabs.push_back(tabulate(*r, grid, centers));
  for (const auto& t : tabs) cert.queries += t.queries, cert.refused += t.refused;
  std::sort(tabs.begin(), tabs.end(), [](const RunTable& a, const RunTable& b) { return a.run->s > b.run->s; });

  for (std::size_t first = 0; first < tabs.size(); ++first) {
    std::vector<double> delta(grid.tau.size(), std::numeric_limits<double>::infinity());
    for (std::size_t ri = first; ri < tabs.size(); ++ri)
      for (std::size_t k = 0; k < grid.tau.size(); ++k) delta[k] = std::min(delta[k], delta_for(tabs[ri], k, grid.eps0));
    std::size_t best = grid.tau.size();
    for (std::size_t k = 0; k < grid.tau.size(); ++k) {
      if (!(delta[k] > 0)) continue;
      if (best == grid.tau.size() || grid.tau[k] * delta[k] > grid.tau[best] * delta[best] ||
          (grid.tau[k] * delta[k] == grid.tau[best] * delta[best] && delta[k] > delta[best]))
        best = k;
    }
    if (best == grid.tau.size()) continue;
    cert.empty = false;
    cert.s0 = tabs[first].run->s;
    cert.tau = grid.tau[best];
    cert.delta0 = delta[best];
    cert.delta_per_tau = delta;
    for (std::size_t ri = first; ri < tabs.size(); ++ri) {
      const auto& tab = tabs[ri];
      cert.s_values.push_back(tab.run->s);
      for (std::size_t ti = 0; ti < tab.times.size(); ++ti) {
        double t = tab.run->snapshots[tab.times[ti]].t;
        if (t > cert.delta0 + 1e-12) break;
        for (std::size_t k = 0; k < grid.tau.size(); ++k) {
          const auto& cell = tab.cells[ti][k];
          if (k <= best && cell.max_theta > cert.max_theta) {
            cert.max_theta = cell.max_theta;
            cert.argmax = {tab.run->s, t, std::sqrt(grid.tau[k] * t), cell.where};
          }
          if (grid.tau[k] <= 1.0)
            for (double d : cell.violations) cert.K0 = std::max(cert.K0, d / std::sqrt(2 * t) * (1 + 1e-9));
        }
      }
    }
    return cert;
  }
  // no family passes: report the first violation of the smallest s
  const auto& tab = tabs.back();
  cert.s_values.push_back(tab.run->s);
  for (std::size_t ti = 0; ti < tab.times.size() && cert.violation.empty(); ++ti)
    for (std::size_t k = 0; k < grid.tau.size(); ++k) {
      const auto& cell = tab.cells[ti][k];
      if (cell.max_theta > 1 + grid.eps0) {
        double t = tab.run->snapshots[tab.times[ti]].t;
        std::ostringstream os;
        os << "theta = " << cell.max_theta << " at s = " << tab.run->s << ", t = " << t
           << ", r = " << std::sqrt(grid.tau[k] * t) << ", x0 = (" << cell.where.x << ", " << cell.where.y << ")";
        cert.violation = os.str();
        cert.max_theta = cell.max_theta;
        cert.argmax = {tab.run->s, t, std::sqrt(grid.tau[k] * t), cell.where};
        break;
      }
    }
  return cert;
}

WhiteResult white_check(const FlowRun& run, const Certificate& cert, double radius, double shift) {
  if (cert.empty) throw DensityError("white check needs a nonempty certificate");
  WhiteResult w;
  for (const auto& st : run.snapshots) {
    if (st.t <= 0 || st.t > cert.delta0 + 1e-12) continue;
    double wt = std::sqrt(st.t + shift);
    for (std::size_t i = 0; i < st.curve.size(); ++i) {
      if (norm(st.curve.vertices[i]) > radius) continue;
      double v = std::abs(st.fields.kappa[i]) * wt;
      if (v > w.C_emp) {
        w.C_emp = v;
        w.t = st.t;
        w.where = st.curve.vertices[i];
      }
    }
  }
  return w;
}

double uniformity_ratio(const std::vector<double>& values) {
  if (values.empty()) return std::numeric_limits<double>::infinity();
  double lo = *std::min_element(values.begin(), values.end());
  double hi = *std::max_element(values.begin(), values.end());
  for (double v : values)
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
  if (hi == 0) return 1.0;
  if (lo <= 0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

}  // namespace lmcf
