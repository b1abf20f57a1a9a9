#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>

#include "lmcf/pipeline.hpp"

using namespace lmcf;

namespace {
const double pi = std::numbers::pi;

PolyCurve circle(double R, double h) {
  int n = static_cast<int>(std::lround(2 * pi * R / h));
  std::vector<Vec2> v;
  for (int i = 0; i < n; ++i) v.push_back(unit(2 * pi * i / n) * R);
  return make_closed(v, h);
}

const ExpanderArc& arc() {
  static ExpanderArc a = expander_solve(LinePair{});
  return a;
}

const SingularInitial& init() {
  static SingularInitial i = make_figure_eight(LinePair{});
  return i;
}

GluedCurve glued(double s) {
  GluingConfig gc;
  gc.s = s;
  gc.h = std::min(0.01, 0.1 * std::sqrt(2 * s));
  return glue(init(), arc(), gc);
}
}  // namespace

static void BM_ExpanderSolve(benchmark::State& state) {
  LinePair p;
  p.phi2 = state.range(0) / 100.0;
  for (auto _ : state) benchmark::DoNotOptimize(expander_solve(p).residual_sup);
}
BENCHMARK(BM_ExpanderSolve)->Arg(50)->Arg(157)->Unit(benchmark::kMillisecond);

static void BM_Glue(benchmark::State& state) {
  double s = std::ldexp(1.0, -static_cast<int>(state.range(0)));
  arc();
  for (auto _ : state) benchmark::DoNotOptimize(glued(s).curve.size());
}
BENCHMARK(BM_Glue)->Arg(4)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_FlowStep(benchmark::State& state) {
  double h = 1.0 / state.range(0);
  FlowConfig cfg;
  cfg.h = h;
  const auto start = initial_state(circle(1.0, h), cfg);
  auto st = start;
  double dt = flow_dt(cfg);
  for (auto _ : state) {
    advance(st, dt, cfg);
    if (st.t > 0.3) {
      state.PauseTiming();
      st = start;
      state.ResumeTiming();
    }
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(start.curve.size()));
}
BENCHMARK(BM_FlowStep)->Arg(50)->Arg(100)->Arg(400);

static void BM_DensityRatio(benchmark::State& state) {
  auto g = glued(1.0 / 64);
  double r = state.range(0) / 100.0;
  for (auto _ : state) benchmark::DoNotOptimize(density_ratio(g.curve, {0.1, 0.05}, r).value);
}
BENCHMARK(BM_DensityRatio)->Arg(5)->Arg(25)->Arg(100);

static void BM_Hausdorff(benchmark::State& state) {
  auto a = glued(1.0 / 64).curve, b = glued(1.0 / 128).curve;
  for (auto _ : state) benchmark::DoNotOptimize(hausdorff(a, b).value);
}
BENCHMARK(BM_Hausdorff)->Unit(benchmark::kMillisecond);

static void BM_HuiskenCheck(benchmark::State& state) {
  FlowConfig cfg;
  cfg.h = 0.02;
  EvolveOptions o;
  o.T = 0.45;
  o.snap_every = 0.005;
  auto run = evolve(circle(1.0, 0.02), cfg, o);
  for (auto _ : state)
    benchmark::DoNotOptimize(huisken_check(run, {0, 0}, 0.5, {0.3, 0.4, 0.5, 0.6, 0.7}).max_residual);
}
BENCHMARK(BM_HuiskenCheck)->Unit(benchmark::kMillisecond);

static void BM_EtaCheck(benchmark::State& state) {
  double s = 1.0 / 64;
  auto g = glued(s);
  FlowConfig cfg;
  cfg.h = g.curve.h;
  EvolveOptions o;
  o.T = s;
  o.snap_every = s / 10;
  o.s = s;
  auto run = evolve(g.curve, cfg, o);
  Vec2 y0 = unit(arc().a) * (1.5 * std::pow(s, 0.25));
  for (auto _ : state) {
    try {
      benchmark::DoNotOptimize(eta_evolution_check(run, y0, 0.5 * std::pow(s, 0.25)).min_residual);
    } catch (const GraphicalError&) {
    }
  }
}
BENCHMARK(BM_EtaCheck)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
