// Serial vs OpenMP-parallel execution of the integration kernels on the
// order-1 integrand of (C1)_{phi phi^3}^{phi^2}.

#include <benchmark/benchmark.h>

#include "opeflow/deform.hpp"
#include "opeflow/quad.hpp"

namespace {

struct Fixture {
  ope::PointConfig points{{{0, 0, 0, 0}, {1, 0, 0, 0}}};
  ope::BoundExpr f;

  Fixture() {
    using ope::PointLabel;
    const auto b = ope::first_order_bracket(
        {{ope::parse_operator("phi"), PointLabel::ext(0)}, {ope::parse_operator("phi^3"), PointLabel::ext(1)}},
        ope::parse_operator("phi^2"), 8);
    f = ope::CompiledExpr(b.assembled().symbolic, 1.0).bind(points.points());
  }

  ope::QuadPlan plan(ope::Exec exec) const {
    ope::QuadPlan p = ope::QuadPlan::for_points(points.points(), 1.0);
    p.exec = exec;
    return p;
  }
};

const Fixture& fixture() {
  static const Fixture fx;
  return fx;
}

void BM_quadrature(benchmark::State& state) {
  const auto& fx = fixture();
  const auto plan = fx.plan(state.range(0) ? ope::Exec::parallel : ope::Exec::serial);
  for (auto _ : state) {
    auto r = ope::integrate_r4([&](const ope::Vec4& y) { return fx.f(y); }, plan);
    benchmark::DoNotOptimize(r.value);
  }
}

void BM_monte_carlo(benchmark::State& state) {
  const auto& fx = fixture();
  const auto plan = fx.plan(state.range(0) ? ope::Exec::parallel : ope::Exec::serial);
  for (auto _ : state) {
    auto r = ope::mc_integrate_r4([&](const ope::Vec4& y) { return fx.f(y); }, plan, 200000, 7);
    benchmark::DoNotOptimize(r.value);
  }
}

}  // namespace

BENCHMARK(BM_quadrature)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_monte_carlo)->Arg(0)->Arg(1)->ArgName("parallel")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
