#include <benchmark/benchmark.h>

#include "deeppet/nn/ced.hpp"
#include "deeppet/phantom.hpp"
#include "deeppet/projector.hpp"
#include "deeppet/recon.hpp"
#include "deeppet/simulator.hpp"

using namespace deeppet;

namespace {

GeometryPreset preset(int which) { return which == 0 ? toy_preset() : paper_preset(); }

// A noisy simulated acquisition of one phantom.
struct Scene {
  GeometryPreset p;
  SystemOperator opr;
  AcquisitionRecord rec;

  explicit Scene(int which, double psf = 5.0) : p(preset(which)), opr(p.grid, p.sino, psf) {
    const Phantom ph = generate_phantom(p.grid, 0, 1);
    SimulationParams sp;
    sp.target_counts = 2e6;
    rec = simulate(ph.activity, ph.mu, opr, sp, 2);
  }
};

void BM_forward(benchmark::State& state) {
  const GeometryPreset p = preset(static_cast<int>(state.range(0)));
  const SystemOperator opr(p.grid, p.sino, static_cast<double>(state.range(1)));
  const Image f = generate_phantom(p.grid, 0, 1).activity;
  for (auto _ : state) benchmark::DoNotOptimize(opr.forward(f));
}
BENCHMARK(BM_forward)->ArgsProduct({{0, 1}, {0, 5}})->Unit(benchmark::kMillisecond);

void BM_adjoint(benchmark::State& state) {
  const GeometryPreset p = preset(static_cast<int>(state.range(0)));
  const SystemOperator opr(p.grid, p.sino, static_cast<double>(state.range(1)));
  const Sinogram g = opr.forward(generate_phantom(p.grid, 0, 1).activity);
  for (auto _ : state) benchmark::DoNotOptimize(opr.adjoint(g));
}
BENCHMARK(BM_adjoint)->ArgsProduct({{0, 1}, {0, 5}})->Unit(benchmark::kMillisecond);

void BM_osem(benchmark::State& state) {
  const Scene s(static_cast<int>(state.range(0)));
  const EmissionModel model(s.opr, &s.rec.atten);
  const Sinogram gamma = s.rec.additive();
  for (auto _ : state) benchmark::DoNotOptimize(osem(s.rec.total, gamma, OsemConfig{}, model));
}
BENCHMARK(BM_osem)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_fbp(benchmark::State& state) {
  const Scene s(static_cast<int>(state.range(0)));
  const Sinogram pre = precorrect(s.rec, s.rec.additive(), s.p.sino);
  for (auto _ : state) benchmark::DoNotOptimize(fbp(pre, FbpConfig{}, s.opr));
}
BENCHMARK(BM_fbp)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_inference(benchmark::State& state) {
  const bool paper = state.range(0) == 1;
  const GeometryPreset p = preset(paper ? 1 : 0);
  nn::CedModel<float> model(nn::ced_preset(paper ? "deeppet" : "toy"), 1);
  const Sinogram g(p.sino.n_angles, p.sino.kept_radial(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(nn::infer(model, g));
}
BENCHMARK(BM_inference)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
