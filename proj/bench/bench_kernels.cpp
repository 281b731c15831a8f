// Serial reference vs OpenMP for each parallel kernel. Arg 0 = serial, 1 = parallel.

#include <benchmark/benchmark.h>

#include "spinforge/environment.hpp"
#include "spinforge/hyperfine.hpp"
#include "spinforge/locate.hpp"
#include "spinforge/parallel.hpp"
#include "spinforge/sequences.hpp"
#include "spinforge/units.hpp"

using namespace spinforge;

namespace {

const std::string kData = SPINFORGE_DATA_DIR;

parallel::Exec mode(const benchmark::State& st) {
  return st.range(0) ? parallel::Exec::Parallel : parallel::Exec::Serial;
}

struct LocateInputs {
  GTensorSet g = load_g_tensors(kData + "/g_tensor_er_yso.json");
  std::vector<FieldSetting> settings = load_field_settings(kData + "/field_settings.json");
  std::vector<Observation> obs = load_observations(kData + "/observations.json");
};

const LocateInputs& inputs() {
  static const LocateInputs in;
  return in;
}

void BM_ChiSquareGrid(benchmark::State& st) {
  const auto& in = inputs();
  SearchRegion reg;
  reg.r_step = 1.0;
  for (auto _ : st)
    benchmark::DoNotOptimize(
        chi_square_grid(in.obs, in.settings, {}, reg, in.g.ground, constants::kGammaHydrogenHzPerT, mode(st)));
}

void BM_MonteCarloSigma(benchmark::State& st) {
  const auto& in = inputs();
  const Position pos{20.0, 66.7, 49.6};
  for (auto _ : st)
    benchmark::DoNotOptimize(monte_carlo_sigma(pos, in.obs, in.settings, 10000, 1, in.g.ground,
                                               constants::kGammaHydrogenHzPerT, 1.0, mode(st)));
}

void BM_RamseyExact(benchmark::State& st) {
  const auto grid = linspace(0, 1e-3, 4001);
  for (auto _ : st) benchmark::DoNotOptimize(ramsey_s0(reference_params(), grid, true, mode(st)));
}

void BM_XynSpectrum(benchmark::State& st) {
  const auto grid = linspace(0.1e-6, 3e-6, 2000);
  for (auto _ : st) benchmark::DoNotOptimize(xyn_spectrum(reference_params(), grid, 16, mode(st)));
}

void BM_EchoMonteCarlo(benchmark::State& st) {
  NoiseModel noise;
  noise.sigma = calibrate_sigma(1.9e-3, 5e-3);
  noise.mc_samples = 2000;
  const auto grid = linspace(0.1e-3, 4e-3, 16);
  for (auto _ : st)
    benchmark::DoNotOptimize(nuclear_echo(reference_params(), EchoKind::cpmg(2), grid, noise, mode(st)));
}

void BM_FourBodyBranch(benchmark::State& st) {
  FourBodyOptions opt;
  opt.exec = mode(st);
  const auto grid = linspace(15e-6, 100e-6, 1701);
  for (auto _ : st)
    benchmark::DoNotOptimize(four_body_ramsey(reference_params(), DarkSpinModel{}, 1, -1, grid, opt));
}

}  // namespace

BENCHMARK(BM_ChiSquareGrid)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_MonteCarloSigma)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_RamseyExact)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_XynSpectrum)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_EchoMonteCarlo)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_FourBodyBranch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

int main(int argc, char** argv) {
  parallel::configure_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
