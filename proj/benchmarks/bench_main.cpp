#include <random>

#include <benchmark/benchmark.h>

#include "plasthin/harness.hpp"
#include "plasthin/materials.hpp"
#include "plasthin/quasistatic_solver.hpp"

using namespace plasthin;

namespace {

ScenarioConfig bench_config(int n, int n3) {
    ScenarioConfig cfg = parse_config(R"({
      "schema": "plasthin/1",
      "mesh": {"L": [0.4, 0.4], "n": [8, 8], "n3": 4},
      "microstructure": {"kind": "laminate", "n_y": 8, "fractions": [0.5, 0.5]},
      "materials": {"phases": [{"two_mu": 2.0, "k": 3.0, "r_y": 0.01}, {"two_mu": 4.0, "k": 5.0, "r_y": 0.02}]},
      "h": [0.1],
      "load": {"preset": "stretch", "amplitude": 0.02},
      "hom": {"macro": [4, 4]}
    })");
    cfg.mesh.n1 = cfg.mesh.n2 = n;
    cfg.mesh.n3 = n3;
    return cfg;
}

void BM_PlasticUpdate(benchmark::State& state) {
    const PhaseMaterial m = PhaseMaterial::make_isotropic(2.0, 1.0, 0.05);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd(0.0, 0.1);
    std::vector<Sym3> e(1024);
    for (auto& x : e) x = Sym3{nd(rng), nd(rng), nd(rng), nd(rng), nd(rng), nd(rng)};
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(plastic_update(m, e[i], Sym3{}));
        i = (i + 1) % e.size();
    }
}
BENCHMARK(BM_PlasticUpdate);

void BM_ElasticSolve(benchmark::State& state) {
    const ScenarioConfig cfg = bench_config(static_cast<int>(state.range(0)), 4);
    const double h = cfg.h.front();
    const HProblem prob(cfg.mesh_for(h), cfg.materials, cfg.phase_map(), cfg.eps(h), cfg.linear);
    const BoundaryDatum bd = cfg.datum();
    const EvolutionState s0 = initial_state_h(prob, bd);
    for (auto _ : state) {
        DisplacementField u = s0.u;
        prob.solve_elastic(u, s0.q);
        benchmark::DoNotOptimize(u.data());
    }
}
BENCHMARK(BM_ElasticSolve)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

// Building the limit problem solves one periodic corrector system per macro cell and unit strain.
void BM_CorrectorSolve(benchmark::State& state) {
    ScenarioConfig cfg = bench_config(8, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        const HomProblem prob(cfg.macro_grid(), cfg.mesh.n3, cfg.phase_map(), cfg.materials, cfg.gamma);
        benchmark::DoNotOptimize(prob.plate_matrix().data());
    }
}
BENCHMARK(BM_CorrectorSolve)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

} // namespace

BENCHMARK_MAIN();
