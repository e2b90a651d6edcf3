// Serial reference vs OpenMP kernels on growing control meshes.

#include <benchmark/benchmark.h>

#include <map>
#include <memory>
#include <random>

#include "neurogrow/kernels.hpp"
#include "neurogrow/phase_field.hpp"
#include "neurogrow/spline.hpp"

using namespace neurogrow;

namespace {

struct Fixture {
    SplineSpace2D space;
    CollocationOperators ops;
    ModelParams params;
    SimState state;
    ControlFields controls;

    explicit Fixture(int n)
        : space(SplineSpace2D::unit_mesh(n, n)),
          ops(CollocationOperators::assemble(space)),
          state(initialize_state({{n / 2.0, n / 2.0}}, params, space, ops, 7)),
          controls(ControlFields::defaults(state.size(), params)) {}
};

Fixture& fixture(int n) {
    static std::map<int, std::unique_ptr<Fixture>> cache;
    auto& f = cache[n];
    if (!f) f = std::make_unique<Fixture>(n);
    return *f;
}

kernels::Backend backend_of(const benchmark::State& st) {
    return st.range(1) ? kernels::Backend::openmp : kernels::Backend::serial;
}

void label(benchmark::State& st) { st.SetLabel(st.range(1) ? "omp" : "serial"); }

void BM_spmv(benchmark::State& st) {
    auto& f = fixture(int(st.range(0)));
    kernels::set_backend(backend_of(st));
    std::vector<double> y(f.ops.size());
    for (auto _ : st) {
        kernels::spmv(f.ops.Nxx(), f.state.phi.coeffs, y);
        benchmark::DoNotOptimize(y.data());
    }
    label(st);
}

void BM_solve(benchmark::State& st) {
    auto& f = fixture(int(st.range(0)));
    kernels::set_backend(backend_of(st));
    for (auto _ : st) benchmark::DoNotOptimize(f.ops.solve(f.state.phi.values));
    label(st);
}

void BM_box_sum(benchmark::State& st) {
    const int n = int(st.range(0));
    kernels::set_backend(backend_of(st));
    RealGrid in(n, n), out(n, n);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : in.data()) v = u(rng);
    for (auto _ : st) {
        kernels::box_sum(in, 20, out);
        benchmark::DoNotOptimize(out.data().data());
    }
    label(st);
}

void BM_phase_rhs(benchmark::State& st) {
    auto& f = fixture(int(st.range(0)));
    kernels::set_backend(backend_of(st));
    for (auto _ : st) benchmark::DoNotOptimize(phase_rhs(f.state, f.controls, f.ops, f.params));
    label(st);
}

void BM_step(benchmark::State& st) {
    auto& f = fixture(int(st.range(0)));
    kernels::set_backend(backend_of(st));
    for (auto _ : st) benchmark::DoNotOptimize(step(f.state, f.controls, f.ops, f.params));
    label(st);
}

void sizes(benchmark::internal::Benchmark* b) {
    for (int n : {60, 120, 240})
        for (int omp : {0, 1}) b->Args({n, omp});
    b->Unit(benchmark::kMicrosecond);
}

}  // namespace

BENCHMARK(BM_spmv)->Apply(sizes);
BENCHMARK(BM_solve)->Apply(sizes);
BENCHMARK(BM_box_sum)->Apply(sizes);
BENCHMARK(BM_phase_rhs)->Apply(sizes);
BENCHMARK(BM_step)->Apply(sizes);

BENCHMARK_MAIN();
