// Benchmarks comparing the OpenMP kernels against their serial reference
// paths: subset enumeration in the brute-force oracle, sphere sampling in
// the regularity-constant estimate, and the perturbation family of the
// sensitivity probe.  Each pair runs on identical seeded inputs, so the
// speedup column is the only thing that should differ.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <vector>

#include "bap/diagnostics.hpp"
#include "bap/dykstra_core.hpp"
#include "bap/geometry.hpp"
#include "bap/oracle.hpp"

namespace {

Eigen::VectorXd random_unit(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd u(dim);
  double norm = 0.0;
  do {
    for (int j = 0; j < dim; ++j) u[j] = gauss(rng);
    norm = u.norm();
  } while (norm == 0.0);
  return u / norm;
}

// A feasible instance with the requested number of stacked constraints:
// offsets >= 0 keep the origin inside every set, d sits outside.
bap::Instance enumeration_instance(int total_constraints) {
  std::mt19937_64 rng(20'000 + static_cast<std::uint64_t>(total_constraints));
  std::uniform_real_distribution<double> offset_dist(0.0, 0.4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  constexpr int kSets = 4;
  bap::Instance inst;
  inst.dim = 6;
  inst.sets.resize(kSets);
  for (int r = 0; r < total_constraints; ++r) {
    inst.sets[r % kSets].halfspaces.emplace_back(random_unit(inst.dim, rng), offset_dist(rng));
  }
  inst.d.resize(inst.dim);
  for (int j = 0; j < inst.dim; ++j) inst.d[j] = 2.0 * gauss(rng);
  return inst;
}

std::vector<Eigen::VectorXd> normal_family(int count) {
  std::mt19937_64 rng(21'000 + static_cast<std::uint64_t>(count));
  std::vector<Eigen::VectorXd> normals;
  normals.reserve(count);
  for (int r = 0; r < count; ++r) normals.push_back(random_unit(6, rng));
  return normals;
}

void bm_brute_force(benchmark::State& state, bool parallel) {
  const bap::Instance inst = enumeration_instance(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(bap::brute_force_projection(inst, parallel));
  }
}

void bm_estimate_mu(benchmark::State& state, bool parallel) {
  const std::vector<Eigen::VectorXd> normals = normal_family(static_cast<int>(state.range(0)));
  bap::MuOptions options;
  options.samples = 20'000;
  options.refinements = 100;
  options.parallel = parallel;
  for (auto _ : state) {
    benchmark::DoNotOptimize(bap::estimate_mu(normals, options));
  }
}

void bm_sensitivity(benchmark::State& state, bool parallel) {
  const int rows = static_cast<int>(state.range(0));
  std::mt19937_64 rng(22'000 + static_cast<std::uint64_t>(rows));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int cols = rows + 3;
  Eigen::MatrixXd a(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) a(i, j) = gauss(rng);
  }
  Eigen::VectorXd b(rows), d(cols);
  for (int i = 0; i < rows; ++i) b[i] = gauss(rng);
  for (int j = 0; j < cols; ++j) d[j] = gauss(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(bap::sensitivity_probe(a, b, d, 1e-3, parallel));
  }
}

void brute_force_serial(benchmark::State& state) { bm_brute_force(state, false); }
void brute_force_parallel(benchmark::State& state) { bm_brute_force(state, true); }
void estimate_mu_serial(benchmark::State& state) { bm_estimate_mu(state, false); }
void estimate_mu_parallel(benchmark::State& state) { bm_estimate_mu(state, true); }
void sensitivity_serial(benchmark::State& state) { bm_sensitivity(state, false); }
void sensitivity_parallel(benchmark::State& state) { bm_sensitivity(state, true); }

}  // namespace

BENCHMARK(brute_force_serial)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(brute_force_parallel)->Arg(12)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(estimate_mu_serial)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(estimate_mu_parallel)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(sensitivity_serial)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(sensitivity_parallel)->Arg(3)->Arg(5)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
