#include <benchmark/benchmark.h>

#include "maisteer/criteria.hpp"
#include "maisteer/entanglement.hpp"
#include "maisteer/gaussian_cv.hpp"
#include "maisteer/open_systems.hpp"
#include "maisteer/spin_wigner.hpp"
#include "maisteer/split_state.hpp"

using namespace maisteer;

static void BM_BuildSplitState(benchmark::State &state) {
    const int atoms = static_cast<int>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(build_split_state(atoms, 0.4));
    }
}
BENCHMARK(BM_BuildSplitState)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMicrosecond);

static void BM_ConditionOnAlice(benchmark::State &state) {
    const auto st = build_split_state(static_cast<int>(state.range(0)), 0.4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(condition_on_alice(st, 0.7));
    }
}
BENCHMARK(BM_ConditionOnAlice)->Arg(10)->Arg(20)->Arg(40)->Unit(benchmark::kMicrosecond);

static void BM_ReidViolationAt(benchmark::State &state) {
    const auto st = build_split_state(20, 0.4);
    const MaiSetting mai{0.43, RVector3::UnitZ()};
    for (auto _ : state) {
        benchmark::DoNotOptimize(reid_violation_at(st, 0.3, 1.8, mai));
    }
}
BENCHMARK(BM_ReidViolationAt)->Unit(benchmark::kMicrosecond);

static void BM_DeltaRLinear(benchmark::State &state) {
    const auto st = build_split_state(20, 0.4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(delta_R(st, ReidMode::linear));
    }
}
BENCHMARK(BM_DeltaRLinear)->Unit(benchmark::kMillisecond)->Iterations(1);

static void BM_DeltaRMai(benchmark::State &state) {
    const auto st = build_split_state(20, 0.4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(delta_R(st, ReidMode::mai));
    }
}
BENCHMARK(BM_DeltaRMai)->Unit(benchmark::kMillisecond)->Iterations(1);

static void BM_DeltaGMai(benchmark::State &state) {
    const auto st = build_split_state(20, 0.4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(delta_G(st, GiovannettiMode::mai));
    }
}
BENCHMARK(BM_DeltaGMai)->Unit(benchmark::kMillisecond)->Iterations(1);

static void BM_LindbladEvolve(benchmark::State &state) {
    const auto rho = reduced_bob_state(build_split_state(static_cast<int>(state.range(0)), 0.4));
    const LossConfig cfg{0.2, 1.0, 0.3, 0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(lindblad_evolve(rho, RVector3::UnitZ(), 0.1, cfg));
    }
}
BENCHMARK(BM_LindbladEvolve)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

static void BM_HeisenbergFamily(benchmark::State &state) {
    const LossConfig cfg{0.2, 1.0, 0.3, 0};
    for (auto _ : state) {
        benchmark::DoNotOptimize(heisenberg_family(static_cast<int>(state.range(0)), cfg));
    }
}
BENCHMARK(BM_HeisenbergFamily)->Arg(20)->Arg(40)->Unit(benchmark::kMillisecond);

static void BM_CvOracle(benchmark::State &state) {
    const cv::TmsConfig cfg{0.5, 1.0, 0.2};
    for (auto _ : state) {
        benchmark::DoNotOptimize(cv::symplectic_oracle_delta(cfg, cv::Variant::mai));
    }
}
BENCHMARK(BM_CvOracle)->Unit(benchmark::kMicrosecond);

static void BM_SphericalWigner(benchmark::State &state) {
    const int twice_j = static_cast<int>(state.range(0));
    CVector psi = CVector::Ones(twice_j + 1).normalized();
    for (auto _ : state) {
        benchmark::DoNotOptimize(wigner::spherical_wigner(psi, 64, 128));
    }
}
BENCHMARK(BM_SphericalWigner)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
