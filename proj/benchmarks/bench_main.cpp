#include <benchmark/benchmark.h>

#include <random>

#include "nfsim/geometry.hpp"
#include "nfsim/optimizer.hpp"
#include "nfsim/propagation.hpp"
#include "nfsim/unfd.hpp"

using namespace nfsim;

namespace {

constexpr double kLambda = 0.010714;

Eigen::VectorXcd random_field(Eigen::Index n, std::uint64_t seed) {
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Eigen::VectorXcd v(n);
    for (auto& x : v) x = cd(u(g), u(g));
    return v;
}

SystemConfig plane_feed(double diameter, int layers) {
    SystemConfig c;
    c.wavelength = kLambda;
    c.aperture_diameter = diameter;
    c.element_pitch = kLambda / 2.0;
    c.layer_count = layers;
    c.layer_spacings.assign(static_cast<std::size_t>(layers - 1), 5.0 * kLambda);
    c.feed.kind = FeedKind::uniform_plane;
    return c;
}

}  // namespace

static void GreenApply(benchmark::State& state) {
    auto grid = std::make_shared<const ApertureGrid>(kLambda / 2.0, state.range(0) * kLambda);
    const auto form = state.range(1) ? OperatorForm::matrix_free : OperatorForm::explicit_matrix;
    LinearPropagator g = green_matrix(grid->plane(0.0), grid->plane(5.0 * kLambda), kLambda, form);
    Eigen::VectorXcd x = random_field(static_cast<Eigen::Index>(grid->size()), 1);
    for (auto _ : state) benchmark::DoNotOptimize(g.apply(x));
    state.counters["N"] = static_cast<double>(grid->size());
}
BENCHMARK(GreenApply)->ArgsProduct({{8, 16, 32}, {0, 1}})->Unit(benchmark::kMillisecond);

static void CascadeApply(benchmark::State& state) {
    SystemConfig c = plane_feed(16.0 * kLambda, static_cast<int>(state.range(0)));
    ApertureRef grid = build_aperture(c);
    std::vector<Eigen::VectorXd> phases(static_cast<std::size_t>(c.layer_count),
                                        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid->size())));
    LayerStack s = LayerStack::phase_only(grid, c.layer_spacings, phases);
    LinearPropagator t = cascade(s, interlayer_operators(s, kLambda));
    Eigen::VectorXcd x = random_field(static_cast<Eigen::Index>(grid->size()), 2);
    for (auto _ : state) benchmark::DoNotOptimize(t.apply(x));
}
BENCHMARK(CascadeApply)->DenseRange(1, 4)->Unit(benchmark::kMillisecond);

static void OptimizePhases(benchmark::State& state) {
    SystemConfig c = plane_feed(12.0 * kLambda, static_cast<int>(state.range(0)));
    c.feed.kind = FeedKind::point_source;
    c.feed.feed_distance = 0.2 * c.aperture_diameter;
    StackProblem pb = make_problem(c, 0.2 * rayleigh_distance(c));
    for (auto _ : state) benchmark::DoNotOptimize(optimize_phases(pb, c.optimizer));
}
BENCHMARK(OptimizePhases)->DenseRange(1, 3)->Unit(benchmark::kMillisecond);

static void EvaluateAt(benchmark::State& state) {
    SystemConfig c = plane_feed(16.0 * kLambda, 2);
    const double r = 0.1 * rayleigh_distance(c);
    for (auto _ : state) benchmark::DoNotOptimize(evaluate_at(c, 2, r));
}
BENCHMARK(EvaluateAt)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
