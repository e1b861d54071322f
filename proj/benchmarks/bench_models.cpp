#include <benchmark/benchmark.h>

#include <random>

#include "hetrisk/heterotic.hpp"
#include "hetrisk/optimizer.hpp"
#include "hetrisk/pc_model.hpp"
#include "hetrisk/prices.hpp"
#include "hetrisk/synthetic.hpp"

using namespace hetrisk;

namespace {

SyntheticPanel make_fixture(int tickers) {
    SynthSpec spec;
    spec.num_tickers = tickers;
    spec.num_days = 64;
    spec.num_sub_industries = std::max(2, tickers / 4);
    spec.num_industries = std::max(2, tickers / 16);
    spec.num_sectors = std::max(1, tickers / 64);
    spec.seed = 7;
    return generate_synthetic_panel(spec);
}

ReturnsPanel close_panel(const PricePanel& prices) {
    const ReturnPanels r = compute_returns(prices);
    std::vector<std::string> dates(prices.dates.begin() + 1, prices.dates.end());
    return ReturnsPanel::create(prices.tickers, std::move(dates), r.close_to_close);
}

void bench_heterotic_build(benchmark::State& state) {
    const SyntheticPanel sp = make_fixture(static_cast<int>(state.range(0)));
    const ReturnsPanel panel = close_panel(sp.prices);
    for (auto _ : state)
        benchmark::DoNotOptimize(build_heterotic_model(panel, sp.hierarchy));
}

void bench_pc_build(benchmark::State& state) {
    const SyntheticPanel sp = make_fixture(static_cast<int>(state.range(0)));
    const ReturnsPanel panel = close_panel(sp.prices);
    for (auto _ : state) benchmark::DoNotOptimize(build_pc_model(panel));
}

void bench_bounded_optimizer(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const SyntheticPanel sp = make_fixture(n);
    const ReturnsPanel panel = close_panel(sp.prices);
    const FactorModel model = build_heterotic_model(panel, sp.hierarchy);
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    Eigen::VectorXd alpha(n);
    for (int i = 0; i < n; ++i) alpha(i) = 0.01 * g(rng);
    const Eigen::VectorXd upper = Eigen::VectorXd::Constant(n, 4.0 / n);
    for (auto _ : state)
        benchmark::DoNotOptimize(optimize_bounded(alpha,
                                                  ConstraintSet::dollar_neutrality(n),
                                                  model.inv_cov, upper, -upper, {}));
}

}  // namespace

BENCHMARK(bench_heterotic_build)->Arg(100)->Arg(250)->Arg(500)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(bench_pc_build)->Arg(100)->Arg(250)->Arg(500)
    ->Unit(benchmark::kMillisecond);
BENCHMARK(bench_bounded_optimizer)->Arg(100)->Arg(250)->Arg(500)
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
