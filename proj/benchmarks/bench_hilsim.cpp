#include <benchmark/benchmark.h>

#include "hilsim/ecu.hpp"
#include "hilsim/runtime.hpp"
#include "hilsim/signal_core.hpp"

#include <vector>

using namespace hilsim;

static void BM_BuildCrankTable(benchmark::State& state) {
    const ToothWheelSpec spec;
    const double res = 1.0 / static_cast<double>(state.range(0));
    for (auto _ : state) {
        auto table = build_crank_table(spec, res);
        benchmark::DoNotOptimize(table);
    }
}
BENCHMARK(BM_BuildCrankTable)->Arg(1)->Arg(10)->Arg(100);

static void BM_BuildCamTable(benchmark::State& state) {
    const CamPatternSpec spec;
    for (auto _ : state) {
        auto table = build_cam_table(spec);
        benchmark::DoNotOptimize(table);
    }
}
BENCHMARK(BM_BuildCamTable);

static RunConfig config_for(double rate, std::size_t frame) {
    RunConfig rc;
    rc.sample_rate = rate;
    rc.frame_size = frame;
    return rc;
}

static void BM_RuntimeStep(benchmark::State& state) {
    const double rate = static_cast<double>(state.range(0));
    const auto frame = static_cast<std::size_t>(state.range(1));
    Runtime rt(config_for(rate, frame));
    rt.start();
    rt.set_rpm(3000.0);
    for (auto _ : state) {
        auto batch = rt.step(frame);
        benchmark::DoNotOptimize(batch);
    }
    state.SetItemsProcessed(state.iterations() * state.range(1));
}
BENCHMARK(BM_RuntimeStep)->Args({48000, 480})->Args({200000, 2000});

// decoder cost alone: frames are generated up front
static void BM_EcuFeed(benchmark::State& state) {
    const double rate = 48000.0;
    const std::size_t frame = 480;
    Runtime rt(config_for(rate, frame));
    rt.start();
    rt.set_rpm(static_cast<double>(state.range(0)));
    std::vector<FrameBatch> frames;
    for (int i = 0; i < 200; ++i) frames.push_back(rt.step(frame));

    DecoderConfig dc;
    dc.sample_rate = rate;
    for (auto _ : state) {
        state.PauseTiming();
        VirtualEcu ecu(dc);
        state.ResumeTiming();
        for (const auto& f : frames) {
            auto inj = ecu.feed(f);
            benchmark::DoNotOptimize(inj);
        }
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size() * frame));
}
BENCHMARK(BM_EcuFeed)->Arg(800)->Arg(2500)->Arg(6000);

static void BM_ClosedLoopCapture(benchmark::State& state) {
    const double rate = 48000.0;
    const std::size_t frame = 480;
    for (auto _ : state) {
        Runtime rt(config_for(rate, frame));
        rt.start();
        rt.set_rpm(2000.0);
        VirtualEcu ecu;
        InjectionCapture cap(rate);
        for (int i = 0; i < 100; ++i) {
            auto batch = rt.step(frame);
            cap.feed(batch, ecu.feed(batch));
        }
        benchmark::DoNotOptimize(cap.finish());
    }
}
BENCHMARK(BM_ClosedLoopCapture)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
