#include <benchmark/benchmark.h>

#include "vcx/archive.hpp"
#include "vcx/codec.hpp"
#include "vcx/diffusion.hpp"
#include "vcx/guidance.hpp"
#include "vcx/metrics.hpp"
#include "vcx/rng.hpp"

namespace {

using namespace vcx;

LatentTensor bench_latent(std::size_t f, std::size_t h, std::size_t w, std::size_t c,
                          std::uint64_t seed) {
    LatentTensor z(f, h, w, c);
    z.values = gaussian_sample(SeedSpec{seed, "bench"}, {f, h, w, c});
    return z;
}

void BM_GaussianSample(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    std::uint64_t seed = 0;
    for (auto _ : state) {
        auto v = gaussian_sample(SeedSpec{seed++, "bench"}, {n});
        benchmark::DoNotOptimize(v.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_GaussianSample)->Arg(4096)->Arg(65536);

void BM_DdimStep(benchmark::State& state) {
    NoiseSchedule s = make_schedule(1000, 1e-4, 0.02);
    LatentTensor z = bench_latent(16, 8, 8, 4, 1);
    LatentTensor eps = bench_latent(16, 8, 8, 4, 2);
    for (auto _ : state) {
        DdimOutput out = ddim_step(z, eps, 800, 600, s);
        benchmark::DoNotOptimize(out.v.values.data());
    }
}
BENCHMARK(BM_DdimStep);

void BM_DenoiserForward(benchmark::State& state) {
    DenoiserConfig config;
    config.classes = 4;
    config.width = 32;
    ToyDenoiser den(config, SeedSpec{3, "bench-init"});
    LatentTensor z = bench_latent(16, 8, 8, 4, 4);
    for (auto _ : state) {
        LatentTensor out = den.predict_noise(z, Conditioning::of_class(1), 500);
        benchmark::DoNotOptimize(out.values.data());
    }
}
BENCHMARK(BM_DenoiserForward);

void BM_SsimGlobal(benchmark::State& state) {
    VideoTensor a(16, 32, 32, 3);
    VideoTensor b(16, 32, 32, 3);
    a.values = gaussian_sample(SeedSpec{5, "a"}, {a.size()});
    b.values = gaussian_sample(SeedSpec{5, "b"}, {b.size()});
    for (float& v : a.values) v = 0.5f + 0.1f * v;
    for (float& v : b.values) v = 0.5f + 0.1f * v;
    for (auto _ : state) benchmark::DoNotOptimize(ssim_global(a, b));
}
BENCHMARK(BM_SsimGlobal);

void BM_GuidanceGradient(benchmark::State& state) {
    IdentityCodec codec;
    ToyTargetConfig tc;
    tc.task = Task::Classification;
    tc.classes = 4;
    tc.channels = 4;
    ToyTarget target(tc, SeedSpec{6, "bench-init"});
    LatentTensor v = bench_latent(8, 16, 16, 4, 7);
    for (auto _ : state) {
        LatentTensor g = raw_guidance_grad(v, codec, target, Conditioning::of_class(2), 1.0);
        benchmark::DoNotOptimize(g.values.data());
    }
}
BENCHMARK(BM_GuidanceGradient);

void BM_ArchiveRoundTrip(benchmark::State& state) {
    TensorArchive archive;
    for (int i = 0; i < 4; ++i) {
        LatentTensor z = bench_latent(16, 8, 8, 4, 10 + i);
        archive.put_latent("z" + std::to_string(i), z);
    }
    for (auto _ : state) {
        auto bytes = archive_to_bytes(archive);
        TensorArchive back = archive_from_bytes(bytes);
        benchmark::DoNotOptimize(back.entries.size());
    }
}
BENCHMARK(BM_ArchiveRoundTrip);

} // namespace

BENCHMARK_MAIN();
