#include <benchmark/benchmark.h>

#include "vaproto/dataset.hpp"
#include "vaproto/loss.hpp"
#include "vaproto/sampler.hpp"

using namespace vaproto;

namespace {

struct Fixture {
  Dataset data;
  EncoderParams encoder;
  SamplerConfig sampler;

  explicit Fixture(std::size_t dim)
      : data(generate_synthetic(10, 64, static_cast<std::uint32_t>(dim), 8.0,
                                1.0, 7)) {
    Rng init = Rng(1).substream("init");
    encoder = EncoderParams::init(dim, dim, dim, 0.1, init);
    sampler.ways = 4;
    sampler.shots = 8;
    sampler.supports = 16;
  }
};

}  // namespace

static void BM_SampleEpisode(benchmark::State& state) {
  Fixture fx(state.range(0));
  Rng rng(11);
  const Dataset* view = &fx.data;
  std::uint64_t seq = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_episode({view, 1}, fx.sampler, rng, seq++));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_SampleEpisode)->Arg(64);

static void BM_EncoderForward(benchmark::State& state) {
  Fixture fx(state.range(0));
  const Vector& x = fx.data.examples()[0].features;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fx.encoder.forward(x));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EncoderForward)->Arg(16)->Arg(64)->Arg(128);

static void BM_EpisodeLossForward(benchmark::State& state) {
  Fixture fx(state.range(0));
  Rng rng(13);
  const Dataset* view = &fx.data;
  const Episode ep = sample_episode({view, 1}, fx.sampler, rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        episode_loss(fx.encoder, ep, 0.1, LossMode::Eval).value);
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EpisodeLossForward)->Arg(16)->Arg(64);

static void BM_EpisodeLossBackward(benchmark::State& state) {
  Fixture fx(state.range(0));
  Rng rng(13);
  const Dataset* view = &fx.data;
  const Episode ep = sample_episode({view, 1}, fx.sampler, rng);
  for (auto _ : state) {
    EpisodeLoss loss = episode_loss(fx.encoder, ep, 0.1, LossMode::Eval);
    loss.tape.backward(loss.loss);
    benchmark::DoNotOptimize(loss.tape.grad(loss.params[0]));
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EpisodeLossBackward)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
