// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <benchmark/benchmark.h>

#include <random>

#include "sonnet/models.hpp"
#include "sonnet/nn/layers.hpp"
#include "sonnet/pipeline.hpp"
#include "sonnet/synthetic.hpp"

namespace {

using namespace sonnet;

LabeledWindow NoiseWindow(const WindowLayout& layout, int frames, std::mt19937_64& rng) {
  std::normal_distribution<double> n01;
  LabeledWindow w;
  w.U.resize(frames, layout.user_cols());
  w.L.resize(frames, layout.codiner_cols());
  w.R.resize(frames, layout.codiner_cols());
  for (Matrix* m : {&w.U, &w.L, &w.R})
    for (Eigen::Index i = 0; i < m->size(); ++i) m->data()[i] = n01(rng);
  return w;
}

// Scores a batch of windows with the default-width network.
void BM_Forward(benchmark::State& state) {
  const auto variant = static_cast<ModelVariant>(state.range(0));
  const auto spec = ModelSpec::Default(variant);
  const TrainedModel model(spec);
  std::mt19937_64 rng(1);
  std::vector<LabeledWindow> batch;
  for (int i = 0; i < state.range(1); ++i) batch.push_back(NoiseWindow(spec.layout, spec.frames(), rng));
  for (auto _ : state) benchmark::DoNotOptimize(model.Scores(std::span<const LabeledWindow>(batch)));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.SetLabel(std::string(ToString(variant)));
}
BENCHMARK(BM_Forward)
    ->Args({int(ModelVariant::kTripletSonnet), 1})
    ->Args({int(ModelVariant::kTripletSonnet), 32})
    ->Args({int(ModelVariant::kCoupletSonnet), 32})
    ->Args({int(ModelVariant::kTripletTcn), 32})
    ->Unit(benchmark::kMillisecond);

// First SoNNET convolution of the user channel: 90 frames, 373 inputs.
void BM_ConvLayer(benchmark::State& state) {
  nn::Rng rng(2);
  const int batch = static_cast<int>(state.range(0));
  nn::Conv1d conv("c", 373, 32, 5, 1, nn::Padding::kSame, rng);
  std::normal_distribution<double> n01;
  Matrix x(batch * 90, 373);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = n01(rng);
  const Matrix g = Matrix::Ones(batch * 90, 32);
  nn::Conv1d::Cache cache;
  for (auto _ : state) {
    benchmark::DoNotOptimize(conv.Forward(x, batch, &cache));
    if (state.range(1)) benchmark::DoNotOptimize(conv.Backward(g, cache, true));
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ConvLayer)->Args({32, 0})->Args({32, 1})->Unit(benchmark::kMicrosecond);

// Stream preparation plus window extraction for a ten-minute session.
void BM_WindowExtraction(benchmark::State& state) {
  SyntheticConfig cfg;
  cfg.seed = 3;
  cfg.duration_s = 600;
  const auto s = GenerateSyntheticSession(cfg, 0);
  const WindowSpec spec;
  const WindowLayout layout;
  const bool prepare = state.range(0) != 0;
  const auto prepared = PrepareStreams(s.streams, s.audio, s.annotations, spec.fps);
  std::size_t n = 0;
  for (auto _ : state) {
    const auto streams = prepare ? PrepareStreams(s.streams, s.audio, s.annotations, spec.fps) : prepared;
    const auto ex = ExtractWindows(s.annotations, streams, spec, layout);
    n = ex.windows.size();
    benchmark::DoNotOptimize(ex);
  }
  state.counters["windows"] = static_cast<double>(n);
}
BENCHMARK(BM_WindowExtraction)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
