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

#pragma once

// One interface over the bite-timing classifiers: interleaved multi-channel
// convolution nets (three or two social channels), temporal convolution
// baselines, a hinge-loss linear model and the always-feed baseline.

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sonnet/nn/layers.hpp"
#include "sonnet/pipeline.hpp"

namespace sonnet {

enum class ModelVariant {
  kTripletSonnet,
  kCoupletSonnet,
  kTripletTcn,
  kCoupletTcn,
  kLinearSgd,
  kAlwaysFeed,
};

std::string_view ToString(ModelVariant v);
// "triplet_sonnet", "couplet_sonnet", ...; throws Error{InvalidSpec}.
ModelVariant ParseModelVariant(std::string_view name);
bool IsCouplet(ModelVariant v);

struct ModelSpec {
  ModelVariant variant = ModelVariant::kTripletSonnet;
  WindowLayout layout;
  double k_seconds = 6.0;
  int fps = 15;

  // Convolution stack, one entry per block (applies to every channel).
  std::vector<int> filters{32, 48, 64};
  int kernel = 5;
  int pool = 2;
  // interleave[i]: whether block i mixes in the other channels' activations.
  std::vector<bool> interleave{true, true, true};
  std::vector<int> head{128};  // hidden dense widths; a 1-unit output follows

  int tcn_filters = 50;
  int tcn_kernel = 5;
  std::vector<int> tcn_dilations{1, 2, 4, 8, 16, 32};
  int tcn_stacks = 2;

  double sgd_alpha = 1e-4;
  int sgd_epochs = 10;
  bool sgd_shuffle = true;

  std::uint64_t seed = 0;

  int frames() const;
  // Number of social channels the variant consumes (3 or 2; 0 for the
  // non-convolutional baselines).
  int channels() const;
  void Validate() const;  // throws Error{InvalidSpec}

  static ModelSpec Default(ModelVariant v);
  // Narrow configuration for quick experiments on a single core.
  static ModelSpec Reduced(ModelVariant v);

  bool operator==(const ModelSpec&) const = default;
};

std::string ModelSpecToJson(const ModelSpec& spec);
ModelSpec ModelSpecFromJson(std::string_view json);

struct Prediction {
  double score = 0.0;
  bool decision = false;  // score >= 0.5
};

struct TrainingMetadata {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  std::uint64_t seed = 0;
  bool trained = false;
};

namespace detail {
class Network;
}

class TrainedModel {
 public:
  explicit TrainedModel(const ModelSpec& spec);
  ~TrainedModel();
  TrainedModel(TrainedModel&&) noexcept;
  TrainedModel& operator=(TrainedModel&&) noexcept;

  const ModelSpec& spec() const { return spec_; }
  TrainingMetadata metadata;

  // Thread-safe; throws Error{ShapeMismatch}.
  Prediction Forward(const LabeledWindow& w) const;
  std::vector<double> Scores(std::span<const LabeledWindow> windows) const;
  std::vector<double> Scores(std::span<const LabeledWindow* const> windows) const;
  Eigen::VectorXd Logits(std::span<const LabeledWindow* const> windows) const;

  std::size_t ParameterCount() const;  // trainable scalars only
  std::string MetadataJson() const;

  // ---- training hooks (single writer) ----
  bool differentiable() const;
  void FitInputScaler(std::span<const LabeledWindow* const> windows);
  Eigen::VectorXd TrainForward(std::span<const LabeledWindow* const> windows);
  void Backward(const Eigen::VectorXd& dlogits);
  // Every parameter, including running statistics and input scalers.
  std::vector<nn::Param*> Params();
  std::vector<const nn::Param*> Params() const;
  void ZeroGrad();
  // Piecewise-linear region of the last TrainForward (see gradient checks).
  std::vector<std::int64_t> ActivationPattern() const;
  std::vector<double> SaveState() const;
  void LoadState(std::span<const double> state);

  // Post-interleave activations of block `block` for each channel
  // (interleaved variants only).
  std::vector<Matrix> ProbeBlock(const LabeledWindow& w, int block) const;
  // Full output sequence of the last residual block (TCN variants only).
  Matrix TcnSequence(const LabeledWindow& w) const;

  detail::Network& network() { return *net_; }
  const detail::Network& network() const { return *net_; }

 private:
  void CheckShape(const LabeledWindow& w) const;

  ModelSpec spec_;
  std::unique_ptr<detail::Network> net_;
};

TrainedModel BuildModel(const ModelSpec& spec);
Prediction Forward(const TrainedModel& m, const LabeledWindow& w);

// ---- linear classifier ------------------------------------------------------

struct LinearSgdOptions {
  double alpha = 1e-4;
  int epochs = 10;
  bool shuffle = true;
  std::uint64_t seed = 0;
};

struct LinearWeights {
  Eigen::VectorXd w;
  double b = 0.0;
};

// Hinge loss + L2 penalty, plain SGD with step 1/(alpha*(t+t0)).
// y holds 0/1 labels. Throws Error{EmptyDataset}.
LinearWeights FitHingeSgd(const Matrix& x, std::span<const std::uint8_t> y,
                          const LinearSgdOptions& opts);

// Flattens and standardizes the windows, then fits a linear_sgd model.
TrainedModel FitLinearSgd(const ModelSpec& spec, std::span<const LabeledWindow> windows);

// Input vector used by the flat models: U, L and R flattened row by row.
Eigen::VectorXd FlattenWindow(const LabeledWindow& w);

// ---- checkpoints ------------------------------------------------------------

void SaveCheckpoint(const TrainedModel& m, const std::filesystem::path& path);
TrainedModel LoadCheckpoint(const std::filesystem::path& path);

}  // namespace sonnet
