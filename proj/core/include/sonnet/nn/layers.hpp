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

// Minimal layer library with explicit backward passes.
//
// Sequence batches are row-major matrices with rows = batch * time
// (sample-major) and columns = channels. Forward passes are const and write
// whatever backward needs into a caller-owned cache, so inference on a shared
// model is safe from several threads.

#include <Eigen/Core>
#include <random>
#include <string>
#include <vector>

namespace sonnet::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Rng = std::mt19937_64;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool trainable = true;  // false for running statistics and input scalers

  Param() = default;
  Param(std::string n, Eigen::Index rows, Eigen::Index cols, bool train = true);
  void ZeroGrad() { grad.setZero(); }
};

// Glorot-uniform initialisation.
void GlorotUniform(Matrix& w, double fan_in, double fan_out, Rng& rng);

enum class Padding { kSame, kCausal };

class Conv1d {
 public:
  struct Cache {
    Matrix padded;
    int batch = 0;
    int time = 0;
  };

  Conv1d() = default;
  Conv1d(const std::string& name, int in_channels, int filters, int kernel, int dilation,
         Padding padding, Rng& rng);

  // x: (batch*time) x in_channels -> (batch*time) x filters.
  Matrix Forward(const Matrix& x, int batch, Cache* cache) const;
  // Accumulates parameter gradients; returns d/dx when requested.
  Matrix Backward(const Matrix& grad_out, const Cache& cache, bool need_input_grad);

  void CollectParams(std::vector<Param*>& out);
  int in_channels() const { return in_; }
  int filters() const { return out_; }

 private:
  int in_ = 0, out_ = 0, kernel_ = 1, dilation_ = 1;
  int pad_left_ = 0, pad_right_ = 0;
  Param weight_;  // (kernel*in) x out, tap-major
  Param bias_;    // 1 x out
};

class BatchNorm {
 public:
  struct Cache {
    Matrix x_hat;
    Eigen::RowVectorXd inv_std;
    Eigen::RowVectorXd batch_mean;
    Eigen::RowVectorXd batch_var;
  };

  BatchNorm() = default;
  BatchNorm(const std::string& name, int channels, double momentum = 0.1, double eps = 1e-3);

  // Uses batch statistics when `cache` is given, running statistics otherwise.
  Matrix Forward(const Matrix& x, Cache* cache) const;
  Matrix Backward(const Matrix& grad_out, const Cache& cache);
  // Folds the batch statistics of a training forward into the running ones.
  void UpdateRunning(const Cache& cache);

  void CollectParams(std::vector<Param*>& out);

 private:
  double momentum_ = 0.1, eps_ = 1e-3;
  Param gamma_, beta_, running_mean_, running_var_;
};

class Dense {
 public:
  struct Cache {
    Matrix x;
  };

  Dense() = default;
  Dense(const std::string& name, int in, int out, Rng& rng);

  Matrix Forward(const Matrix& x, Cache* cache) const;
  Matrix Backward(const Matrix& grad_out, const Cache& cache, bool need_input_grad = true);
  void CollectParams(std::vector<Param*>& out);
  // Zeroes weights and bias (used to pin the output layer in tests).
  void ZeroInit();

 private:
  Param weight_;  // in x out
  Param bias_;    // 1 x out
};

// In-place ReLU; the returned matrix doubles as the backward mask.
Matrix Relu(const Matrix& x);
Matrix ReluBackward(const Matrix& grad_out, const Matrix& activated);

struct PoolCache {
  std::vector<Eigen::Index> argmax;  // source row per output element
  Eigen::Index in_rows = 0;
};

// Non-overlapping max pooling over time; trailing frames that do not fill a
// window are dropped.
Matrix MaxPool(const Matrix& x, int batch, int pool, PoolCache* cache);
Matrix MaxPoolBackward(const Matrix& grad_out, const PoolCache& cache, Eigen::Index cols);

// Numerically stable log(1 + exp(z)).
double Softplus(double z);
double Sigmoid(double z);

// Mean binary cross-entropy on logits; fills d(loss)/d(logit) when requested.
double BceWithLogits(const Eigen::VectorXd& logits, const Eigen::VectorXd& labels,
                     Eigen::VectorXd* grad);

class Adam {
 public:
  Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-7);
  void Step(const std::vector<Param*>& params);
  int steps() const { return t_; }

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  std::vector<Matrix> m_, v_;
};

}  // namespace sonnet::nn
