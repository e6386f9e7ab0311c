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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "network.hpp"
#include "sonnet/errors.hpp"

namespace sonnet {

Eigen::VectorXd FlattenWindow(const LabeledWindow& w) {
  Eigen::VectorXd v(w.U.size() + w.L.size() + w.R.size());
  v.segment(0, w.U.size()) = Eigen::Map<const Eigen::VectorXd>(w.U.data(), w.U.size());
  v.segment(w.U.size(), w.L.size()) = Eigen::Map<const Eigen::VectorXd>(w.L.data(), w.L.size());
  v.tail(w.R.size()) = Eigen::Map<const Eigen::VectorXd>(w.R.data(), w.R.size());
  return v;
}

LinearWeights FitHingeSgd(const Matrix& x, std::span<const std::uint8_t> y,
                          const LinearSgdOptions& opts) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw Error(ErrorCode::kEmptyDataset, "no training rows");
  if (static_cast<std::size_t>(n) != y.size())
    throw Error(ErrorCode::kLengthMismatch, "row and label counts differ");
  LinearWeights out;
  out.w = Eigen::VectorXd::Zero(x.cols());
  const bool all_pos = std::all_of(y.begin(), y.end(), [](auto v) { return v != 0; });
  const bool all_neg = std::none_of(y.begin(), y.end(), [](auto v) { return v != 0; });
  if (all_pos || all_neg) {
    // A single class carries no direction; predict it everywhere.
    out.b = all_pos ? 1.0 : -1.0;
    return out;
  }
  // Step schedule 1/(alpha*(t+t0)) with t0 chosen so the first step has the
  // size of a typical weight (1/sqrt(sqrt(alpha))).
  const double alpha = opts.alpha;
  const double typw = std::sqrt(1.0 / std::sqrt(alpha));
  const double t0 = 1.0 / (typw * alpha);
  // w is kept as scale * v so the L2 shrink is O(1) per step.
  Eigen::VectorXd v = Eigen::VectorXd::Zero(x.cols());
  double scale = 1.0;
  double b = 0.0;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opts.seed);
  double t = 0;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    if (opts.shuffle) std::shuffle(order.begin(), order.end(), rng);
    for (auto i : order) {
      const double eta = 1.0 / (alpha * (t + t0));
      const double yi = y[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
      const double margin = yi * (scale * x.row(i).dot(v) + b);
      scale *= 1.0 - eta * alpha;
      if (scale < 1e-9) {
        v *= scale;
        scale = 1.0;
      }
      if (margin < 1.0) {
        v += (eta * yi / scale) * x.row(i).transpose();
        b += eta * yi;
      }
      t += 1;
    }
  }
  out.w = scale * v;
  out.b = b;
  return out;
}

namespace detail {
namespace {

class LinearNet final : public Network {
 public:
  explicit LinearNet(const ModelSpec& spec) : spec_(spec) {
    const auto& lay = spec.layout;
    dim_ = static_cast<Eigen::Index>(spec.frames()) * (lay.user_cols() + 2 * lay.codiner_cols());
    uw_ = lay.user_cols();
    cw_ = lay.codiner_cols();
    user_scaler_ = InputScaler("scale.user", uw_);
    codiner_scaler_ = InputScaler("scale.codiner", cw_);
    w_ = Param("linear.w", 1, dim_);
    b_ = Param("linear.b", 1, 1);
  }

  bool differentiable() const override { return false; }

  Eigen::VectorXd Logits(Windows batch) const override {
    const Matrix x = Design(batch);
    Eigen::VectorXd z = x * w_.value.row(0).transpose();
    z.array() += b_.value(0, 0);
    return z;
  }

  void CollectParams(std::vector<Param*>& out) override {
    user_scaler_.CollectParams(out);
    codiner_scaler_.CollectParams(out);
    out.push_back(&w_);
    out.push_back(&b_);
  }

  void FitInputScaler(Windows batch) override {
    std::vector<const Matrix*> u, c;
    for (const auto* w : batch) {
      u.push_back(&w->U);
      c.push_back(&w->L);
      c.push_back(&w->R);
    }
    user_scaler_.Fit(u);
    codiner_scaler_.Fit(c);
  }

  Matrix Design(Windows batch) const {
    Matrix x(static_cast<Eigen::Index>(batch.size()), dim_);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      Matrix u = batch[i]->U, l = batch[i]->L, r = batch[i]->R;
      user_scaler_.Apply(u);
      codiner_scaler_.Apply(l);
      codiner_scaler_.Apply(r);
      auto row = x.row(static_cast<Eigen::Index>(i));
      row.segment(0, u.size()) = Eigen::Map<const Eigen::RowVectorXd>(u.data(), u.size());
      row.segment(u.size(), l.size()) = Eigen::Map<const Eigen::RowVectorXd>(l.data(), l.size());
      row.tail(r.size()) = Eigen::Map<const Eigen::RowVectorXd>(r.data(), r.size());
    }
    return x;
  }

  void Set(const LinearWeights& lw) {
    w_.value.row(0) = lw.w.transpose();
    b_.value(0, 0) = lw.b;
  }

 private:
  ModelSpec spec_;
  Eigen::Index dim_ = 0, uw_ = 0, cw_ = 0;
  InputScaler user_scaler_, codiner_scaler_;
  Param w_, b_;
};

}  // namespace

std::unique_ptr<Network> MakeLinearNet(const ModelSpec& spec) { return std::make_unique<LinearNet>(spec); }

void SetLinearWeights(Network& net, const LinearWeights& weights) {
  dynamic_cast<LinearNet&>(net).Set(weights);
}

Matrix LinearDesign(const Network& net, Windows batch) {
  return dynamic_cast<const LinearNet&>(net).Design(batch);
}

}  // namespace detail

TrainedModel FitLinearSgd(const ModelSpec& spec, std::span<const LabeledWindow> windows) {
  if (spec.variant != ModelVariant::kLinearSgd)
    throw Error(ErrorCode::kInvalidSpec, "FitLinearSgd needs a linear_sgd spec");
  if (windows.empty()) throw Error(ErrorCode::kEmptyDataset, "no training windows");
  TrainedModel model(spec);
  std::vector<const LabeledWindow*> ptrs;
  std::vector<std::uint8_t> y;
  for (const auto& w : windows) {
    ptrs.push_back(&w);
    y.push_back(w.label);
  }
  model.FitInputScaler(ptrs);
  const Matrix x = detail::LinearDesign(model.network(), ptrs);
  const auto lw = FitHingeSgd(x, y, {spec.sgd_alpha, spec.sgd_epochs, spec.sgd_shuffle, spec.seed});
  detail::SetLinearWeights(model.network(), lw);
  model.metadata.epochs_run = spec.sgd_epochs;
  model.metadata.trained = true;
  return model;
}

}  // namespace sonnet
