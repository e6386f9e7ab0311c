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

// Temporal convolution baseline: stacked residual blocks of two causal
// dilated convolutions, read out at the last time step.
//
// Input is the per-timestep concatenation of the diners' features:
//   triplet: U | L | R
//   couplet: L | R | user bite columns

#include <string>

#include "network.hpp"

namespace sonnet::detail {
namespace {

using nn::Conv1d;
using nn::Dense;

struct Residual {
  Conv1d conv1, conv2;
  bool project = false;
  Conv1d proj;
};

struct ResidualCache {
  Conv1d::Cache c1, c2, proj;
  Matrix a1, a2, out;
};

class TcnNet final : public Network {
 public:
  explicit TcnNet(const ModelSpec& spec) : spec_(spec) {
    nn::Rng rng(spec.seed);
    const auto& lay = spec.layout;
    couplet_ = IsCouplet(spec.variant);
    bite_ = couplet_ ? lay.bite_cols() : 0;
    width_ = couplet_ ? 2 * lay.codiner_cols() + bite_ : lay.user_cols() + 2 * lay.codiner_cols();
    scaler_ = InputScaler("scale.input", width_);
    int in = width_;
    int idx = 0;
    for (int s = 0; s < spec.tcn_stacks; ++s)
      for (int d : spec.tcn_dilations) {
        const std::string p = "res" + std::to_string(idx++);
        Residual r{Conv1d(p + ".conv1", in, spec.tcn_filters, spec.tcn_kernel, d, nn::Padding::kCausal, rng),
                   Conv1d(p + ".conv2", spec.tcn_filters, spec.tcn_filters, spec.tcn_kernel, d,
                          nn::Padding::kCausal, rng),
                   in != spec.tcn_filters, Conv1d()};
        if (r.project) r.proj = Conv1d(p + ".proj", in, spec.tcn_filters, 1, 1, nn::Padding::kCausal, rng);
        blocks_.push_back(std::move(r));
        in = spec.tcn_filters;
      }
    out_ = Dense("head.out", spec.tcn_filters, 1, rng);
  }

  int input_width() const { return width_; }

  Eigen::VectorXd Logits(Windows batch) const override {
    Matrix seq = Sequence(batch, nullptr);
    return Readout(seq, static_cast<int>(batch.size()), nullptr);
  }

  Eigen::VectorXd TrainForward(Windows batch) override {
    cache_ = {};
    batch_ = static_cast<int>(batch.size());
    Matrix seq = Sequence(batch, &cache_);
    return Readout(seq, batch_, &out_cache_);
  }

  void Backward(const Eigen::VectorXd& dlogits) override {
    const Eigen::Index t = spec_.frames();
    Matrix glast = out_.Backward(Matrix(dlogits), out_cache_, true);
    Matrix g = Matrix::Zero(Eigen::Index(batch_) * t, spec_.tcn_filters);
    for (int b = 0; b < batch_; ++b) g.row(Eigen::Index(b) * t + t - 1) = glast.row(b);
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      Residual& r = blocks_[i];
      ResidualCache& rc = cache_[i];
      const bool need = i > 0;
      Matrix dsum = nn::ReluBackward(g, rc.out);
      Matrix d = nn::ReluBackward(dsum, rc.a2);
      d = r.conv2.Backward(d, rc.c2, true);
      d = nn::ReluBackward(d, rc.a1);
      Matrix dx = r.conv1.Backward(d, rc.c1, need);
      if (r.project) {
        Matrix dp = r.proj.Backward(dsum, rc.proj, need);
        if (need) dx += dp;
      } else if (need) {
        dx += dsum;
      }
      g = std::move(dx);
    }
  }

  std::vector<std::int64_t> ActivationPattern() const override {
    std::vector<std::int64_t> out;
    for (const auto& rc : cache_)
      for (const Matrix* m : {&rc.a1, &rc.a2, &rc.out})
        for (Eigen::Index i = 0; i < m->size(); ++i) out.push_back(m->data()[i] > 0.0);
    return out;
  }

  void CollectParams(std::vector<Param*>& out) override {
    scaler_.CollectParams(out);
    for (auto& r : blocks_) {
      r.conv1.CollectParams(out);
      r.conv2.CollectParams(out);
      if (r.project) r.proj.CollectParams(out);
    }
    out_.CollectParams(out);
  }

  void FitInputScaler(Windows batch) override {
    Matrix x = Input(batch);
    scaler_.Fit({&x});
  }

  Matrix TcnSequence(const LabeledWindow& w) const override {
    const LabeledWindow* p = &w;
    return Sequence(Windows(&p, 1), nullptr);
  }

 private:
  Matrix Input(Windows batch) const {
    const auto& lay = spec_.layout;
    const Eigen::Index t = spec_.frames();
    const Eigen::Index cw = lay.codiner_cols();
    Matrix x(static_cast<Eigen::Index>(batch.size()) * t, width_);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const LabeledWindow& w = *batch[i];
      auto rows = x.middleRows(static_cast<Eigen::Index>(i) * t, t);
      if (couplet_) {
        rows.leftCols(cw) = w.L;
        rows.middleCols(cw, cw) = w.R;
        if (bite_ > 0) rows.rightCols(bite_) = w.U.rightCols(bite_);
      } else {
        const Eigen::Index uw = lay.user_cols();
        rows.leftCols(uw) = w.U;
        rows.middleCols(uw, cw) = w.L;
        rows.rightCols(cw) = w.R;
      }
    }
    return x;
  }

  Matrix Sequence(Windows batch, std::vector<ResidualCache>* cache) const {
    const int bsz = static_cast<int>(batch.size());
    Matrix x = Input(batch);
    scaler_.Apply(x);
    if (cache) cache->resize(blocks_.size());
    ResidualCache scratch;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const Residual& r = blocks_[i];
      ResidualCache& rc = cache ? (*cache)[i] : scratch;
      const bool keep = cache != nullptr;
      rc.a1 = nn::Relu(r.conv1.Forward(x, bsz, keep ? &rc.c1 : nullptr));
      rc.a2 = nn::Relu(r.conv2.Forward(rc.a1, bsz, keep ? &rc.c2 : nullptr));
      Matrix sum = rc.a2;
      if (r.project)
        sum += r.proj.Forward(x, bsz, keep ? &rc.proj : nullptr);
      else
        sum += x;
      rc.out = nn::Relu(sum);
      x = rc.out;
    }
    return x;
  }

  Eigen::VectorXd Readout(const Matrix& seq, int bsz, Dense::Cache* cache) const {
    const Eigen::Index t = spec_.frames();
    Matrix last(bsz, seq.cols());
    for (int b = 0; b < bsz; ++b) last.row(b) = seq.row(Eigen::Index(b) * t + t - 1);
    return out_.Forward(last, cache).col(0);
  }

  ModelSpec spec_;
  bool couplet_ = false;
  int bite_ = 0;
  int width_ = 0;
  InputScaler scaler_;
  std::vector<Residual> blocks_;
  Dense out_;
  std::vector<ResidualCache> cache_;
  Dense::Cache out_cache_;
  int batch_ = 0;
};

}  // namespace

std::unique_ptr<Network> MakeTcnNet(const ModelSpec& spec) { return std::make_unique<TcnNet>(spec); }

}  // namespace sonnet::detail
