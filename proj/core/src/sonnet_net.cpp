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

// Interleaved multi-channel convolution net.
//
// Each social channel (user, left, right; or left, right for the couplet
// variant) runs its own stack of blocks:
//   conv(k) -> BN -> ReLU -> [concat other channels] -> 1x1 conv -> BN -> ReLU -> maxpool
// The flattened channel outputs (plus the user's bite pair for the couplet
// variant) feed the dense head.

#include <string>

#include "network.hpp"
#include "sonnet/errors.hpp"

namespace sonnet::detail {
namespace {

using nn::BatchNorm;
using nn::Conv1d;
using nn::Dense;

struct Block {
  Conv1d conv;
  BatchNorm bn;
  Conv1d mix;
  BatchNorm mix_bn;
};

struct BlockCache {
  Conv1d::Cache conv;
  BatchNorm::Cache bn;
  Matrix h;  // post-ReLU, pre-interleave
  Conv1d::Cache mix;
  BatchNorm::Cache mix_bn;
  Matrix m;  // post-interleave activation
  nn::PoolCache pool;
};

struct Cache {
  int batch = 0;
  std::vector<std::vector<BlockCache>> blocks;  // [block][channel]
  std::vector<Eigen::Index> flat_rows;          // per channel: rows of pooled output
  std::vector<Dense::Cache> dense;
  std::vector<BatchNorm::Cache> head_bn;
  std::vector<Matrix> hidden;  // post-ReLU hidden activations
};

class SonnetNet final : public Network {
 public:
  explicit SonnetNet(const ModelSpec& spec) : spec_(spec) {
    nn::Rng rng(spec.seed);
    const auto& lay = spec.layout;
    couplet_ = IsCouplet(spec.variant);
    nch_ = couplet_ ? 2 : 3;
    extra_ = couplet_ ? lay.bite_cols() : 0;
    for (int c = 0; c < nch_; ++c) {
      const bool is_user = !couplet_ && c == 0;
      widths_.push_back(is_user ? lay.user_cols() : lay.codiner_cols());
      scalers_.emplace_back("scale.ch" + std::to_string(c), widths_.back());
    }
    if (extra_ > 0) bite_scaler_ = InputScaler("scale.bite", extra_);
    blocks_.resize(spec.filters.size());
    out_time_ = spec.frames();
    for (std::size_t b = 0; b < spec.filters.size(); ++b) {
      const int f = spec.filters[b];
      const int mix_in = spec.interleave[b] ? nch_ * f : f;
      for (int c = 0; c < nch_; ++c) {
        const std::string p = "block" + std::to_string(b) + ".ch" + std::to_string(c);
        const int in = b == 0 ? widths_[c] : spec.filters[b - 1];
        blocks_[b].push_back(Block{Conv1d(p + ".conv", in, f, spec.kernel, 1, nn::Padding::kSame, rng),
                                   BatchNorm(p + ".bn", f),
                                   Conv1d(p + ".mix", mix_in, f, 1, 1, nn::Padding::kSame, rng),
                                   BatchNorm(p + ".mix_bn", f)});
      }
      out_time_ /= spec.pool;
    }
    int in = nch_ * out_time_ * spec.filters.back() + extra_;
    for (std::size_t i = 0; i < spec.head.size(); ++i) {
      dense_.emplace_back("head.dense" + std::to_string(i), in, spec.head[i], rng);
      // Without this the whole hidden layer can go dark in one epoch: its
      // input is post-ReLU, so Adam moves every weight of a unit together.
      head_bn_.emplace_back("head.bn" + std::to_string(i), spec.head[i]);
      in = spec.head[i];
    }
    dense_.emplace_back("head.out", in, 1, rng);
  }

  Eigen::VectorXd Logits(Windows batch) const override { return Run(batch, nullptr, -1, nullptr); }

  Eigen::VectorXd TrainForward(Windows batch) override {
    cache_ = Cache{};
    Eigen::VectorXd z = Run(batch, &cache_, -1, nullptr);
    for (std::size_t b = 0; b < blocks_.size(); ++b)
      for (int c = 0; c < nch_; ++c) {
        blocks_[b][c].bn.UpdateRunning(cache_.blocks[b][c].bn);
        blocks_[b][c].mix_bn.UpdateRunning(cache_.blocks[b][c].mix_bn);
      }
    for (std::size_t i = 0; i < head_bn_.size(); ++i) head_bn_[i].UpdateRunning(cache_.head_bn[i]);
    return z;
  }

  void Backward(const Eigen::VectorXd& dlogits) override {
    const int batch = cache_.batch;
    // Dense head.
    Matrix g = dlogits;
    for (std::size_t i = dense_.size(); i-- > 0;) {
      if (i + 1 < dense_.size()) g = head_bn_[i].Backward(nn::ReluBackward(g, cache_.hidden[i]), cache_.head_bn[i]);
      g = dense_[i].Backward(g, cache_.dense[i], true);
    }
    // Split the flattened gradient back into per-channel sequences.
    const int f_last = spec_.filters.back();
    std::vector<Matrix> dx(nch_);
    for (int c = 0; c < nch_; ++c) {
      const Eigen::Index w = Eigen::Index(out_time_) * f_last;
      Matrix flat = g.middleCols(Eigen::Index(c) * w, w);
      dx[c] = Eigen::Map<Matrix>(flat.data(), Eigen::Index(batch) * out_time_, f_last);
    }
    for (std::size_t b = blocks_.size(); b-- > 0;) {
      const int f = spec_.filters[b];
      const bool inter = spec_.interleave[b];
      std::vector<Matrix> dh(nch_);
      for (int c = 0; c < nch_; ++c) {
        auto& bc = cache_.blocks[b][c];
        dh[c] = Matrix::Zero(bc.h.rows(), f);
      }
      for (int c = 0; c < nch_; ++c) {
        auto& bc = cache_.blocks[b][c];
        Matrix dm = nn::MaxPoolBackward(dx[c], bc.pool, f);
        dm = nn::ReluBackward(dm, bc.m);
        dm = blocks_[b][c].mix_bn.Backward(dm, bc.mix_bn);
        Matrix dz = blocks_[b][c].mix.Backward(dm, bc.mix, true);
        dh[c] += dz.leftCols(f);
        if (inter) {
          int slot = 1;
          for (int o = 0; o < nch_; ++o) {
            if (o == c) continue;
            dh[o] += dz.middleCols(Eigen::Index(slot) * f, f);
            ++slot;
          }
        }
      }
      for (int c = 0; c < nch_; ++c) {
        auto& bc = cache_.blocks[b][c];
        Matrix da = nn::ReluBackward(dh[c], bc.h);
        da = blocks_[b][c].bn.Backward(da, bc.bn);
        dx[c] = blocks_[b][c].conv.Backward(da, bc.conv, b > 0);
      }
    }
  }

  std::vector<std::int64_t> ActivationPattern() const override {
    std::vector<std::int64_t> out;
    auto signs = [&](const Matrix& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i) out.push_back(m.data()[i] > 0.0);
    };
    for (const auto& blk : cache_.blocks)
      for (const auto& bc : blk) {
        signs(bc.h);
        signs(bc.m);
        for (auto a : bc.pool.argmax) out.push_back(static_cast<std::int64_t>(a));
      }
    for (const auto& h : cache_.hidden) signs(h);
    return out;
  }

  void CollectParams(std::vector<Param*>& out) override {
    for (auto& s : scalers_) s.CollectParams(out);
    if (extra_ > 0) bite_scaler_.CollectParams(out);
    for (auto& blk : blocks_)
      for (auto& ch : blk) {
        ch.conv.CollectParams(out);
        ch.bn.CollectParams(out);
        ch.mix.CollectParams(out);
        ch.mix_bn.CollectParams(out);
      }
    for (std::size_t i = 0; i < dense_.size(); ++i) {
      dense_[i].CollectParams(out);
      if (i < head_bn_.size()) head_bn_[i].CollectParams(out);
    }
  }

  void FitInputScaler(Windows batch) override {
    for (int c = 0; c < nch_; ++c) {
      std::vector<const Matrix*> blocks;
      for (const auto* w : batch) blocks.push_back(&Channel(*w, c));
      scalers_[c].Fit(blocks);
    }
    if (extra_ > 0) {
      std::vector<Matrix> rows;
      rows.reserve(batch.size());
      for (const auto* w : batch) rows.push_back(BiteRow(*w));
      std::vector<const Matrix*> ptrs;
      for (const auto& r : rows) ptrs.push_back(&r);
      bite_scaler_.Fit(ptrs);
    }
  }

  std::vector<Matrix> ProbeBlock(const LabeledWindow& w, int block) const override {
    if (block < 0 || block >= static_cast<int>(blocks_.size()))
      throw Error(ErrorCode::kInvalidArgument, "block index out of range");
    std::vector<Matrix> out;
    const LabeledWindow* p = &w;
    Run(Windows(&p, 1), nullptr, block, &out);
    return out;
  }

 private:
  const Matrix& Channel(const LabeledWindow& w, int c) const {
    if (couplet_) return c == 0 ? w.L : w.R;
    return c == 0 ? w.U : (c == 1 ? w.L : w.R);
  }

  // The user's bite pair at the last frame, tiled gamma times.
  Matrix BiteRow(const LabeledWindow& w) const {
    return w.U.row(w.U.rows() - 1).rightCols(extra_);
  }

  Eigen::VectorXd Run(Windows batch, Cache* cache, int probe_block, std::vector<Matrix>* probe) const {
    const int bsz = static_cast<int>(batch.size());
    const Eigen::Index frames = spec_.frames();
    std::vector<Matrix> x(nch_);
    for (int c = 0; c < nch_; ++c) {
      x[c] = StackRows(batch, frames, widths_[c], [&](const LabeledWindow& w) -> const Matrix& {
        return Channel(w, c);
      });
      scalers_[c].Apply(x[c]);
    }
    if (cache) {
      cache->batch = bsz;
      cache->blocks.resize(blocks_.size());
    }
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      std::vector<BlockCache> local(cache ? 0 : nch_);
      std::vector<BlockCache>& bcs = cache ? cache->blocks[b] : local;
      if (cache) bcs.resize(nch_);
      for (int c = 0; c < nch_; ++c) {
        const Block& blk = blocks_[b][c];
        Matrix a = blk.conv.Forward(x[c], bsz, cache ? &bcs[c].conv : nullptr);
        a = blk.bn.Forward(a, cache ? &bcs[c].bn : nullptr);
        bcs[c].h = nn::Relu(a);
      }
      const int f = spec_.filters[b];
      for (int c = 0; c < nch_; ++c) {
        const Block& blk = blocks_[b][c];
        Matrix z;
        if (spec_.interleave[b]) {
          z.resize(bcs[c].h.rows(), Eigen::Index(nch_) * f);
          z.leftCols(f) = bcs[c].h;
          int slot = 1;
          for (int o = 0; o < nch_; ++o) {
            if (o == c) continue;
            z.middleCols(Eigen::Index(slot) * f, f) = bcs[o].h;
            ++slot;
          }
        } else {
          z = bcs[c].h;
        }
        Matrix m = blk.mix.Forward(z, bsz, cache ? &bcs[c].mix : nullptr);
        m = blk.mix_bn.Forward(m, cache ? &bcs[c].mix_bn : nullptr);
        bcs[c].m = nn::Relu(m);
      }
      if (probe && static_cast<int>(b) == probe_block) {
        for (int c = 0; c < nch_; ++c) probe->push_back(bcs[c].m);
        return {};
      }
      for (int c = 0; c < nch_; ++c)
        x[c] = nn::MaxPool(bcs[c].m, bsz, spec_.pool, cache ? &bcs[c].pool : nullptr);
      if (!cache) {
        // Inference keeps nothing but the pooled outputs.
        bcs.clear();
      }
    }
    const int f_last = spec_.filters.back();
    const Eigen::Index w = Eigen::Index(out_time_) * f_last;
    Matrix flat(bsz, Eigen::Index(nch_) * w + extra_);
    for (int c = 0; c < nch_; ++c)
      flat.middleCols(Eigen::Index(c) * w, w) = Eigen::Map<const Matrix>(x[c].data(), bsz, w);
    if (extra_ > 0) {
      Matrix bite(bsz, extra_);
      for (int i = 0; i < bsz; ++i) bite.row(i) = BiteRow(*batch[i]);
      bite_scaler_.Apply(bite);
      flat.rightCols(extra_) = bite;
    }
    if (cache) {
      cache->dense.resize(dense_.size());
      cache->head_bn.resize(dense_.size() - 1);
      cache->hidden.resize(dense_.size() - 1);
    }
    Matrix h = std::move(flat);
    for (std::size_t i = 0; i < dense_.size(); ++i) {
      h = dense_[i].Forward(h, cache ? &cache->dense[i] : nullptr);
      if (i + 1 < dense_.size()) {
        h = nn::Relu(head_bn_[i].Forward(h, cache ? &cache->head_bn[i] : nullptr));
        if (cache) cache->hidden[i] = h;
      }
    }
    return h.col(0);
  }

  ModelSpec spec_;
  bool couplet_ = false;
  int nch_ = 3;
  int extra_ = 0;
  int out_time_ = 0;
  std::vector<int> widths_;
  std::vector<InputScaler> scalers_;
  InputScaler bite_scaler_;
  std::vector<std::vector<Block>> blocks_;  // [block][channel]
  std::vector<Dense> dense_;
  std::vector<BatchNorm> head_bn_;
  Cache cache_;
};

}  // namespace

std::unique_ptr<Network> MakeSonnetNet(const ModelSpec& spec) {
  return std::make_unique<SonnetNet>(spec);
}

}  // namespace sonnet::detail
