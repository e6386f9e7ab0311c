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

#include <doctest.h>

#include <cmath>

#include "sonnet/nn/layers.hpp"

using namespace sonnet::nn;

namespace {

Matrix Randn(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> n01;
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n01(rng);
  return m;
}

// Direct definition of a padded, dilated 1-D convolution.
Matrix NaiveConv(const Matrix& x, int batch, const Matrix& w, const Matrix& b, int in, int kernel,
                 int dilation, int pad_left) {
  const Eigen::Index time = x.rows() / batch, out = w.cols();
  Matrix y = Matrix::Zero(x.rows(), out);
  for (int s = 0; s < batch; ++s)
    for (Eigen::Index t = 0; t < time; ++t)
      for (Eigen::Index f = 0; f < out; ++f) {
        double acc = b(0, f);
        for (int k = 0; k < kernel; ++k) {
          const Eigen::Index src = t + Eigen::Index(k) * dilation - pad_left;
          if (src < 0 || src >= time) continue;
          for (int c = 0; c < in; ++c) acc += x(s * time + src, c) * w(Eigen::Index(k) * in + c, f);
        }
        y(s * time + t, f) = acc;
      }
  return y;
}

double RelErr(double a, double b) { return std::abs(a - b) / std::max(1e-8, std::abs(a) + std::abs(b)); }

}  // namespace

TEST_CASE("conv1d forward matches the direct definition") {
  Rng rng(1);
  for (auto [kernel, dilation, padding] : {std::tuple{5, 1, Padding::kSame}, std::tuple{3, 2, Padding::kCausal},
                                           std::tuple{4, 3, Padding::kSame}, std::tuple{1, 1, Padding::kSame}}) {
    Conv1d conv("c", 3, 4, kernel, dilation, padding, rng);
    std::vector<Param*> ps;
    conv.CollectParams(ps);
    ps[1]->value = Randn(1, 4, rng);
    const Matrix x = Randn(2 * 11, 3, rng);
    const int total = (kernel - 1) * dilation;
    const int pad_left = padding == Padding::kCausal ? total : total / 2;
    const Matrix y = conv.Forward(x, 2, nullptr);
    const Matrix ref = NaiveConv(x, 2, ps[0]->value, ps[1]->value, 3, kernel, dilation, pad_left);
    CHECK((y - ref).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("conv1d gradients match finite differences") {
  Rng rng(2);
  Conv1d conv("c", 3, 4, 3, 2, Padding::kCausal, rng);
  const Matrix x = Randn(2 * 9, 3, rng);
  const Matrix g = Randn(2 * 9, 4, rng);
  Conv1d::Cache cache;
  conv.Forward(x, 2, &cache);
  std::vector<Param*> ps;
  conv.CollectParams(ps);
  for (auto* p : ps) p->ZeroGrad();
  const Matrix dx = conv.Backward(g, cache, true);
  auto loss = [&](const Matrix& in) { return (conv.Forward(in, 2, nullptr).array() * g.array()).sum(); };
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); i += 5) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    CHECK(RelErr((loss(xp) - loss(xm)) / (2 * h), dx.data()[i]) < 1e-6);
  }
  for (auto* p : ps)
    for (Eigen::Index i = 0; i < p->value.size(); i += 3) {
      const double keep = p->value.data()[i];
      p->value.data()[i] = keep + h;
      const double lp = loss(x);
      p->value.data()[i] = keep - h;
      const double lm = loss(x);
      p->value.data()[i] = keep;
      CHECK(RelErr((lp - lm) / (2 * h), p->grad.data()[i]) < 1e-6);
    }
}

TEST_CASE("batch norm gradients match finite differences") {
  Rng rng(3);
  BatchNorm bn("bn", 4);
  std::vector<Param*> ps;
  bn.CollectParams(ps);
  ps[0]->value = Randn(1, 4, rng);
  ps[1]->value = Randn(1, 4, rng);
  const Matrix x = Randn(12, 4, rng);
  const Matrix g = Randn(12, 4, rng);
  BatchNorm::Cache cache;
  bn.Forward(x, &cache);
  for (auto* p : ps) p->ZeroGrad();
  const Matrix dx = bn.Backward(g, cache);
  auto loss = [&](const Matrix& in) {
    BatchNorm::Cache c;
    return (bn.Forward(in, &c).array() * g.array()).sum();
  };
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp.data()[i] += h;
    xm.data()[i] -= h;
    CHECK(RelErr((loss(xp) - loss(xm)) / (2 * h), dx.data()[i]) < 1e-5);
  }
  for (int k = 0; k < 2; ++k)
    for (Eigen::Index i = 0; i < 4; ++i) {
      const double keep = ps[k]->value(0, i);
      ps[k]->value(0, i) = keep + h;
      const double lp = loss(x);
      ps[k]->value(0, i) = keep - h;
      const double lm = loss(x);
      ps[k]->value(0, i) = keep;
      CHECK(RelErr((lp - lm) / (2 * h), ps[k]->grad(0, i)) < 1e-6);
    }
}

TEST_CASE("batch norm running statistics") {
  BatchNorm bn("bn", 2, 0.1, 1e-3);
  Matrix x(4, 2);
  x << 1, 10, 2, 20, 3, 30, 4, 40;
  BatchNorm::Cache cache;
  const Matrix y = bn.Forward(x, &cache);
  // Training output is standardized per column.
  CHECK(std::abs(y.col(0).mean()) < 1e-12);
  bn.UpdateRunning(cache);
  std::vector<Param*> ps;
  bn.CollectParams(ps);
  CHECK(ps[2]->value(0, 0) == doctest::Approx(0.25));        // 0.1 * 2.5
  CHECK(ps[3]->value(0, 0) == doctest::Approx(0.9 + 0.1 * (5.0 / 3.0)));  // unbiased var 1.6667
  CHECK_FALSE(ps[2]->trainable);
}

TEST_CASE("dense and max pool gradients") {
  Rng rng(4);
  Dense d("d", 5, 3, rng);
  const Matrix x = Randn(4, 5, rng);
  const Matrix g = Randn(4, 3, rng);
  Dense::Cache c;
  d.Forward(x, &c);
  std::vector<Param*> ps;
  d.CollectParams(ps);
  for (auto* p : ps) p->ZeroGrad();
  const Matrix dx = d.Backward(g, c);
  CHECK((dx - g * ps[0]->value.transpose()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((ps[0]->grad - x.transpose() * g).cwiseAbs().maxCoeff() < 1e-12);

  Matrix seq(2 * 5, 1);
  seq << 1, 3, 2, 0, 9, 4, 1, 1, 7, 5;
  PoolCache pc;
  const Matrix p = MaxPool(seq, 2, 2, &pc);
  REQUIRE(p.rows() == 4);  // trailing frame of each sample dropped
  CHECK(p(0, 0) == 3);
  CHECK(p(1, 0) == 2);
  CHECK(p(2, 0) == 4);
  CHECK(p(3, 0) == 7);
  Matrix gp(4, 1);
  gp << 1, 2, 3, 4;
  const Matrix back = MaxPoolBackward(gp, pc, 1);
  Matrix expect(10, 1);
  expect << 0, 1, 2, 0, 0, 3, 0, 0, 4, 0;
  CHECK(back == expect);
}

TEST_CASE("binary cross-entropy on logits") {
  Eigen::VectorXd z(3), y(3), g;
  z << 0.0, 40.0, -3.0;
  y << 1.0, 1.0, 0.0;
  const double l = BceWithLogits(z, y, &g);
  const double expect = (std::log(2.0) + std::log1p(std::exp(-40.0)) + std::log1p(std::exp(-3.0))) / 3.0;
  CHECK(l == doctest::Approx(expect).epsilon(1e-12));
  CHECK(g[0] == doctest::Approx(-0.5 / 3.0));
  CHECK(Sigmoid(0.0) == 0.5);
  CHECK(Sigmoid(-800.0) >= 0.0);
  CHECK(Sigmoid(800.0) == 1.0);
}

TEST_CASE("adam first step moves by the learning rate") {
  Param p("p", 1, 2);
  p.value << 1.0, -1.0;
  p.grad << 0.5, -2.0;
  Adam adam(0.1);
  adam.Step({&p});
  // With bias correction the first update is lr * g / (|g| + eps').
  CHECK(p.value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.value(0, 1) == doctest::Approx(-0.9).epsilon(1e-6));
  Param frozen("f", 1, 1, false);
  frozen.grad << 1.0;
  Adam a2(0.1);
  a2.Step({&frozen});
  CHECK(frozen.value(0, 0) == 0.0);
}
