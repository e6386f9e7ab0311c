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

#include <random>

#include "sonnet/errors.hpp"
#include "sonnet/metrics.hpp"
#include "test_support.hpp"

using namespace sonnet;

namespace {

using Bits = std::vector<std::uint8_t>;

Bits Flip(Bits v) {
  for (auto& x : v) x = 1 - x;
  return v;
}

}  // namespace

TEST_CASE("metrics on the worked examples") {
  auto m = ComputeMetrics(Bits{1, 1, 1, 1}, Bits{1, 1, 1, 0});
  CHECK(m.accuracy == 0.75);
  CHECK(m.precision == 0.75);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == doctest::Approx(6.0 / 7.0));
  CHECK(m.nmcc == 0.5);

  m = ComputeMetrics(Bits{1, 0, 1, 0}, Bits{1, 0, 1, 0});
  CHECK(m.accuracy == 1.0);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.f1 == 1.0);
  CHECK(m.nmcc == 1.0);

  m = MetricsFromConfusion({3, 1, 1, 3});
  CHECK(m.mcc == 0.5);
  CHECK(m.nmcc == 0.75);

  m = ComputeMetrics(Bits{0, 0, 0}, Bits{1, 1, 0});
  CHECK(m.precision == 0.0);
  CHECK(m.recall == 0.0);
  CHECK(m.f1 == 0.0);
  CHECK(m.nmcc == 0.5);
}

TEST_CASE("metrics errors") {
  try {
    ComputeMetrics(Bits{1, 0}, Bits{1});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kLengthMismatch);
  }
  try {
    ComputeMetrics(Bits{}, Bits{});
    FAIL("expected Empty");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmpty);
  }
}

TEST_CASE("metrics match the enumeration oracle") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 500)(rng);
    const double p = std::uniform_real_distribution<double>(0, 1)(rng);
    std::bernoulli_distribution bit(p);
    Bits pred(n), label(n);
    for (int i = 0; i < n; ++i) {
      pred[i] = bit(rng);
      label[i] = bit(rng);
    }
    const auto got = ComputeMetrics(pred, label);
    const auto want = testing::OracleMetrics(pred, label);
    REQUIRE(got.accuracy == want.accuracy);
    REQUIRE(got.precision == want.precision);
    REQUIRE(got.recall == want.recall);
    REQUIRE(got.f1 == want.f1);
    REQUIRE(std::abs(got.nmcc - want.nmcc) <= 1e-12);
    for (double v : {got.accuracy, got.precision, got.recall, got.f1, got.nmcc}) {
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("nmcc symmetries") {
  std::mt19937_64 rng(7);
  std::bernoulli_distribution bit(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    Bits pred(50), label(50);
    for (int i = 0; i < 50; ++i) {
      pred[i] = bit(rng);
      label[i] = bit(rng);
    }
    const double base = ComputeMetrics(pred, label).nmcc;
    CHECK(ComputeMetrics(Flip(pred), Flip(label)).nmcc == doctest::Approx(base).epsilon(1e-12));
    CHECK(ComputeMetrics(Flip(pred), label).nmcc == doctest::Approx(1.0 - base).epsilon(1e-12));
  }
}

TEST_CASE("always feed gives nmcc one half and full recall") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    Bits label(37);
    for (auto& x : label) x = std::bernoulli_distribution(0.7)(rng);
    label[0] = 0;
    label[1] = 1;
    const auto m = ComputeMetrics(Bits(label.size(), 1), label);
    CHECK(m.nmcc == 0.5);
    CHECK(m.recall == 1.0);
  }
}

TEST_CASE("mean over folds is unweighted") {
  const Metrics a = MetricsFromConfusion({1, 0, 0, 9});
  const Metrics b = MetricsFromConfusion({0, 5, 5, 0});
  const Metrics items[] = {a, b};
  const auto m = MeanMetrics(items);
  CHECK(m.accuracy == doctest::Approx((a.accuracy + b.accuracy) / 2));
  CHECK(m.nmcc == doctest::Approx((a.nmcc + b.nmcc) / 2));
  CHECK(m.f1 == doctest::Approx(0.5));
  CHECK_THROWS_AS(MeanMetrics({}), Error);
}
