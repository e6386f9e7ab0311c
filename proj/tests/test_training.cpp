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

#include <chrono>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sonnet/errors.hpp"
#include "sonnet/training.hpp"
#include "test_support.hpp"

using namespace sonnet;

namespace {

WindowLayout SmallLayout() {
  WindowLayout l;
  l.gamma = 2;
  return l;
}

std::vector<SessionWindows> ToyData(int sessions, LabelCoupling coupling = LabelCoupling::kCoDiner,
                                    double duration_s = 200) {
  SyntheticConfig cfg;
  cfg.seed = 77;
  cfg.n_sessions = sessions;
  cfg.duration_s = duration_s;
  cfg.coupling = coupling;
  return testing::SyntheticDataset(cfg, WindowSpec{}, SmallLayout());
}

ModelSpec TinySonnet(std::uint64_t seed = 1) {
  auto spec = ModelSpec::Reduced(ModelVariant::kTripletSonnet);
  spec.layout = SmallLayout();
  spec.filters = {4, 4, 4};
  spec.head = {8};
  spec.seed = seed;
  return spec;
}

std::vector<LabeledWindow> Flatten(const std::vector<SessionWindows>& data) {
  std::vector<LabeledWindow> out;
  for (const auto& s : data) out.insert(out.end(), s.windows.begin(), s.windows.end());
  return out;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig cfg;
  CHECK(cfg.learning_rate == 1e-4);
  CHECK(cfg.batch_size == 128);
  CHECK(cfg.patience == 10);
  CHECK_NOTHROW(cfg.Validate());
  cfg.patience = 0;
  CHECK_THROWS_AS(cfg.Validate(), Error);
}

TEST_CASE("patience one stops after two epochs of worsening validation loss") {
  const auto data = ToyData(2);
  const auto train = Flatten(data);
  auto val = train;
  for (auto& w : val) w.label = 1 - w.label;  // fitting the training set hurts here
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  cfg.patience = 1;
  cfg.max_epochs = 20;
  const auto r = Train(TinySonnet(), train, val, cfg);
  REQUIRE(r.history.size() == 2);
  CHECK(r.history[1].val_loss > r.history[0].val_loss);
  CHECK(r.model.metadata.best_epoch == 1);
  CHECK(r.model.metadata.epochs_run == 2);
  // The restored weights are the epoch-one weights.
  CHECK(ValidationLoss(r.model, val) == doctest::Approx(r.history[0].val_loss).epsilon(1e-12));
}

TEST_CASE("training is deterministic under a fixed seed") {
  const auto data = ToyData(2);
  std::vector<LabeledWindow> train, val;
  SplitTail(Flatten(data), 0.2, train, val);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.max_epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = 9;
  const auto a = Train(TinySonnet(), train, val, cfg);
  const auto b = Train(TinySonnet(), train, val, cfg);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(a.history[i].train_loss == b.history[i].train_loss);
    CHECK(a.history[i].val_loss == b.history[i].val_loss);
  }
  CHECK(a.model.Scores(std::span<const LabeledWindow>(val)) ==
        b.model.Scores(std::span<const LabeledWindow>(val)));
  cfg.seed = 10;
  const auto c = Train(TinySonnet(), train, val, cfg);
  CHECK(c.history[0].train_loss != a.history[0].train_loss);
}

TEST_CASE("training errors") {
  const auto data = ToyData(1);
  const auto ws = Flatten(data);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  try {
    Train(TinySonnet(), {}, ws, cfg);
    FAIL("expected EmptySplit");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptySplit);
  }
  auto poisoned = ws;
  poisoned[0].U(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    Train(TinySonnet(), poisoned, ws, cfg);
    FAIL("expected DivergedLoss");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDivergedLoss);
  }
}

TEST_CASE("validation split takes the tail of a session") {
  std::vector<LabeledWindow> ws(10);
  for (int i = 0; i < 10; ++i) ws[i].anchor_ms = (i * 7919) % 10 * 1000;
  std::vector<LabeledWindow> train, val;
  SplitTail(ws, 0.2, train, val);
  REQUIRE(val.size() == 2);
  CHECK(train.size() == 8);
  CHECK(val[0].anchor_ms == 8000);
  CHECK(val[1].anchor_ms == 9000);
  for (const auto& w : train) CHECK(w.anchor_ms < 8000);
  train.clear();
  val.clear();
  SplitTail(std::span<const LabeledWindow>(ws).first(3), 0.2, train, val);
  CHECK(val.size() == 1);
}

TEST_CASE("LOSO folds partition the sessions") {
  const auto data = ToyData(3);
  TrainConfig cfg;
  cfg.max_epochs = 2;
  cfg.learning_rate = 1e-3;
  cfg.batch_size = 32;
  const auto report = LosoEvaluate(TinySonnet(), data, cfg);
  CHECK(report.name == "triplet_sonnet");
  REQUIRE(report.folds.size() == 3);
  std::set<std::string> held;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& f = report.folds[i];
    held.insert(f.held_out);
    CHECK(f.held_out == data[i].session_id);
    CHECK(f.n_test == data[i].windows.size());
    std::size_t others = 0;
    for (std::size_t j = 0; j < 3; ++j)
      if (j != i) others += data[j].windows.size();
    CHECK(f.n_train + f.n_val == others);
    for (std::size_t k = 0; k < f.labels.size(); ++k) CHECK(f.labels[k] == data[i].windows[k].label);
  }
  CHECK(held.size() == 3);
  // Aggregate is the plain mean of the fold metrics.
  double acc = 0, nmcc = 0;
  for (const auto& f : report.folds) {
    acc += f.metrics.accuracy;
    nmcc += f.metrics.nmcc;
  }
  CHECK(report.mean.accuracy == doctest::Approx(acc / 3));
  CHECK(report.mean.nmcc == doctest::Approx(nmcc / 3));

  // Fold parallelism does not change the results.
  cfg.jobs = 3;
  const auto parallel = LosoEvaluate(TinySonnet(), data, cfg);
  for (std::size_t i = 0; i < 3; ++i) CHECK(parallel.folds[i].scores == report.folds[i].scores);

  try {
    LosoEvaluate(TinySonnet(), std::span<const SessionWindows>(data).first(1), cfg);
    FAIL("expected TooFewSessions");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kTooFewSessions);
  }
}

TEST_CASE("always feed under LOSO") {
  const auto data = ToyData(3);
  const auto report = LosoEvaluate(ModelSpec::Default(ModelVariant::kAlwaysFeed), data, TrainConfig{});
  for (const auto& f : report.folds) {
    CHECK(f.metrics.recall == 1.0);
    CHECK(f.metrics.nmcc == 0.5);
  }
  CHECK(report.mean.nmcc == 0.5);
}

TEST_CASE("ablation drops the masked columns before training") {
  auto data = ToyData(3);
  // Poison every bite column: training must never read them once masked.
  for (auto& s : data)
    for (auto& w : s.windows)
      w.U.rightCols(SmallLayout().bite_cols()).setConstant(std::numeric_limits<double>::quiet_NaN());
  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 32;
  auto spec = TinySonnet();
  const std::vector<std::vector<FeatureGroup>> masks = {{FeatureGroup::kBite}};
  // The unmasked baseline reads the poisoned columns and diverges...
  CHECK_THROWS_AS(RunAblation(spec, data, masks, cfg), Error);
  // ...while the masked run alone is finite.
  std::vector<SessionWindows> reduced = data;
  WindowLayout lay;
  for (auto& s : reduced) {
    const FeatureGroup bite[] = {FeatureGroup::kBite};
    lay = AblateWindows(s.windows, spec.layout, bite);
  }
  CHECK(lay.user_cols() == spec.layout.user_cols() - 2 * spec.layout.gamma);
  spec.layout = lay;
  const auto report = LosoEvaluate(spec, reduced, cfg);
  CHECK(std::isfinite(report.mean.nmcc));
}

TEST_CASE("ablation rows and the empty mask") {
  const auto data = ToyData(3);
  TrainConfig cfg;
  cfg.max_epochs = 1;
  cfg.batch_size = 32;
  const std::vector<std::vector<FeatureGroup>> masks = {
      {}, {FeatureGroup::kSpeaking}, {FeatureGroup::kBite, FeatureGroup::kGazeHead}};
  const auto rows = RunAblation(TinySonnet(), data, masks, cfg);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].name == "full");
  CHECK(rows[2].name == "-speaking");
  CHECK(rows[3].name == "-bite+gaze_head");
  // An empty mask reproduces the plain evaluation exactly.
  const auto plain = LosoEvaluate(TinySonnet(), data, cfg);
  for (std::size_t i = 0; i < plain.folds.size(); ++i) {
    CHECK(rows[1].report.folds[i].scores == plain.folds[i].scores);
    CHECK(rows[0].report.folds[i].scores == plain.folds[i].scores);
  }
}

TEST_CASE("report tables") {
  const auto data = ToyData(3);
  const std::vector<CVReport> reports = {
      LosoEvaluate(ModelSpec::Default(ModelVariant::kAlwaysFeed), data, TrainConfig{})};
  std::ostringstream os;
  WriteReportCsv(os, reports);
  std::istringstream in(os.str());
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 1 + 3 + 2);
  CHECK(lines[0] == "model,fold,acc,prec,rec,f1,nmcc");
  CHECK(lines[4].starts_with("always_feed,mean,"));
  CHECK(lines[5].starts_with("always_feed,pooled,"));
  const auto j = nlohmann::json::parse(ReportJson(reports));
  CHECK(j[0]["folds"].size() == 3);
  CHECK(j[0]["mean"]["nmcc"] == 0.5);
}

TEST_CASE("smoke: a reduced triplet net separates co-diner-coupled data") {
  SyntheticConfig sc;
  sc.seed = 5;
  sc.n_sessions = 5;
  sc.duration_s = 600;
  sc.coupling = LabelCoupling::kCoDiner;
  WindowLayout layout;
  layout.gamma = 10;
  const auto data = testing::SyntheticDataset(sc, WindowSpec{}, layout);
  std::vector<LabeledWindow> train, val;
  for (const auto& s : data) SplitTail(s.windows, 0.2, train, val);
  auto spec = ModelSpec::Reduced(ModelVariant::kTripletSonnet);
  spec.layout = layout;
  spec.seed = 1;
  TrainConfig cfg;
  cfg.learning_rate = 5e-3;
  cfg.batch_size = 16;
  cfg.max_epochs = 50;
  cfg.patience = 10;
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = Train(spec, train, val, cfg);
  std::vector<std::uint8_t> pred, label;
  const auto scores = r.model.Scores(std::span<const LabeledWindow>(val));
  for (std::size_t i = 0; i < val.size(); ++i) {
    pred.push_back(scores[i] >= 0.5);
    label.push_back(val[i].label);
  }
  const auto m = ComputeMetrics(pred, label);
  MESSAGE("train " << train.size() << " val " << val.size() << " epochs " << r.history.size()
                   << " nmcc " << m.nmcc << " in "
                   << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s");
  CHECK(r.history.size() <= 50);
  CHECK(m.nmcc >= 0.95);
}
