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

#include "sonnet/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <json.hpp>
#include <map>
#include <mutex>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "sonnet/errors.hpp"
#include "text_util.hpp"

namespace sonnet {

void TrainConfig::Validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidConfig, m); };
  if (!(learning_rate > 0)) fail("learning_rate must be positive");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (patience < 1) fail("patience must be >= 1");
  if (max_epochs <= 0) fail("max_epochs must be positive");
  if (!(validation_fraction > 0 && validation_fraction < 1)) fail("validation_fraction must be in (0,1)");
  if (jobs <= 0) fail("jobs must be positive");
}

namespace {

std::vector<const LabeledWindow*> Pointers(std::span<const LabeledWindow> ws) {
  std::vector<const LabeledWindow*> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.push_back(&w);
  return out;
}

Eigen::VectorXd Labels(std::span<const LabeledWindow* const> ws) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(ws.size()));
  for (std::size_t i = 0; i < ws.size(); ++i) y[static_cast<Eigen::Index>(i)] = ws[i]->label;
  return y;
}

}  // namespace

double ValidationLoss(const TrainedModel& m, std::span<const LabeledWindow> windows) {
  const auto ptrs = Pointers(windows);
  return nn::BceWithLogits(m.Logits(ptrs), Labels(ptrs), nullptr);
}

TrainResult Train(const ModelSpec& spec, std::span<const LabeledWindow> train,
                  std::span<const LabeledWindow> val, const TrainConfig& cfg) {
  cfg.Validate();
  if (train.empty()) throw Error(ErrorCode::kEmptySplit, "training split is empty");
  if (val.empty()) throw Error(ErrorCode::kEmptySplit, "validation split is empty");

  if (spec.variant == ModelVariant::kLinearSgd) {
    TrainResult r{FitLinearSgd(spec, train), {}};
    r.history.push_back({1, std::nan(""), ValidationLoss(r.model, val)});
    r.model.metadata.best_epoch = 1;
    r.model.metadata.best_val_loss = r.history.back().val_loss;
    return r;
  }
  TrainedModel model(spec);
  if (!model.differentiable()) {
    model.metadata.trained = true;
    return {std::move(model), {}};
  }

  auto train_ptrs = Pointers(train);
  model.FitInputScaler(train_ptrs);
  const auto params = model.Params();
  nn::Adam adam(cfg.learning_rate);
  std::mt19937_64 rng(cfg.seed);

  std::vector<EpochRecord> history;
  std::vector<double> best_state = model.SaveState();
  double best = std::numeric_limits<double>::infinity();
  int best_epoch = 0, since_best = 0;
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(train_ptrs.begin(), train_ptrs.end(), rng);
    double loss_sum = 0;
    for (std::size_t i = 0; i < train_ptrs.size(); i += bs) {
      const auto batch = std::span<const LabeledWindow* const>(train_ptrs).subspan(
          i, std::min(bs, train_ptrs.size() - i));
      model.ZeroGrad();
      const Eigen::VectorXd logits = model.TrainForward(batch);
      Eigen::VectorXd grad;
      const double loss = nn::BceWithLogits(logits, Labels(batch), &grad);
      if (!std::isfinite(loss))
        throw Error(ErrorCode::kDivergedLoss, "training loss became non-finite at epoch " +
                                                  std::to_string(epoch));
      loss_sum += loss * static_cast<double>(batch.size());
      model.Backward(grad);
      adam.Step(params);
    }
    const double val_loss = ValidationLoss(model, val);
    if (!std::isfinite(val_loss))
      throw Error(ErrorCode::kDivergedLoss, "validation loss became non-finite at epoch " +
                                                std::to_string(epoch));
    history.push_back({epoch, loss_sum / static_cast<double>(train_ptrs.size()), val_loss});
    if (val_loss < best) {
      best = val_loss;
      best_epoch = epoch;
      best_state = model.SaveState();
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  model.LoadState(best_state);
  model.metadata.epochs_run = static_cast<int>(history.size());
  model.metadata.best_epoch = best_epoch;
  model.metadata.best_val_loss = best;
  model.metadata.seed = spec.seed;
  model.metadata.trained = true;
  return {std::move(model), std::move(history)};
}

std::vector<SessionWindows> GroupBySession(std::vector<LabeledWindow> windows) {
  std::vector<SessionWindows> out;
  std::map<std::string, std::size_t> index;
  for (auto& w : windows) {
    auto [it, fresh] = index.emplace(w.session_id, out.size());
    if (fresh) out.push_back({w.session_id, {}});
    out[it->second].windows.push_back(std::move(w));
  }
  return out;
}

void SplitTail(std::span<const LabeledWindow> windows, double fraction,
               std::vector<LabeledWindow>& train, std::vector<LabeledWindow>& val) {
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return windows[a].anchor_ms < windows[b].anchor_ms;
  });
  std::size_t n_val = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(windows.size())));
  if (n_val == 0 && windows.size() >= 2) n_val = 1;
  const std::size_t cut = windows.size() - n_val;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < cut ? train : val).push_back(windows[order[i]]);
}

CVReport Aggregate(std::string name, std::vector<FoldResult> folds) {
  CVReport r;
  r.name = std::move(name);
  r.folds = std::move(folds);
  std::vector<Metrics> ms;
  Confusion pooled;
  for (const auto& f : r.folds) {
    ms.push_back(f.metrics);
    pooled.tp += f.confusion.tp;
    pooled.fp += f.confusion.fp;
    pooled.fn += f.confusion.fn;
    pooled.tn += f.confusion.tn;
  }
  r.mean = MeanMetrics(ms);
  r.pooled = MetricsFromConfusion(pooled);
  return r;
}

namespace {

FoldResult RunFold(const ModelSpec& spec, std::span<const SessionWindows> sessions, std::size_t held,
                   const TrainConfig& cfg) {
  std::vector<LabeledWindow> train, val;
  for (std::size_t s = 0; s < sessions.size(); ++s)
    if (s != held) SplitTail(sessions[s].windows, cfg.validation_fraction, train, val);
  const auto& test = sessions[held].windows;
  if (test.empty())
    throw Error(ErrorCode::kEmptySplit, "session " + sessions[held].session_id + " has no windows");
  TrainResult tr = Train(spec, train, val, cfg);
  FoldResult f;
  f.held_out = sessions[held].session_id;
  f.n_train = train.size();
  f.n_val = val.size();
  f.n_test = test.size();
  f.epochs_run = tr.model.metadata.epochs_run;
  f.scores = tr.model.Scores(std::span<const LabeledWindow>(test));
  std::vector<std::uint8_t> preds;
  for (std::size_t i = 0; i < test.size(); ++i) {
    preds.push_back(f.scores[i] >= 0.5);
    f.labels.push_back(test[i].label);
  }
  f.confusion = CountConfusion(preds, f.labels);
  f.metrics = MetricsFromConfusion(f.confusion);
  return f;
}

}  // namespace

CVReport LosoEvaluate(const ModelSpec& spec, std::span<const SessionWindows> sessions,
                      const TrainConfig& cfg, const std::string& name) {
  cfg.Validate();
  if (sessions.size() < 2) throw Error(ErrorCode::kTooFewSessions, "LOSO needs at least two sessions");
  std::vector<FoldResult> folds(sessions.size());
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.jobs), sessions.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < sessions.size(); ++i) folds[i] = RunFold(spec, sessions, i, cfg);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < sessions.size();) {
          try {
            folds[i] = RunFold(spec, sessions, i, cfg);
          } catch (...) {
            std::lock_guard lock(mu);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }
  return Aggregate(name.empty() ? std::string(ToString(spec.variant)) : name, std::move(folds));
}

std::vector<AblationRow> RunAblation(const ModelSpec& spec, std::span<const SessionWindows> sessions,
                                     std::span<const std::vector<FeatureGroup>> masks,
                                     const TrainConfig& cfg) {
  std::vector<AblationRow> rows;
  rows.push_back({"full", {}, LosoEvaluate(spec, sessions, cfg, "full")});
  for (const auto& mask : masks) {
    std::string name;
    for (auto g : mask) name += (name.empty() ? "-" : "+") + std::string(ToString(g));
    std::vector<SessionWindows> reduced(sessions.begin(), sessions.end());
    ModelSpec s = spec;
    for (auto& sw : reduced) s.layout = AblateWindows(sw.windows, spec.layout, mask);
    if (reduced.empty()) s.layout = spec.layout;
    rows.push_back({name, mask, LosoEvaluate(s, reduced, cfg, name)});
  }
  return rows;
}

namespace {

void CsvRow(std::ostream& os, const std::string& model, const std::string& fold, const Metrics& m) {
  using text::FormatDouble;
  os << model << ',' << fold << ',' << FormatDouble(m.accuracy) << ',' << FormatDouble(m.precision) << ','
     << FormatDouble(m.recall) << ',' << FormatDouble(m.f1) << ',' << FormatDouble(m.nmcc) << '\n';
}

nlohmann::json MetricsJson(const Metrics& m) {
  return {{"acc", m.accuracy}, {"prec", m.precision}, {"rec", m.recall},
          {"f1", m.f1},        {"mcc", m.mcc},        {"nmcc", m.nmcc}};
}

}  // namespace

void WriteReportCsv(std::ostream& os, std::span<const CVReport> reports) {
  os << "model,fold,acc,prec,rec,f1,nmcc\n";
  for (const auto& r : reports) {
    for (const auto& f : r.folds) CsvRow(os, r.name, f.held_out, f.metrics);
    CsvRow(os, r.name, "mean", r.mean);
    CsvRow(os, r.name, "pooled", r.pooled);
  }
}

std::string ReportJson(std::span<const CVReport> reports) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json folds = nlohmann::json::array();
    for (const auto& f : r.folds)
      folds.push_back({{"held_out", f.held_out},
                       {"metrics", MetricsJson(f.metrics)},
                       {"confusion", {{"tp", f.confusion.tp}, {"fp", f.confusion.fp},
                                      {"fn", f.confusion.fn}, {"tn", f.confusion.tn}}},
                       {"n_train", f.n_train},
                       {"n_val", f.n_val},
                       {"n_test", f.n_test},
                       {"epochs_run", f.epochs_run}});
    out.push_back({{"model", r.name}, {"folds", folds}, {"mean", MetricsJson(r.mean)},
                   {"pooled", MetricsJson(r.pooled)}});
  }
  return out.dump(2);
}

}  // namespace sonnet
