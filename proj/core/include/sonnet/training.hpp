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

// Gradient training with early stopping, leave-one-session-out evaluation
// and the feature-ablation runner.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "sonnet/metrics.hpp"
#include "sonnet/models.hpp"

namespace sonnet {

struct TrainConfig {
  double learning_rate = 1e-4;
  int batch_size = 128;
  int patience = 10;     // epochs without validation improvement before stopping
  int max_epochs = 100;
  std::uint64_t seed = 0;
  double validation_fraction = 0.2;  // LOSO: tail of each training session
  int jobs = 1;                      // LOSO folds trained concurrently

  void Validate() const;  // throws Error{InvalidConfig}
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0;
  double val_loss = 0;
};

struct TrainResult {
  TrainedModel model;
  std::vector<EpochRecord> history;
};

// Returns the weights of the best-validation epoch. Throws Error{EmptySplit}
// or Error{DivergedLoss}.
TrainResult Train(const ModelSpec& spec, std::span<const LabeledWindow> train,
                  std::span<const LabeledWindow> val, const TrainConfig& cfg);

// Mean binary cross-entropy of a model's scores on labeled windows.
double ValidationLoss(const TrainedModel& m, std::span<const LabeledWindow> windows);

struct SessionWindows {
  std::string session_id;
  std::vector<LabeledWindow> windows;
};

// Groups windows by session id, keeping first-seen session order.
std::vector<SessionWindows> GroupBySession(std::vector<LabeledWindow> windows);

// Splits one training session's windows: the last `fraction` by anchor time
// go to validation (at least one when the session has two or more).
void SplitTail(std::span<const LabeledWindow> windows, double fraction,
               std::vector<LabeledWindow>& train, std::vector<LabeledWindow>& val);

struct FoldResult {
  std::string held_out;
  Metrics metrics;
  Confusion confusion;
  std::size_t n_train = 0, n_val = 0, n_test = 0;
  int epochs_run = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

struct CVReport {
  std::string name;  // model / ablation label
  std::vector<FoldResult> folds;
  Metrics mean;    // unweighted mean over folds
  Metrics pooled;  // one confusion matrix over every test window
};

CVReport Aggregate(std::string name, std::vector<FoldResult> folds);

// One fold per session. Throws Error{TooFewSessions}.
CVReport LosoEvaluate(const ModelSpec& spec, std::span<const SessionWindows> sessions,
                      const TrainConfig& cfg, const std::string& name = "");

struct AblationRow {
  std::string name;  // "full" or "-speaking", "-bite+gaze_head", ...
  std::vector<FeatureGroup> masked;
  CVReport report;
};

// Baseline row plus one row per mask; masked columns are removed from every
// channel before training.
std::vector<AblationRow> RunAblation(const ModelSpec& spec, std::span<const SessionWindows> sessions,
                                     std::span<const std::vector<FeatureGroup>> masks,
                                     const TrainConfig& cfg);

// Table with columns model,fold,acc,prec,rec,f1,nmcc; one row per fold
// followed by "mean" and "pooled".
void WriteReportCsv(std::ostream& os, std::span<const CVReport> reports);
std::string ReportJson(std::span<const CVReport> reports);

}  // namespace sonnet
