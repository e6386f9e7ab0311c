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

#include "sonnet/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <json.hpp>

#include "network.hpp"
#include "sonnet/errors.hpp"

namespace sonnet {

using nlohmann::json;

std::string_view ToString(ModelVariant v) {
  switch (v) {
    case ModelVariant::kTripletSonnet: return "triplet_sonnet";
    case ModelVariant::kCoupletSonnet: return "couplet_sonnet";
    case ModelVariant::kTripletTcn: return "triplet_tcn";
    case ModelVariant::kCoupletTcn: return "couplet_tcn";
    case ModelVariant::kLinearSgd: return "linear_sgd";
    case ModelVariant::kAlwaysFeed: return "always_feed";
  }
  return "?";
}

ModelVariant ParseModelVariant(std::string_view name) {
  for (auto v : {ModelVariant::kTripletSonnet, ModelVariant::kCoupletSonnet, ModelVariant::kTripletTcn,
                 ModelVariant::kCoupletTcn, ModelVariant::kLinearSgd, ModelVariant::kAlwaysFeed})
    if (ToString(v) == name) return v;
  throw Error(ErrorCode::kInvalidSpec, "unknown model variant '" + std::string(name) + "'");
}

bool IsCouplet(ModelVariant v) {
  return v == ModelVariant::kCoupletSonnet || v == ModelVariant::kCoupletTcn;
}

int ModelSpec::frames() const {
  const double n = k_seconds * fps;
  const auto r = std::llround(n);
  if (r <= 0 || std::abs(n - static_cast<double>(r)) > 1e-9)
    throw Error(ErrorCode::kInvalidSpec, "k_seconds * fps must be a positive integer");
  return static_cast<int>(r);
}

int ModelSpec::channels() const {
  switch (variant) {
    case ModelVariant::kTripletSonnet:
    case ModelVariant::kTripletTcn: return 3;
    case ModelVariant::kCoupletSonnet:
    case ModelVariant::kCoupletTcn: return 2;
    default: return 0;
  }
}

void ModelSpec::Validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidSpec, m); };
  if (fps <= 0 || k_seconds <= 0) fail("fps and k_seconds must be positive");
  const int n = frames();
  if (layout.bite && layout.gamma < 1) fail("gamma must be >= 1");
  if (layout.social_cols() == 0) fail("every social feature group is masked");
  switch (variant) {
    case ModelVariant::kTripletSonnet:
    case ModelVariant::kCoupletSonnet: {
      if (filters.empty()) fail("at least one convolution block is required");
      for (int f : filters)
        if (f <= 0) fail("filter counts must be positive");
      if (interleave.size() != filters.size()) fail("interleave needs one flag per block");
      if (kernel <= 0) fail("kernel must be positive");
      if (pool <= 0) fail("pool must be positive");
      int t = n;
      for (std::size_t i = 0; i < filters.size(); ++i) t /= pool;
      if (t < 1) fail("pooling leaves no frames");
      for (int h : head)
        if (h <= 0) fail("dense widths must be positive");
      break;
    }
    case ModelVariant::kTripletTcn:
    case ModelVariant::kCoupletTcn:
      if (tcn_filters <= 0) fail("filter counts must be positive");
      if (tcn_kernel <= 0 || tcn_stacks <= 0 || tcn_dilations.empty()) fail("bad TCN shape");
      for (int d : tcn_dilations)
        if (d <= 0) fail("dilations must be positive");
      break;
    case ModelVariant::kLinearSgd:
      if (!(sgd_alpha > 0) || sgd_epochs <= 0) fail("sgd_alpha and sgd_epochs must be positive");
      break;
    case ModelVariant::kAlwaysFeed: break;
  }
  if (IsCouplet(variant) && channels() != 2) fail("couplet variants use two channels");
}

ModelSpec ModelSpec::Default(ModelVariant v) {
  ModelSpec s;
  s.variant = v;
  return s;
}

ModelSpec ModelSpec::Reduced(ModelVariant v) {
  ModelSpec s = Default(v);
  s.filters = {8, 12, 16};
  s.head = {32};
  s.tcn_filters = 16;
  s.tcn_kernel = 3;
  s.tcn_dilations = {1, 2, 4, 8, 16};
  s.tcn_stacks = 1;
  return s;
}

std::string ModelSpecToJson(const ModelSpec& s) {
  json j;
  j["variant"] = ToString(s.variant);
  j["layout"] = {{"speaking", s.layout.speaking},   {"gaze_head", s.layout.gaze_head},
                 {"body_face", s.layout.body_face}, {"bite", s.layout.bite},
                 {"gamma", s.layout.gamma}};
  j["k_seconds"] = s.k_seconds;
  j["fps"] = s.fps;
  j["filters"] = s.filters;
  j["kernel"] = s.kernel;
  j["pool"] = s.pool;
  j["interleave"] = s.interleave;
  j["head"] = s.head;
  j["tcn_filters"] = s.tcn_filters;
  j["tcn_kernel"] = s.tcn_kernel;
  j["tcn_dilations"] = s.tcn_dilations;
  j["tcn_stacks"] = s.tcn_stacks;
  j["sgd_alpha"] = s.sgd_alpha;
  j["sgd_epochs"] = s.sgd_epochs;
  j["sgd_shuffle"] = s.sgd_shuffle;
  j["seed"] = s.seed;
  return j.dump();
}

ModelSpec ModelSpecFromJson(std::string_view text) {
  try {
    const json j = json::parse(text);
    ModelSpec s = ModelSpec::Default(ParseModelVariant(j.at("variant").get<std::string>()));
    const auto& l = j.at("layout");
    s.layout.speaking = l.at("speaking");
    s.layout.gaze_head = l.at("gaze_head");
    s.layout.body_face = l.at("body_face");
    s.layout.bite = l.at("bite");
    s.layout.gamma = l.at("gamma");
    s.k_seconds = j.at("k_seconds");
    s.fps = j.at("fps");
    s.filters = j.at("filters").get<std::vector<int>>();
    s.kernel = j.at("kernel");
    s.pool = j.at("pool");
    s.interleave = j.at("interleave").get<std::vector<bool>>();
    s.head = j.at("head").get<std::vector<int>>();
    s.tcn_filters = j.at("tcn_filters");
    s.tcn_kernel = j.at("tcn_kernel");
    s.tcn_dilations = j.at("tcn_dilations").get<std::vector<int>>();
    s.tcn_stacks = j.at("tcn_stacks");
    s.sgd_alpha = j.at("sgd_alpha");
    s.sgd_epochs = j.at("sgd_epochs");
    s.sgd_shuffle = j.at("sgd_shuffle");
    s.seed = j.at("seed");
    return s;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidSpec, std::string("bad model spec: ") + e.what());
  }
}

// ---- detail ------------------------------------------------------------------

namespace detail {

InputScaler::InputScaler(const std::string& name, int width)
    : mean_(name + ".mean", 1, width, false), inv_std_(name + ".inv_std", 1, width, false) {
  inv_std_.value.setOnes();
}

void InputScaler::Fit(const std::vector<const Matrix*>& blocks) {
  const Eigen::Index w = mean_.value.cols();
  Eigen::RowVectorXd sum = Eigen::RowVectorXd::Zero(w);
  double n = 0;
  for (const Matrix* m : blocks) {
    sum += m->colwise().sum();
    n += static_cast<double>(m->rows());
  }
  if (n == 0) return;
  const Eigen::RowVectorXd mean = sum / n;
  Eigen::RowVectorXd sq = Eigen::RowVectorXd::Zero(w);
  for (const Matrix* m : blocks) sq += (m->rowwise() - mean).array().square().colwise().sum().matrix();
  mean_.value.row(0) = mean;
  for (Eigen::Index c = 0; c < w; ++c) {
    const double sd = std::sqrt(sq[c] / n);
    inv_std_.value(0, c) = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
}

void InputScaler::Apply(Matrix& x) const {
  x.rowwise() -= mean_.value.row(0);
  x.array().rowwise() *= inv_std_.value.row(0).array();
}

void InputScaler::CollectParams(std::vector<Param*>& out) {
  out.push_back(&mean_);
  out.push_back(&inv_std_);
}

Eigen::VectorXd Network::TrainForward(Windows) {
  throw Error(ErrorCode::kInvalidSpec, "model is not trained by gradient descent");
}

void Network::Backward(const Eigen::VectorXd&) {
  throw Error(ErrorCode::kInvalidSpec, "model is not trained by gradient descent");
}

std::vector<Matrix> Network::ProbeBlock(const LabeledWindow&, int) const {
  throw Error(ErrorCode::kInvalidSpec, "model has no interleaved blocks");
}

Matrix Network::TcnSequence(const LabeledWindow&) const {
  throw Error(ErrorCode::kInvalidSpec, "model is not a temporal convolution network");
}

namespace {

class AlwaysFeedNet final : public Network {
 public:
  Eigen::VectorXd Logits(Windows batch) const override {
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(batch.size()),
                                     std::numeric_limits<double>::infinity());
  }
  void CollectParams(std::vector<Param*>&) override {}
  void FitInputScaler(Windows) override {}
  bool differentiable() const override { return false; }
};

}  // namespace

std::unique_ptr<Network> MakeAlwaysFeedNet() { return std::make_unique<AlwaysFeedNet>(); }

}  // namespace detail

// ---- TrainedModel ------------------------------------------------------------

namespace {

std::unique_ptr<detail::Network> MakeNetwork(const ModelSpec& spec) {
  switch (spec.variant) {
    case ModelVariant::kTripletSonnet:
    case ModelVariant::kCoupletSonnet: return detail::MakeSonnetNet(spec);
    case ModelVariant::kTripletTcn:
    case ModelVariant::kCoupletTcn: return detail::MakeTcnNet(spec);
    case ModelVariant::kLinearSgd: return detail::MakeLinearNet(spec);
    case ModelVariant::kAlwaysFeed: return detail::MakeAlwaysFeedNet();
  }
  throw Error(ErrorCode::kInvalidSpec, "unknown variant");
}

constexpr std::size_t kInferenceChunk = 64;

}  // namespace

TrainedModel::TrainedModel(const ModelSpec& spec) : spec_(spec) {
  spec_.Validate();
  net_ = MakeNetwork(spec_);
  metadata.seed = spec_.seed;
}

TrainedModel::~TrainedModel() = default;
TrainedModel::TrainedModel(TrainedModel&&) noexcept = default;
TrainedModel& TrainedModel::operator=(TrainedModel&&) noexcept = default;

void TrainedModel::CheckShape(const LabeledWindow& w) const {
  if (spec_.variant == ModelVariant::kAlwaysFeed) return;
  const auto n = spec_.frames();
  const auto& lay = spec_.layout;
  auto bad = [&](const std::string& what) {
    throw Error(ErrorCode::kShapeMismatch, what + " does not match the model spec");
  };
  if (w.L.rows() != n || w.R.rows() != n) bad("window length");
  if (w.L.cols() != lay.codiner_cols() || w.R.cols() != lay.codiner_cols()) bad("co-diner width");
  if (IsCouplet(spec_.variant)) {
    // Only the bite columns of the user channel are read.
    if (lay.bite) {
      if (w.U.rows() != n) bad("window length");
      if (w.U.cols() != lay.user_cols() && w.U.cols() != lay.bite_cols()) bad("user width");
    }
  } else {
    if (w.U.rows() != n) bad("window length");
    if (w.U.cols() != lay.user_cols()) bad("user width");
  }
}

Eigen::VectorXd TrainedModel::Logits(std::span<const LabeledWindow* const> windows) const {
  for (const auto* w : windows) CheckShape(*w);
  Eigen::VectorXd out(static_cast<Eigen::Index>(windows.size()));
  for (std::size_t i = 0; i < windows.size(); i += kInferenceChunk) {
    const auto len = std::min(kInferenceChunk, windows.size() - i);
    out.segment(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(len)) =
        net_->Logits(windows.subspan(i, len));
  }
  return out;
}

std::vector<double> TrainedModel::Scores(std::span<const LabeledWindow* const> windows) const {
  const Eigen::VectorXd z = Logits(windows);
  std::vector<double> out(static_cast<std::size_t>(z.size()));
  for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = nn::Sigmoid(z[i]);
  return out;
}

std::vector<double> TrainedModel::Scores(std::span<const LabeledWindow> windows) const {
  std::vector<const LabeledWindow*> ptrs;
  ptrs.reserve(windows.size());
  for (const auto& w : windows) ptrs.push_back(&w);
  return Scores(std::span<const LabeledWindow* const>(ptrs));
}

Prediction TrainedModel::Forward(const LabeledWindow& w) const {
  const LabeledWindow* p = &w;
  const double s = Scores(std::span<const LabeledWindow* const>(&p, 1))[0];
  return {s, s >= 0.5};
}

std::size_t TrainedModel::ParameterCount() const {
  std::size_t n = 0;
  for (const auto* p : Params())
    if (p->trainable) n += static_cast<std::size_t>(p->value.size());
  return n;
}

std::string TrainedModel::MetadataJson() const {
  json j;
  j["spec"] = json::parse(ModelSpecToJson(spec_));
  j["parameter_count"] = ParameterCount();
  j["epochs_run"] = metadata.epochs_run;
  j["best_epoch"] = metadata.best_epoch;
  j["best_val_loss"] = metadata.best_val_loss;
  j["seed"] = metadata.seed;
  j["trained"] = metadata.trained;
  return j.dump();
}

bool TrainedModel::differentiable() const { return net_->differentiable(); }

void TrainedModel::FitInputScaler(std::span<const LabeledWindow* const> windows) {
  for (const auto* w : windows) CheckShape(*w);
  net_->FitInputScaler(windows);
}

Eigen::VectorXd TrainedModel::TrainForward(std::span<const LabeledWindow* const> windows) {
  for (const auto* w : windows) CheckShape(*w);
  return net_->TrainForward(windows);
}

void TrainedModel::Backward(const Eigen::VectorXd& dlogits) { net_->Backward(dlogits); }

std::vector<nn::Param*> TrainedModel::Params() {
  std::vector<nn::Param*> ps;
  net_->CollectParams(ps);
  return ps;
}

std::vector<const nn::Param*> TrainedModel::Params() const {
  std::vector<nn::Param*> ps;
  net_->CollectParams(ps);  // collection only reads addresses
  return {ps.begin(), ps.end()};
}

void TrainedModel::ZeroGrad() {
  for (auto* p : Params()) p->ZeroGrad();
}

std::vector<std::int64_t> TrainedModel::ActivationPattern() const { return net_->ActivationPattern(); }

std::vector<double> TrainedModel::SaveState() const {
  std::vector<double> out;
  for (const auto* p : Params()) out.insert(out.end(), p->value.data(), p->value.data() + p->value.size());
  return out;
}

void TrainedModel::LoadState(std::span<const double> state) {
  std::size_t off = 0;
  for (auto* p : Params()) {
    const auto n = static_cast<std::size_t>(p->value.size());
    if (off + n > state.size()) throw Error(ErrorCode::kShapeMismatch, "state vector too short");
    std::copy_n(state.data() + off, n, p->value.data());
    off += n;
  }
  if (off != state.size()) throw Error(ErrorCode::kShapeMismatch, "state vector too long");
}

std::vector<Matrix> TrainedModel::ProbeBlock(const LabeledWindow& w, int block) const {
  CheckShape(w);
  return net_->ProbeBlock(w, block);
}

Matrix TrainedModel::TcnSequence(const LabeledWindow& w) const {
  CheckShape(w);
  return net_->TcnSequence(w);
}

TrainedModel BuildModel(const ModelSpec& spec) { return TrainedModel(spec); }

Prediction Forward(const TrainedModel& m, const LabeledWindow& w) { return m.Forward(w); }

}  // namespace sonnet
