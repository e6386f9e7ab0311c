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

#include "sonnet/nn/layers.hpp"

#include <cmath>
#include <limits>

namespace sonnet::nn {

Param::Param(std::string n, Eigen::Index rows, Eigen::Index cols, bool train)
    : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)),
      trainable(train) {}

void GlorotUniform(Matrix& w, double fan_in, double fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
}

// ---- Conv1d ----------------------------------------------------------------
//
// Each sample is zero padded and the padded samples are stacked into one tall
// matrix P. Output row r of the stacked result is sum_k P[r + k*d] * W_k, which
// is K dense GEMMs over shifted row blocks. Rows that straddle two samples are
// computed and then ignored.

Conv1d::Conv1d(const std::string& name, int in_channels, int filters, int kernel, int dilation,
               Padding padding, Rng& rng)
    : in_(in_channels), out_(filters), kernel_(kernel), dilation_(dilation),
      weight_(name + ".w", static_cast<Eigen::Index>(kernel) * in_channels, filters),
      bias_(name + ".b", 1, filters) {
  const int total = (kernel - 1) * dilation;
  if (padding == Padding::kCausal) {
    pad_left_ = total;
    pad_right_ = 0;
  } else {
    pad_left_ = total / 2;
    pad_right_ = total - pad_left_;
  }
  GlorotUniform(weight_.value, double(kernel) * in_channels, double(kernel) * filters, rng);
}

Matrix Conv1d::Forward(const Matrix& x, int batch, Cache* cache) const {
  const int time = static_cast<int>(x.rows() / batch);
  Matrix y(x.rows(), out_);
  if (kernel_ == 1) {
    y.noalias() = x * weight_.value;
    y.rowwise() += bias_.value.row(0);
    if (cache) {
      cache->padded = x;
      cache->batch = batch;
      cache->time = time;
    }
    return y;
  }
  const int stride = time + pad_left_ + pad_right_;
  Matrix local;
  Matrix& p = cache ? cache->padded : local;
  p.setZero(static_cast<Eigen::Index>(batch) * stride, in_);
  for (int b = 0; b < batch; ++b)
    p.middleRows(Eigen::Index(b) * stride + pad_left_, time) = x.middleRows(Eigen::Index(b) * time, time);
  const Eigen::Index span = p.rows() - Eigen::Index(kernel_ - 1) * dilation_;
  Matrix full = Matrix::Zero(span, out_);
  for (int k = 0; k < kernel_; ++k)
    full.noalias() += p.middleRows(Eigen::Index(k) * dilation_, span) *
                      weight_.value.middleRows(Eigen::Index(k) * in_, in_);
  for (int b = 0; b < batch; ++b)
    y.middleRows(Eigen::Index(b) * time, time) = full.middleRows(Eigen::Index(b) * stride, time);
  y.rowwise() += bias_.value.row(0);
  if (cache) {
    cache->batch = batch;
    cache->time = time;
  }
  return y;
}

Matrix Conv1d::Backward(const Matrix& grad_out, const Cache& cache, bool need_input_grad) {
  const int batch = cache.batch, time = cache.time;
  bias_.grad.row(0) += grad_out.colwise().sum();
  if (kernel_ == 1) {
    weight_.grad.noalias() += cache.padded.transpose() * grad_out;
    if (!need_input_grad) return {};
    return grad_out * weight_.value.transpose();
  }
  const int stride = time + pad_left_ + pad_right_;
  const Matrix& p = cache.padded;
  const Eigen::Index span = p.rows() - Eigen::Index(kernel_ - 1) * dilation_;
  Matrix full = Matrix::Zero(span, out_);
  for (int b = 0; b < batch; ++b)
    full.middleRows(Eigen::Index(b) * stride, time) = grad_out.middleRows(Eigen::Index(b) * time, time);
  for (int k = 0; k < kernel_; ++k)
    weight_.grad.middleRows(Eigen::Index(k) * in_, in_).noalias() +=
        p.middleRows(Eigen::Index(k) * dilation_, span).transpose() * full;
  if (!need_input_grad) return {};
  Matrix dp = Matrix::Zero(p.rows(), in_);
  for (int k = 0; k < kernel_; ++k)
    dp.middleRows(Eigen::Index(k) * dilation_, span).noalias() +=
        full * weight_.value.middleRows(Eigen::Index(k) * in_, in_).transpose();
  Matrix dx(Eigen::Index(batch) * time, in_);
  for (int b = 0; b < batch; ++b)
    dx.middleRows(Eigen::Index(b) * time, time) = dp.middleRows(Eigen::Index(b) * stride + pad_left_, time);
  return dx;
}

void Conv1d::CollectParams(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

// ---- BatchNorm -------------------------------------------------------------

BatchNorm::BatchNorm(const std::string& name, int channels, double momentum, double eps)
    : momentum_(momentum), eps_(eps),
      gamma_(name + ".gamma", 1, channels), beta_(name + ".beta", 1, channels),
      running_mean_(name + ".running_mean", 1, channels, false),
      running_var_(name + ".running_var", 1, channels, false) {
  gamma_.value.setOnes();
  running_var_.value.setOnes();
}

Matrix BatchNorm::Forward(const Matrix& x, Cache* cache) const {
  Eigen::RowVectorXd mean, var;
  if (cache) {
    mean = x.colwise().mean();
    var = (x.rowwise() - mean).array().square().colwise().mean().matrix();
  } else {
    mean = running_mean_.value.row(0);
    var = running_var_.value.row(0);
  }
  Eigen::RowVectorXd inv_std = (var.array() + eps_).rsqrt().matrix();
  Matrix x_hat = ((x.rowwise() - mean).array().rowwise() * inv_std.array()).matrix();
  Matrix y = (x_hat.array().rowwise() * gamma_.value.row(0).array()).matrix();
  y.rowwise() += beta_.value.row(0);
  if (cache) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
    cache->batch_mean = std::move(mean);
    cache->batch_var = std::move(var);
  }
  return y;
}

Matrix BatchNorm::Backward(const Matrix& grad_out, const Cache& cache) {
  const double n = static_cast<double>(grad_out.rows());
  gamma_.grad.row(0) += (grad_out.array() * cache.x_hat.array()).colwise().sum().matrix();
  beta_.grad.row(0) += grad_out.colwise().sum();
  Matrix dxhat = (grad_out.array().rowwise() * gamma_.value.row(0).array()).matrix();
  Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
  Eigen::RowVectorXd sum_dx = (dxhat.array() * cache.x_hat.array()).colwise().sum().matrix();
  Matrix dx = (n * dxhat.array()).matrix();
  dx.rowwise() -= sum_d;
  dx.array() -= cache.x_hat.array().rowwise() * sum_dx.array();
  dx.array().rowwise() *= (cache.inv_std.array() / n);
  return dx;
}

void BatchNorm::UpdateRunning(const Cache& cache) {
  // Running variance tracks the unbiased estimate.
  const double n = static_cast<double>(cache.x_hat.rows());
  const double correction = n > 1 ? n / (n - 1) : 1.0;
  running_mean_.value.row(0) = (1 - momentum_) * running_mean_.value.row(0) + momentum_ * cache.batch_mean;
  running_var_.value.row(0) =
      (1 - momentum_) * running_var_.value.row(0) + momentum_ * correction * cache.batch_var;
}

void BatchNorm::CollectParams(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
  out.push_back(&running_mean_);
  out.push_back(&running_var_);
}

// ---- Dense -----------------------------------------------------------------

Dense::Dense(const std::string& name, int in, int out, Rng& rng)
    : weight_(name + ".w", in, out), bias_(name + ".b", 1, out) {
  GlorotUniform(weight_.value, in, out, rng);
}

Matrix Dense::Forward(const Matrix& x, Cache* cache) const {
  Matrix y = x * weight_.value;
  y.rowwise() += bias_.value.row(0);
  if (cache) cache->x = x;
  return y;
}

Matrix Dense::Backward(const Matrix& grad_out, const Cache& cache, bool need_input_grad) {
  weight_.grad.noalias() += cache.x.transpose() * grad_out;
  bias_.grad.row(0) += grad_out.colwise().sum();
  if (!need_input_grad) return {};
  return grad_out * weight_.value.transpose();
}

void Dense::CollectParams(std::vector<Param*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

void Dense::ZeroInit() {
  weight_.value.setZero();
  bias_.value.setZero();
}

// ---- activations, pooling, loss ---------------------------------------------

Matrix Relu(const Matrix& x) { return x.cwiseMax(0.0); }

Matrix ReluBackward(const Matrix& grad_out, const Matrix& activated) {
  return (activated.array() > 0.0).select(grad_out, 0.0);
}

Matrix MaxPool(const Matrix& x, int batch, int pool, PoolCache* cache) {
  const Eigen::Index time = x.rows() / batch;
  const Eigen::Index out_time = time / pool;
  const Eigen::Index cols = x.cols();
  Matrix y(batch * out_time, cols);
  if (cache) {
    cache->argmax.assign(static_cast<std::size_t>(y.size()), 0);
    cache->in_rows = x.rows();
  }
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index t = 0; t < out_time; ++t) {
      const Eigen::Index orow = b * out_time + t;
      const Eigen::Index first = b * time + t * pool;
      for (Eigen::Index c = 0; c < cols; ++c) {
        Eigen::Index best = first;
        double v = x(first, c);
        for (int j = 1; j < pool; ++j) {
          if (x(first + j, c) > v) {
            v = x(first + j, c);
            best = first + j;
          }
        }
        y(orow, c) = v;
        if (cache) cache->argmax[static_cast<std::size_t>(orow * cols + c)] = best;
      }
    }
  }
  return y;
}

Matrix MaxPoolBackward(const Matrix& grad_out, const PoolCache& cache, Eigen::Index cols) {
  Matrix dx = Matrix::Zero(cache.in_rows, cols);
  for (Eigen::Index r = 0; r < grad_out.rows(); ++r)
    for (Eigen::Index c = 0; c < cols; ++c)
      dx(cache.argmax[static_cast<std::size_t>(r * cols + c)], c) += grad_out(r, c);
  return dx;
}

double Softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double BceWithLogits(const Eigen::VectorXd& logits, const Eigen::VectorXd& labels,
                     Eigen::VectorXd* grad) {
  const Eigen::Index n = logits.size();
  double loss = 0.0;
  if (grad) grad->resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double z = logits[i], y = labels[i];
    // y*softplus(-z) + (1-y)*softplus(z)
    loss += y * Softplus(-z) + (1.0 - y) * Softplus(z);
    if (grad) (*grad)[i] = (Sigmoid(z) - y) / static_cast<double>(n);
  }
  return n > 0 ? loss / static_cast<double>(n) : 0.0;
}

// ---- Adam ------------------------------------------------------------------

Adam::Adam(double learning_rate, double beta1, double beta2, double eps)
    : lr_(learning_rate), b1_(beta1), b2_(beta2), eps_(eps) {}

void Adam::Step(const std::vector<Param*>& params) {
  if (m_.empty()) {
    for (const Param* p : params) {
      m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, t_);
  const double c2 = 1.0 - std::pow(b2_, t_);
  const double step = lr_ * std::sqrt(c2) / c1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    if (!p.trainable) continue;
    m_[i] = b1_ * m_[i] + (1 - b1_) * p.grad;
    v_[i] = b2_ * v_[i] + (1 - b2_) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= step * m_[i].array() / (v_[i].array().sqrt() + eps_);
  }
}

}  // namespace sonnet::nn
