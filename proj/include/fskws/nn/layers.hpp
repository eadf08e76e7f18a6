#pragma once

#include <cmath>
#include <string>

#include "fskws/error.hpp"
#include "fskws/nn/ragged.hpp"
#include "fskws/rng.hpp"

namespace fskws::nn {

enum class Mode { kTrain, kInfer };

template <typename S>
Mat<S> he_uniform(int rows, int cols, int fan_in, Rng& rng) {
  const double limit = std::sqrt(6.0 / fan_in);
  Mat<S> w(rows, cols);
  for (Eigen::Index j = 0; j < w.cols(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      w(i, j) = static_cast<S>(rng.uniform(-limit, limit));
  return w;
}

// Orthogonal square matrix from the QR of a Gaussian draw, signs fixed by
// the diagonal of R so the result is unique given the draw.
template <typename S>
Mat<S> orthogonal(int n, Rng& rng) {
  Eigen::MatrixXd a(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) a(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd diag = qr.matrixQR().diagonal();
  for (int j = 0; j < n; ++j)
    if (diag(j) < 0) q.col(j) = -q.col(j);
  return q.template cast<S>();
}

// 1D convolution over time, channels = matrix rows, implemented as im2col
// plus one GEMM per batch. Items never mix across their boundaries; edges
// are zero padded.
template <typename S>
class Conv1d {
 public:
  int in_ch = 0, out_ch = 0, kernel = 1, stride = 1, pad = 0;
  Mat<S> w;  // out_ch x (in_ch * kernel), column c*kernel+j = weight at tap j of input channel c
  Vec<S> b;
  Mat<S> gw;
  Vec<S> gb;

  struct Cache {
    Mat<S> x_col;
    std::vector<int> in_len, in_off, out_len, out_off;
  };

  void configure(int in_channels, int out_channels, int kernel_size, int stride_, Rng& rng) {
    in_ch = in_channels;
    out_ch = out_channels;
    kernel = kernel_size;
    stride = stride_;
    pad = kernel_size / 2;
    w = he_uniform<S>(out_ch, in_ch * kernel, in_ch * kernel, rng);
    b = Vec<S>::Zero(out_ch);
    zero_grad();
  }

  void zero_grad() {
    gw = Mat<S>::Zero(w.rows(), w.cols());
    gb = Vec<S>::Zero(b.size());
  }

  int out_len(int t) const { return (t + 2 * pad - kernel) / stride + 1; }

  Ragged<S> forward(const Ragged<S>& x, Cache* cache) const {
    std::vector<int> lengths(x.len.size());
    for (std::size_t i = 0; i < x.len.size(); ++i) {
      lengths[i] = out_len(x.len[i]);
      if (lengths[i] < 1) throw Error("conv1d: item too short for kernel");
    }
    Ragged<S> y = Ragged<S>::zeros(out_ch, lengths);

    Mat<S> x_col = Mat<S>::Zero(in_ch * kernel, y.total());
    for (int i = 0; i < x.items(); ++i) {
      for (int t = 0; t < y.len[i]; ++t) {
        const int col = y.off[i] + t;
        for (int j = 0; j < kernel; ++j) {
          const int s = t * stride - pad + j;
          if (s < 0 || s >= x.len[i]) continue;
          for (int c = 0; c < in_ch; ++c) x_col(c * kernel + j, col) = x.data(c, x.off[i] + s);
        }
      }
    }
    y.data.noalias() = w * x_col;
    y.data.colwise() += b;
    if (cache) {
      cache->x_col = std::move(x_col);
      cache->in_len = x.len;
      cache->in_off = x.off;
      cache->out_len = y.len;
      cache->out_off = y.off;
    }
    return y;
  }

  Ragged<S> backward(const Ragged<S>& dy, const Cache& cache) {
    gw.noalias() += dy.data * cache.x_col.transpose();
    gb.noalias() += dy.data.rowwise().sum();

    Mat<S> dx_col;
    dx_col.noalias() = w.transpose() * dy.data;
    Ragged<S> dx = Ragged<S>::zeros(in_ch, cache.in_len);
    for (std::size_t i = 0; i < cache.in_len.size(); ++i) {
      for (int t = 0; t < cache.out_len[i]; ++t) {
        const int col = cache.out_off[i] + t;
        for (int j = 0; j < kernel; ++j) {
          const int s = t * stride - pad + j;
          if (s < 0 || s >= cache.in_len[i]) continue;
          for (int c = 0; c < in_ch; ++c)
            dx.data(c, cache.in_off[i] + s) += dx_col(c * kernel + j, col);
        }
      }
    }
    return dx;
  }
};

// Per-channel batch normalization over all frames of the batch. Training
// mode normalizes with batch statistics; running statistics follow the
// (1 - momentum) * running + momentum * batch convention with the
// unbiased variance stored.
template <typename S>
class BatchNorm1d {
 public:
  int ch = 0;
  S momentum = S(0.1), eps = S(1e-5);
  Vec<S> gamma, beta, running_mean, running_var;
  Vec<S> ggamma, gbeta;

  struct Cache {
    Mat<S> xhat;
    Vec<S> istd;
  };

  void configure(int channels, double momentum_, double eps_) {
    ch = channels;
    momentum = static_cast<S>(momentum_);
    eps = static_cast<S>(eps_);
    gamma = Vec<S>::Ones(ch);
    beta = Vec<S>::Zero(ch);
    running_mean = Vec<S>::Zero(ch);
    running_var = Vec<S>::Ones(ch);
    zero_grad();
  }

  void zero_grad() {
    ggamma = Vec<S>::Zero(ch);
    gbeta = Vec<S>::Zero(ch);
  }

  Ragged<S> forward(const Ragged<S>& x, Mode mode, Cache* cache, bool update_running) {
    Ragged<S> y = x;
    if (mode == Mode::kInfer) {
      Vec<S> istd = (running_var.array() + eps).rsqrt().matrix();
      y.data = (((x.data.colwise() - running_mean).array().colwise() * istd.array()).colwise() *
                gamma.array())
                   .matrix();
      y.data.colwise() += beta;
      return y;
    }
    const Eigen::Index m = x.data.cols();
    Vec<S> mu = x.data.rowwise().mean();
    Mat<S> centered = x.data.colwise() - mu;
    Vec<S> var = centered.array().square().rowwise().mean().matrix();
    Vec<S> istd = (var.array() + eps).rsqrt().matrix();
    Mat<S> xhat = (centered.array().colwise() * istd.array()).matrix();
    y.data = (xhat.array().colwise() * gamma.array()).matrix();
    y.data.colwise() += beta;
    if (update_running) {
      const S unbias = m > 1 ? static_cast<S>(m) / static_cast<S>(m - 1) : S(1);
      running_mean = (S(1) - momentum) * running_mean + momentum * mu;
      running_var = (S(1) - momentum) * running_var + momentum * (var * unbias);
    }
    if (cache) {
      cache->xhat = std::move(xhat);
      cache->istd = std::move(istd);
    }
    return y;
  }

  Ragged<S> backward(const Ragged<S>& dy, const Cache& cache) {
    const Eigen::Index m = dy.data.cols();
    ggamma.noalias() += (dy.data.array() * cache.xhat.array()).rowwise().sum().matrix();
    gbeta.noalias() += dy.data.rowwise().sum();

    Mat<S> dxhat = (dy.data.array().colwise() * gamma.array()).matrix();
    Vec<S> sum_dxhat = dxhat.rowwise().sum();
    Vec<S> sum_dxhat_xhat = (dxhat.array() * cache.xhat.array()).rowwise().sum().matrix();

    Ragged<S> dx = dy;
    dx.data = ((dxhat.array() * static_cast<S>(m)).colwise() - sum_dxhat.array()).matrix();
    dx.data -= (cache.xhat.array().colwise() * sum_dxhat_xhat.array()).matrix();
    dx.data = (dx.data.array().colwise() * (cache.istd.array() / static_cast<S>(m))).matrix();
    return dx;
  }
};

template <typename S>
inline void relu_inplace(Mat<S>& m) {
  m = m.cwiseMax(S(0));
}

// dx = dy masked by y > 0 (y is the relu output).
template <typename S>
inline Mat<S> relu_backward(const Mat<S>& dy, const Mat<S>& y) {
  return (y.array() > S(0)).select(dy, Mat<S>::Zero(dy.rows(), dy.cols()));
}

// Final linear projection applied to one column per batch item.
template <typename S>
class Linear {
 public:
  Mat<S> w;
  Vec<S> b;
  Mat<S> gw;
  Vec<S> gb;

  struct Cache {
    Mat<S> x;
  };

  void configure(int in_dim, int out_dim, Rng& rng) {
    w = he_uniform<S>(out_dim, in_dim, in_dim, rng);
    b = Vec<S>::Zero(out_dim);
    zero_grad();
  }

  void zero_grad() {
    gw = Mat<S>::Zero(w.rows(), w.cols());
    gb = Vec<S>::Zero(b.size());
  }

  Mat<S> forward(const Mat<S>& x, Cache* cache) const {
    if (cache) cache->x = x;
    Mat<S> y;
    y.noalias() = w * x;
    y.colwise() += b;
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) {
    gw.noalias() += dy * cache.x.transpose();
    gb.noalias() += dy.rowwise().sum();
    Mat<S> dx;
    dx.noalias() = w.transpose() * dy;
    return dx;
  }
};

}  // namespace fskws::nn
