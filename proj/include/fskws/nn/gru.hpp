#pragma once

#include <algorithm>
#include <numeric>

#include "fskws/nn/layers.hpp"

namespace fskws::nn {

// Single GRU layer over ragged sequences, returning the final hidden state
// of each item. Gate order in the packed weight rows is r, z, n:
//   r = sigmoid(Wi_r x + bi_r + Wh_r h + bh_r)
//   z = sigmoid(Wi_z x + bi_z + Wh_z h + bh_z)
//   n = tanh(Wi_n x + bi_n + r .* (Wh_n h + bh_n))
//   h' = (1 - z) .* n + z .* h
// Items are processed in lockstep sorted by length (descending), so at
// step t the active items form a prefix and finished items keep their
// final state untouched.
template <typename S>
class Gru {
 public:
  int in_dim = 0, hidden = 0;
  Mat<S> wi, wh;  // 3H x in_dim, 3H x H
  Vec<S> bi, bh;  // 3H
  Mat<S> gwi, gwh;
  Vec<S> gbi, gbh;

  struct StepCache {
    Mat<S> h_prev, r, z, n, hh;  // H (or 3H slices) x active columns
  };

  struct Cache {
    std::vector<int> order;   // sorted position -> original item index
    std::vector<int> active;  // active column count per step
    Mat<S> x_sorted;          // in_dim x total, step-contiguous per sorted item
    std::vector<int> s_off, s_len;
    std::vector<StepCache> steps;
  };

  void configure(int input_dim, int hidden_dim, Rng& rng) {
    in_dim = input_dim;
    hidden = hidden_dim;
    wi = he_uniform<S>(3 * hidden, in_dim, in_dim, rng);
    wh = Mat<S>(3 * hidden, hidden);
    wh.middleRows(0, hidden) = orthogonal<S>(hidden, rng);
    wh.middleRows(hidden, hidden) = orthogonal<S>(hidden, rng);
    wh.middleRows(2 * hidden, hidden) = orthogonal<S>(hidden, rng);
    bi = Vec<S>::Zero(3 * hidden);
    bh = Vec<S>::Zero(3 * hidden);
    zero_grad();
  }

  void zero_grad() {
    gwi = Mat<S>::Zero(wi.rows(), wi.cols());
    gwh = Mat<S>::Zero(wh.rows(), wh.cols());
    gbi = Vec<S>::Zero(bi.size());
    gbh = Vec<S>::Zero(bh.size());
  }

  static Mat<S> sigmoid(const Mat<S>& a) {
    return ((-a.array()).exp() + S(1)).inverse().matrix();
  }

  // Returns hidden x items, final state per item in original order.
  Mat<S> forward(const Ragged<S>& x, Cache* cache) const {
    const int b = x.items();
    std::vector<int> order(b);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return x.len[i] > x.len[j]; });
    const int max_t = x.len[order[0]];

    // Re-pack columns so sorted item s is contiguous; needed to slice a
    // step's active columns as one block.
    Mat<S> x_sorted(x.channels(), x.total());
    std::vector<int> s_off(b), s_len(b);
    {
      int pos = 0;
      for (int s = 0; s < b; ++s) {
        const int i = order[s];
        s_off[s] = pos;
        s_len[s] = x.len[i];
        x_sorted.middleCols(pos, x.len[i]) = x.data.middleCols(x.off[i], x.len[i]);
        pos += x.len[i];
      }
    }

    std::vector<int> active(max_t);
    for (int t = 0; t < max_t; ++t) {
      int count = 0;
      while (count < b && x.len[order[count]] > t) ++count;
      active[t] = count;
    }

    const int h = hidden;
    Mat<S> hstate = Mat<S>::Zero(h, b);
    // Input-side gate pre-activations for every frame in one GEMM.
    Mat<S> gi_all;
    gi_all.noalias() = wi * x_sorted;
    gi_all.colwise() += bi;
    Mat<S> gates_i(3 * h, b), gates_h(3 * h, b);
    if (cache) {
      cache->order = order;
      cache->active = active;
      cache->s_off = s_off;
      cache->s_len = s_len;
      cache->x_sorted = x_sorted;
      cache->steps.resize(max_t);
    }

    for (int t = 0; t < max_t; ++t) {
      const int bt = active[t];
      for (int s = 0; s < bt; ++s) gates_i.col(s) = gi_all.col(s_off[s] + t);
      Mat<S> h_prev = hstate.leftCols(bt);

      gates_h.leftCols(bt).noalias() = wh * h_prev;
      gates_h.leftCols(bt).colwise() += bh;

      Mat<S> r = sigmoid(Mat<S>(gates_i.block(0, 0, h, bt) + gates_h.block(0, 0, h, bt)));
      Mat<S> z = sigmoid(Mat<S>(gates_i.block(h, 0, h, bt) + gates_h.block(h, 0, h, bt)));
      Mat<S> hh = gates_h.block(2 * h, 0, h, bt);
      Mat<S> n =
          (gates_i.block(2 * h, 0, h, bt).array() + r.array() * hh.array()).tanh().matrix();

      hstate.leftCols(bt) =
          ((S(1) - z.array()) * n.array() + z.array() * h_prev.array()).matrix();

      if (cache) {
        auto& sc = cache->steps[t];
        sc.h_prev = std::move(h_prev);
        sc.r = std::move(r);
        sc.z = std::move(z);
        sc.n = std::move(n);
        sc.hh = std::move(hh);
      }
    }

    Mat<S> out(h, b);
    for (int s = 0; s < b; ++s) out.col(order[s]) = hstate.col(s);
    return out;
  }

  // grad_final: hidden x items in original order. Returns dL/dx.
  Ragged<S> backward(const Mat<S>& grad_final, const Cache& cache) {
    const int b = static_cast<int>(cache.order.size());
    const int h = hidden;
    const int max_t = static_cast<int>(cache.active.size());

    Mat<S> grad_sorted(h, b);
    for (int s = 0; s < b; ++s) grad_sorted.col(s) = grad_final.col(cache.order[s]);

    Mat<S> dh = Mat<S>::Zero(h, b);
    Mat<S> dx_sorted = Mat<S>::Zero(in_dim, cache.x_sorted.cols());
    Mat<S> da(3 * h, b), dgh(3 * h, b);

    for (int t = max_t - 1; t >= 0; --t) {
      const int bt = cache.active[t];
      const int bt_next = (t + 1 < max_t) ? cache.active[t + 1] : 0;
      // Items finishing exactly at step t receive their output gradient here.
      for (int s = bt_next; s < bt; ++s) dh.col(s) += grad_sorted.col(s);

      const auto& sc = cache.steps[t];
      auto dh_t = dh.leftCols(bt);

      Mat<S> dz = (dh_t.array() * (sc.h_prev.array() - sc.n.array()) * sc.z.array() *
                   (S(1) - sc.z.array()))
                      .matrix();
      Mat<S> dan =
          (dh_t.array() * (S(1) - sc.z.array()) * (S(1) - sc.n.array().square())).matrix();
      Mat<S> dhh = (dan.array() * sc.r.array()).matrix();
      Mat<S> dar = (dan.array() * sc.hh.array() * sc.r.array() * (S(1) - sc.r.array())).matrix();

      da.block(0, 0, h, bt) = dar;
      da.block(h, 0, h, bt) = dz;
      da.block(2 * h, 0, h, bt) = dan;
      dgh.block(0, 0, h, bt) = dar;
      dgh.block(h, 0, h, bt) = dz;
      dgh.block(2 * h, 0, h, bt) = dhh;

      Mat<S> x_t(in_dim, bt);
      for (int s = 0; s < bt; ++s) x_t.col(s) = cache.x_sorted.col(cache.s_off[s] + t);

      gwi.noalias() += da.leftCols(bt) * x_t.transpose();
      gbi.noalias() += da.leftCols(bt).rowwise().sum();
      gwh.noalias() += dgh.leftCols(bt) * sc.h_prev.transpose();
      gbh.noalias() += dgh.leftCols(bt).rowwise().sum();

      Mat<S> dxt;
      dxt.noalias() = wi.transpose() * da.leftCols(bt);
      for (int s = 0; s < bt; ++s) dx_sorted.col(cache.s_off[s] + t) = dxt.col(s);

      Mat<S> dh_prev;
      dh_prev.noalias() = wh.transpose() * dgh.leftCols(bt);
      dh_prev.array() += dh_t.array() * sc.z.array();
      dh.leftCols(bt) = dh_prev;
    }

    // Unsort back to the original ragged layout.
    Ragged<S> dx;
    std::vector<int> orig_len(b), orig_off(b);
    for (int s = 0; s < b; ++s) orig_len[cache.order[s]] = cache.s_len[s];
    int pos = 0;
    for (int i = 0; i < b; ++i) {
      orig_off[i] = pos;
      pos += orig_len[i];
    }
    dx.len = orig_len;
    dx.off = orig_off;
    dx.data = Mat<S>(in_dim, pos);
    for (int s = 0; s < b; ++s) {
      const int i = cache.order[s];
      dx.data.middleCols(orig_off[i], orig_len[i]) =
          dx_sorted.middleCols(cache.s_off[s], cache.s_len[s]);
    }
    return dx;
  }
};

}  // namespace fskws::nn
