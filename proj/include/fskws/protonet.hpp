#pragma once

#include <string>

#include "fskws/error.hpp"
#include "fskws/nn/ragged.hpp"

namespace fskws {

enum class Distance { kSquaredEuclidean, kEuclidean };

Distance distance_from_string(const std::string& s);
std::string distance_to_string(Distance d);

// Distances from each query column to each prototype column.
// Returns queries.cols() x protos.cols().
template <typename S>
nn::Mat<S> pairwise_distances(const nn::Mat<S>& queries, const nn::Mat<S>& protos, Distance dist) {
  nn::Mat<S> d2 = (-2 * (queries.transpose() * protos)).eval();
  d2.colwise() += queries.colwise().squaredNorm().transpose();
  d2.rowwise() += protos.colwise().squaredNorm();
  d2 = d2.cwiseMax(S(0));
  if (dist == Distance::kEuclidean) d2 = d2.cwiseSqrt();
  return d2;
}

// Index of the smallest entry; ties break to the lowest index.
template <typename S>
int nearest_index(const nn::Vec<S>& dists) {
  int best = 0;
  for (int i = 1; i < dists.size(); ++i)
    if (dists(i) < dists(best)) best = i;
  return best;
}

// Class-mean prototypes. `supports` is D x (N*K), class-major: class n's
// supports occupy columns [n*K, (n+1)*K).
template <typename S>
nn::Mat<S> compute_prototypes(const nn::Mat<S>& supports, int n_classes, int k_shots) {
  if (k_shots < 1) throw Error("prototypes: empty support set");
  if (supports.cols() != static_cast<Eigen::Index>(n_classes) * k_shots)
    throw Error("prototypes: support count mismatch");
  nn::Mat<S> protos(supports.rows(), n_classes);
  for (int n = 0; n < n_classes; ++n)
    protos.col(n) = supports.middleCols(n * k_shots, k_shots).rowwise().mean();
  return protos;
}

// Softmax over negative distances, computed with max subtraction.
template <typename S>
nn::Vec<S> class_posteriors(const nn::Vec<S>& query, const nn::Mat<S>& protos, Distance dist) {
  if (protos.cols() < 1) throw Error("posteriors: no prototypes");
  nn::Mat<S> q = query;
  nn::Mat<S> d = pairwise_distances<S>(q, protos, dist);  // 1 x N
  if (!d.allFinite()) throw Error("posteriors: non-finite distance");
  nn::Vec<S> logits = -d.row(0).transpose();
  const S m = logits.maxCoeff();
  nn::Vec<S> p = (logits.array() - m).exp();
  p /= p.sum();
  return p;
}

template <typename S>
struct EpisodeLossResult {
  S loss;
  nn::Mat<S> grad;  // same layout as the input embeddings
};

// Episodic prototypical loss with one query per class. `embeddings` is
// D x N*(K+1), class-major, views of class n at columns
// [n*(K+1), (n+1)*(K+1)): first K are supports, the last is the query.
// The gradient flows through both the query term and the prototype means.
template <typename S>
EpisodeLossResult<S> episode_loss(const nn::Mat<S>& embeddings, int n_classes, int k_shots,
                                  Distance dist) {
  if (n_classes < 2) throw Error("episode_loss: need at least 2 classes");
  const int views = k_shots + 1;
  if (embeddings.cols() != static_cast<Eigen::Index>(n_classes) * views)
    throw Error("episode_loss: embedding count mismatch");
  const Eigen::Index d = embeddings.rows();

  nn::Mat<S> supports(d, n_classes * k_shots);
  nn::Mat<S> queries(d, n_classes);
  for (int n = 0; n < n_classes; ++n) {
    supports.middleCols(n * k_shots, k_shots) = embeddings.middleCols(n * views, k_shots);
    queries.col(n) = embeddings.col(n * views + k_shots);
  }
  nn::Mat<S> protos = compute_prototypes<S>(supports, n_classes, k_shots);
  nn::Mat<S> dmat = pairwise_distances<S>(queries, protos, dist);  // N x N

  // Stable log-softmax per query row.
  nn::Mat<S> logits = -dmat;
  nn::Vec<S> row_max = logits.rowwise().maxCoeff();
  nn::Mat<S> shifted = logits.colwise() - row_max;
  nn::Mat<S> exps = shifted.array().exp().matrix();
  nn::Vec<S> sums = exps.rowwise().sum();
  nn::Mat<S> probs = (exps.array().colwise() / sums.array()).matrix();

  S loss = S(0);
  for (int q = 0; q < n_classes; ++q)
    loss += -(shifted(q, q) - std::log(sums(q)));
  loss /= static_cast<S>(n_classes);

  // dL/dd(q, n) = (I - probs) / N through the negated logits.
  nn::Mat<S> gd = -probs;
  for (int q = 0; q < n_classes; ++q) gd(q, q) += S(1);
  gd /= static_cast<S>(n_classes);

  // Chain through the distance. For squared euclidean the pair weight is
  // 2*gd; for euclidean it is gd / d with a zero gradient at d == 0.
  nn::Mat<S> w;
  if (dist == Distance::kSquaredEuclidean) {
    w = S(2) * gd;
  } else {
    w = gd;
    for (int q = 0; q < n_classes; ++q)
      for (int n = 0; n < n_classes; ++n)
        w(q, n) = dmat(q, n) > S(0) ? w(q, n) / dmat(q, n) : S(0);
  }

  nn::Vec<S> row_w = w.rowwise().sum();
  nn::Vec<S> col_w = w.colwise().sum().transpose();
  nn::Mat<S> dq = (queries.array().rowwise() * row_w.transpose().array()).matrix();
  dq.noalias() -= protos * w.transpose();
  nn::Mat<S> dp = (protos.array().rowwise() * col_w.transpose().array()).matrix();
  dp.noalias() -= queries * w;

  EpisodeLossResult<S> out;
  out.loss = loss;
  out.grad = nn::Mat<S>::Zero(d, embeddings.cols());
  for (int n = 0; n < n_classes; ++n) {
    for (int k = 0; k < k_shots; ++k)
      out.grad.col(n * views + k) = dp.col(n) / static_cast<S>(k_shots);
    out.grad.col(n * views + k_shots) = dq.col(n);
  }
  return out;
}

}  // namespace fskws
