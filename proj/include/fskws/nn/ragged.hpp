#pragma once

#include <Eigen/Dense>
#include <vector>

namespace fskws::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

// Batch of variable-length sequences, stored as one channels x total_frames
// matrix. Item i occupies columns [off[i], off[i] + len[i]).
template <typename S>
struct Ragged {
  Mat<S> data;
  std::vector<int> len;
  std::vector<int> off;

  int items() const { return static_cast<int>(len.size()); }
  int total() const { return static_cast<int>(data.cols()); }
  int channels() const { return static_cast<int>(data.rows()); }

  // Same item structure with `lengths`, zeroed data.
  static Ragged zeros(int channels, const std::vector<int>& lengths) {
    Ragged r;
    r.len = lengths;
    r.off.resize(lengths.size());
    int total = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
      r.off[i] = total;
      total += lengths[i];
    }
    r.data = Mat<S>::Zero(channels, total);
    return r;
  }
};

}  // namespace fskws::nn
