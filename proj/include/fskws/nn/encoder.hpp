#pragma once

#include <functional>
#include <vector>

#include "fskws/dsp.hpp"
#include "fskws/nn/gru.hpp"
#include "fskws/nn/layers.hpp"

namespace fskws::nn {

// Temporal-convolutional residual encoder with a GRU head. The channel
// plan is base_channels scaled by width_multiplier; each residual block
// halves time (stride 2), and the embedding is a linear projection of the
// GRU state at the last frame.
struct EncoderConfig {
  int input_dim = 40;
  int width_multiplier = 2;
  std::vector<int> base_channels{16, 24, 32, 48};
  int first_kernel = 3;
  int block_kernel = 9;
  std::vector<int> block_strides{2, 2, 2};
  int gru_hidden = 192;
  int embed_dim = 192;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  int min_frames = 8;

  std::vector<int> channels() const {
    std::vector<int> c(base_channels);
    for (int& v : c) v *= width_multiplier;
    return c;
  }
  int num_blocks() const { return static_cast<int>(base_channels.size()) - 1; }
  void validate() const {
    if (input_dim < 1 || gru_hidden < 1 || embed_dim < 1)
      throw ConfigError("encoder: dimensions must be positive");
    if (base_channels.size() < 2) throw ConfigError("encoder: need at least one block");
    if (block_strides.size() != base_channels.size() - 1)
      throw ConfigError("encoder: block_strides must have one entry per block");
    if (width_multiplier < 1) throw ConfigError("encoder: width_multiplier must be >= 1");
    for (int c : base_channels)
      if (c < 1) throw ConfigError("encoder: channel counts must be positive");
  }
};

// Reference to one named parameter (or gradient / running-stat) tensor.
template <typename S>
struct TensorRef {
  std::string name;
  S* data;
  Eigen::Index rows, cols;
  Eigen::Index size() const { return rows * cols; }
};

template <typename S>
struct ResBlock {
  Conv1d<S> conv1, conv2;
  BatchNorm1d<S> bn1, bn2;
  bool projection = false;
  Conv1d<S> sc_conv;
  BatchNorm1d<S> sc_bn;

  struct Cache {
    typename Conv1d<S>::Cache conv1, conv2, sc_conv;
    typename BatchNorm1d<S>::Cache bn1, bn2, sc_bn;
    Mat<S> relu1_out, out;
  };

  void configure(int in_ch, int out_ch, int kernel, int stride, const EncoderConfig& cfg, Rng& rng) {
    conv1.configure(in_ch, out_ch, kernel, stride, rng);
    conv2.configure(out_ch, out_ch, kernel, 1, rng);
    bn1.configure(out_ch, cfg.bn_momentum, cfg.bn_eps);
    bn2.configure(out_ch, cfg.bn_momentum, cfg.bn_eps);
    projection = (stride != 1 || in_ch != out_ch);
    if (projection) {
      sc_conv.configure(in_ch, out_ch, 1, stride, rng);
      sc_bn.configure(out_ch, cfg.bn_momentum, cfg.bn_eps);
    }
  }

  Ragged<S> forward(const Ragged<S>& x, Mode mode, Cache* c, bool update_running) {
    Ragged<S> y = conv1.forward(x, c ? &c->conv1 : nullptr);
    y = bn1.forward(y, mode, c ? &c->bn1 : nullptr, update_running);
    relu_inplace(y.data);
    if (c) c->relu1_out = y.data;
    y = conv2.forward(y, c ? &c->conv2 : nullptr);
    y = bn2.forward(y, mode, c ? &c->bn2 : nullptr, update_running);
    if (projection) {
      Ragged<S> s = sc_conv.forward(x, c ? &c->sc_conv : nullptr);
      s = sc_bn.forward(s, mode, c ? &c->sc_bn : nullptr, update_running);
      y.data += s.data;
    } else {
      y.data += x.data;
    }
    relu_inplace(y.data);
    if (c) c->out = y.data;
    return y;
  }

  Ragged<S> backward(const Ragged<S>& dout, const Cache& c) {
    Ragged<S> dsum = dout;
    dsum.data = relu_backward(dout.data, c.out);

    Ragged<S> dmain = bn2.backward(dsum, c.bn2);
    dmain = conv2.backward(dmain, c.conv2);
    dmain.data = relu_backward(dmain.data, c.relu1_out);
    dmain = bn1.backward(dmain, c.bn1);
    Ragged<S> dx = conv1.backward(dmain, c.conv1);

    if (projection) {
      Ragged<S> ds = sc_bn.backward(dsum, c.sc_bn);
      ds = sc_conv.backward(ds, c.sc_conv);
      dx.data += ds.data;
    } else {
      dx.data += dsum.data;
    }
    return dx;
  }
};

template <typename S>
class Encoder {
 public:
  explicit Encoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    blocks_.resize(cfg_.num_blocks());
  }

  struct Trace {
    Ragged<S> input;
    typename Conv1d<S>::Cache stem_conv;
    typename BatchNorm1d<S>::Cache stem_bn;
    Mat<S> stem_relu_out;
    std::vector<typename ResBlock<S>::Cache> blocks;
    typename Gru<S>::Cache gru;
    typename Linear<S>::Cache proj;
  };

  const EncoderConfig& config() const { return cfg_; }

  void init_params(Rng& rng) {
    const auto ch = cfg_.channels();
    stem_conv_.configure(cfg_.input_dim, ch[0], cfg_.first_kernel, 1, rng);
    stem_bn_.configure(ch[0], cfg_.bn_momentum, cfg_.bn_eps);
    for (int i = 0; i < cfg_.num_blocks(); ++i)
      blocks_[i].configure(ch[i], ch[i + 1], cfg_.block_kernel, cfg_.block_strides[i], cfg_, rng);
    gru_.configure(ch.back(), cfg_.gru_hidden, rng);
    proj_.configure(cfg_.gru_hidden, cfg_.embed_dim, rng);
  }

  // Packs MFCC sequences (T x D each, coefficients become channels) into a
  // ragged batch, casting to the encoder scalar type.
  Ragged<S> pack(const std::vector<const MfccSequence*>& batch) const {
    if (batch.empty()) throw Error("encoder: empty batch");
    std::vector<int> lengths(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const auto* seq = batch[i];
      if (seq->dim() != cfg_.input_dim)
        throw Error("encoder: feature dim " + std::to_string(seq->dim()) + " != input_dim " +
                    std::to_string(cfg_.input_dim));
      if (seq->num_frames() < cfg_.min_frames)
        throw Error("encoder: sequence of " + std::to_string(seq->num_frames()) +
                    " frames is shorter than the required " + std::to_string(cfg_.min_frames));
      lengths[i] = seq->num_frames();
    }
    Ragged<S> r = Ragged<S>::zeros(cfg_.input_dim, lengths);
    for (std::size_t i = 0; i < batch.size(); ++i)
      r.data.middleCols(r.off[i], r.len[i]) = batch[i]->frames.transpose().template cast<S>();
    return r;
  }

  // Returns embed_dim x batch embeddings. Train mode normalizes with batch
  // statistics (and updates running statistics when update_running is set);
  // infer mode uses running statistics and is deterministic.
  Mat<S> forward(const Ragged<S>& input, Mode mode, Trace* trace = nullptr,
                 bool update_running = false) {
    if (trace) trace->input = input;
    const char* stage = "stem_conv";
    Ragged<S> y = stem_conv_.forward(input, trace ? &trace->stem_conv : nullptr);
    check_finite(y.data, stage);
    y = stem_bn_.forward(y, mode, trace ? &trace->stem_bn : nullptr, update_running);
    check_finite(y.data, "stem_bn");
    relu_inplace(y.data);
    if (trace) trace->stem_relu_out = y.data;

    if (trace) trace->blocks.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      y = blocks_[i].forward(y, mode, trace ? &trace->blocks[i] : nullptr, update_running);
      check_finite(y.data, ("block" + std::to_string(i + 1)).c_str());
    }

    Mat<S> h = gru_.forward(y, trace ? &trace->gru : nullptr);
    check_finite(h, "gru");
    Mat<S> emb = proj_.forward(h, trace ? &trace->proj : nullptr);
    check_finite(emb, "proj");
    return emb;
  }

  Mat<S> forward(const std::vector<const MfccSequence*>& batch, Mode mode, Trace* trace = nullptr,
                 bool update_running = false) {
    return forward(pack(batch), mode, trace, update_running);
  }

  // Accumulates parameter gradients for the traced forward pass.
  void backward(const Trace& trace, const Mat<S>& grad_out) {
    Mat<S> dh = proj_.backward(grad_out, trace.proj);
    Ragged<S> dy = gru_.backward(dh, trace.gru);
    for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i)
      dy = blocks_[i].backward(dy, trace.blocks[i]);
    dy.data = relu_backward(dy.data, trace.stem_relu_out);
    dy = stem_bn_.backward(dy, trace.stem_bn);
    stem_conv_.backward(dy, trace.stem_conv);
  }

  void zero_grad() {
    stem_conv_.zero_grad();
    stem_bn_.zero_grad();
    for (auto& b : blocks_) {
      b.conv1.zero_grad();
      b.conv2.zero_grad();
      b.bn1.zero_grad();
      b.bn2.zero_grad();
      if (b.projection) {
        b.sc_conv.zero_grad();
        b.sc_bn.zero_grad();
      }
    }
    gru_.zero_grad();
    proj_.zero_grad();
  }

  // Trainable parameters, in a fixed order shared with grads().
  std::vector<TensorRef<S>> params() { return collect(false); }
  std::vector<TensorRef<S>> grads() { return collect(true); }

  // Non-trainable state (batch norm running statistics).
  std::vector<TensorRef<S>> buffers() {
    std::vector<TensorRef<S>> out;
    auto add = [&](const std::string& name, Vec<S>& v) {
      out.push_back({name, v.data(), v.rows(), 1});
    };
    add("stem_bn.running_mean", stem_bn_.running_mean);
    add("stem_bn.running_var", stem_bn_.running_var);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const std::string p = "block" + std::to_string(i + 1) + ".";
      add(p + "bn1.running_mean", blocks_[i].bn1.running_mean);
      add(p + "bn1.running_var", blocks_[i].bn1.running_var);
      add(p + "bn2.running_mean", blocks_[i].bn2.running_mean);
      add(p + "bn2.running_var", blocks_[i].bn2.running_var);
      if (blocks_[i].projection) {
        add(p + "sc_bn.running_mean", blocks_[i].sc_bn.running_mean);
        add(p + "sc_bn.running_var", blocks_[i].sc_bn.running_var);
      }
    }
    return out;
  }

  std::int64_t param_count() {
    std::int64_t n = 0;
    for (const auto& p : params()) n += p.size();
    return n;
  }

 private:
  static void check_finite(const Mat<S>& m, const char* layer) {
    if (!m.allFinite())
      throw Error(std::string("encoder: non-finite activation after ") + layer);
  }

  std::vector<TensorRef<S>> collect(bool grad) {
    std::vector<TensorRef<S>> out;
    auto addm = [&](const std::string& name, Mat<S>& m) {
      out.push_back({name, m.data(), m.rows(), m.cols()});
    };
    auto addv = [&](const std::string& name, Vec<S>& v) {
      out.push_back({name, v.data(), v.rows(), Eigen::Index(1)});
    };
    auto conv = [&](const std::string& p, Conv1d<S>& c) {
      addm(p + ".w", grad ? c.gw : c.w);
      addv(p + ".b", grad ? c.gb : c.b);
    };
    auto bn = [&](const std::string& p, BatchNorm1d<S>& c) {
      addv(p + ".gamma", grad ? c.ggamma : c.gamma);
      addv(p + ".beta", grad ? c.gbeta : c.beta);
    };
    conv("stem_conv", stem_conv_);
    bn("stem_bn", stem_bn_);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      const std::string p = "block" + std::to_string(i + 1);
      conv(p + ".conv1", blocks_[i].conv1);
      bn(p + ".bn1", blocks_[i].bn1);
      conv(p + ".conv2", blocks_[i].conv2);
      bn(p + ".bn2", blocks_[i].bn2);
      if (blocks_[i].projection) {
        conv(p + ".sc_conv", blocks_[i].sc_conv);
        bn(p + ".sc_bn", blocks_[i].sc_bn);
      }
    }
    addm("gru.wi", grad ? gru_.gwi : gru_.wi);
    addm("gru.wh", grad ? gru_.gwh : gru_.wh);
    addv("gru.bi", grad ? gru_.gbi : gru_.bi);
    addv("gru.bh", grad ? gru_.gbh : gru_.bh);
    addm("proj.w", grad ? proj_.gw : proj_.w);
    addv("proj.b", grad ? proj_.gb : proj_.b);
    return out;
  }

  EncoderConfig cfg_;
  Conv1d<S> stem_conv_;
  BatchNorm1d<S> stem_bn_;
  std::vector<ResBlock<S>> blocks_;
  Gru<S> gru_;
  Linear<S> proj_;
};

}  // namespace fskws::nn
