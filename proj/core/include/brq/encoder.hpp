// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Trainable conformer encoder: a two-layer strided convolution front-end
// (4x temporal reduction, 80-dim features to d_model), a stack of
// conformer blocks (half-step feed-forward, relative-position self-
// attention, depthwise convolution module, half-step feed-forward, layer
// norm), and N softmax output heads over the codebook vocabulary.
// Forward and backward are hand-written reverse mode; processing is
// per-utterance so results are independent of batch composition.

#ifndef BRQ_ENCODER_HPP
#define BRQ_ENCODER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "brq/audio.hpp"
#include "brq/nn.hpp"

namespace brq {

struct EncoderConfig {
  int n_layers = 2;       // paper-scale 12
  int d_model = 64;
  int n_heads = 4;        // paper-scale 8
  int conv_kernel = 15;   // depthwise conv, odd
  int ffn_expansion = 4;
  int subsample_factor = 4;  // fixed by the two stride-2 convolutions
  int input_dim = 80;
  int n_codebooks = 1;  // output heads N
  int vocab = 8192;     // V
  int max_rel_offset = 64;
  double dropout = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_layers < 1 || d_model < 1 || n_heads < 1 || ffn_expansion < 1 ||
        input_dim < 1 || n_codebooks < 1 || vocab < 2 || max_rel_offset < 1) {
      throw UserError("EncoderConfig: dimensions must be positive");
    }
    if (d_model % n_heads != 0) throw UserError("EncoderConfig: d_model must divide by n_heads");
    if (conv_kernel < 1 || conv_kernel % 2 == 0) {
      throw UserError("EncoderConfig: conv_kernel must be odd");
    }
    if (subsample_factor != 4) {
      throw UserError("EncoderConfig: subsample_factor is fixed at 4");
    }
    if (dropout < 0.0 || dropout >= 1.0) throw UserError("EncoderConfig: dropout in [0, 1)");
  }
};

// Stride-2 convolution over time, kernel 3, output length floor(T/2).
// Window for output i starts at input 2i; the tail is zero-padded.
template <class S>
struct Conv1dStride2 {
  Param<S>* w = nullptr;  // out_ch x (3 * in_ch), layout [j * in_ch + c]
  Param<S>* b = nullptr;
  int in_ch = 0, out_ch = 0;
  static constexpr int kKernel = 3;

  void init(ParamTable<S>& table, const std::string& name, int in, int out, Rng& rng) {
    in_ch = in;
    out_ch = out;
    w = &table.add(name + ".weight", out, kKernel * in);
    b = &table.add(name + ".bias", 1, out);
    for (S& v : w->value.d) v = static_cast<S>(rng.xavier_uniform(in * kKernel, out * kKernel));
  }

  struct Cache {
    Mat<S> x;
  };

  Mat<S> forward(const Mat<S>& x, Cache& cache) const {
    cache.x = x;
    const int t_out = x.rows / 2;
    Mat<S> y(t_out, out_ch);
    for (int i = 0; i < t_out; ++i) {
      S* yr = y.row(i);
      for (int o = 0; o < out_ch; ++o) {
        const S* wo = w->value.row(o);
        S acc = b->value.at(0, o);
        for (int j = 0; j < kKernel; ++j) {
          const int t = 2 * i + j;
          if (t >= x.rows) break;
          const S* xr = x.row(t);
          const S* wj = wo + static_cast<std::size_t>(j) * in_ch;
          for (int c = 0; c < in_ch; ++c) acc += xr[c] * wj[c];
        }
        yr[o] = acc;
      }
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) const {
    const Mat<S>& x = cache.x;
    Mat<S> dx(x.rows, in_ch);
    for (int i = 0; i < dy.rows; ++i) {
      const S* dyr = dy.row(i);
      for (int o = 0; o < out_ch; ++o) {
        const S g = dyr[o];
        b->grad.at(0, o) += g;
        S* dwo = w->grad.row(o);
        const S* wo = w->value.row(o);
        for (int j = 0; j < kKernel; ++j) {
          const int t = 2 * i + j;
          if (t >= x.rows) break;
          const S* xr = x.row(t);
          S* dxr = dx.row(t);
          const std::size_t off = static_cast<std::size_t>(j) * in_ch;
          for (int c = 0; c < in_ch; ++c) {
            dwo[off + c] += g * xr[c];
            dxr[c] += g * wo[off + c];
          }
        }
      }
    }
    return dx;
  }
};

// Per-channel (depthwise) convolution with same padding.
template <class S>
struct DepthwiseConv {
  Param<S>* w = nullptr;  // ch x kernel
  Param<S>* b = nullptr;
  int channels = 0, kernel = 0;

  void init(ParamTable<S>& table, const std::string& name, int ch, int k, Rng& rng) {
    channels = ch;
    kernel = k;
    w = &table.add(name + ".weight", ch, k);
    b = &table.add(name + ".bias", 1, ch);
    for (S& v : w->value.d) v = static_cast<S>(rng.xavier_uniform(k, k));
  }

  struct Cache {
    Mat<S> x;
  };

  Mat<S> forward(const Mat<S>& x, Cache& cache) const {
    cache.x = x;
    const int pad = (kernel - 1) / 2;
    Mat<S> y(x.rows, channels);
    for (int t = 0; t < x.rows; ++t) {
      S* yr = y.row(t);
      for (int c = 0; c < channels; ++c) {
        S acc = b->value.at(0, c);
        const S* wc = w->value.row(c);
        for (int j = 0; j < kernel; ++j) {
          const int src = t + j - pad;
          if (src < 0 || src >= x.rows) continue;
          acc += x.at(src, c) * wc[j];
        }
        yr[c] = acc;
      }
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) const {
    const Mat<S>& x = cache.x;
    const int pad = (kernel - 1) / 2;
    Mat<S> dx(x.rows, channels);
    for (int t = 0; t < dy.rows; ++t) {
      const S* dyr = dy.row(t);
      for (int c = 0; c < channels; ++c) {
        const S g = dyr[c];
        b->grad.at(0, c) += g;
        S* dwc = w->grad.row(c);
        const S* wc = w->value.row(c);
        for (int j = 0; j < kernel; ++j) {
          const int src = t + j - pad;
          if (src < 0 || src >= x.rows) continue;
          dwc[j] += g * x.at(src, c);
          dx.at(src, c) += g * wc[j];
        }
      }
    }
    return dx;
  }
};

// Multi-head self-attention with a learned relative-position bias table
// (one row per head, offsets clipped to [-max_rel, max_rel]).
template <class S>
struct SelfAttention {
  Linear<S> lq, lk, lv, lo;
  Param<S>* rel_bias = nullptr;
  int n_heads = 0, head_dim = 0, max_rel = 0;

  void init(ParamTable<S>& table, const std::string& name, int d_model, int heads,
            int max_rel_offset, Rng& rng) {
    n_heads = heads;
    head_dim = d_model / heads;
    max_rel = max_rel_offset;
    lq.init(table, name + ".q", d_model, d_model, rng);
    lk.init(table, name + ".k", d_model, d_model, rng);
    lv.init(table, name + ".v", d_model, d_model, rng);
    lo.init(table, name + ".out", d_model, d_model, rng);
    rel_bias = &table.add(name + ".rel_bias", heads, 2 * max_rel_offset + 1);
  }

  struct Cache {
    typename Linear<S>::Cache cq, ck, cv, co;
    Mat<S> q, k, v;
    std::vector<Mat<S>> attn;  // per head, T x T
  };

  int rel_index(int query, int key) const {
    int off = key - query;
    if (off < -max_rel) off = -max_rel;
    if (off > max_rel) off = max_rel;
    return off + max_rel;
  }

  Mat<S> forward(const Mat<S>& x, Cache& cache) const {
    const int t_len = x.rows;
    const int d_model = n_heads * head_dim;
    cache.q = lq.forward(x, cache.cq);
    cache.k = lk.forward(x, cache.ck);
    cache.v = lv.forward(x, cache.cv);
    cache.attn.assign(static_cast<std::size_t>(n_heads), Mat<S>());
    const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(head_dim)));
    Mat<S> ctx(t_len, d_model);
    for (int h = 0; h < n_heads; ++h) {
      const int off = h * head_dim;
      Mat<S> scores(t_len, t_len);
      const S* bias = rel_bias->value.row(h);
      for (int i = 0; i < t_len; ++i) {
        const S* qi = cache.q.row(i) + off;
        S* sr = scores.row(i);
        for (int j = 0; j < t_len; ++j) {
          const S* kj = cache.k.row(j) + off;
          S dot{0};
          for (int c = 0; c < head_dim; ++c) dot += qi[c] * kj[c];
          sr[j] = dot * inv_sqrt + bias[rel_index(i, j)];
        }
      }
      softmax_rows(scores);
      for (int i = 0; i < t_len; ++i) {
        const S* ar = scores.row(i);
        S* cr = ctx.row(i) + off;
        for (int j = 0; j < t_len; ++j) {
          const S a = ar[j];
          const S* vj = cache.v.row(j) + off;
          for (int c = 0; c < head_dim; ++c) cr[c] += a * vj[c];
        }
      }
      cache.attn[static_cast<std::size_t>(h)] = std::move(scores);
    }
    return lo.forward(ctx, cache.co);
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) const {
    const int t_len = dy.rows;
    const int d_model = n_heads * head_dim;
    const Mat<S> dctx = lo.backward(dy, cache.co);
    const S inv_sqrt = static_cast<S>(1.0 / std::sqrt(static_cast<double>(head_dim)));
    Mat<S> dq(t_len, d_model), dk(t_len, d_model), dv(t_len, d_model);
    for (int h = 0; h < n_heads; ++h) {
      const int off = h * head_dim;
      const Mat<S>& attn = cache.attn[static_cast<std::size_t>(h)];
      Mat<S> da(t_len, t_len);
      for (int i = 0; i < t_len; ++i) {
        const S* dci = dctx.row(i) + off;
        const S* ar = attn.row(i);
        S* dar = da.row(i);
        for (int j = 0; j < t_len; ++j) {
          const S* vj = cache.v.row(j) + off;
          S acc{0};
          for (int c = 0; c < head_dim; ++c) acc += dci[c] * vj[c];
          dar[j] = acc;
          S* dvj = dv.row(j) + off;
          const S a = ar[j];
          for (int c = 0; c < head_dim; ++c) dvj[c] += a * dci[c];
        }
      }
      S* drel = rel_bias->grad.row(h);
      for (int i = 0; i < t_len; ++i) {
        const S* ar = attn.row(i);
        const S* dar = da.row(i);
        S inner{0};
        for (int l = 0; l < t_len; ++l) inner += ar[l] * dar[l];
        S* dqi = dq.row(i) + off;
        const S* qi = cache.q.row(i) + off;
        for (int j = 0; j < t_len; ++j) {
          const S ds = ar[j] * (dar[j] - inner);
          const S* kj = cache.k.row(j) + off;
          S* dkj = dk.row(j) + off;
          for (int c = 0; c < head_dim; ++c) {
            dqi[c] += ds * kj[c] * inv_sqrt;
            dkj[c] += ds * qi[c] * inv_sqrt;
          }
          drel[rel_index(i, j)] += ds;
        }
      }
    }
    Mat<S> dx = lq.backward(dq, cache.cq);
    const Mat<S> dxk = lk.backward(dk, cache.ck);
    const Mat<S> dxv = lv.backward(dv, cache.cv);
    for (std::size_t i = 0; i < dx.d.size(); ++i) dx.d[i] += dxk.d[i] + dxv.d[i];
    return dx;
  }
};

template <class S>
struct FeedForward {
  Linear<S> lin1, lin2;
  double dropout_rate = 0.0;

  void init(ParamTable<S>& table, const std::string& name, int d_model, int expansion,
            double dropout, Rng& rng) {
    dropout_rate = dropout;
    lin1.init(table, name + ".lin1", d_model, d_model * expansion, rng);
    lin2.init(table, name + ".lin2", d_model * expansion, d_model, rng);
  }

  struct Cache {
    typename Linear<S>::Cache c1, c2;
    Mat<S> pre_act;
    DropoutCache<S> drop1, drop2;
  };

  Mat<S> forward(const Mat<S>& x, Cache& cache, Rng* rng) const {
    cache.pre_act = lin1.forward(x, cache.c1);
    Mat<S> a = silu(cache.pre_act);
    a = apply_dropout(a, dropout_rate, rng, cache.drop1);
    Mat<S> y = lin2.forward(a, cache.c2);
    return apply_dropout(y, dropout_rate, rng, cache.drop2);
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) const {
    const Mat<S> dy2 = dropout_backward(dy, cache.drop2);
    Mat<S> da = lin2.backward(dy2, cache.c2);
    da = dropout_backward(da, cache.drop1);
    const Mat<S> dpre = silu_backward(da, cache.pre_act);
    return lin1.backward(dpre, cache.c1);
  }
};

// Pointwise-GLU -> depthwise conv -> layer norm -> SiLU -> pointwise.
// Layer norm stands in for batch norm to keep results batch-independent.
template <class S>
struct ConvModule {
  Linear<S> pw1, pw2;
  DepthwiseConv<S> dconv;
  LayerNorm<S> ln_mid;
  double dropout_rate = 0.0;
  int d_model = 0;

  void init(ParamTable<S>& table, const std::string& name, int d, int kernel, double dropout,
            Rng& rng) {
    d_model = d;
    dropout_rate = dropout;
    pw1.init(table, name + ".pw1", d, 2 * d, rng);
    dconv.init(table, name + ".dconv", d, kernel, rng);
    ln_mid.init(table, name + ".ln", d);
    pw2.init(table, name + ".pw2", d, d, rng);
  }

  struct Cache {
    typename Linear<S>::Cache cpw1, cpw2;
    Mat<S> glu_in;  // pw1 output, T x 2d
    typename DepthwiseConv<S>::Cache cconv;
    typename LayerNorm<S>::Cache cln;
    Mat<S> pre_silu;  // ln output
    DropoutCache<S> drop;
  };

  Mat<S> forward(const Mat<S>& x, Cache& cache, Rng* rng) const {
    cache.glu_in = pw1.forward(x, cache.cpw1);
    Mat<S> g(x.rows, d_model);
    for (int t = 0; t < x.rows; ++t) {
      const S* u = cache.glu_in.row(t);
      S* gr = g.row(t);
      for (int c = 0; c < d_model; ++c) gr[c] = u[c] * sigmoid(u[d_model + c]);
    }
    const Mat<S> conv_out = dconv.forward(g, cache.cconv);
    cache.pre_silu = ln_mid.forward(conv_out, cache.cln);
    const Mat<S> act = silu(cache.pre_silu);
    Mat<S> y = pw2.forward(act, cache.cpw2);
    return apply_dropout(y, dropout_rate, rng, cache.drop);
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) const {
    const Mat<S> dy2 = dropout_backward(dy, cache.drop);
    const Mat<S> dact = pw2.backward(dy2, cache.cpw2);
    const Mat<S> dln = silu_backward(dact, cache.pre_silu);
    const Mat<S> dconv_out = ln_mid.backward(dln, cache.cln);
    const Mat<S> dg = dconv.backward(dconv_out, cache.cconv);
    Mat<S> du(dy.rows, 2 * d_model);
    for (int t = 0; t < dy.rows; ++t) {
      const S* u = cache.glu_in.row(t);
      const S* dgr = dg.row(t);
      S* dur = du.row(t);
      for (int c = 0; c < d_model; ++c) {
        const S s = sigmoid(u[d_model + c]);
        dur[c] = dgr[c] * s;
        dur[d_model + c] = dgr[c] * u[c] * s * (S{1} - s);
      }
    }
    return pw1.backward(du, cache.cpw1);
  }
};

template <class S>
struct ConformerBlock {
  LayerNorm<S> ln_ff1, ln_attn, ln_conv, ln_ff2, ln_out;
  FeedForward<S> ff1, ff2;
  SelfAttention<S> attn;
  ConvModule<S> conv;
  double dropout_rate = 0.0;

  void init(ParamTable<S>& table, const std::string& name, const EncoderConfig& cfg, Rng& rng) {
    dropout_rate = cfg.dropout;
    ln_ff1.init(table, name + ".ln_ff1", cfg.d_model);
    ff1.init(table, name + ".ff1", cfg.d_model, cfg.ffn_expansion, cfg.dropout, rng);
    ln_attn.init(table, name + ".ln_attn", cfg.d_model);
    attn.init(table, name + ".attn", cfg.d_model, cfg.n_heads, cfg.max_rel_offset, rng);
    ln_conv.init(table, name + ".ln_conv", cfg.d_model);
    conv.init(table, name + ".conv", cfg.d_model, cfg.conv_kernel, cfg.dropout, rng);
    ln_ff2.init(table, name + ".ln_ff2", cfg.d_model);
    ff2.init(table, name + ".ff2", cfg.d_model, cfg.ffn_expansion, cfg.dropout, rng);
    ln_out.init(table, name + ".ln_out", cfg.d_model);
  }

  struct Cache {
    typename LayerNorm<S>::Cache cln_ff1, cln_attn, cln_conv, cln_ff2, cln_out;
    typename FeedForward<S>::Cache cff1, cff2;
    typename SelfAttention<S>::Cache cattn;
    typename ConvModule<S>::Cache cconv;
    DropoutCache<S> attn_drop;
  };

  Mat<S> forward(const Mat<S>& x, Cache& cache, Rng* rng) const {
    const Mat<S> t1 = ln_ff1.forward(x, cache.cln_ff1);
    const Mat<S> f1 = ff1.forward(t1, cache.cff1, rng);
    Mat<S> x1 = x;
    for (std::size_t i = 0; i < x1.d.size(); ++i) x1.d[i] += S{0.5} * f1.d[i];

    const Mat<S> t2 = ln_attn.forward(x1, cache.cln_attn);
    Mat<S> a = attn.forward(t2, cache.cattn);
    a = apply_dropout(a, dropout_rate, rng, cache.attn_drop);
    Mat<S> x2 = x1;
    for (std::size_t i = 0; i < x2.d.size(); ++i) x2.d[i] += a.d[i];

    const Mat<S> t3 = ln_conv.forward(x2, cache.cln_conv);
    const Mat<S> c = conv.forward(t3, cache.cconv, rng);
    Mat<S> x3 = x2;
    for (std::size_t i = 0; i < x3.d.size(); ++i) x3.d[i] += c.d[i];

    const Mat<S> t4 = ln_ff2.forward(x3, cache.cln_ff2);
    const Mat<S> f2 = ff2.forward(t4, cache.cff2, rng);
    Mat<S> x4 = x3;
    for (std::size_t i = 0; i < x4.d.size(); ++i) x4.d[i] += S{0.5} * f2.d[i];

    return ln_out.forward(x4, cache.cln_out);
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) const {
    Mat<S> dx4 = ln_out.backward(dy, cache.cln_out);

    Mat<S> df2 = dx4;
    for (S& v : df2.d) v *= S{0.5};
    const Mat<S> dt4 = ff2.backward(df2, cache.cff2);
    Mat<S> dx3 = dx4;
    {
      const Mat<S> d = ln_ff2.backward(dt4, cache.cln_ff2);
      for (std::size_t i = 0; i < dx3.d.size(); ++i) dx3.d[i] += d.d[i];
    }

    const Mat<S> dt3 = conv.backward(dx3, cache.cconv);
    Mat<S> dx2 = dx3;
    {
      const Mat<S> d = ln_conv.backward(dt3, cache.cln_conv);
      for (std::size_t i = 0; i < dx2.d.size(); ++i) dx2.d[i] += d.d[i];
    }

    const Mat<S> da = dropout_backward(dx2, cache.attn_drop);
    const Mat<S> dt2 = attn.backward(da, cache.cattn);
    Mat<S> dx1 = dx2;
    {
      const Mat<S> d = ln_attn.backward(dt2, cache.cln_attn);
      for (std::size_t i = 0; i < dx1.d.size(); ++i) dx1.d[i] += d.d[i];
    }

    Mat<S> df1 = dx1;
    for (S& v : df1.d) v *= S{0.5};
    const Mat<S> dt1 = ff1.backward(df1, cache.cff1);
    Mat<S> dx = dx1;
    {
      const Mat<S> d = ln_ff1.backward(dt1, cache.cln_ff1);
      for (std::size_t i = 0; i < dx.d.size(); ++i) dx.d[i] += d.d[i];
    }
    return dx;
  }
};

template <class S>
class Encoder {
 public:
  Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg_.validate();
    cfg_.seed = seed;
    Rng rng(derive_seed(seed, "encoder-init"));
    conv1_.init(table_, "frontend.conv1", cfg_.input_dim, cfg_.d_model, rng);
    conv2_.init(table_, "frontend.conv2", cfg_.d_model, cfg_.d_model, rng);
    blocks_.resize(static_cast<std::size_t>(cfg_.n_layers));
    for (int i = 0; i < cfg_.n_layers; ++i) {
      blocks_[static_cast<std::size_t>(i)].init(table_, "block" + std::to_string(i), cfg_, rng);
    }
    heads_.resize(static_cast<std::size_t>(cfg_.n_codebooks));
    for (int n = 0; n < cfg_.n_codebooks; ++n) {
      heads_[static_cast<std::size_t>(n)].init(table_, "head" + std::to_string(n), cfg_.d_model,
                                               cfg_.vocab, rng);
    }
  }

  const EncoderConfig& config() const { return cfg_; }
  ParamTable<S>& params() { return table_; }
  const ParamTable<S>& params() const { return table_; }
  std::size_t parameter_count() const { return table_.parameter_count(); }

  struct SampleCache {
    typename Conv1dStride2<S>::Cache cconv1, cconv2;
    Mat<S> pre_silu1, pre_silu2;
    std::vector<typename ConformerBlock<S>::Cache> block_caches;
    std::vector<typename Linear<S>::Cache> head_caches;
    std::vector<Mat<S>> probs;  // N of T' x V, rows sum to 1
    int t_in = 0;
  };

  // One utterance: x is T x input_dim, globally normalized and already
  // masked. Output length is floor(T/4). Dropout is active iff a non-null
  // RNG is supplied.
  SampleCache forward_one(const Mat<S>& x, Rng* dropout_rng = nullptr) const {
    if (x.cols != cfg_.input_dim) throw UserError("encoder: feature dimension mismatch");
    if (x.rows < cfg_.subsample_factor) {
      throw UserError("encoder: sequence shorter than the subsampling factor");
    }
    if (!all_finite(x)) throw UserError("encoder: non-finite input features");
    SampleCache cache;
    cache.t_in = x.rows;
    cache.pre_silu1 = conv1_.forward(x, cache.cconv1);
    Mat<S> h = silu(cache.pre_silu1);
    cache.pre_silu2 = conv2_.forward(h, cache.cconv2);
    h = silu(cache.pre_silu2);
    cache.block_caches.resize(blocks_.size());
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      h = blocks_[i].forward(h, cache.block_caches[i], dropout_rng);
    }
    cache.head_caches.resize(heads_.size());
    cache.probs.resize(heads_.size());
    for (std::size_t n = 0; n < heads_.size(); ++n) {
      Mat<S> logits = heads_[n].forward(h, cache.head_caches[n]);
      softmax_rows(logits);
      cache.probs[n] = std::move(logits);
    }
    return cache;
  }

  // dlogits are gradients with respect to each head's pre-softmax logits
  // (the loss module folds the softmax Jacobian in). Parameter gradients
  // accumulate into the table; the return value is the gradient with
  // respect to the input features.
  Mat<S> backward_one(const SampleCache& cache, const std::vector<Mat<S>>& dlogits) const {
    if (dlogits.size() != heads_.size()) throw UserError("encoder: dlogits head count mismatch");
    Mat<S> dh;
    for (std::size_t n = 0; n < heads_.size(); ++n) {
      const Mat<S> d = heads_[n].backward(dlogits[n], cache.head_caches[n]);
      if (n == 0) {
        dh = d;
      } else {
        for (std::size_t i = 0; i < dh.d.size(); ++i) dh.d[i] += d.d[i];
      }
    }
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      dh = blocks_[i].backward(dh, cache.block_caches[i]);
    }
    dh = silu_backward(dh, cache.pre_silu2);
    dh = conv2_.backward(dh, cache.cconv2);
    dh = silu_backward(dh, cache.pre_silu1);
    return conv1_.backward(dh, cache.cconv1);
  }

  void zero_grads() { table_.zero_grads(); }

  static int output_length(int t_in) { return t_in / 4; }

 private:
  EncoderConfig cfg_;
  ParamTable<S> table_;
  Conv1dStride2<S> conv1_, conv2_;
  std::vector<ConformerBlock<S>> blocks_;
  std::vector<Linear<S>> heads_;
};

using EncoderF = Encoder<float>;
using EncoderD = Encoder<double>;

}  // namespace brq

#endif  // BRQ_ENCODER_HPP
