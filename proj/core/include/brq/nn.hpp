// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Small trainable-layer toolkit: a named parameter table plus linear,
// layer-norm, activation, and dropout primitives with explicit
// reverse-mode backward passes. Everything is deterministic: fixed loop
// order, no threading, and dropout driven by an explicit RNG.

#ifndef BRQ_NN_HPP
#define BRQ_NN_HPP

#include <memory>
#include <string>
#include <vector>

#include "brq/mat.hpp"
#include "brq/rng.hpp"

namespace brq {

template <class S>
struct Param {
  std::string name;
  Mat<S> value;
  Mat<S> grad;
};

template <class S>
class ParamTable {
 public:
  Param<S>& add(const std::string& name, int rows, int cols) {
    params_.push_back(std::make_unique<Param<S>>());
    auto& p = *params_.back();
    p.name = name;
    p.value = Mat<S>(rows, cols);
    p.grad = Mat<S>(rows, cols);
    return p;
  }

  std::size_t size() const { return params_.size(); }
  Param<S>& operator[](std::size_t i) { return *params_[i]; }
  const Param<S>& operator[](std::size_t i) const { return *params_[i]; }

  Param<S>* find(const std::string& name) {
    for (auto& p : params_) {
      if (p->name == name) return p.get();
    }
    return nullptr;
  }

  void zero_grads() {
    for (auto& p : params_) p->grad.fill(S{0});
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Param<S>>> params_;
};

// y = x W + b. Gradients accumulate into the table.
template <class S>
struct Linear {
  Param<S>* w = nullptr;  // in x out
  Param<S>* b = nullptr;  // 1 x out

  void init(ParamTable<S>& table, const std::string& name, int in, int out, Rng& rng) {
    w = &table.add(name + ".weight", in, out);
    b = &table.add(name + ".bias", 1, out);
    for (S& v : w->value.d) v = static_cast<S>(rng.xavier_uniform(in, out));
  }

  struct Cache {
    Mat<S> x;
  };

  Mat<S> forward(const Mat<S>& x, Cache& cache) const {
    cache.x = x;
    Mat<S> y;
    gemm(x, w->value, y);
    for (int t = 0; t < y.rows; ++t) {
      S* r = y.row(t);
      const S* bias = b->value.row(0);
      for (int j = 0; j < y.cols; ++j) r[j] += bias[j];
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) const {
    gemm_tn(cache.x, dy, w->grad, /*accumulate=*/true);
    S* db = b->grad.row(0);
    for (int t = 0; t < dy.rows; ++t) {
      const S* r = dy.row(t);
      for (int j = 0; j < dy.cols; ++j) db[j] += r[j];
    }
    Mat<S> dx;
    gemm_nt(dy, w->value, dx);
    return dx;
  }
};

// Per-position layer normalization over the feature dimension.
template <class S>
struct LayerNorm {
  Param<S>* gamma = nullptr;
  Param<S>* beta = nullptr;
  static constexpr double kEps = 1e-5;

  void init(ParamTable<S>& table, const std::string& name, int dim) {
    gamma = &table.add(name + ".gamma", 1, dim);
    beta = &table.add(name + ".beta", 1, dim);
    gamma->value.fill(S{1});
  }

  struct Cache {
    Mat<S> xhat;
    std::vector<S> rstd;
  };

  Mat<S> forward(const Mat<S>& x, Cache& cache) const {
    const int dim = x.cols;
    Mat<S> y(x.rows, dim);
    cache.xhat = Mat<S>(x.rows, dim);
    cache.rstd.resize(static_cast<std::size_t>(x.rows));
    const S* g = gamma->value.row(0);
    const S* bt = beta->value.row(0);
    for (int t = 0; t < x.rows; ++t) {
      const S* r = x.row(t);
      double mean = 0.0;
      for (int j = 0; j < dim; ++j) mean += static_cast<double>(r[j]);
      mean /= dim;
      double var = 0.0;
      for (int j = 0; j < dim; ++j) {
        const double diff = static_cast<double>(r[j]) - mean;
        var += diff * diff;
      }
      var /= dim;
      const S rstd = static_cast<S>(1.0 / std::sqrt(var + kEps));
      cache.rstd[static_cast<std::size_t>(t)] = rstd;
      S* xh = cache.xhat.row(t);
      S* yr = y.row(t);
      for (int j = 0; j < dim; ++j) {
        xh[j] = static_cast<S>((static_cast<double>(r[j]) - mean)) * rstd;
        yr[j] = xh[j] * g[j] + bt[j];
      }
    }
    return y;
  }

  Mat<S> backward(const Mat<S>& dy, const Cache& cache) const {
    const int dim = dy.cols;
    Mat<S> dx(dy.rows, dim);
    const S* g = gamma->value.row(0);
    S* dgamma = gamma->grad.row(0);
    S* dbeta = beta->grad.row(0);
    for (int t = 0; t < dy.rows; ++t) {
      const S* dyr = dy.row(t);
      const S* xh = cache.xhat.row(t);
      const S rstd = cache.rstd[static_cast<std::size_t>(t)];
      S sum_dxhat{0}, sum_dxhat_xhat{0};
      for (int j = 0; j < dim; ++j) {
        dgamma[j] += dyr[j] * xh[j];
        dbeta[j] += dyr[j];
        const S dxhat = dyr[j] * g[j];
        sum_dxhat += dxhat;
        sum_dxhat_xhat += dxhat * xh[j];
      }
      const S inv_dim = S{1} / static_cast<S>(dim);
      S* dxr = dx.row(t);
      for (int j = 0; j < dim; ++j) {
        const S dxhat = dyr[j] * g[j];
        dxr[j] = rstd * (dxhat - sum_dxhat * inv_dim - xh[j] * sum_dxhat_xhat * inv_dim);
      }
    }
    return dx;
  }
};

template <class S>
inline S sigmoid(S x) {
  return static_cast<S>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

template <class S>
Mat<S> silu(const Mat<S>& x) {
  Mat<S> y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.d.size(); ++i) y.d[i] = x.d[i] * sigmoid(x.d[i]);
  return y;
}

template <class S>
Mat<S> silu_backward(const Mat<S>& dy, const Mat<S>& x) {
  Mat<S> dx(x.rows, x.cols);
  for (std::size_t i = 0; i < x.d.size(); ++i) {
    const S s = sigmoid(x.d[i]);
    dx.d[i] = dy.d[i] * (s + x.d[i] * s * (S{1} - s));
  }
  return dx;
}

// Inverted dropout. A null RNG disables it (mask becomes identity).
template <class S>
struct DropoutCache {
  Mat<S> scale;
  bool active = false;
};

template <class S>
Mat<S> apply_dropout(const Mat<S>& x, double rate, Rng* rng, DropoutCache<S>& cache) {
  if (rng == nullptr || rate <= 0.0) {
    cache.active = false;
    return x;
  }
  cache.active = true;
  cache.scale = Mat<S>(x.rows, x.cols);
  const S keep_scale = static_cast<S>(1.0 / (1.0 - rate));
  Mat<S> y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.d.size(); ++i) {
    const S m = rng->uniform() < rate ? S{0} : keep_scale;
    cache.scale.d[i] = m;
    y.d[i] = x.d[i] * m;
  }
  return y;
}

template <class S>
Mat<S> dropout_backward(const Mat<S>& dy, const DropoutCache<S>& cache) {
  if (!cache.active) return dy;
  Mat<S> dx(dy.rows, dy.cols);
  for (std::size_t i = 0; i < dy.d.size(); ++i) dx.d[i] = dy.d[i] * cache.scale.d[i];
  return dx;
}

}  // namespace brq

#endif  // BRQ_NN_HPP
