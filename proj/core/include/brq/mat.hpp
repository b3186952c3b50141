// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Row-major dense matrix and the handful of kernels the encoder needs.
// All loops have a fixed iteration order so results are reproducible
// run to run; there is no threading and no reassociation.

#ifndef BRQ_MAT_HPP
#define BRQ_MAT_HPP

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace brq {

template <class S>
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<S> d;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), d(static_cast<std::size_t>(r) * c, S{0}) {}

  static Mat zeros(int r, int c) { return Mat(r, c); }

  S* row(int i) { return d.data() + static_cast<std::size_t>(i) * cols; }
  const S* row(int i) const { return d.data() + static_cast<std::size_t>(i) * cols; }

  S& at(int i, int j) { return d[static_cast<std::size_t>(i) * cols + j]; }
  S at(int i, int j) const { return d[static_cast<std::size_t>(i) * cols + j]; }

  std::size_t size() const { return d.size(); }
  void fill(S v) { std::fill(d.begin(), d.end(), v); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

using MatF = Mat<float>;
using MatD = Mat<double>;

// out = a * b (or out += with accumulate). a: m x k, b: k x n.
template <class S>
void gemm(const Mat<S>& a, const Mat<S>& b, Mat<S>& out, bool accumulate = false) {
  assert(a.cols == b.rows);
  if (!accumulate) {
    out = Mat<S>(a.rows, b.cols);
  }
  assert(out.rows == a.rows && out.cols == b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const S* ai = a.row(i);
    S* oi = out.row(i);
    for (int k = 0; k < a.cols; ++k) {
      const S aik = ai[k];
      const S* bk = b.row(k);
      for (int j = 0; j < b.cols; ++j) oi[j] += aik * bk[j];
    }
  }
}

// out = a * b^T. a: m x k, b: n x k.
template <class S>
void gemm_nt(const Mat<S>& a, const Mat<S>& b, Mat<S>& out, bool accumulate = false) {
  assert(a.cols == b.cols);
  if (!accumulate) {
    out = Mat<S>(a.rows, b.rows);
  }
  for (int i = 0; i < a.rows; ++i) {
    const S* ai = a.row(i);
    S* oi = out.row(i);
    for (int j = 0; j < b.rows; ++j) {
      const S* bj = b.row(j);
      S acc{0};
      for (int k = 0; k < a.cols; ++k) acc += ai[k] * bj[k];
      oi[j] += acc;
    }
  }
}

// out = a^T * b. a: k x m, b: k x n.
template <class S>
void gemm_tn(const Mat<S>& a, const Mat<S>& b, Mat<S>& out, bool accumulate = false) {
  assert(a.rows == b.rows);
  if (!accumulate) {
    out = Mat<S>(a.cols, b.cols);
  }
  for (int k = 0; k < a.rows; ++k) {
    const S* ak = a.row(k);
    const S* bk = b.row(k);
    for (int i = 0; i < a.cols; ++i) {
      const S aki = ak[i];
      S* oi = out.row(i);
      for (int j = 0; j < b.cols; ++j) oi[j] += aki * bk[j];
    }
  }
}

// In-place numerically stable softmax over each row.
template <class S>
void softmax_rows(Mat<S>& m) {
  for (int i = 0; i < m.rows; ++i) {
    S* r = m.row(i);
    S mx = r[0];
    for (int j = 1; j < m.cols; ++j) mx = std::max(mx, r[j]);
    S sum{0};
    for (int j = 0; j < m.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    const S inv = S{1} / sum;
    for (int j = 0; j < m.cols; ++j) r[j] *= inv;
  }
}

template <class S>
bool all_finite(const Mat<S>& m) {
  for (const S v : m.d) {
    if (!std::isfinite(static_cast<double>(v))) return false;
  }
  return true;
}

template <class To, class From>
Mat<To> cast_mat(const Mat<From>& m) {
  Mat<To> out(m.rows, m.cols);
  for (std::size_t i = 0; i < m.d.size(); ++i) out.d[i] = static_cast<To>(m.d[i]);
  return out;
}

}  // namespace brq

#endif  // BRQ_MAT_HPP
