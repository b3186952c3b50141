// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#ifndef BRQ_OPTIMIZER_HPP
#define BRQ_OPTIMIZER_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "brq/nn.hpp"

namespace brq {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
};

// Inverse-square-root schedule with linear warmup; peaks exactly at
// step == warmup_steps. Steps are 1-based.
inline double noam_learning_rate(long long step, double lr_peak, long long warmup_steps) {
  if (step < 1) return 0.0;
  if (step <= warmup_steps) {
    return lr_peak * static_cast<double>(step) / static_cast<double>(warmup_steps);
  }
  return lr_peak * std::sqrt(static_cast<double>(warmup_steps) / static_cast<double>(step));
}

template <class S>
double global_grad_norm(const ParamTable<S>& table) {
  double acc = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (const S g : table[i].grad.d) {
      acc += static_cast<double>(g) * static_cast<double>(g);
    }
  }
  return std::sqrt(acc);
}

template <class S>
void scale_grads(ParamTable<S>& table, double factor) {
  const S f = static_cast<S>(factor);
  for (std::size_t i = 0; i < table.size(); ++i) {
    for (S& g : table[i].grad.d) g *= f;
  }
}

// Clips the global gradient norm to max_norm; returns the pre-clip norm.
template <class S>
double clip_grad_norm(ParamTable<S>& table, double max_norm) {
  const double norm = global_grad_norm(table);
  if (max_norm > 0.0 && norm > max_norm) scale_grads(table, max_norm / norm);
  return norm;
}

// Adam with bias correction. Moment buffers use the parameter scalar type
// so checkpoints round-trip bit-identically.
template <class S>
class Adam {
 public:
  Adam(ParamTable<S>& table, const AdamConfig& cfg) : table_(&table), cfg_(cfg) {
    m_.reserve(table.size());
    v_.reserve(table.size());
    for (std::size_t i = 0; i < table.size(); ++i) {
      m_.emplace_back(table[i].value.rows, table[i].value.cols);
      v_.emplace_back(table[i].value.rows, table[i].value.cols);
    }
  }

  void step(double lr) {
    ++t_;
    const S b1 = static_cast<S>(cfg_.beta1);
    const S b2 = static_cast<S>(cfg_.beta2);
    const S one_minus_b1 = S{1} - b1;
    const S one_minus_b2 = S{1} - b2;
    const S bias1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const S bias2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    const S eps = static_cast<S>(cfg_.eps);
    const S lrs = static_cast<S>(lr);
    for (std::size_t i = 0; i < table_->size(); ++i) {
      auto& p = (*table_)[i];
      Mat<S>& m = m_[i];
      Mat<S>& v = v_[i];
      for (std::size_t j = 0; j < p.value.d.size(); ++j) {
        const S g = p.grad.d[j];
        m.d[j] = b1 * m.d[j] + one_minus_b1 * g;
        v.d[j] = b2 * v.d[j] + one_minus_b2 * g * g;
        const S mhat = m.d[j] / bias1;
        const S vhat = v.d[j] / bias2;
        p.value.d[j] -= lrs * mhat / (std::sqrt(vhat) + eps);
      }
    }
  }

  long long step_count() const { return t_; }
  void set_step_count(long long t) { t_ = t; }
  std::vector<Mat<S>>& moment1() { return m_; }
  std::vector<Mat<S>>& moment2() { return v_; }

 private:
  ParamTable<S>* table_;
  AdamConfig cfg_;
  std::vector<Mat<S>> m_, v_;
  long long t_ = 0;
};

}  // namespace brq

#endif  // BRQ_OPTIMIZER_HPP
