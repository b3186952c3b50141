// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Masked pre-training objective: per-codebook cross-entropy against
// quantizer indices, per-codebook KL divergence KL(p || d) against the
// similarity distributions, combined as
//   L = w_ce * mean_n(weight_n * CE_n) + w_kl * mean_n(weight_n * KL_n).
// Every term averages over masked target positions only. Templated on the
// scalar type so gradient checks can run in full double precision.

#ifndef BRQ_LOSSES_HPP
#define BRQ_LOSSES_HPP

#include <cmath>
#include <optional>
#include <vector>

#include "brq/audio.hpp"
#include "brq/mat.hpp"
#include "brq/quantizer.hpp"

namespace brq {

struct LossConfig {
  double w_ce = 1.0;
  double w_kl = 0.1;
  double epsilon = 1e-10;

  void validate() const {
    if (w_ce < 0.0 || w_kl < 0.0 || (w_ce == 0.0 && w_kl == 0.0)) {
      throw UserError("LossConfig: weights must be >= 0 and not both zero");
    }
    if (epsilon <= 0.0) throw UserError("LossConfig: epsilon must be > 0");
  }
};

struct LossReport {
  std::vector<double> ce_per_codebook;
  std::vector<double> kl_per_codebook;
  std::vector<double> applied_weights;
  double total = 0.0;
  long long masked_positions = 0;  // 0 flags an empty mask
};

namespace detail {

template <class S>
void check_prob_rows(const std::vector<Mat<S>>& probs) {
  for (const auto& m : probs) {
    for (int t = 0; t < m.rows; ++t) {
      const S* r = m.row(t);
      double sum = 0.0;
      for (int v = 0; v < m.cols; ++v) sum += static_cast<double>(r[v]);
      // Non-finite rows pass through so a NaN loss reaches the trainer's
      // abort path with batch ids attached.
      if (std::isfinite(sum) && std::abs(sum - 1.0) > 1e-5) {
        throw UserError("loss: probability row does not sum to 1");
      }
    }
  }
}

inline long long count_masked(const std::vector<bool>& masked) {
  long long n = 0;
  for (const bool b : masked) {
    if (b) ++n;
  }
  return n;
}

}  // namespace detail

// Per-codebook mean over masked positions of -log(max(p[target], epsilon)).
// An empty mask yields zeros.
template <class S>
std::vector<double> ce_loss(const std::vector<Mat<S>>& probs, const TargetSequence& targets,
                            const std::vector<bool>& masked, double epsilon = 1e-10) {
  const int n_books = static_cast<int>(probs.size());
  if (targets.n_codebooks != n_books) throw UserError("ce_loss: codebook count mismatch");
  detail::check_prob_rows(probs);
  const long long m_count = detail::count_masked(masked);
  std::vector<double> out(static_cast<std::size_t>(n_books), 0.0);
  if (m_count == 0) return out;
  for (int n = 0; n < n_books; ++n) {
    const Mat<S>& p = probs[n];
    if (p.rows != targets.length || static_cast<int>(masked.size()) != p.rows) {
      throw UserError("ce_loss: length mismatch");
    }
    double acc = 0.0;
    for (int t = 0; t < p.rows; ++t) {
      if (!masked[static_cast<std::size_t>(t)]) continue;
      const std::int32_t target = targets.at(n, t);
      if (target < 0 || target >= p.cols) throw UserError("ce_loss: target out of range");
      acc += -std::log(std::max(static_cast<double>(p.at(t, target)), epsilon));
    }
    out[static_cast<std::size_t>(n)] = acc / static_cast<double>(m_count);
  }
  return out;
}

// Per-codebook mean over masked positions of
// sum_i p_i * log((p_i + eps) / (d_i + eps)); the KL(p || d) direction.
template <class S>
std::vector<double> kl_loss(const std::vector<Mat<S>>& probs, const std::vector<MatD>& sim_dists,
                            const std::vector<bool>& masked, double epsilon = 1e-10) {
  const int n_books = static_cast<int>(probs.size());
  if (static_cast<int>(sim_dists.size()) != n_books) {
    throw UserError("kl_loss: similarity distribution count mismatch");
  }
  detail::check_prob_rows(probs);
  const long long m_count = detail::count_masked(masked);
  std::vector<double> out(static_cast<std::size_t>(n_books), 0.0);
  if (m_count == 0) return out;
  for (int n = 0; n < n_books; ++n) {
    const Mat<S>& p = probs[n];
    const MatD& d = sim_dists[n];
    if (p.rows != d.rows || p.cols != d.cols) throw UserError("kl_loss: shape mismatch");
    double acc = 0.0;
    for (int t = 0; t < p.rows; ++t) {
      if (!masked[static_cast<std::size_t>(t)]) continue;
      const S* pr = p.row(t);
      const double* dr = d.row(t);
      for (int v = 0; v < p.cols; ++v) {
        const double pv = static_cast<double>(pr[v]);
        acc += pv * std::log((pv + epsilon) / (dr[v] + epsilon));
      }
    }
    out[static_cast<std::size_t>(n)] = acc / static_cast<double>(m_count);
  }
  return out;
}

// Weighted combination. When cfg.w_kl == 0 the KL term is skipped
// entirely and sim_dists may be empty. Weights default to all ones.
template <class S>
LossReport combined_loss(const std::vector<Mat<S>>& probs, const TargetSequence& targets,
                         const std::vector<MatD>& sim_dists, const std::vector<bool>& masked,
                         const LossConfig& cfg,
                         const std::optional<std::vector<double>>& weights = std::nullopt) {
  cfg.validate();
  const int n_books = static_cast<int>(probs.size());
  LossReport report;
  report.applied_weights =
      weights.has_value() ? *weights : std::vector<double>(static_cast<std::size_t>(n_books), 1.0);
  if (static_cast<int>(report.applied_weights.size()) != n_books) {
    throw UserError("combined_loss: weight length mismatch");
  }
  report.masked_positions = detail::count_masked(masked);
  report.ce_per_codebook = ce_loss(probs, targets, masked, cfg.epsilon);
  if (cfg.w_kl > 0.0) {
    report.kl_per_codebook = kl_loss(probs, sim_dists, masked, cfg.epsilon);
  } else {
    report.kl_per_codebook.assign(static_cast<std::size_t>(n_books), 0.0);
  }
  double ce_mean = 0.0, kl_mean = 0.0;
  for (int n = 0; n < n_books; ++n) {
    ce_mean += report.applied_weights[n] * report.ce_per_codebook[n];
    kl_mean += report.applied_weights[n] * report.kl_per_codebook[n];
  }
  ce_mean /= static_cast<double>(n_books);
  kl_mean /= static_cast<double>(n_books);
  report.total = cfg.w_ce * ce_mean + cfg.w_kl * kl_mean;
  return report;
}

// Gradient of combined_loss with respect to the pre-softmax logits that
// produced probs (the softmax Jacobian is folded in). Unmasked positions
// get exact zeros.
template <class S>
std::vector<Mat<S>> combined_loss_grad(
    const std::vector<Mat<S>>& probs, const TargetSequence& targets,
    const std::vector<MatD>& sim_dists, const std::vector<bool>& masked, const LossConfig& cfg,
    const std::optional<std::vector<double>>& weights = std::nullopt) {
  cfg.validate();
  const int n_books = static_cast<int>(probs.size());
  const std::vector<double> w =
      weights.has_value() ? *weights : std::vector<double>(static_cast<std::size_t>(n_books), 1.0);
  if (static_cast<int>(w.size()) != n_books) {
    throw UserError("combined_loss_grad: weight length mismatch");
  }
  const long long m_count = detail::count_masked(masked);

  std::vector<Mat<S>> grads;
  grads.reserve(static_cast<std::size_t>(n_books));
  std::vector<double> dp;
  for (int n = 0; n < n_books; ++n) {
    const Mat<S>& p = probs[n];
    Mat<S> g(p.rows, p.cols);
    if (m_count > 0) {
      const double ce_coef = cfg.w_ce * w[n] / (static_cast<double>(n_books) * m_count);
      const double kl_coef = cfg.w_kl * w[n] / (static_cast<double>(n_books) * m_count);
      dp.assign(static_cast<std::size_t>(p.cols), 0.0);
      for (int t = 0; t < p.rows; ++t) {
        if (!masked[static_cast<std::size_t>(t)]) continue;
        const S* pr = p.row(t);
        // dL/dp at this position.
        for (int v = 0; v < p.cols; ++v) {
          const double pv = static_cast<double>(pr[v]);
          double gv = 0.0;
          if (kl_coef != 0.0) {
            const double dv = sim_dists[n].at(t, v);
            gv += kl_coef * (std::log((pv + cfg.epsilon) / (dv + cfg.epsilon)) +
                             pv / (pv + cfg.epsilon));
          }
          dp[static_cast<std::size_t>(v)] = gv;
        }
        if (ce_coef != 0.0) {
          const std::int32_t target = targets.at(n, t);
          const double pt = static_cast<double>(pr[target]);
          if (pt > cfg.epsilon) {
            dp[static_cast<std::size_t>(target)] += ce_coef * (-1.0 / pt);
          }
        }
        // Through the softmax: dz_j = p_j * (dp_j - sum_i p_i dp_i).
        double inner = 0.0;
        for (int v = 0; v < p.cols; ++v) {
          inner += static_cast<double>(pr[v]) * dp[static_cast<std::size_t>(v)];
        }
        S* gr = g.row(t);
        for (int v = 0; v < p.cols; ++v) {
          gr[v] = static_cast<S>(static_cast<double>(pr[v]) *
                                 (dp[static_cast<std::size_t>(v)] - inner));
        }
      }
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

}  // namespace brq

#endif  // BRQ_LOSSES_HPP
