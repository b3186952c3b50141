// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/quantizer.hpp"

#include <cmath>
#include <cstring>

#include "brq/rng.hpp"

namespace brq {

QuantizerShape quantizer_preset(const std::string& name) {
  if (name == "baseline") return QuantizerShape{.n_codebooks = 1, .codebook_size = 8192, .codebook_dim = 16};
  if (name == "best-single") return QuantizerShape{.n_codebooks = 1, .codebook_size = 10240, .codebook_dim = 32};
  throw UserError("unknown quantizer preset: " + name);
}

QuantizerBank init_bank(std::uint64_t seed, const QuantizerShape& shape) {
  if (shape.n_codebooks < 1 || shape.codebook_size < 1 || shape.codebook_dim < 1 ||
      shape.stack_factor < 1 || shape.input_dim < 1) {
    throw UserError("init_bank: all dimensions must be positive");
  }
  QuantizerBank bank;
  bank.shape = shape;
  bank.seed = seed;
  const int in_dim = shape.stack_factor * shape.input_dim;
  for (int n = 0; n < shape.n_codebooks; ++n) {
    Rng proj_rng(derive_seed(seed, "projection", static_cast<std::uint64_t>(n)));
    MatD proj(in_dim, shape.codebook_dim);
    for (double& v : proj.d) v = proj_rng.xavier_uniform(in_dim, shape.codebook_dim);
    bank.projections.push_back(std::move(proj));

    Rng code_rng(derive_seed(seed, "codebook", static_cast<std::uint64_t>(n)));
    MatD code(shape.codebook_size, shape.codebook_dim);
    for (double& v : code.d) v = code_rng.normal();
    for (int r = 0; r < code.rows; ++r) {
      double* row = code.row(r);
      double norm = 0.0;
      for (int c = 0; c < code.cols; ++c) norm += row[c] * row[c];
      norm = std::sqrt(norm);
      if (norm < 1e-12) {
        // Degenerate draw; fall back to a unit basis vector.
        for (int c = 0; c < code.cols; ++c) row[c] = (c == 0) ? 1.0 : 0.0;
      } else {
        for (int c = 0; c < code.cols; ++c) row[c] /= norm;
      }
    }
    bank.codebooks.push_back(std::move(code));
  }
  return bank;
}

QuantizeResult quantize(const QuantizerBank& bank, const FeatureSequence& normalized) {
  const int stack = bank.shape.stack_factor;
  const int in_dim = stack * bank.shape.input_dim;
  if (normalized.dims() != bank.shape.input_dim) {
    throw UserError("quantize: feature dimension mismatch");
  }
  if (normalized.frames() < stack) {
    throw UserError("quantize: sequence shorter than one stack");
  }
  const int t_out = normalized.frames() / stack;
  const int vocab = bank.shape.codebook_size;

  // Stack S consecutive frames into one row; remainder frames are dropped.
  MatD stacked(t_out, in_dim);
  for (int t = 0; t < t_out; ++t) {
    double* row = stacked.row(t);
    for (int s = 0; s < stack; ++s) {
      const double* f = normalized.data.row(t * stack + s);
      std::memcpy(row + static_cast<std::size_t>(s) * bank.shape.input_dim, f,
                  sizeof(double) * static_cast<std::size_t>(bank.shape.input_dim));
    }
  }

  QuantizeResult result;
  result.targets.n_codebooks = bank.shape.n_codebooks;
  result.targets.length = t_out;
  result.targets.codebook_size = vocab;
  result.targets.indices.resize(static_cast<std::size_t>(bank.shape.n_codebooks) * t_out);
  for (int n = 0; n < bank.shape.n_codebooks; ++n) {
    MatD proj;
    gemm(stacked, bank.projections[n], proj);
    const MatD& code = bank.codebooks[n];
    for (int t = 0; t < t_out; ++t) {
      const double* q = proj.row(t);
      double qnorm = 0.0;
      for (int c = 0; c < proj.cols; ++c) qnorm += q[c] * q[c];
      qnorm = std::sqrt(qnorm);
      // Codebook rows are unit-norm, so for a fixed query the cosine
      // ranking equals the dot-product ranking; qnorm only scales it.
      int best = 0;
      double best_dot = -std::numeric_limits<double>::infinity();
      for (int v = 0; v < vocab; ++v) {
        const double* cb = code.row(v);
        double dot = 0.0;
        for (int c = 0; c < proj.cols; ++c) dot += q[c] * cb[c];
        if (dot > best_dot) {
          best_dot = dot;
          best = v;
        }
      }
      if (qnorm == 0.0) best = 0;  // undefined direction; fixed convention
      result.targets.indices[static_cast<std::size_t>(n) * t_out + t] = best;
    }
    result.projected.push_back(std::move(proj));
  }
  return result;
}

std::vector<MatD> similarity_distribution(const QuantizerBank& bank,
                                          const std::vector<MatD>& projected,
                                          double temperature) {
  if (temperature <= 0.0) throw UserError("similarity_distribution: temperature must be > 0");
  if (projected.size() != bank.codebooks.size()) {
    throw UserError("similarity_distribution: projected/codebook count mismatch");
  }
  std::vector<MatD> dists;
  dists.reserve(projected.size());
  for (std::size_t n = 0; n < projected.size(); ++n) {
    const MatD& proj = projected[n];
    const MatD& code = bank.codebooks[n];
    MatD out(proj.rows, code.rows);
    for (int t = 0; t < proj.rows; ++t) {
      const double* q = proj.row(t);
      double qnorm = 0.0;
      for (int c = 0; c < proj.cols; ++c) qnorm += q[c] * q[c];
      qnorm = std::sqrt(qnorm);
      const double inv_qnorm = qnorm > 0.0 ? 1.0 / qnorm : 0.0;
      double* o = out.row(t);
      for (int v = 0; v < code.rows; ++v) {
        const double* cb = code.row(v);
        double dot = 0.0;
        for (int c = 0; c < proj.cols; ++c) dot += q[c] * cb[c];
        o[v] = dot * inv_qnorm / temperature;
      }
    }
    softmax_rows(out);
    dists.push_back(std::move(out));
  }
  return dists;
}

std::vector<unsigned char> bank_bytes(const QuantizerBank& bank) {
  std::vector<unsigned char> bytes;
  auto put = [&bytes](const MatD& m) {
    const auto* p = reinterpret_cast<const unsigned char*>(m.d.data());
    bytes.insert(bytes.end(), p, p + m.d.size() * sizeof(double));
  };
  for (const auto& m : bank.projections) put(m);
  for (const auto& m : bank.codebooks) put(m);
  return bytes;
}

}  // namespace brq
