// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Fixed random-projection quantizer bank: N independent (projection,
// codebook) pairs mapping stacked normalized log-mel frames to discrete
// target indices by cosine similarity. Banks are immutable after
// construction and reconstructible bit-identically from (seed, shape).

#ifndef BRQ_QUANTIZER_HPP
#define BRQ_QUANTIZER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "brq/features.hpp"
#include "brq/mat.hpp"

namespace brq {

struct QuantizerShape {
  int n_codebooks = 1;
  int codebook_size = 8192;
  int codebook_dim = 16;
  int stack_factor = 4;
  int input_dim = 80;

  bool operator==(const QuantizerShape&) const = default;
};

// Named shape presets: "baseline" (V=8192, d=16, N=1) and
// "best-single" (V=10240, d=32, N=1).
QuantizerShape quantizer_preset(const std::string& name);

struct QuantizerBank {
  QuantizerShape shape;
  std::uint64_t seed = 0;
  std::vector<MatD> projections;  // N of (S*input_dim) x d
  std::vector<MatD> codebooks;    // N of V x d, unit-norm rows
};

struct TargetSequence {
  int n_codebooks = 0;
  int length = 0;         // T' = floor(T / stack_factor)
  int codebook_size = 0;  // V, for range checks
  std::vector<std::int32_t> indices;  // row-major N x T'

  std::int32_t at(int codebook, int t) const {
    return indices[static_cast<std::size_t>(codebook) * length + t];
  }
};

struct QuantizeResult {
  TargetSequence targets;
  std::vector<MatD> projected;  // N of T' x d
};

// Projections are Xavier-uniform, codebooks standard normal with rows
// normalized to unit length. Each (projection, codebook) pair draws from
// its own seed-derived substream.
QuantizerBank init_bank(std::uint64_t seed, const QuantizerShape& shape);

// Frames are grouped into consecutive non-overlapping stacks of S (the
// trailing remainder is dropped), projected, and matched to the codebook
// row with the highest cosine similarity. Ties break to the lowest index.
QuantizeResult quantize(const QuantizerBank& bank, const FeatureSequence& normalized);

// Softmax over (cosine similarity / temperature) per position; the KL
// target distributions. Rows sum to one.
std::vector<MatD> similarity_distribution(const QuantizerBank& bank,
                                          const std::vector<MatD>& projected,
                                          double temperature = 1.0);

// Raw bytes of every projection and codebook matrix in a fixed order;
// input for frozen-asset checksums.
std::vector<unsigned char> bank_bytes(const QuantizerBank& bank);

}  // namespace brq

#endif  // BRQ_QUANTIZER_HPP
