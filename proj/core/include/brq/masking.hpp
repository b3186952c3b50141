// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Span masking: every frame is an independent span start with probability
// p_start; spans of fixed length are unioned (overlap permitted) and
// clipped at the sequence end. Masked frames are replaced with Gaussian
// noise drawn from a stream independent of the mask sampling stream.

#ifndef BRQ_MASKING_HPP
#define BRQ_MASKING_HPP

#include <cstdint>
#include <vector>

#include "brq/features.hpp"

namespace brq {

struct MaskSpec {
  std::vector<int> masked_frames;  // sorted, strictly increasing, in [0, T)
  std::uint64_t seed = 0;
  double p_start = 0.15;
  int span = 4;
};

MaskSpec sample_mask(int t_frames, double p_start, int span, std::uint64_t seed);

// Unmasked frames are bit-identical to the input; masked frames are fresh
// N(0, noise_std^2) draws per dimension.
FeatureSequence apply_mask(const FeatureSequence& seq, const MaskSpec& mask,
                           std::uint64_t noise_seed, double noise_std = 0.1);

enum class TargetMaskMode { kAny, kAll };

// Project a frame-level mask onto stacked target positions: position t'
// is masked iff any (or all) of its stack_factor constituent frames is.
std::vector<bool> project_mask_to_targets(const MaskSpec& mask, int t_frames,
                                          int stack_factor,
                                          TargetMaskMode mode = TargetMaskMode::kAny);

}  // namespace brq

#endif  // BRQ_MASKING_HPP
