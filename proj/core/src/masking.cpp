// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/masking.hpp"

#include <algorithm>

#include "brq/rng.hpp"

namespace brq {

MaskSpec sample_mask(int t_frames, double p_start, int span, std::uint64_t seed) {
  if (t_frames < 1) throw UserError("sample_mask: T must be >= 1");
  if (p_start < 0.0 || p_start > 1.0) throw UserError("sample_mask: p_start must be in [0, 1]");
  if (span < 1) throw UserError("sample_mask: span must be >= 1");

  MaskSpec spec;
  spec.seed = seed;
  spec.p_start = p_start;
  spec.span = span;

  Rng rng(seed);
  std::vector<bool> masked(static_cast<std::size_t>(t_frames), false);
  for (int t = 0; t < t_frames; ++t) {
    const bool start = rng.uniform() < p_start;
    if (start) {
      const int end = std::min(t + span, t_frames);
      for (int i = t; i < end; ++i) masked[static_cast<std::size_t>(i)] = true;
    }
  }
  for (int t = 0; t < t_frames; ++t) {
    if (masked[static_cast<std::size_t>(t)]) spec.masked_frames.push_back(t);
  }
  return spec;
}

FeatureSequence apply_mask(const FeatureSequence& seq, const MaskSpec& mask,
                           std::uint64_t noise_seed, double noise_std) {
  FeatureSequence out = seq;
  Rng rng(noise_seed);
  for (const int t : mask.masked_frames) {
    if (t < 0 || t >= seq.frames()) throw UserError("apply_mask: mask index out of range");
    double* row = out.data.row(t);
    for (int d = 0; d < seq.dims(); ++d) row[d] = rng.normal(0.0, noise_std);
  }
  return out;
}

std::vector<bool> project_mask_to_targets(const MaskSpec& mask, int t_frames,
                                          int stack_factor, TargetMaskMode mode) {
  const int t_out = t_frames / stack_factor;
  std::vector<bool> frame_masked(static_cast<std::size_t>(t_frames), false);
  for (const int t : mask.masked_frames) {
    if (t >= 0 && t < t_frames) frame_masked[static_cast<std::size_t>(t)] = true;
  }
  std::vector<bool> out(static_cast<std::size_t>(t_out), false);
  for (int t = 0; t < t_out; ++t) {
    int count = 0;
    for (int s = 0; s < stack_factor; ++s) {
      if (frame_masked[static_cast<std::size_t>(t * stack_factor + s)]) ++count;
    }
    out[static_cast<std::size_t>(t)] =
        (mode == TargetMaskMode::kAny) ? (count > 0) : (count == stack_factor);
  }
  return out;
}

}  // namespace brq
