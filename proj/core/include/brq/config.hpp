// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Run configuration: one JSON document with train / encoder / quantizer /
// loss / masking / features / cluster_weights sections. Unknown keys are
// rejected at every level. Presets encode the named experimental setups:
// "baseline" (single codebook, CE only) and "proposed" (six codebooks,
// CE + KL, cluster-specific codebook weighting).

#ifndef BRQ_CONFIG_HPP
#define BRQ_CONFIG_HPP

#include <cstdint>
#include <string>

#include "brq/encoder.hpp"
#include "brq/features.hpp"
#include "brq/losses.hpp"
#include "brq/masking.hpp"
#include "brq/optimizer.hpp"
#include "brq/quantizer.hpp"

namespace brq {

struct TrainConfig {
  int batch_utterances = 4;
  int steps = 300;
  double lr_peak = 1e-3;
  int warmup_steps = 1000;
  AdamConfig adam;
  double grad_clip_norm = 5.0;
  std::uint64_t seed = 0;
  int validate_every = 50;
  double val_fraction = 0.1;
  std::uint64_t val_mask_seed = 24317;  // shared across runs so curves compare
  bool cluster_weighting = false;

  void validate() const;
};

struct MaskingConfig {
  double p_start = 0.15;
  int span = 4;
  double noise_std = 0.1;
  TargetMaskMode target_mask_mode = TargetMaskMode::kAny;
};

struct QuantizerConfig {
  QuantizerShape shape;
  std::uint64_t seed = 1234;
  double temperature = 1.0;
};

struct ClusterWeightConfig {
  double w_p = 2.0;
  double w_s = 0.8;
};

struct RunConfig {
  TrainConfig train;
  EncoderConfig encoder;  // architecture only; heads/vocab come from quantizer
  QuantizerConfig quantizer;
  LossConfig loss;
  MaskingConfig masking;
  FrameConfig features;
  ClusterWeightConfig cluster_weights;

  // Cross-section checks (stack factor vs subsampling, weight ratio, ...).
  void validate() const;

  // Encoder config with n_codebooks/vocab/input_dim filled in from the
  // quantizer and feature sections.
  EncoderConfig resolved_encoder() const;

  std::string to_json_text() const;
  static RunConfig from_json_text(const std::string& text);
  static RunConfig load(const std::string& path);
  void save(const std::string& path) const;

  // "baseline" or "proposed".
  static RunConfig preset(const std::string& name);
};

}  // namespace brq

#endif  // BRQ_CONFIG_HPP
