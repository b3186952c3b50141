// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Checkpoint container: magic "BRQ1", a JSON metadata block (config, step,
// normalization stats, cluster model), a JSON tensor index
// (name/dtype/shape/offset), then raw little-endian f32 tensor data.
// Tensors round-trip bit-identically.

#ifndef BRQ_CHECKPOINT_HPP
#define BRQ_CHECKPOINT_HPP

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "brq/clustering.hpp"
#include "brq/config.hpp"

namespace brq {

inline constexpr char kCheckpointMagic[4] = {'B', 'R', 'Q', '1'};

struct CheckpointData {
  long long step = 0;
  long long adam_step = 0;
  RunConfig config;
  NormStats norm_stats;
  std::optional<ClusterModel> cluster_model;
  std::vector<std::pair<std::string, MatF>> tensors;  // params + optimizer state

  const MatF* find_tensor(const std::string& name) const {
    for (const auto& [n, m] : tensors) {
      if (n == name) return &m;
    }
    return nullptr;
  }
};

void save_checkpoint(const CheckpointData& data, const std::string& path);
CheckpointData load_checkpoint(const std::string& path);

}  // namespace brq

#endif  // BRQ_CHECKPOINT_HPP
