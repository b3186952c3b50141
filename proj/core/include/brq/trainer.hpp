// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Deterministic pre-training loop: data -> features -> normalization ->
// masking -> quantizer targets -> encoder -> combined loss -> Adam.
// Every random draw is derived statelessly from (seed, step, utterance),
// so two runs with the same inputs produce byte-identical metrics and a
// run resumed from any checkpoint continues bit-for-bit.

#ifndef BRQ_TRAINER_HPP
#define BRQ_TRAINER_HPP

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "brq/checkpoint.hpp"
#include "brq/clustering.hpp"
#include "brq/config.hpp"

namespace brq {

struct MetricsRecord {
  std::string phase = "train";  // "train" or "val"
  long long step = 0;
  double learning_rate = 0.0;
  LossReport loss;
  std::vector<double> accuracy_per_codebook;  // masked-target accuracy
  double wall_ms = 0.0;  // console diagnostics only; never serialized
};

// One JSONL line; wall_ms is deliberately excluded so metrics logs are
// byte-identical across runs with equal seeds.
std::string metrics_record_to_jsonl(const MetricsRecord& rec);

struct StepTraceSample {
  int utterance_index = 0;  // index into the training set
  std::vector<MatF> probs;
  std::vector<bool> target_mask;
};

struct StepResult {
  MetricsRecord record;
  std::vector<LossReport> per_sample;
  std::vector<std::string> batch_ids;
  std::vector<StepTraceSample> trace;  // filled only when trace capture is on
};

class Trainer {
 public:
  Trainer(const RunConfig& cfg, const std::vector<ManifestEntry>& entries,
          const std::string& audio_root,
          std::optional<ClusterModel> cluster_model = std::nullopt);

  // Rebuilds the run from a checkpoint; training continues at step+1.
  // The stored config is authoritative except for the total step target.
  static std::unique_ptr<Trainer> from_checkpoint(
      const std::string& path, const std::vector<ManifestEntry>& entries,
      const std::string& audio_root, std::optional<int> override_total_steps = std::nullopt);

  // One optimizer step (masks, targets, forward, backward, clip, Adam).
  StepResult step();

  // Full validation pass with the run's fixed validation mask seeds.
  // Never mutates parameters.
  MetricsRecord validate_now() const;

  // Same evaluation over every utterance (train and validation splits),
  // id-sorted, with masks keyed by that order.
  MetricsRecord validate_all() const;

  // Runs to cfg.train.steps, appending metrics JSONL and writing
  // checkpoints at every validation point under out_dir.
  void run(const std::string& out_dir);

  long long current_step() const { return step_; }
  const RunConfig& config() const { return cfg_; }
  const QuantizerBank& bank() const { return bank_; }
  const NormStats& norm_stats() const { return stats_; }
  const std::optional<ClusterModel>& cluster_model() const { return cluster_model_; }
  Encoder<float>& encoder() { return *encoder_; }
  const Encoder<float>& encoder() const { return *encoder_; }

  std::size_t train_size() const { return train_utts_.size(); }
  std::size_t val_size() const { return val_utts_.size(); }
  const TargetSequence& train_targets(int index) const { return train_utts_[index].targets; }
  const std::string& train_id(int index) const { return train_utts_[index].id; }

  void set_capture_trace(bool on) { capture_trace_ = on; }

  // SHA-256 over quantizer matrices, normalization stats, and cluster
  // centroids; the frozen-asset fingerprint.
  std::string frozen_assets_sha256() const;

  CheckpointData make_checkpoint() const;
  void save_checkpoint_file(const std::string& path) const;

 private:
  struct Utterance {
    std::string id;
    MatD normalized;  // T x n_mels, standardized with the run's stats
    TargetSequence targets;
    std::vector<MatD> projected;
    std::optional<int> cluster;
    double duration_s = 0.0;
  };

  Trainer(const RunConfig& cfg, const std::vector<ManifestEntry>& entries,
          const std::string& audio_root, std::optional<ClusterModel> cluster_model,
          const NormStats* fixed_stats);

  std::vector<int> batch_for_step(long long step) const;
  MetricsRecord evaluate_fixed_masks(const std::vector<const Utterance*>& utts) const;
  void evaluate_sample(const Utterance& utt, const MaskSpec& mask, std::uint64_t noise_seed,
                       bool train_mode, Rng* dropout_rng, LossReport& report,
                       std::vector<long long>& correct, std::vector<long long>& masked_count,
                       std::vector<MatF>* dlogits_out, std::vector<MatF>* probs_out,
                       std::vector<bool>* tmask_out,
                       Encoder<float>::SampleCache* cache_out) const;
  std::optional<std::vector<double>> weights_for(const Utterance& utt) const;
  void restore_tensors(const CheckpointData& data);

  RunConfig cfg_;
  NormStats stats_;
  QuantizerBank bank_;
  std::optional<ClusterModel> cluster_model_;
  std::vector<Utterance> train_utts_;
  std::vector<Utterance> val_utts_;
  std::unique_ptr<Encoder<float>> encoder_;
  std::unique_ptr<Adam<float>> adam_;
  long long step_ = 0;
  bool resumed_ = false;
  bool capture_trace_ = false;

  friend std::unique_ptr<Trainer> make_resumed_trainer(const CheckpointData&,
                                                       const std::vector<ManifestEntry>&,
                                                       const std::string&, std::optional<int>);
};

}  // namespace brq

#endif  // BRQ_TRAINER_HPP
