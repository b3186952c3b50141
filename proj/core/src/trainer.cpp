// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <nlohmann/json.hpp>

#include "brq/hash.hpp"
#include "brq/masking.hpp"

namespace brq {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (const double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

}  // namespace

std::string metrics_record_to_jsonl(const MetricsRecord& rec) {
  json j;
  j["phase"] = rec.phase;
  j["step"] = rec.step;
  j["lr"] = rec.learning_rate;
  j["total"] = rec.loss.total;
  j["ce"] = rec.loss.ce_per_codebook;
  j["kl"] = rec.loss.kl_per_codebook;
  j["weights"] = rec.loss.applied_weights;
  j["masked_positions"] = rec.loss.masked_positions;
  j["accuracy"] = rec.accuracy_per_codebook;
  return j.dump();
}

Trainer::Trainer(const RunConfig& cfg, const std::vector<ManifestEntry>& entries,
                 const std::string& audio_root, std::optional<ClusterModel> cluster_model)
    : Trainer(cfg, entries, audio_root, std::move(cluster_model), nullptr) {}

Trainer::Trainer(const RunConfig& cfg, const std::vector<ManifestEntry>& entries,
                 const std::string& audio_root, std::optional<ClusterModel> cluster_model,
                 const NormStats* fixed_stats)
    : cfg_(cfg), cluster_model_(std::move(cluster_model)) {
  cfg_.validate();
  if (entries.empty()) throw UserError("trainer: empty manifest");

  const int n_books = cfg_.quantizer.shape.n_codebooks;
  if (cfg_.train.cluster_weighting) {
    if (!cluster_model_.has_value()) {
      throw UserError("trainer: cluster_weighting requires a cluster model");
    }
    if (cluster_model_->k != n_books) {
      throw UserError("trainer: cluster count " + std::to_string(cluster_model_->k) +
                      " does not match codebook count " + std::to_string(n_books));
    }
  }

  // Load audio and extract log-mel features.
  struct Loaded {
    ManifestEntry entry;
    FeatureSequence logmel;
  };
  std::vector<Loaded> loaded;
  loaded.reserve(entries.size());
  for (const auto& e : entries) {
    fs::path p(e.path);
    if (p.is_relative()) p = fs::path(audio_root) / p;
    const Waveform wave = load_wav(p.string());
    Loaded l;
    l.entry = e;
    l.logmel = log_mel(wave, cfg_.features);
    loaded.push_back(std::move(l));
  }

  // Deterministic held-out split: sort ids, every stride-th goes to
  // validation. The split depends only on the corpus, not the run seed,
  // so different configurations see the same validation set.
  std::vector<int> order(loaded.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return loaded[a].entry.id < loaded[b].entry.id; });
  std::vector<bool> is_val(loaded.size(), false);
  if (cfg_.train.val_fraction > 0.0 && loaded.size() >= 2) {
    const int stride = std::max(2, static_cast<int>(std::lround(1.0 / cfg_.train.val_fraction)));
    bool any = false;
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      if (static_cast<int>(rank) % stride == stride - 1) {
        is_val[order[rank]] = true;
        any = true;
      }
    }
    // A positive val_fraction always yields a non-empty held-out split.
    if (!any) is_val[order.back()] = true;
  }

  // Normalization statistics from the training split only.
  if (fixed_stats != nullptr) {
    stats_ = *fixed_stats;
  } else {
    std::vector<FeatureSequence> train_feats;
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      if (!is_val[i]) train_feats.push_back(loaded[i].logmel);
    }
    if (train_feats.empty()) throw UserError("trainer: empty training split");
    stats_ = compute_norm_stats(train_feats);
  }

  bank_ = init_bank(cfg_.quantizer.seed, cfg_.quantizer.shape);

  auto build_utt = [&](const Loaded& l) {
    Utterance u;
    u.id = l.entry.id;
    u.duration_s = l.entry.duration_s;
    u.cluster = l.entry.cluster;
    if (!u.cluster.has_value() && cluster_model_.has_value()) {
      const auto it = cluster_model_->assignments.find(u.id);
      if (it != cluster_model_->assignments.end()) u.cluster = it->second;
    }
    const FeatureSequence norm = normalize_global(l.logmel, stats_);
    u.normalized = norm.data;
    QuantizeResult qr = quantize(bank_, norm);
    u.targets = std::move(qr.targets);
    u.projected = std::move(qr.projected);
    return u;
  };
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    if (is_val[i]) {
      val_utts_.push_back(build_utt(loaded[i]));
    } else {
      train_utts_.push_back(build_utt(loaded[i]));
    }
  }

  if (cfg_.train.cluster_weighting) {
    for (const auto& u : train_utts_) {
      if (!u.cluster.has_value() || *u.cluster < 0 || *u.cluster >= n_books) {
        throw UserError("trainer: utterance '" + u.id +
                        "' lacks a valid cluster id for cluster weighting");
      }
    }
    for (const auto& u : val_utts_) {
      if (!u.cluster.has_value() || *u.cluster < 0 || *u.cluster >= n_books) {
        throw UserError("trainer: utterance '" + u.id +
                        "' lacks a valid cluster id for cluster weighting");
      }
    }
  }

  encoder_ = std::make_unique<Encoder<float>>(cfg_.resolved_encoder(),
                                              derive_seed(cfg_.train.seed, "encoder"));
  adam_ = std::make_unique<Adam<float>>(encoder_->params(), cfg_.train.adam);
}

std::vector<int> Trainer::batch_for_step(long long step) const {
  // Duration-sorted bucketing with per-epoch bucket-order shuffling.
  const int n = static_cast<int>(train_utts_.size());
  const int batch = std::min(cfg_.train.batch_utterances, n);
  std::vector<int> sorted(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) sorted[static_cast<std::size_t>(i)] = i;
  std::sort(sorted.begin(), sorted.end(), [&](int a, int b) {
    if (train_utts_[a].duration_s != train_utts_[b].duration_s) {
      return train_utts_[a].duration_s < train_utts_[b].duration_s;
    }
    return train_utts_[a].id < train_utts_[b].id;
  });
  const int n_buckets = (n + batch - 1) / batch;
  std::vector<int> bucket_order(static_cast<std::size_t>(n_buckets));
  for (int i = 0; i < n_buckets; ++i) bucket_order[static_cast<std::size_t>(i)] = i;
  const long long epoch = (step - 1) / n_buckets;
  Rng rng(derive_seed(cfg_.train.seed, "epoch-order", static_cast<std::uint64_t>(epoch)));
  rng.shuffle(bucket_order.begin(), bucket_order.end());
  const int bucket = bucket_order[static_cast<std::size_t>((step - 1) % n_buckets)];
  std::vector<int> indices;
  for (int i = bucket * batch; i < std::min((bucket + 1) * batch, n); ++i) {
    indices.push_back(sorted[static_cast<std::size_t>(i)]);
  }
  return indices;
}

std::optional<std::vector<double>> Trainer::weights_for(const Utterance& utt) const {
  if (!cfg_.train.cluster_weighting) return std::nullopt;
  const CodebookWeights cw =
      codebook_weights(*utt.cluster, cfg_.quantizer.shape.n_codebooks, cfg_.cluster_weights.w_p,
                       cfg_.cluster_weights.w_s);
  return cw.weights;
}

void Trainer::evaluate_sample(const Utterance& utt, const MaskSpec& mask,
                              std::uint64_t noise_seed, bool train_mode, Rng* dropout_rng,
                              LossReport& report, std::vector<long long>& correct,
                              std::vector<long long>& masked_count,
                              std::vector<MatF>* dlogits_out, std::vector<MatF>* probs_out,
                              std::vector<bool>* tmask_out,
                              Encoder<float>::SampleCache* cache_out) const {
  (void)train_mode;
  FeatureSequence seq;
  seq.kind = FeatureKind::kLogMel;
  seq.data = utt.normalized;
  const FeatureSequence masked_seq =
      apply_mask(seq, mask, noise_seed, cfg_.masking.noise_std);
  const MatF x = cast_mat<float>(masked_seq.data);

  Encoder<float>::SampleCache cache = encoder_->forward_one(x, dropout_rng);
  const std::vector<bool> tmask = project_mask_to_targets(
      mask, utt.normalized.rows, cfg_.quantizer.shape.stack_factor, cfg_.masking.target_mask_mode);

  std::vector<MatD> sims;
  if (cfg_.loss.w_kl > 0.0) {
    sims = similarity_distribution(bank_, utt.projected, cfg_.quantizer.temperature);
  }
  const auto weights = weights_for(utt);
  report = combined_loss(cache.probs, utt.targets, sims, tmask, cfg_.loss, weights);

  const int n_books = cfg_.quantizer.shape.n_codebooks;
  for (int n = 0; n < n_books; ++n) {
    const MatF& p = cache.probs[static_cast<std::size_t>(n)];
    for (int t = 0; t < p.rows; ++t) {
      if (!tmask[static_cast<std::size_t>(t)]) continue;
      const float* row = p.row(t);
      int argmax = 0;
      for (int v = 1; v < p.cols; ++v) {
        if (row[v] > row[argmax]) argmax = v;
      }
      ++masked_count[static_cast<std::size_t>(n)];
      if (argmax == utt.targets.at(n, t)) ++correct[static_cast<std::size_t>(n)];
    }
  }

  if (dlogits_out != nullptr) {
    *dlogits_out = combined_loss_grad(cache.probs, utt.targets, sims, tmask, cfg_.loss, weights);
  }
  if (probs_out != nullptr) *probs_out = cache.probs;
  if (tmask_out != nullptr) *tmask_out = tmask;
  if (cache_out != nullptr) *cache_out = std::move(cache);
}

StepResult Trainer::step() {
  const auto t0 = std::chrono::steady_clock::now();
  const long long s = step_ + 1;
  if (s > cfg_.train.steps) throw UserError("trainer: step target already reached");
  const std::vector<int> batch = batch_for_step(s);
  const int n_books = cfg_.quantizer.shape.n_codebooks;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  encoder_->zero_grads();
  StepResult result;
  std::vector<long long> correct(static_cast<std::size_t>(n_books), 0);
  std::vector<long long> masked_count(static_cast<std::size_t>(n_books), 0);
  std::vector<std::string> nan_ids;

  for (const int idx : batch) {
    const Utterance& utt = train_utts_[static_cast<std::size_t>(idx)];
    const MaskSpec mask =
        sample_mask(utt.normalized.rows, cfg_.masking.p_start, cfg_.masking.span,
                    derive_seed(cfg_.train.seed, "mask", static_cast<std::uint64_t>(s),
                                static_cast<std::uint64_t>(idx)));
    const std::uint64_t noise_seed = derive_seed(
        cfg_.train.seed, "mask-noise", static_cast<std::uint64_t>(s), static_cast<std::uint64_t>(idx));
    std::optional<Rng> dropout_rng;
    if (cfg_.encoder.dropout > 0.0) {
      dropout_rng.emplace(derive_seed(cfg_.train.seed, "dropout", static_cast<std::uint64_t>(s),
                                      static_cast<std::uint64_t>(idx)));
    }

    LossReport report;
    std::vector<MatF> dlogits;
    std::vector<MatF> probs;
    std::vector<bool> tmask;
    Encoder<float>::SampleCache cache;
    evaluate_sample(utt, mask, noise_seed, /*train_mode=*/true,
                    dropout_rng ? &*dropout_rng : nullptr, report, correct, masked_count,
                    &dlogits, capture_trace_ ? &probs : nullptr, capture_trace_ ? &tmask : nullptr,
                    &cache);

    if (!std::isfinite(report.total)) nan_ids.push_back(utt.id);

    // Batch-mean loss: scale each sample's logit gradients by 1/B.
    for (auto& g : dlogits) {
      for (float& v : g.d) v = static_cast<float>(v * inv_batch);
    }
    encoder_->backward_one(cache, dlogits);

    result.batch_ids.push_back(utt.id);
    result.per_sample.push_back(report);
    if (capture_trace_) {
      StepTraceSample trace;
      trace.utterance_index = idx;
      trace.probs = std::move(probs);
      trace.target_mask = std::move(tmask);
      result.trace.push_back(std::move(trace));
    }
  }

  if (!nan_ids.empty()) {
    std::string ids;
    for (const auto& id : nan_ids) ids += (ids.empty() ? "" : ", ") + id;
    throw std::runtime_error("trainer: NaN loss at step " + std::to_string(s) +
                             "; offending batch ids: " + ids);
  }

  clip_grad_norm(encoder_->params(), cfg_.train.grad_clip_norm);
  const double lr = noam_learning_rate(s, cfg_.train.lr_peak, cfg_.train.warmup_steps);
  adam_->step(lr);
  step_ = s;

  // Aggregate the batch report (simple mean over samples; accuracy is
  // masked-position weighted).
  MetricsRecord& rec = result.record;
  rec.phase = "train";
  rec.step = s;
  rec.learning_rate = lr;
  rec.loss.ce_per_codebook.assign(static_cast<std::size_t>(n_books), 0.0);
  rec.loss.kl_per_codebook.assign(static_cast<std::size_t>(n_books), 0.0);
  rec.loss.applied_weights.assign(static_cast<std::size_t>(n_books), 0.0);
  for (const auto& r : result.per_sample) {
    rec.loss.total += r.total;
    rec.loss.masked_positions += r.masked_positions;
    for (int n = 0; n < n_books; ++n) {
      rec.loss.ce_per_codebook[n] += r.ce_per_codebook[n];
      rec.loss.kl_per_codebook[n] += r.kl_per_codebook[n];
      rec.loss.applied_weights[n] += r.applied_weights[n];
    }
  }
  rec.loss.total *= inv_batch;
  for (int n = 0; n < n_books; ++n) {
    rec.loss.ce_per_codebook[n] *= inv_batch;
    rec.loss.kl_per_codebook[n] *= inv_batch;
    rec.loss.applied_weights[n] *= inv_batch;
    rec.accuracy_per_codebook.push_back(
        masked_count[n] > 0 ? static_cast<double>(correct[n]) / masked_count[n] : 0.0);
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return result;
}

MetricsRecord Trainer::evaluate_fixed_masks(const std::vector<const Utterance*>& utts) const {
  if (utts.empty()) throw UserError("trainer: empty validation set");
  const auto t0 = std::chrono::steady_clock::now();
  const int n_books = cfg_.quantizer.shape.n_codebooks;
  MetricsRecord rec;
  rec.phase = "val";
  rec.step = step_;
  rec.learning_rate = noam_learning_rate(step_, cfg_.train.lr_peak, cfg_.train.warmup_steps);
  rec.loss.ce_per_codebook.assign(static_cast<std::size_t>(n_books), 0.0);
  rec.loss.kl_per_codebook.assign(static_cast<std::size_t>(n_books), 0.0);
  rec.loss.applied_weights.assign(static_cast<std::size_t>(n_books), 0.0);
  std::vector<long long> correct(static_cast<std::size_t>(n_books), 0);
  std::vector<long long> masked_count(static_cast<std::size_t>(n_books), 0);

  for (std::size_t i = 0; i < utts.size(); ++i) {
    const Utterance& utt = *utts[i];
    // Fixed per-run validation masks: independent of the training step and
    // of the run seed, so curves from different configurations compare.
    const MaskSpec mask = sample_mask(
        utt.normalized.rows, cfg_.masking.p_start, cfg_.masking.span,
        derive_seed(cfg_.train.val_mask_seed, "val-mask", static_cast<std::uint64_t>(i)));
    const std::uint64_t noise_seed =
        derive_seed(cfg_.train.val_mask_seed, "val-noise", static_cast<std::uint64_t>(i));
    LossReport report;
    evaluate_sample(utt, mask, noise_seed, /*train_mode=*/false, /*dropout_rng=*/nullptr, report,
                    correct, masked_count, nullptr, nullptr, nullptr, nullptr);
    rec.loss.total += report.total;
    rec.loss.masked_positions += report.masked_positions;
    for (int n = 0; n < n_books; ++n) {
      rec.loss.ce_per_codebook[n] += report.ce_per_codebook[n];
      rec.loss.kl_per_codebook[n] += report.kl_per_codebook[n];
      rec.loss.applied_weights[n] += report.applied_weights[n];
    }
  }
  const double inv = 1.0 / static_cast<double>(utts.size());
  rec.loss.total *= inv;
  for (int n = 0; n < n_books; ++n) {
    rec.loss.ce_per_codebook[n] *= inv;
    rec.loss.kl_per_codebook[n] *= inv;
    rec.loss.applied_weights[n] *= inv;
    rec.accuracy_per_codebook.push_back(
        masked_count[n] > 0 ? static_cast<double>(correct[n]) / masked_count[n] : 0.0);
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
  return rec;
}

MetricsRecord Trainer::validate_now() const {
  std::vector<const Utterance*> utts;
  utts.reserve(val_utts_.size());
  for (const auto& u : val_utts_) utts.push_back(&u);
  return evaluate_fixed_masks(utts);
}

MetricsRecord Trainer::validate_all() const {
  std::vector<const Utterance*> utts;
  utts.reserve(train_utts_.size() + val_utts_.size());
  for (const auto& u : train_utts_) utts.push_back(&u);
  for (const auto& u : val_utts_) utts.push_back(&u);
  std::sort(utts.begin(), utts.end(),
            [](const Utterance* a, const Utterance* b) { return a->id < b->id; });
  return evaluate_fixed_masks(utts);
}

void Trainer::run(const std::string& out_dir) {
  fs::create_directories(out_dir);
  const fs::path metrics_path = fs::path(out_dir) / "metrics.jsonl";
  std::ofstream metrics(metrics_path,
                        resumed_ ? (std::ios::out | std::ios::app) : std::ios::out);
  if (!metrics) throw UserError("trainer: cannot open metrics log: " + metrics_path.string());
  if (!resumed_) cfg_.save((fs::path(out_dir) / "config.json").string());

  char stepbuf[32];
  while (step_ < cfg_.train.steps) {
    const StepResult result = step();
    metrics << metrics_record_to_jsonl(result.record) << '\n';
    metrics.flush();
    const bool checkpoint_now =
        step_ % cfg_.train.validate_every == 0 || step_ == cfg_.train.steps;
    if (checkpoint_now) {
      if (!val_utts_.empty()) {
        const MetricsRecord val = validate_now();
        metrics << metrics_record_to_jsonl(val) << '\n';
        metrics.flush();
        std::cerr << "step " << step_ << " train_loss " << result.record.loss.total
                  << " val_loss " << val.loss.total << " (" << result.record.wall_ms << " ms)\n";
      } else {
        std::cerr << "step " << step_ << " train_loss " << result.record.loss.total << " ("
                  << result.record.wall_ms << " ms)\n";
      }
      std::snprintf(stepbuf, sizeof(stepbuf), "ckpt_%06lld.brq", step_);
      save_checkpoint_file((fs::path(out_dir) / stepbuf).string());
    }
  }
}

std::string Trainer::frozen_assets_sha256() const {
  std::vector<unsigned char> bytes = bank_bytes(bank_);
  const auto mean_bytes = doubles_to_bytes(stats_.mean);
  const auto std_bytes = doubles_to_bytes(stats_.stddev);
  bytes.insert(bytes.end(), mean_bytes.begin(), mean_bytes.end());
  bytes.insert(bytes.end(), std_bytes.begin(), std_bytes.end());
  if (cluster_model_.has_value()) {
    const auto cb = centroid_bytes(*cluster_model_);
    bytes.insert(bytes.end(), cb.begin(), cb.end());
  }
  return sha256_hex(bytes);
}

CheckpointData Trainer::make_checkpoint() const {
  CheckpointData data;
  data.step = step_;
  data.adam_step = adam_->step_count();
  data.config = cfg_;
  data.norm_stats = stats_;
  data.cluster_model = cluster_model_;
  const auto& table = encoder_->params();
  for (std::size_t i = 0; i < table.size(); ++i) {
    data.tensors.emplace_back("param." + table[i].name, table[i].value);
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    data.tensors.emplace_back("adam.m." + table[i].name, adam_->moment1()[i]);
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    data.tensors.emplace_back("adam.v." + table[i].name, adam_->moment2()[i]);
  }
  return data;
}

void Trainer::save_checkpoint_file(const std::string& path) const {
  save_checkpoint(make_checkpoint(), path);
}

void Trainer::restore_tensors(const CheckpointData& data) {
  auto& table = encoder_->params();
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto restore = [&](const std::string& prefix, MatF& dst) {
      const MatF* src = data.find_tensor(prefix + table[i].name);
      if (src == nullptr) throw UserError("checkpoint: missing tensor " + prefix + table[i].name);
      if (!src->same_shape(dst)) {
        throw UserError("checkpoint: shape mismatch for tensor " + prefix + table[i].name);
      }
      dst = *src;
    };
    restore("param.", table[i].value);
    restore("adam.m.", adam_->moment1()[i]);
    restore("adam.v.", adam_->moment2()[i]);
  }
  adam_->set_step_count(data.adam_step);
}

std::unique_ptr<Trainer> Trainer::from_checkpoint(const std::string& path,
                                                  const std::vector<ManifestEntry>& entries,
                                                  const std::string& audio_root,
                                                  std::optional<int> override_total_steps) {
  const CheckpointData data = load_checkpoint(path);
  RunConfig cfg = data.config;
  if (override_total_steps.has_value()) cfg.train.steps = *override_total_steps;
  if (cfg.train.steps < data.step) {
    throw UserError("trainer: checkpoint is already past the requested step target");
  }
  std::unique_ptr<Trainer> t(
      new Trainer(cfg, entries, audio_root, data.cluster_model, &data.norm_stats));
  t->restore_tensors(data);
  t->step_ = data.step;
  t->resumed_ = true;
  return t;
}

}  // namespace brq
