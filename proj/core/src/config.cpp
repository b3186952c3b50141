// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace brq {
namespace {

using json = nlohmann::json;

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& section) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!allowed.contains(key)) {
      throw UserError("config: unknown key '" + key + "' in section '" + section + "'");
    }
  }
}

template <class T>
void get_if_present(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw UserError("train.steps must be >= 1");
  if (warmup_steps < 1) throw UserError("train.warmup_steps must be >= 1");
  if (lr_peak <= 0.0) throw UserError("train.lr_peak must be > 0");
  if (batch_utterances < 1) throw UserError("train.batch_utterances must be >= 1");
  if (validate_every < 1) throw UserError("train.validate_every must be >= 1");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw UserError("train.val_fraction must be in [0, 1)");
  }
  if (grad_clip_norm < 0.0) throw UserError("train.grad_clip_norm must be >= 0");
}

void RunConfig::validate() const {
  train.validate();
  loss.validate();
  features.validate();
  resolved_encoder().validate();
  if (quantizer.shape.n_codebooks < 1 || quantizer.shape.codebook_size < 2 ||
      quantizer.shape.codebook_dim < 1 || quantizer.shape.stack_factor < 1) {
    throw UserError("quantizer: dimensions must be positive (codebook_size >= 2)");
  }
  if (quantizer.temperature <= 0.0) throw UserError("quantizer.temperature must be > 0");
  if (encoder.subsample_factor != quantizer.shape.stack_factor) {
    throw UserError("quantizer.stack_factor must equal the encoder subsampling factor (4)");
  }
  if (masking.p_start < 0.0 || masking.p_start > 1.0) {
    throw UserError("masking.p_start must be in [0, 1]");
  }
  if (masking.span < 1) throw UserError("masking.span must be >= 1");
  if (masking.noise_std < 0.0) throw UserError("masking.noise_std must be >= 0");
  if (train.cluster_weighting &&
      (cluster_weights.w_s <= 0.0 || cluster_weights.w_p < 2.0 * cluster_weights.w_s)) {
    throw UserError("cluster_weights: require w_p >= 2 * w_s > 0");
  }
}

EncoderConfig RunConfig::resolved_encoder() const {
  EncoderConfig cfg = encoder;
  cfg.input_dim = features.n_mels;
  cfg.n_codebooks = quantizer.shape.n_codebooks;
  cfg.vocab = quantizer.shape.codebook_size;
  return cfg;
}

std::string RunConfig::to_json_text() const {
  json j;
  j["train"] = {{"batch_utterances", train.batch_utterances},
                {"steps", train.steps},
                {"lr_peak", train.lr_peak},
                {"warmup_steps", train.warmup_steps},
                {"adam_beta1", train.adam.beta1},
                {"adam_beta2", train.adam.beta2},
                {"adam_eps", train.adam.eps},
                {"grad_clip_norm", train.grad_clip_norm},
                {"seed", train.seed},
                {"validate_every", train.validate_every},
                {"val_fraction", train.val_fraction},
                {"val_mask_seed", train.val_mask_seed},
                {"cluster_weighting", train.cluster_weighting}};
  j["encoder"] = {{"n_layers", encoder.n_layers},
                  {"d_model", encoder.d_model},
                  {"n_heads", encoder.n_heads},
                  {"conv_kernel", encoder.conv_kernel},
                  {"ffn_expansion", encoder.ffn_expansion},
                  {"dropout", encoder.dropout},
                  {"max_rel_offset", encoder.max_rel_offset}};
  j["quantizer"] = {{"n_codebooks", quantizer.shape.n_codebooks},
                    {"codebook_size", quantizer.shape.codebook_size},
                    {"codebook_dim", quantizer.shape.codebook_dim},
                    {"stack_factor", quantizer.shape.stack_factor},
                    {"seed", quantizer.seed},
                    {"temperature", quantizer.temperature}};
  j["loss"] = {{"w_ce", loss.w_ce}, {"w_kl", loss.w_kl}, {"epsilon", loss.epsilon}};
  j["masking"] = {
      {"p_start", masking.p_start},
      {"span", masking.span},
      {"noise_std", masking.noise_std},
      {"target_mask_mode", masking.target_mask_mode == TargetMaskMode::kAny ? "any" : "all"}};
  j["features"] = {{"frame_len_samples", features.frame_len_samples},
                   {"hop_samples", features.hop_samples},
                   {"n_fft", features.n_fft},
                   {"n_mels", features.n_mels}};
  j["cluster_weights"] = {{"w_p", cluster_weights.w_p}, {"w_s", cluster_weights.w_s}};
  return j.dump(2);
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UserError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw UserError("config: top level must be an object");
  reject_unknown_keys(j, {"train", "encoder", "quantizer", "loss", "masking", "features",
                          "cluster_weights"},
                      "<top>");
  RunConfig cfg;
  try {
    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown_keys(t,
                          {"batch_utterances", "steps", "lr_peak", "warmup_steps", "adam_beta1",
                           "adam_beta2", "adam_eps", "grad_clip_norm", "seed", "validate_every",
                           "val_fraction", "val_mask_seed", "cluster_weighting"},
                          "train");
      get_if_present(t, "batch_utterances", cfg.train.batch_utterances);
      get_if_present(t, "steps", cfg.train.steps);
      get_if_present(t, "lr_peak", cfg.train.lr_peak);
      get_if_present(t, "warmup_steps", cfg.train.warmup_steps);
      get_if_present(t, "adam_beta1", cfg.train.adam.beta1);
      get_if_present(t, "adam_beta2", cfg.train.adam.beta2);
      get_if_present(t, "adam_eps", cfg.train.adam.eps);
      get_if_present(t, "grad_clip_norm", cfg.train.grad_clip_norm);
      get_if_present(t, "seed", cfg.train.seed);
      get_if_present(t, "validate_every", cfg.train.validate_every);
      get_if_present(t, "val_fraction", cfg.train.val_fraction);
      get_if_present(t, "val_mask_seed", cfg.train.val_mask_seed);
      get_if_present(t, "cluster_weighting", cfg.train.cluster_weighting);
    }
    if (j.contains("encoder")) {
      const json& e = j.at("encoder");
      reject_unknown_keys(e,
                          {"n_layers", "d_model", "n_heads", "conv_kernel", "ffn_expansion",
                           "dropout", "max_rel_offset"},
                          "encoder");
      get_if_present(e, "n_layers", cfg.encoder.n_layers);
      get_if_present(e, "d_model", cfg.encoder.d_model);
      get_if_present(e, "n_heads", cfg.encoder.n_heads);
      get_if_present(e, "conv_kernel", cfg.encoder.conv_kernel);
      get_if_present(e, "ffn_expansion", cfg.encoder.ffn_expansion);
      get_if_present(e, "dropout", cfg.encoder.dropout);
      get_if_present(e, "max_rel_offset", cfg.encoder.max_rel_offset);
    }
    if (j.contains("quantizer")) {
      const json& q = j.at("quantizer");
      reject_unknown_keys(q,
                          {"n_codebooks", "codebook_size", "codebook_dim", "stack_factor", "seed",
                           "temperature"},
                          "quantizer");
      get_if_present(q, "n_codebooks", cfg.quantizer.shape.n_codebooks);
      get_if_present(q, "codebook_size", cfg.quantizer.shape.codebook_size);
      get_if_present(q, "codebook_dim", cfg.quantizer.shape.codebook_dim);
      get_if_present(q, "stack_factor", cfg.quantizer.shape.stack_factor);
      get_if_present(q, "seed", cfg.quantizer.seed);
      get_if_present(q, "temperature", cfg.quantizer.temperature);
    }
    if (j.contains("loss")) {
      const json& l = j.at("loss");
      reject_unknown_keys(l, {"w_ce", "w_kl", "epsilon"}, "loss");
      get_if_present(l, "w_ce", cfg.loss.w_ce);
      get_if_present(l, "w_kl", cfg.loss.w_kl);
      get_if_present(l, "epsilon", cfg.loss.epsilon);
    }
    if (j.contains("masking")) {
      const json& m = j.at("masking");
      reject_unknown_keys(m, {"p_start", "span", "noise_std", "target_mask_mode"}, "masking");
      get_if_present(m, "p_start", cfg.masking.p_start);
      get_if_present(m, "span", cfg.masking.span);
      get_if_present(m, "noise_std", cfg.masking.noise_std);
      if (m.contains("target_mask_mode")) {
        const auto mode = m.at("target_mask_mode").get<std::string>();
        if (mode == "any") {
          cfg.masking.target_mask_mode = TargetMaskMode::kAny;
        } else if (mode == "all") {
          cfg.masking.target_mask_mode = TargetMaskMode::kAll;
        } else {
          throw UserError("config: masking.target_mask_mode must be 'any' or 'all'");
        }
      }
    }
    if (j.contains("features")) {
      const json& f = j.at("features");
      reject_unknown_keys(f, {"frame_len_samples", "hop_samples", "n_fft", "n_mels"}, "features");
      get_if_present(f, "frame_len_samples", cfg.features.frame_len_samples);
      get_if_present(f, "hop_samples", cfg.features.hop_samples);
      get_if_present(f, "n_fft", cfg.features.n_fft);
      get_if_present(f, "n_mels", cfg.features.n_mels);
    }
    if (j.contains("cluster_weights")) {
      const json& c = j.at("cluster_weights");
      reject_unknown_keys(c, {"w_p", "w_s"}, "cluster_weights");
      get_if_present(c, "w_p", cfg.cluster_weights.w_p);
      get_if_present(c, "w_s", cfg.cluster_weights.w_s);
    }
  } catch (const json::exception& e) {
    throw UserError(std::string("config: bad value type: ") + e.what());
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("config: cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_text(text);
}

void RunConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw UserError("config: cannot open for writing: " + path);
  out << to_json_text() << '\n';
}

RunConfig RunConfig::preset(const std::string& name) {
  RunConfig cfg;
  if (name == "baseline") {
    cfg.quantizer.shape = quantizer_preset("baseline");
    cfg.loss.w_ce = 1.0;
    cfg.loss.w_kl = 0.0;
    cfg.train.cluster_weighting = false;
    return cfg;
  }
  if (name == "proposed") {
    cfg.quantizer.shape = quantizer_preset("baseline");
    cfg.quantizer.shape.n_codebooks = 6;
    cfg.loss.w_ce = 1.0;
    cfg.loss.w_kl = 0.1;
    cfg.train.cluster_weighting = true;
    return cfg;
  }
  throw UserError("unknown preset: " + name);
}

}  // namespace brq
