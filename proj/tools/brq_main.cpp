// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Command-line surface: synth, cluster, pretrain, validate, quantize,
// stats. Machine-readable output goes to files or stdout; diagnostics go
// to stderr. Exit codes: 0 success, 1 user error, 2 internal error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "brq/audio.hpp"
#include "brq/clustering.hpp"
#include "brq/config.hpp"
#include "brq/masking.hpp"
#include "brq/trainer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace brq;

namespace {

std::string manifest_root(const std::string& manifest_path) {
  return fs::path(manifest_path).parent_path().string();
}

std::vector<Waveform> load_corpus(const std::vector<ManifestEntry>& entries,
                                  const std::string& root) {
  std::vector<Waveform> waves;
  waves.reserve(entries.size());
  for (const auto& e : entries) {
    fs::path p(e.path);
    if (p.is_relative()) p = fs::path(root) / p;
    Waveform w = load_wav(p.string());
    w.id = e.id;  // manifest id wins over the file stem
    waves.push_back(std::move(w));
  }
  return waves;
}

struct SynthArgs {
  std::string out;
  int n = 8;
  double duration = 2.0;
  std::string family = "mixed";
  int sample_rate = 16000;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& args) {
  CorpusSpec spec;
  spec.n_utterances = args.n;
  spec.duration_s = args.duration;
  spec.family = parse_signal_family(args.family);
  spec.sample_rate_hz = args.sample_rate;
  spec.seed = args.seed;
  const SynthCorpus corpus = synth_corpus(spec);
  fs::create_directories(args.out);
  for (std::size_t i = 0; i < corpus.waves.size(); ++i) {
    write_wav(corpus.waves[i], (fs::path(args.out) / corpus.entries[i].path).string());
  }
  write_manifest(corpus.entries, (fs::path(args.out) / "manifest.jsonl").string());
  std::cerr << "wrote " << corpus.waves.size() << " utterances to " << args.out << "\n";
  return 0;
}

struct ClusterArgs {
  std::string manifest;
  std::string out_model;
  std::string out_manifest;
  int k = 6;
  std::uint64_t seed = 0;
};

int cmd_cluster(const ClusterArgs& args) {
  const auto entries = read_manifest(args.manifest);
  if (entries.empty()) throw UserError("cluster: empty manifest");
  const auto waves = load_corpus(entries, manifest_root(args.manifest));
  FrameConfig fcfg;
  std::vector<UtteranceSummary> summaries;
  summaries.reserve(waves.size());
  for (const auto& w : waves) summaries.push_back(utterance_summary(w, fcfg));
  const ClusterModel model = fit_kmeans(summaries, args.k, args.seed);
  save_cluster_model(model, args.out_model);

  std::vector<ManifestEntry> annotated = entries;
  for (auto& e : annotated) e.cluster = model.assignments.at(e.id);
  const std::string out_manifest =
      args.out_manifest.empty()
          ? (fs::path(args.manifest).parent_path() / "manifest_clustered.jsonl").string()
          : args.out_manifest;
  write_manifest(annotated, out_manifest);
  std::cerr << "clustered " << entries.size() << " utterances into " << args.k
            << " clusters; model " << args.out_model << ", manifest " << out_manifest << "\n";
  return 0;
}

struct PretrainArgs {
  std::string manifest;
  std::string out;
  std::string config_path;
  std::string preset;
  std::string cluster_model_path;
  std::string resume;
  bool dump_config = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> steps;
  std::optional<int> codebooks;
  std::optional<int> vocab;
  std::optional<int> dim;
  std::optional<int> batch;
  std::optional<double> w_kl;
  std::optional<double> dropout;
  std::optional<int> d_model;
  std::optional<int> n_layers;
  std::optional<int> warmup;
  std::optional<double> lr_peak;
  std::optional<int> validate_every;
  std::optional<double> val_fraction;
};

RunConfig resolve_config(const PretrainArgs& args) {
  RunConfig cfg;
  if (!args.preset.empty()) {
    cfg = RunConfig::preset(args.preset);
  } else if (!args.config_path.empty()) {
    cfg = RunConfig::load(args.config_path);
  }
  if (args.seed) cfg.train.seed = *args.seed;
  if (args.steps) cfg.train.steps = *args.steps;
  if (args.codebooks) cfg.quantizer.shape.n_codebooks = *args.codebooks;
  if (args.vocab) cfg.quantizer.shape.codebook_size = *args.vocab;
  if (args.dim) cfg.quantizer.shape.codebook_dim = *args.dim;
  if (args.batch) cfg.train.batch_utterances = *args.batch;
  if (args.w_kl) cfg.loss.w_kl = *args.w_kl;
  if (args.dropout) cfg.encoder.dropout = *args.dropout;
  if (args.d_model) cfg.encoder.d_model = *args.d_model;
  if (args.n_layers) cfg.encoder.n_layers = *args.n_layers;
  if (args.warmup) cfg.train.warmup_steps = *args.warmup;
  if (args.lr_peak) cfg.train.lr_peak = *args.lr_peak;
  if (args.validate_every) cfg.train.validate_every = *args.validate_every;
  if (args.val_fraction) cfg.train.val_fraction = *args.val_fraction;
  cfg.validate();
  return cfg;
}

int cmd_pretrain(const PretrainArgs& args) {
  if (!args.resume.empty()) {
    if (!fs::exists(args.resume)) throw UserError("pretrain: no such checkpoint: " + args.resume);
    const auto entries = read_manifest(args.manifest);
    auto trainer =
        Trainer::from_checkpoint(args.resume, entries, manifest_root(args.manifest), args.steps);
    trainer->run(args.out);
    return 0;
  }

  const RunConfig cfg = resolve_config(args);
  if (args.dump_config) {
    std::cout << cfg.to_json_text() << "\n";
    return 0;
  }
  const auto entries = read_manifest(args.manifest);
  std::optional<ClusterModel> model;
  if (!args.cluster_model_path.empty()) model = load_cluster_model(args.cluster_model_path);
  Trainer trainer(cfg, entries, manifest_root(args.manifest), std::move(model));
  trainer.run(args.out);
  return 0;
}

struct ValidateArgs {
  std::string checkpoint;
  std::string manifest;
  std::string split = "val";
};

int cmd_validate(const ValidateArgs& args) {
  const auto entries = read_manifest(args.manifest);
  auto trainer =
      Trainer::from_checkpoint(args.checkpoint, entries, manifest_root(args.manifest));
  const MetricsRecord rec =
      args.split == "all" ? trainer->validate_all() : trainer->validate_now();
  std::cout << metrics_record_to_jsonl(rec) << "\n";
  return 0;
}

struct QuantizeArgs {
  std::string manifest;
  std::string out;
  std::string checkpoint;
  int codebooks = 1;
  int vocab = 8192;
  int dim = 16;
  std::uint64_t seed = 1234;
};

int cmd_quantize(const QuantizeArgs& args) {
  const auto entries = read_manifest(args.manifest);
  if (entries.empty()) throw UserError("quantize: empty manifest");
  const auto waves = load_corpus(entries, manifest_root(args.manifest));

  FrameConfig fcfg;
  QuantizerShape shape{.n_codebooks = args.codebooks, .codebook_size = args.vocab,
                       .codebook_dim = args.dim};
  std::uint64_t bank_seed = args.seed;
  NormStats stats;
  if (!args.checkpoint.empty()) {
    const CheckpointData data = load_checkpoint(args.checkpoint);
    fcfg = data.config.features;
    shape = data.config.quantizer.shape;
    bank_seed = data.config.quantizer.seed;
    stats = data.norm_stats;
  }

  std::vector<FeatureSequence> feats;
  feats.reserve(waves.size());
  for (const auto& w : waves) feats.push_back(log_mel(w, fcfg));
  if (args.checkpoint.empty()) stats = compute_norm_stats(feats);
  const QuantizerBank bank = init_bank(bank_seed, shape);

  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!args.out.empty()) {
    file.open(args.out);
    if (!file) throw UserError("quantize: cannot open output: " + args.out);
    out = &file;
  }
  for (std::size_t i = 0; i < waves.size(); ++i) {
    const QuantizeResult r = quantize(bank, normalize_global(feats[i], stats));
    json line;
    line["id"] = entries[i].id;
    line["vocab"] = shape.codebook_size;
    json tokens = json::array();
    for (int n = 0; n < shape.n_codebooks; ++n) {
      json stream = json::array();
      for (int t = 0; t < r.targets.length; ++t) stream.push_back(r.targets.at(n, t));
      tokens.push_back(std::move(stream));
    }
    line["tokens"] = std::move(tokens);
    (*out) << line.dump() << "\n";
  }
  return 0;
}

struct StatsArgs {
  std::string tokens;
  bool mask_report = false;
  double p_start = 0.15;
  int span = 4;
  int frames = 10000;
  int trials = 200;
  std::uint64_t seed = 0;
};

int cmd_stats(const StatsArgs& args) {
  if (args.tokens.empty() && !args.mask_report) {
    throw UserError("stats: nothing to do; pass --tokens and/or --mask-report");
  }
  json report;
  if (!args.tokens.empty()) {
    std::ifstream in(args.tokens);
    if (!in) throw UserError("stats: cannot open token file: " + args.tokens);
    std::vector<std::vector<long long>> counts;
    long long vocab = 0;
    std::string line;
    long long utterances = 0;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      vocab = j.at("vocab").get<long long>();
      const auto& tokens = j.at("tokens");
      if (counts.empty()) counts.resize(tokens.size());
      for (std::size_t n = 0; n < tokens.size(); ++n) {
        auto& c = counts[n];
        c.resize(static_cast<std::size_t>(vocab), 0);
        for (const auto& v : tokens[n]) ++c[v.get<std::size_t>()];
      }
      ++utterances;
    }
    if (utterances == 0) throw UserError("stats: empty token file");
    json books = json::array();
    for (const auto& c : counts) {
      long long total = 0, used = 0;
      for (const long long x : c) {
        total += x;
        used += x > 0 ? 1 : 0;
      }
      double entropy = 0.0;
      for (const long long x : c) {
        if (x == 0) continue;
        const double p = static_cast<double>(x) / static_cast<double>(total);
        entropy -= p * std::log(p);
      }
      books.push_back({{"positions", total},
                       {"used_codes", used},
                       {"utilization", static_cast<double>(used) / static_cast<double>(vocab)},
                       {"entropy_nats", entropy},
                       {"max_entropy_nats", std::log(static_cast<double>(vocab))}});
    }
    report["codebooks"] = std::move(books);
    report["utterances"] = utterances;
    report["vocab"] = vocab;
  }
  if (args.mask_report) {
    double fraction = 0.0;
    for (int trial = 0; trial < args.trials; ++trial) {
      const MaskSpec m = sample_mask(args.frames, args.p_start, args.span,
                                     derive_seed(args.seed, "stats-mask",
                                                 static_cast<std::uint64_t>(trial)));
      fraction += static_cast<double>(m.masked_frames.size()) / args.frames;
    }
    fraction /= args.trials;
    report["mask"] = {{"p_start", args.p_start},
                      {"span", args.span},
                      {"frames", args.frames},
                      {"trials", args.trials},
                      {"empirical_fraction", fraction},
                      {"closed_form", 1.0 - std::pow(1.0 - args.p_start, args.span)}};
  }
  std::cout << report.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"brq: masked-prediction speech pre-training with a fixed "
               "random-projection quantizer bank"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus and manifest");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--n", synth.n, "Number of utterances");
  synth_cmd->add_option("--duration", synth.duration, "Utterance length in seconds");
  synth_cmd->add_option("--family", synth.family, "pure|harmonic|noise|pattern|mixed");
  synth_cmd->add_option("--sample-rate", synth.sample_rate, "Sample rate in Hz");
  synth_cmd->add_option("--seed", synth.seed, "Corpus seed");

  ClusterArgs cluster;
  auto* cluster_cmd =
      app.add_subcommand("cluster", "Fit k-means over utterance summaries, annotate manifest");
  cluster_cmd->add_option("--manifest", cluster.manifest, "Input manifest")->required();
  cluster_cmd->add_option("--k", cluster.k, "Cluster count (ties to codebook count)");
  cluster_cmd->add_option("--seed", cluster.seed, "Clustering seed");
  cluster_cmd->add_option("--out", cluster.out_model, "Cluster model JSON path")->required();
  cluster_cmd->add_option("--out-manifest", cluster.out_manifest,
                          "Annotated manifest path (default: manifest_clustered.jsonl)");

  PretrainArgs pretrain;
  auto* pretrain_cmd = app.add_subcommand("pretrain", "Run masked pre-training");
  pretrain_cmd->add_option("--manifest", pretrain.manifest, "Corpus manifest");
  pretrain_cmd->add_option("--out", pretrain.out, "Run directory (metrics + checkpoints)");
  auto* cfg_opt = pretrain_cmd->add_option("--config", pretrain.config_path, "Config JSON file");
  pretrain_cmd->add_option("--preset", pretrain.preset, "baseline|proposed")->excludes(cfg_opt);
  pretrain_cmd->add_option("--cluster-model", pretrain.cluster_model_path,
                           "Cluster model JSON (required for cluster weighting)");
  pretrain_cmd->add_option("--resume", pretrain.resume, "Checkpoint to resume from");
  pretrain_cmd->add_flag("--dump-config", pretrain.dump_config,
                         "Print the resolved config and exit");
  pretrain_cmd->add_option("--seed", pretrain.seed, "Run seed");
  pretrain_cmd->add_option("--steps", pretrain.steps, "Total optimizer steps");
  pretrain_cmd->add_option("--codebooks", pretrain.codebooks, "Codebook count N");
  pretrain_cmd->add_option("--vocab", pretrain.vocab, "Codebook size V");
  pretrain_cmd->add_option("--dim", pretrain.dim, "Codebook dimension d");
  pretrain_cmd->add_option("--batch", pretrain.batch, "Batch size in utterances");
  pretrain_cmd->add_option("--w-kl", pretrain.w_kl, "KL loss scale");
  pretrain_cmd->add_option("--dropout", pretrain.dropout, "Encoder dropout rate");
  pretrain_cmd->add_option("--d-model", pretrain.d_model, "Encoder width");
  pretrain_cmd->add_option("--n-layers", pretrain.n_layers, "Conformer layer count");
  pretrain_cmd->add_option("--warmup", pretrain.warmup, "Warmup steps");
  pretrain_cmd->add_option("--lr-peak", pretrain.lr_peak, "Peak learning rate");
  pretrain_cmd->add_option("--validate-every", pretrain.validate_every, "Validation interval");
  pretrain_cmd->add_option("--val-fraction", pretrain.val_fraction, "Held-out fraction");

  ValidateArgs validate;
  auto* validate_cmd = app.add_subcommand("validate", "Evaluate a checkpoint on a manifest");
  validate_cmd->add_option("--checkpoint", validate.checkpoint, "Checkpoint path")->required();
  validate_cmd->add_option("--manifest", validate.manifest, "Corpus manifest")->required();
  validate_cmd->add_option("--split", validate.split, "val|all");

  QuantizeArgs quant;
  auto* quantize_cmd =
      app.add_subcommand("quantize", "Emit target index streams per utterance as JSONL");
  quantize_cmd->add_option("--manifest", quant.manifest, "Corpus manifest")->required();
  quantize_cmd->add_option("--out", quant.out, "Output JSONL (default stdout)");
  quantize_cmd->add_option("--checkpoint", quant.checkpoint,
                           "Take quantizer shape and stats from a checkpoint");
  quantize_cmd->add_option("--codebooks", quant.codebooks, "Codebook count N");
  quantize_cmd->add_option("--vocab", quant.vocab, "Codebook size V");
  quantize_cmd->add_option("--dim", quant.dim, "Codebook dimension d");
  quantize_cmd->add_option("--seed", quant.seed, "Bank seed");

  StatsArgs stats;
  auto* stats_cmd =
      app.add_subcommand("stats", "Codebook utilization / entropy and mask coverage reports");
  stats_cmd->add_option("--tokens", stats.tokens, "Token JSONL from quantize");
  stats_cmd->add_flag("--mask-report", stats.mask_report, "Monte-Carlo mask coverage report");
  stats_cmd->add_option("--p", stats.p_start, "Mask start probability");
  stats_cmd->add_option("--span", stats.span, "Mask span");
  stats_cmd->add_option("--frames", stats.frames, "Frames per trial");
  stats_cmd->add_option("--trials", stats.trials, "Monte-Carlo trials");
  stats_cmd->add_option("--seed", stats.seed, "Report seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (cluster_cmd->parsed()) return cmd_cluster(cluster);
    if (pretrain_cmd->parsed()) {
      if (!pretrain.dump_config && (pretrain.manifest.empty() || pretrain.out.empty())) {
        throw UserError("pretrain: --manifest and --out are required");
      }
      return cmd_pretrain(pretrain);
    }
    if (validate_cmd->parsed()) return cmd_validate(validate);
    if (quantize_cmd->parsed()) return cmd_quantize(quant);
    if (stats_cmd->parsed()) return cmd_stats(stats);
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
