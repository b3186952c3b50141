// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <fstream>
#include <numbers>

#include <nlohmann/json.hpp>

#include "brq/dsp.hpp"

namespace brq {
namespace {

using json = nlohmann::json;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::string kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kLogMel: return "log_mel";
    case FeatureKind::kMfcc: return "mfcc";
    case FeatureKind::kContrast: return "contrast";
    case FeatureKind::kRolloff: return "rolloff";
    case FeatureKind::kZcr: return "zcr";
  }
  return "unknown";
}

FeatureKind kind_from_name(const std::string& name) {
  if (name == "log_mel") return FeatureKind::kLogMel;
  if (name == "mfcc") return FeatureKind::kMfcc;
  if (name == "contrast") return FeatureKind::kContrast;
  if (name == "rolloff") return FeatureKind::kRolloff;
  if (name == "zcr") return FeatureKind::kZcr;
  throw UserError("unknown feature kind: " + name);
}

double frame_rate_of(const Waveform& wave, const FrameConfig& cfg) {
  return static_cast<double>(wave.sample_rate_hz) / cfg.hop_samples;
}

}  // namespace

void FrameConfig::validate() const {
  if (hop_samples <= 0 || frame_len_samples <= 0) {
    throw UserError("FrameConfig: frame/hop must be positive");
  }
  if (hop_samples > frame_len_samples || frame_len_samples > n_fft) {
    throw UserError("FrameConfig: require hop <= frame_len <= n_fft");
  }
  if (n_mels < 1) throw UserError("FrameConfig: n_mels must be >= 1");
  if (n_fft <= 0 || (n_fft & (n_fft - 1)) != 0) {
    throw UserError("FrameConfig: n_fft must be a power of two");
  }
}

MatD stft_magnitude(const Waveform& wave, const FrameConfig& cfg) {
  cfg.validate();
  if (wave.samples.size() < static_cast<std::size_t>(cfg.frame_len_samples)) {
    throw UserError("stft_magnitude: signal shorter than one frame");
  }
  const int t_frames = frame_count(wave.samples.size(), cfg.frame_len_samples, cfg.hop_samples);
  const int n_bins = cfg.n_fft / 2 + 1;
  const std::vector<double> window = hann_window(cfg.frame_len_samples);

  MatD out(t_frames, n_bins);
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(cfg.n_fft));
  for (int t = 0; t < t_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop_samples;
    for (int i = 0; i < cfg.frame_len_samples; ++i) {
      buf[i] = wave.samples[start + i] * window[i];
    }
    for (int i = cfg.frame_len_samples; i < cfg.n_fft; ++i) buf[i] = 0.0;
    fft_radix2(buf);
    double* row = out.row(t);
    for (int k = 0; k < n_bins; ++k) row[k] = std::abs(buf[k]);
  }
  return out;
}

MatD mel_filterbank(int n_mels, int n_fft, int sample_rate_hz) {
  const int n_bins = n_fft / 2 + 1;
  const double nyquist = sample_rate_hz / 2.0;
  const double mel_lo = hz_to_mel(0.0);
  const double mel_hi = hz_to_mel(nyquist);
  std::vector<double> mel_points(n_mels + 2);
  for (int m = 0; m < n_mels + 2; ++m) {
    mel_points[m] = mel_lo + (mel_hi - mel_lo) * m / (n_mels + 1);
  }
  MatD fb(n_mels, n_bins);
  for (int k = 0; k < n_bins; ++k) {
    const double f = static_cast<double>(k) * sample_rate_hz / n_fft;
    const double mel = hz_to_mel(f);
    for (int m = 0; m < n_mels; ++m) {
      const double lower = mel_points[m];
      const double center = mel_points[m + 1];
      const double upper = mel_points[m + 2];
      double w = 0.0;
      if (mel >= lower && mel <= center) {
        w = (mel - lower) / (center - lower);
      } else if (mel > center && mel <= upper) {
        w = (upper - mel) / (upper - center);
      }
      fb.at(m, k) = w;
    }
  }
  return fb;
}

FeatureSequence log_mel(const Waveform& wave, const FrameConfig& cfg) {
  const MatD spec = stft_magnitude(wave, cfg);
  const MatD fb = mel_filterbank(cfg.n_mels, cfg.n_fft, wave.sample_rate_hz);
  FeatureSequence seq;
  seq.kind = FeatureKind::kLogMel;
  seq.frame_rate_hz = frame_rate_of(wave, cfg);
  seq.data = MatD(spec.rows, cfg.n_mels);
  for (int t = 0; t < spec.rows; ++t) {
    const double* s = spec.row(t);
    double* o = seq.data.row(t);
    for (int m = 0; m < cfg.n_mels; ++m) {
      const double* w = fb.row(m);
      double acc = 0.0;
      for (int k = 0; k < spec.cols; ++k) acc += w[k] * s[k];
      o[m] = std::log(std::max(acc, kLogFloor));
    }
  }
  return seq;
}

FeatureSequence mfcc(const Waveform& wave, const FrameConfig& cfg, int n_coeffs) {
  if (n_coeffs > cfg.n_mels) throw UserError("mfcc: n_coeffs exceeds n_mels");
  const FeatureSequence lm = log_mel(wave, cfg);
  const int n = cfg.n_mels;
  FeatureSequence seq;
  seq.kind = FeatureKind::kMfcc;
  seq.frame_rate_hz = lm.frame_rate_hz;
  seq.data = MatD(lm.frames(), n_coeffs);
  // Orthonormal DCT-II of each log-mel frame, first n_coeffs kept.
  const double s0 = std::sqrt(1.0 / n);
  const double sk = std::sqrt(2.0 / n);
  for (int t = 0; t < lm.frames(); ++t) {
    const double* x = lm.data.row(t);
    double* o = seq.data.row(t);
    for (int k = 0; k < n_coeffs; ++k) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += x[i] * std::cos(std::numbers::pi * k * (2.0 * i + 1.0) / (2.0 * n));
      }
      o[k] = acc * (k == 0 ? s0 : sk);
    }
  }
  return seq;
}

FeatureSequence spectral_contrast(const Waveform& wave, const FrameConfig& cfg,
                                  int n_bands, double quantile) {
  if (n_bands < 1) throw UserError("spectral_contrast: n_bands must be >= 1");
  if (quantile <= 0.0 || quantile >= 1.0) {
    throw UserError("spectral_contrast: quantile must be in (0, 1)");
  }
  const double nyquist = wave.sample_rate_hz / 2.0;
  constexpr double kBase = 200.0;
  // Band edges: [0, 200) then octaves [200, 400), ..., last capped at Nyquist.
  std::vector<double> edges;
  edges.push_back(0.0);
  edges.push_back(kBase);
  for (int b = 1; b <= n_bands; ++b) edges.push_back(kBase * std::pow(2.0, b));
  if (edges[edges.size() - 2] >= nyquist) {
    throw UserError("spectral_contrast: band edges exceed Nyquist");
  }
  edges.back() = std::min(edges.back(), nyquist);

  const MatD spec = stft_magnitude(wave, cfg);
  const double bin_hz = static_cast<double>(wave.sample_rate_hz) / cfg.n_fft;
  const int n_out = n_bands + 1;

  FeatureSequence seq;
  seq.kind = FeatureKind::kContrast;
  seq.frame_rate_hz = frame_rate_of(wave, cfg);
  seq.data = MatD(spec.rows, n_out);

  std::vector<double> band;
  for (int t = 0; t < spec.rows; ++t) {
    const double* s = spec.row(t);
    for (int b = 0; b < n_out; ++b) {
      band.clear();
      for (int k = 0; k < spec.cols; ++k) {
        const double f = k * bin_hz;
        const bool last = (b == n_out - 1);
        if (f >= edges[b] && (f < edges[b + 1] || (last && f <= edges[b + 1]))) {
          band.push_back(s[k]);
        }
      }
      if (band.empty()) {
        seq.data.at(t, b) = 0.0;
        continue;
      }
      std::sort(band.begin(), band.end());
      const auto q = std::max<std::size_t>(
          1, static_cast<std::size_t>(quantile * static_cast<double>(band.size())));
      double bottom = 0.0, top = 0.0;
      for (std::size_t i = 0; i < q; ++i) {
        bottom += band[i];
        top += band[band.size() - 1 - i];
      }
      bottom /= static_cast<double>(q);
      top /= static_cast<double>(q);
      seq.data.at(t, b) =
          std::log(std::max(top, kLogFloor)) - std::log(std::max(bottom, kLogFloor));
    }
  }
  return seq;
}

FeatureSequence spectral_rolloff(const Waveform& wave, const FrameConfig& cfg, double pct) {
  if (pct <= 0.0 || pct >= 1.0) throw UserError("spectral_rolloff: pct must be in (0, 1)");
  const MatD spec = stft_magnitude(wave, cfg);
  const double bin_hz = static_cast<double>(wave.sample_rate_hz) / cfg.n_fft;

  FeatureSequence seq;
  seq.kind = FeatureKind::kRolloff;
  seq.frame_rate_hz = frame_rate_of(wave, cfg);
  seq.data = MatD(spec.rows, 1);
  for (int t = 0; t < spec.rows; ++t) {
    const double* s = spec.row(t);
    double total = 0.0;
    for (int k = 0; k < spec.cols; ++k) total += s[k];
    if (total <= 0.0) {
      seq.data.at(t, 0) = 0.0;  // all-zero frame convention
      continue;
    }
    const double target = pct * total;
    double cum = 0.0;
    int roll_bin = spec.cols - 1;
    for (int k = 0; k < spec.cols; ++k) {
      cum += s[k];
      if (cum >= target) {
        roll_bin = k;
        break;
      }
    }
    seq.data.at(t, 0) = roll_bin * bin_hz;
  }
  return seq;
}

FeatureSequence zero_crossing_rate(const Waveform& wave, const FrameConfig& cfg) {
  cfg.validate();
  if (wave.samples.size() < static_cast<std::size_t>(cfg.frame_len_samples)) {
    throw UserError("zero_crossing_rate: signal shorter than one frame");
  }
  const int t_frames = frame_count(wave.samples.size(), cfg.frame_len_samples, cfg.hop_samples);
  FeatureSequence seq;
  seq.kind = FeatureKind::kZcr;
  seq.frame_rate_hz = frame_rate_of(wave, cfg);
  seq.data = MatD(t_frames, 1);
  for (int t = 0; t < t_frames; ++t) {
    const std::size_t start = static_cast<std::size_t>(t) * cfg.hop_samples;
    int crossings = 0;
    for (int i = 1; i < cfg.frame_len_samples; ++i) {
      const bool neg_prev = wave.samples[start + i - 1] < 0.0;
      const bool neg_cur = wave.samples[start + i] < 0.0;
      if (neg_prev != neg_cur) ++crossings;
    }
    seq.data.at(t, 0) = static_cast<double>(crossings) / (cfg.frame_len_samples - 1);
  }
  return seq;
}

UtteranceSummary utterance_summary(const Waveform& wave, const FrameConfig& cfg) {
  const FeatureSequence parts[] = {
      mfcc(wave, cfg),
      spectral_contrast(wave, cfg),
      spectral_rolloff(wave, cfg),
      zero_crossing_rate(wave, cfg),
  };
  UtteranceSummary summary;
  summary.id = wave.id;
  for (const auto& seq : parts) {
    for (int d = 0; d < seq.dims(); ++d) {
      double acc = 0.0;
      for (int t = 0; t < seq.frames(); ++t) acc += seq.data.at(t, d);
      summary.vector.push_back(acc / seq.frames());
    }
  }
  return summary;
}

NormStats compute_norm_stats(const std::vector<FeatureSequence>& corpus) {
  if (corpus.empty()) throw UserError("compute_norm_stats: empty corpus");
  const int dims = corpus.front().dims();
  for (const auto& seq : corpus) {
    if (seq.dims() != dims) throw UserError("compute_norm_stats: dimension mismatch in corpus");
  }
  // Two-pass for deterministic, associativity-independent results.
  NormStats stats;
  stats.mean.assign(dims, 0.0);
  stats.stddev.assign(dims, 0.0);
  std::size_t total = 0;
  for (const auto& seq : corpus) {
    for (int t = 0; t < seq.frames(); ++t) {
      const double* row = seq.data.row(t);
      for (int d = 0; d < dims; ++d) stats.mean[d] += row[d];
    }
    total += static_cast<std::size_t>(seq.frames());
  }
  for (int d = 0; d < dims; ++d) stats.mean[d] /= static_cast<double>(total);
  for (const auto& seq : corpus) {
    for (int t = 0; t < seq.frames(); ++t) {
      const double* row = seq.data.row(t);
      for (int d = 0; d < dims; ++d) {
        const double diff = row[d] - stats.mean[d];
        stats.stddev[d] += diff * diff;
      }
    }
  }
  for (int d = 0; d < dims; ++d) {
    stats.stddev[d] = std::sqrt(stats.stddev[d] / static_cast<double>(total));
  }
  return stats;
}

FeatureSequence normalize_global(const FeatureSequence& seq, const NormStats& stats) {
  if (static_cast<int>(stats.mean.size()) != seq.dims() ||
      static_cast<int>(stats.stddev.size()) != seq.dims()) {
    throw UserError("normalize_global: stats dimension mismatch");
  }
  FeatureSequence out = seq;
  for (int t = 0; t < seq.frames(); ++t) {
    double* row = out.data.row(t);
    for (int d = 0; d < seq.dims(); ++d) {
      if (stats.stddev[d] < kStdFloor) {
        row[d] = 0.0;  // constant dimension
      } else {
        row[d] = (row[d] - stats.mean[d]) / stats.stddev[d];
      }
    }
  }
  return out;
}

void write_feature_dump(const std::string& path, const std::string& id,
                        const FeatureSequence& seq, bool append) {
  std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw UserError("write_feature_dump: cannot open: " + path);
  json header;
  header["id"] = id;
  header["kind"] = kind_name(seq.kind);
  header["T"] = seq.frames();
  header["D"] = seq.dims();
  header["frame_rate"] = seq.frame_rate_hz;
  const std::string hs = header.dump();
  const std::uint32_t hlen = static_cast<std::uint32_t>(hs.size());
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  std::vector<float> row(static_cast<std::size_t>(seq.dims()));
  for (int t = 0; t < seq.frames(); ++t) {
    const double* r = seq.data.row(t);
    for (int d = 0; d < seq.dims(); ++d) row[d] = static_cast<float>(r[d]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
}

std::vector<FeatureDumpBlock> read_feature_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("read_feature_dump: cannot open: " + path);
  std::vector<FeatureDumpBlock> blocks;
  while (true) {
    std::uint32_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), 4);
    if (in.gcount() == 0) break;
    if (in.gcount() != 4) throw UserError("read_feature_dump: truncated header length");
    std::string hs(hlen, '\0');
    in.read(hs.data(), hlen);
    if (static_cast<std::uint32_t>(in.gcount()) != hlen) {
      throw UserError("read_feature_dump: truncated header");
    }
    json header = json::parse(hs);
    FeatureDumpBlock block;
    block.id = header.at("id").get<std::string>();
    block.seq.kind = kind_from_name(header.at("kind").get<std::string>());
    const int t_frames = header.at("T").get<int>();
    const int dims = header.at("D").get<int>();
    block.seq.frame_rate_hz = header.at("frame_rate").get<double>();
    block.seq.data = MatD(t_frames, dims);
    std::vector<float> row(static_cast<std::size_t>(dims));
    for (int t = 0; t < t_frames; ++t) {
      in.read(reinterpret_cast<char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
      if (static_cast<std::size_t>(in.gcount()) != row.size() * sizeof(float)) {
        throw UserError("read_feature_dump: truncated tensor data");
      }
      for (int d = 0; d < dims; ++d) block.seq.data.at(t, d) = row[d];
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

}  // namespace brq
