// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Acoustic feature extraction: 80-dim log-mel inputs for the model, plus
// the four utterance-level descriptors (MFCC, spectral contrast, roll-off,
// zero-crossing rate) whose temporal means drive utterance clustering.

#ifndef BRQ_FEATURES_HPP
#define BRQ_FEATURES_HPP

#include <optional>
#include <string>
#include <vector>

#include "brq/audio.hpp"
#include "brq/mat.hpp"

namespace brq {

struct FrameConfig {
  int frame_len_samples = 400;  // 25 ms at 16 kHz
  int hop_samples = 160;        // 10 ms
  int n_fft = 512;
  int n_mels = 80;

  void validate() const;
};

enum class FeatureKind { kLogMel, kMfcc, kContrast, kRolloff, kZcr };

struct FeatureSequence {
  MatD data;  // T x D
  FeatureKind kind = FeatureKind::kLogMel;
  double frame_rate_hz = 100.0;

  int frames() const { return data.rows; }
  int dims() const { return data.cols; }
};

struct UtteranceSummary {
  std::vector<double> vector;  // [mfcc(13), contrast(7), rolloff(1), zcr(1)] = 22
  std::string id;
};

inline constexpr double kLogFloor = 1e-10;
inline constexpr double kStdFloor = 1e-8;

// T x (n_fft/2+1) magnitude spectrogram: Hann window, zero-padded FFT.
MatD stft_magnitude(const Waveform& wave, const FrameConfig& cfg);

FeatureSequence log_mel(const Waveform& wave, const FrameConfig& cfg);
FeatureSequence mfcc(const Waveform& wave, const FrameConfig& cfg, int n_coeffs = 13);
FeatureSequence spectral_contrast(const Waveform& wave, const FrameConfig& cfg,
                                  int n_bands = 6, double quantile = 0.02);
FeatureSequence spectral_rolloff(const Waveform& wave, const FrameConfig& cfg,
                                 double pct = 0.85);
FeatureSequence zero_crossing_rate(const Waveform& wave, const FrameConfig& cfg);

UtteranceSummary utterance_summary(const Waveform& wave, const FrameConfig& cfg);

// Triangular mel filterbank (n_mels x n_fft/2+1), HTK mel scale, unit-height
// triangles spanning 0 Hz to Nyquist. Exposed so tests can build oracles.
MatD mel_filterbank(int n_mels, int n_fft, int sample_rate_hz);

// Corpus-global per-dimension standardization. Dimensions whose corpus
// std falls below kStdFloor normalize to exactly zero.
struct NormStats {
  std::vector<double> mean;
  std::vector<double> stddev;
};

NormStats compute_norm_stats(const std::vector<FeatureSequence>& corpus);
FeatureSequence normalize_global(const FeatureSequence& seq, const NormStats& stats);

// Optional binary feature dump: per-utterance blocks of
// u32 header_len | header JSON {id, kind, T, D, frame_rate} | row-major f32 LE.
void write_feature_dump(const std::string& path, const std::string& id,
                        const FeatureSequence& seq, bool append = false);
struct FeatureDumpBlock {
  std::string id;
  FeatureSequence seq;
};
std::vector<FeatureDumpBlock> read_feature_dump(const std::string& path);

}  // namespace brq

#endif  // BRQ_FEATURES_HPP
