// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0
//
// Mono PCM audio ingestion, JSONL corpus manifests, and deterministic
// synthetic corpora. Only 16-bit PCM WAV is accepted; there is no
// resampling.

#ifndef BRQ_AUDIO_HPP
#define BRQ_AUDIO_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace brq {

// Errors caused by bad input (files, arguments, configs). The CLI maps
// these to exit code 1; everything else is an internal error (exit 2).
class UserError : public std::runtime_error {
 public:
  explicit UserError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Waveform {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate_hz = 16000;
  std::string id;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

struct ManifestEntry {
  std::string id;
  std::string path;
  double duration_s = 0.0;
  std::optional<int> cluster;

  bool operator==(const ManifestEntry&) const = default;
};

// RIFF/WAVE, PCM16 little-endian, mono. Amplitudes are sample/32768.
// Missing file, non-PCM/multichannel content and truncated containers
// are reported with distinct messages.
Waveform load_wav(const std::string& path);
void write_wav(const Waveform& wave, const std::string& path);

enum class SignalFamily { kPureTone, kHarmonicStack, kBandNoise, kTonePattern, kMixed };

SignalFamily parse_signal_family(const std::string& name);
std::string signal_family_name(SignalFamily family);

struct CorpusSpec {
  int n_utterances = 8;
  double duration_s = 2.0;
  SignalFamily family = SignalFamily::kMixed;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 0;
};

struct SynthCorpus {
  std::vector<Waveform> waves;
  std::vector<ManifestEntry> entries;  // paths are "<id>.wav", relative
};

// Pure function of the spec: same spec gives bit-identical buffers.
SynthCorpus synth_corpus(const CorpusSpec& spec);

// Single deterministic tone, exposed for tests and the pattern family.
std::vector<double> synth_tone(double freq_hz, double duration_s,
                               int sample_rate_hz, double amplitude,
                               double phase = 0.0);

// JSON Lines manifest: {"id","path","duration_s","cluster"} per line.
std::vector<ManifestEntry> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path);

}  // namespace brq

#endif  // BRQ_AUDIO_HPP
