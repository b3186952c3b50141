// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "brq/rng.hpp"

namespace brq {
namespace {

using json = nlohmann::json;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("load_wav: no such file: " + path);

  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw UserError("load_wav: truncated or non-RIFF/WAVE header: " + path);
  }

  // Walk chunks; require a PCM16 mono fmt chunk before data.
  std::size_t pos = 12;
  bool have_fmt = false;
  int sample_rate = 0;
  const unsigned char* data_ptr = nullptr;
  std::size_t data_len = 0;
  while (pos + 8 <= bytes.size()) {
    const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
    const std::uint32_t chunk_len = read_u32(bytes.data() + pos + 4);
    const std::size_t body = pos + 8;
    if (body + chunk_len > bytes.size()) {
      throw UserError("load_wav: truncated chunk '" + std::string(tag, 4) + "': " + path);
    }
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (chunk_len < 16) throw UserError("load_wav: truncated fmt chunk: " + path);
      const std::uint16_t format = read_u16(bytes.data() + body);
      const std::uint16_t channels = read_u16(bytes.data() + body + 2);
      sample_rate = static_cast<int>(read_u32(bytes.data() + body + 4));
      const std::uint16_t bits = read_u16(bytes.data() + body + 14);
      if (format != 1) throw UserError("load_wav: non-PCM content (format tag " +
                                       std::to_string(format) + "): " + path);
      if (channels != 1) throw UserError("load_wav: expected mono, got " +
                                         std::to_string(channels) + " channels: " + path);
      if (bits != 16) throw UserError("load_wav: expected 16-bit PCM, got " +
                                      std::to_string(bits) + " bits: " + path);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      data_ptr = bytes.data() + body;
      data_len = chunk_len;
    }
    pos = body + chunk_len + (chunk_len & 1);  // chunks are word-aligned
  }
  if (!have_fmt) throw UserError("load_wav: missing fmt chunk: " + path);
  if (data_ptr == nullptr) throw UserError("load_wav: missing data chunk: " + path);
  if (sample_rate <= 0) throw UserError("load_wav: bad sample rate: " + path);

  Waveform w;
  w.sample_rate_hz = sample_rate;
  w.id = std::filesystem::path(path).stem().string();
  const std::size_t n = data_len / 2;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::int16_t s =
        static_cast<std::int16_t>(data_ptr[2 * i] | (data_ptr[2 * i + 1] << 8));
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  if (w.samples.empty()) throw UserError("load_wav: empty data chunk: " + path);
  return w;
}

void write_wav(const Waveform& wave, const std::string& path) {
  if (wave.samples.empty()) throw UserError("write_wav: empty waveform");
  std::string out;
  const std::uint32_t data_len = static_cast<std::uint32_t>(wave.samples.size() * 2);
  out.reserve(44 + data_len);
  out += "RIFF";
  put_u32(out, 36 + data_len);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);  // PCM
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate_hz));
  put_u32(out, static_cast<std::uint32_t>(wave.sample_rate_hz * 2));
  put_u16(out, 2);   // block align
  put_u16(out, 16);  // bits
  out += "data";
  put_u32(out, data_len);
  for (const double x : wave.samples) {
    const double scaled = std::round(x * 32768.0);
    const auto s = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
    put_u16(out, static_cast<std::uint16_t>(s));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UserError("write_wav: cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

SignalFamily parse_signal_family(const std::string& name) {
  if (name == "pure") return SignalFamily::kPureTone;
  if (name == "harmonic") return SignalFamily::kHarmonicStack;
  if (name == "noise") return SignalFamily::kBandNoise;
  if (name == "pattern") return SignalFamily::kTonePattern;
  if (name == "mixed") return SignalFamily::kMixed;
  throw UserError("unknown signal family: " + name);
}

std::string signal_family_name(SignalFamily family) {
  switch (family) {
    case SignalFamily::kPureTone: return "pure";
    case SignalFamily::kHarmonicStack: return "harmonic";
    case SignalFamily::kBandNoise: return "noise";
    case SignalFamily::kTonePattern: return "pattern";
    case SignalFamily::kMixed: return "mixed";
  }
  return "unknown";
}

std::vector<double> synth_tone(double freq_hz, double duration_s, int sample_rate_hz,
                               double amplitude, double phase) {
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  std::vector<double> s(n);
  const double w = kTwoPi * freq_hz / sample_rate_hz;
  for (std::size_t i = 0; i < n; ++i) s[i] = amplitude * std::sin(w * static_cast<double>(i) + phase);
  return s;
}

namespace {

std::vector<double> synth_pure(Rng& rng, double duration_s, int sr) {
  const double f = 220.0 * std::pow(2.0, rng.uniform(0.0, 4.0));  // 220..3520 Hz
  return synth_tone(f, duration_s, sr, 0.6, rng.uniform(0.0, kTwoPi));
}

std::vector<double> synth_harmonic(Rng& rng, double duration_s, int sr) {
  const double f0 = 110.0 * std::pow(2.0, rng.uniform(0.0, 2.0));  // 110..440 Hz
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sr));
  std::vector<double> s(n, 0.0);
  double peak = 0.0;
  for (int k = 1; k <= 5; ++k) {
    const double amp = 1.0 / k;
    const double phase = rng.uniform(0.0, kTwoPi);
    const double w = kTwoPi * f0 * k / sr;
    for (std::size_t i = 0; i < n; ++i) s[i] += amp * std::sin(w * static_cast<double>(i) + phase);
  }
  for (const double v : s) peak = std::max(peak, std::abs(v));
  const double scale = 0.6 / std::max(peak, 1e-12);
  for (double& v : s) v *= scale;
  return s;
}

// Band-limited noise as a dense sum of random-phase sinusoids inside the
// band. Fully deterministic, unlike filtered white noise.
std::vector<double> synth_band_noise(Rng& rng, double duration_s, int sr) {
  const double lo = rng.uniform(200.0, 2000.0);
  const double hi = lo + rng.uniform(500.0, 3000.0);
  const int n_components = 64;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sr));
  std::vector<double> s(n, 0.0);
  for (int k = 0; k < n_components; ++k) {
    const double f = lo + (hi - lo) * (k + rng.uniform()) / n_components;
    const double phase = rng.uniform(0.0, kTwoPi);
    const double w = kTwoPi * f / sr;
    for (std::size_t i = 0; i < n; ++i) s[i] += std::sin(w * static_cast<double>(i) + phase);
  }
  double peak = 0.0;
  for (const double v : s) peak = std::max(peak, std::abs(v));
  const double scale = 0.6 / std::max(peak, 1e-12);
  for (double& v : s) v *= scale;
  return s;
}

// Repeating tone pattern: a short cycle of tones from a fixed alphabet,
// repeated for the whole utterance. The pattern identity is drawn from a
// small pool so different utterances share structure; this is the
// learnability fixture for the training tests.
std::vector<double> synth_pattern(Rng& rng, double duration_s, int sr) {
  constexpr int kAlphabet = 8;
  constexpr int kPatterns = 4;
  constexpr int kPatternLen = 5;
  constexpr double kSegmentS = 0.2;

  // Deterministic pattern table shared by every utterance.
  static const auto kTable = [] {
    Rng table_rng(0x70617474ULL);  // fixed table seed
    std::vector<std::vector<int>> t(kPatterns, std::vector<int>(kPatternLen));
    for (auto& p : t) {
      for (auto& tone : p) tone = static_cast<int>(table_rng.uniform_int(kAlphabet));
    }
    return t;
  }();

  const auto pattern_id = static_cast<int>(rng.uniform_int(kPatterns));
  const auto& pattern = kTable[pattern_id];
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sr));
  const auto seg_samples = static_cast<std::size_t>(std::llround(kSegmentS * sr));
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto seg = (i / seg_samples) % kPatternLen;
    const int tone = pattern[seg];
    const double f = 300.0 * std::pow(2.0, tone / 4.0);  // 300..1009 Hz
    s[i] = 0.6 * std::sin(kTwoPi * f / sr * static_cast<double>(i));
  }
  return s;
}

SignalFamily family_for_index(SignalFamily requested, int index) {
  if (requested != SignalFamily::kMixed) return requested;
  constexpr SignalFamily kCycle[] = {SignalFamily::kPureTone, SignalFamily::kHarmonicStack,
                                     SignalFamily::kBandNoise, SignalFamily::kTonePattern};
  return kCycle[index % 4];
}

}  // namespace

SynthCorpus synth_corpus(const CorpusSpec& spec) {
  if (spec.n_utterances < 1) throw UserError("synth_corpus: n_utterances must be >= 1");
  if (spec.duration_s <= 0.0) throw UserError("synth_corpus: duration must be positive");
  if (spec.sample_rate_hz <= 0) throw UserError("synth_corpus: sample rate must be positive");

  SynthCorpus out;
  out.waves.reserve(spec.n_utterances);
  out.entries.reserve(spec.n_utterances);
  for (int i = 0; i < spec.n_utterances; ++i) {
    const SignalFamily family = family_for_index(spec.family, i);
    Rng rng(derive_seed(spec.seed, "utt", static_cast<std::uint64_t>(i)));
    Waveform w;
    w.sample_rate_hz = spec.sample_rate_hz;
    switch (family) {
      case SignalFamily::kPureTone: w.samples = synth_pure(rng, spec.duration_s, spec.sample_rate_hz); break;
      case SignalFamily::kHarmonicStack: w.samples = synth_harmonic(rng, spec.duration_s, spec.sample_rate_hz); break;
      case SignalFamily::kBandNoise: w.samples = synth_band_noise(rng, spec.duration_s, spec.sample_rate_hz); break;
      case SignalFamily::kTonePattern: w.samples = synth_pattern(rng, spec.duration_s, spec.sample_rate_hz); break;
      case SignalFamily::kMixed: break;  // unreachable
    }
    char idbuf[64];
    std::snprintf(idbuf, sizeof(idbuf), "%s_%04d", signal_family_name(family).c_str(), i);
    w.id = idbuf;
    ManifestEntry e;
    e.id = w.id;
    e.path = w.id + ".wav";
    e.duration_s = w.duration_s();
    out.entries.push_back(std::move(e));
    out.waves.push_back(std::move(w));
  }
  return out;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UserError("read_manifest: cannot open: " + path);
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw UserError("read_manifest: malformed line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("path") || !j.contains("duration_s")) {
      throw UserError("read_manifest: line " + std::to_string(line_no) +
                      ": expected object with id/path/duration_s");
    }
    ManifestEntry e;
    try {
      e.id = j.at("id").get<std::string>();
      e.path = j.at("path").get<std::string>();
      e.duration_s = j.at("duration_s").get<double>();
      if (j.contains("cluster") && !j.at("cluster").is_null()) {
        e.cluster = j.at("cluster").get<int>();
      }
    } catch (const json::exception& e2) {
      throw UserError("read_manifest: malformed line " + std::to_string(line_no) + ": " + e2.what());
    }
    if (e.duration_s <= 0.0) {
      throw UserError("read_manifest: line " + std::to_string(line_no) + ": duration_s must be > 0");
    }
    if (!seen.insert(e.id).second) {
      throw UserError("read_manifest: duplicate id '" + e.id + "' at line " + std::to_string(line_no));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

void write_manifest(const std::vector<ManifestEntry>& entries, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw UserError("write_manifest: cannot open for writing: " + path);
  for (const auto& e : entries) {
    json j;
    j["id"] = e.id;
    j["path"] = e.path;
    j["duration_s"] = e.duration_s;
    if (e.cluster.has_value()) {
      j["cluster"] = *e.cluster;
    } else {
      j["cluster"] = nullptr;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace brq
