// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "brq/audio.hpp"
#include "brq/rng.hpp"

using namespace brq;

namespace {

Waveform make_wave(std::vector<double> samples, const std::string& id = "w") {
  Waveform w;
  w.samples = std::move(samples);
  w.sample_rate_hz = 16000;
  w.id = id;
  return w;
}

// Test-side oracle: naive O(n^2) DFT magnitudes of one windowed frame.
std::vector<double> naive_frame_spectrum(const std::vector<double>& samples, std::size_t start,
                                         const FrameConfig& cfg) {
  std::vector<double> frame(static_cast<std::size_t>(cfg.n_fft), 0.0);
  for (int i = 0; i < cfg.frame_len_samples; ++i) {
    const double win =
        0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / cfg.frame_len_samples));
    frame[static_cast<std::size_t>(i)] = samples[start + static_cast<std::size_t>(i)] * win;
  }
  std::vector<double> mags(static_cast<std::size_t>(cfg.n_fft / 2 + 1));
  for (int k = 0; k <= cfg.n_fft / 2; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int n = 0; n < cfg.n_fft; ++n) {
      const double ang = -2.0 * std::numbers::pi * k * n / cfg.n_fft;
      acc += frame[static_cast<std::size_t>(n)] *
             std::complex<double>(std::cos(ang), std::sin(ang));
    }
    mags[static_cast<std::size_t>(k)] = std::abs(acc);
  }
  return mags;
}

double oracle_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

// Independent triangular filterbank evaluation for one mel bin.
double oracle_mel_energy(const std::vector<double>& spectrum, int mel_bin,
                         const FrameConfig& cfg, int sample_rate) {
  const double mel_hi = oracle_mel(sample_rate / 2.0);
  const double lo = mel_hi * mel_bin / (cfg.n_mels + 1);
  const double center = mel_hi * (mel_bin + 1) / (cfg.n_mels + 1);
  const double hi = mel_hi * (mel_bin + 2) / (cfg.n_mels + 1);
  double acc = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double mel = oracle_mel(static_cast<double>(k) * sample_rate / cfg.n_fft);
    double w = 0.0;
    if (mel >= lo && mel <= center) {
      w = (mel - lo) / (center - lo);
    } else if (mel > center && mel <= hi) {
      w = (hi - mel) / (hi - center);
    }
    acc += w * spectrum[k];
  }
  return acc;
}

}  // namespace

TEST_CASE("framing arithmetic: 16000 samples give 98 frames") {
  const Waveform w = make_wave(std::vector<double>(16000, 0.1));
  FrameConfig cfg;
  const FeatureSequence seq = log_mel(w, cfg);
  CHECK(seq.frames() == 98);
  CHECK(seq.dims() == 80);
  CHECK(seq.frame_rate_hz == doctest::Approx(100.0));
}

TEST_CASE("shape law holds across extractors and lengths") {
  FrameConfig cfg;
  for (const int len : {400, 401, 559, 560, 561, 4000, 16001}) {
    const Waveform w = make_wave(synth_tone(300.0, 1.0, 16000, 0.5, 0.1));
    Waveform cut = w;
    cut.samples.resize(static_cast<std::size_t>(len));
    const int expected = 1 + (len - cfg.frame_len_samples) / cfg.hop_samples;
    CHECK(log_mel(cut, cfg).frames() == expected);
    CHECK(mfcc(cut, cfg).frames() == expected);
    CHECK(spectral_contrast(cut, cfg).frames() == expected);
    CHECK(spectral_rolloff(cut, cfg).frames() == expected);
    CHECK(zero_crossing_rate(cut, cfg).frames() == expected);
  }
}

TEST_CASE("too-short signal is rejected") {
  const Waveform w = make_wave(std::vector<double>(399, 0.0));
  FrameConfig cfg;
  CHECK_THROWS_AS(log_mel(w, cfg), UserError);
}

TEST_CASE("silence hits the log floor everywhere") {
  const Waveform w = make_wave(std::vector<double>(1600, 0.0));
  FrameConfig cfg;
  const FeatureSequence seq = log_mel(w, cfg);
  const double floor_val = std::log(1e-10);
  for (int t = 0; t < seq.frames(); ++t) {
    for (int d = 0; d < seq.dims(); ++d) {
      CHECK(seq.data.at(t, d) == doctest::Approx(floor_val).epsilon(1e-12));
    }
  }
}

TEST_CASE("1 kHz tone peaks at the mel bin nearest 1 kHz (independent oracle)") {
  FrameConfig cfg;
  const Waveform w = make_wave(synth_tone(1000.0, 0.3, 16000, 0.6));
  const FeatureSequence seq = log_mel(w, cfg);

  // Mean energy per mel bin from the module.
  std::vector<double> mean_energy(80, 0.0);
  for (int t = 0; t < seq.frames(); ++t) {
    for (int d = 0; d < 80; ++d) mean_energy[d] += seq.data.at(t, d);
  }
  int argmax = 0;
  for (int d = 1; d < 80; ++d) {
    if (mean_energy[d] > mean_energy[argmax]) argmax = d;
  }

  // Oracle route: naive DFT + independent filterbank on the first frame.
  const auto spectrum = naive_frame_spectrum(w.samples, 0, cfg);
  int oracle_argmax = 0;
  double best = -1.0;
  for (int d = 0; d < 80; ++d) {
    const double e = oracle_mel_energy(spectrum, d, cfg, 16000);
    if (e > best) {
      best = e;
      oracle_argmax = d;
    }
  }
  CHECK(argmax == oracle_argmax);

  // And that bin's center is the nearest to 1 kHz in mel space.
  const double mel_hi = oracle_mel(8000.0);
  int nearest = 0;
  double nearest_dist = 1e18;
  for (int d = 0; d < 80; ++d) {
    const double center_mel = mel_hi * (d + 1) / 81.0;
    const double dist = std::abs(center_mel - oracle_mel(1000.0));
    if (dist < nearest_dist) {
      nearest_dist = dist;
      nearest = d;
    }
  }
  CHECK(argmax == nearest);
}

TEST_CASE("log-mel matches the naive oracle on every bin of a frame") {
  FrameConfig cfg;
  Rng rng(11);
  std::vector<double> samples(800);
  for (double& s : samples) s = rng.uniform(-0.5, 0.5);
  const Waveform w = make_wave(samples);
  const FeatureSequence seq = log_mel(w, cfg);
  const auto spectrum = naive_frame_spectrum(w.samples, 0, cfg);
  for (int d = 0; d < 80; ++d) {
    const double oracle = std::log(std::max(oracle_mel_energy(spectrum, d, cfg, 16000), 1e-10));
    CHECK(seq.data.at(0, d) == doctest::Approx(oracle).epsilon(1e-8));
  }
}

TEST_CASE("tone sweep moves the argmax mel bin monotonically") {
  FrameConfig cfg;
  int prev_bin = -1;
  for (double freq = 200.0; freq <= 6000.0; freq *= 1.25) {
    const Waveform w = make_wave(synth_tone(freq, 0.1, 16000, 0.6));
    const FeatureSequence seq = log_mel(w, cfg);
    std::vector<double> mean_energy(80, 0.0);
    for (int t = 0; t < seq.frames(); ++t) {
      for (int d = 0; d < 80; ++d) mean_energy[d] += seq.data.at(t, d);
    }
    int argmax = 0;
    for (int d = 1; d < 80; ++d) {
      if (mean_energy[d] > mean_energy[argmax]) argmax = d;
    }
    CHECK(argmax >= prev_bin);
    prev_bin = argmax;
  }
}

TEST_CASE("mfcc of a constant log-mel frame keeps only coefficient 0") {
  // Silence gives constant log-floor frames.
  const Waveform w = make_wave(std::vector<double>(800, 0.0));
  FrameConfig cfg;
  const FeatureSequence c = mfcc(w, cfg);
  CHECK(c.dims() == 13);
  for (int t = 0; t < c.frames(); ++t) {
    CHECK(std::abs(c.data.at(t, 0)) > 1.0);  // sqrt(80) * log(1e-10)
    for (int d = 1; d < 13; ++d) CHECK(std::abs(c.data.at(t, d)) < 1e-9);
  }
}

TEST_CASE("mfcc equals a naive DCT-II oracle") {
  FrameConfig cfg;
  const Waveform w = make_wave(synth_tone(700.0, 0.1, 16000, 0.5, 0.3));
  const FeatureSequence lm = log_mel(w, cfg);
  const FeatureSequence c = mfcc(w, cfg);
  const int n = cfg.n_mels;
  for (int t = 0; t < c.frames(); ++t) {
    for (int k = 0; k < 13; ++k) {
      double acc = 0.0;
      for (int i = 0; i < n; ++i) {
        acc += lm.data.at(t, i) * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
      }
      acc *= (k == 0) ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
      CHECK(c.data.at(t, k) == doctest::Approx(acc).epsilon(1e-8));
    }
  }
  CHECK_THROWS_AS(mfcc(w, cfg, 81), UserError);
}

TEST_CASE("spectral contrast is zero for a flat spectrum") {
  // A single impulse has constant DFT magnitude.
  std::vector<double> samples(400, 0.0);
  samples[200] = 0.9;
  const Waveform w = make_wave(samples);
  FrameConfig cfg;
  const FeatureSequence sc = spectral_contrast(w, cfg);
  CHECK(sc.dims() == 7);
  REQUIRE(sc.frames() == 1);
  for (int b = 0; b < 7; ++b) {
    CHECK(sc.data.at(0, b) == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("a dominant bin raises contrast most in its own band") {
  // Constructed spectrum: impulse baseline (flat magnitude) plus a strong
  // 1 kHz component. 1 kHz sits in the 800..1600 Hz octave, band index 3.
  std::vector<double> samples = synth_tone(1000.0, 0.025, 16000, 0.5);
  samples.resize(400);
  samples[200] += 0.05;  // impulse -> flat baseline so valleys are not degenerate
  const Waveform w = make_wave(samples);
  FrameConfig cfg;
  const FeatureSequence sc = spectral_contrast(w, cfg);
  REQUIRE(sc.frames() == 1);
  for (int b = 0; b < 7; ++b) {
    if (b == 3) continue;
    CHECK(sc.data.at(0, 3) > sc.data.at(0, b));
  }

  // Oracle: direct evaluation of the contrast definition on the spectrum.
  const MatD spec = stft_magnitude(w, cfg);
  const double bin_hz = 16000.0 / 512;
  const double edges[] = {0.0, 200.0, 400.0, 800.0, 1600.0, 3200.0, 6400.0, 8000.0};
  for (int b = 0; b < 7; ++b) {
    std::vector<double> band;
    for (int k = 0; k < spec.cols; ++k) {
      const double f = k * bin_hz;
      if (f >= edges[b] && (f < edges[b + 1] || (b == 6 && f <= edges[b + 1]))) {
        band.push_back(spec.at(0, k));
      }
    }
    std::sort(band.begin(), band.end());
    const std::size_t q = std::max<std::size_t>(1, static_cast<std::size_t>(0.02 * band.size()));
    double top = 0.0, bottom = 0.0;
    for (std::size_t i = 0; i < q; ++i) {
      bottom += band[i];
      top += band[band.size() - 1 - i];
    }
    const double oracle = std::log(std::max(top / q, 1e-10)) - std::log(std::max(bottom / q, 1e-10));
    CHECK(sc.data.at(0, b) == doctest::Approx(oracle).epsilon(1e-9));
  }
}

TEST_CASE("spectral contrast rejects out-of-range parameters") {
  const Waveform w = make_wave(std::vector<double>(800, 0.1));
  FrameConfig cfg;
  CHECK_THROWS_AS(spectral_contrast(w, cfg, 12), UserError);  // edges past Nyquist
  CHECK_THROWS_AS(spectral_contrast(w, cfg, 6, 0.0), UserError);
}

TEST_CASE("roll-off lands within a bin of a 2 kHz tone") {
  const Waveform w = make_wave(synth_tone(2000.0, 0.2, 16000, 0.6));
  FrameConfig cfg;
  const FeatureSequence ro = spectral_rolloff(w, cfg);
  const double bin_hz = 16000.0 / 512;
  for (int t = 0; t < ro.frames(); ++t) {
    CHECK(std::abs(ro.data.at(t, 0) - 2000.0) <= bin_hz + 1e-9);
  }
  // Default pct is 0.85: explicit and default calls agree.
  const FeatureSequence explicit_pct = spectral_rolloff(w, cfg, 0.85);
  CHECK(ro.data.d == explicit_pct.data.d);
}

TEST_CASE("roll-off of a flat spectrum sits at pct of Nyquist") {
  std::vector<double> samples(400, 0.0);
  samples[200] = 0.9;  // impulse -> flat magnitude
  const Waveform w = make_wave(samples);
  FrameConfig cfg;
  const FeatureSequence ro = spectral_rolloff(w, cfg);
  const double bin_hz = 16000.0 / 512;
  CHECK(std::abs(ro.data.at(0, 0) - 0.85 * 8000.0) <= 2.0 * bin_hz);
}

TEST_CASE("roll-off of silence is 0 Hz by convention") {
  const Waveform w = make_wave(std::vector<double>(400, 0.0));
  FrameConfig cfg;
  CHECK(spectral_rolloff(w, cfg).data.at(0, 0) == 0.0);
  CHECK_THROWS_AS(spectral_rolloff(w, cfg, 1.0), UserError);
}

TEST_CASE("zero-crossing rate endpoints") {
  FrameConfig cfg;
  CHECK(zero_crossing_rate(make_wave(std::vector<double>(400, 0.5)), cfg).data.at(0, 0) == 0.0);

  std::vector<double> alternating(400);
  for (std::size_t i = 0; i < alternating.size(); ++i) alternating[i] = (i % 2 == 0) ? 0.8 : -0.8;
  CHECK(zero_crossing_rate(make_wave(alternating), cfg).data.at(0, 0) == 1.0);
}

TEST_CASE("zcr of a sine approximates 2f/sr") {
  FrameConfig cfg;
  for (const double f : {200.0, 440.0, 1000.0}) {
    const Waveform w = make_wave(synth_tone(f, 0.2, 16000, 0.6, 0.1));
    const FeatureSequence z = zero_crossing_rate(w, cfg);
    double mean = 0.0;
    for (int t = 0; t < z.frames(); ++t) mean += z.data.at(t, 0);
    mean /= z.frames();
    const double expected = 2.0 * f / 16000.0;
    CHECK(std::abs(mean - expected) / expected < 0.05);
  }
}

TEST_CASE("utterance summary is 22-dim and equals column means") {
  FrameConfig cfg;
  const Waveform w = make_wave(synth_tone(600.0, 0.4, 16000, 0.5), "utt1");
  const UtteranceSummary s = utterance_summary(w, cfg);
  CHECK(s.vector.size() == 22);
  CHECK(s.id == "utt1");

  // Independent column-mean oracle per descriptor block.
  const FeatureSequence parts[] = {mfcc(w, cfg), spectral_contrast(w, cfg),
                                   spectral_rolloff(w, cfg), zero_crossing_rate(w, cfg)};
  std::size_t off = 0;
  for (const auto& seq : parts) {
    for (int d = 0; d < seq.dims(); ++d) {
      double mean = 0.0;
      for (int t = 0; t < seq.frames(); ++t) mean += seq.data.at(t, d);
      mean /= seq.frames();
      CHECK(s.vector[off] == doctest::Approx(mean).epsilon(1e-8));
      ++off;
    }
  }
}

TEST_CASE("normalize_global zeroes constant dimensions and standardizes the rest") {
  Rng rng(5);
  std::vector<FeatureSequence> corpus;
  for (int u = 0; u < 4; ++u) {
    FeatureSequence seq;
    seq.data = MatD(50, 3);
    for (int t = 0; t < 50; ++t) {
      seq.data.at(t, 0) = rng.normal(5.0, 2.0);
      seq.data.at(t, 1) = 7.25;  // constant dimension
      seq.data.at(t, 2) = rng.uniform(-1.0, 3.0);
    }
    corpus.push_back(seq);
  }
  const NormStats stats = compute_norm_stats(corpus);
  CHECK(stats.stddev[1] < 1e-8);

  // Oracle: direct two-pass mean/std of the normalized corpus.
  double sum0 = 0.0, sum0sq = 0.0;
  long long count = 0;
  for (const auto& seq : corpus) {
    const FeatureSequence norm = normalize_global(seq, stats);
    for (int t = 0; t < norm.frames(); ++t) {
      CHECK(norm.data.at(t, 1) == 0.0);
      sum0 += norm.data.at(t, 0);
      sum0sq += norm.data.at(t, 0) * norm.data.at(t, 0);
      ++count;
    }
  }
  const double mean0 = sum0 / count;
  const double std0 = std::sqrt(sum0sq / count - mean0 * mean0);
  CHECK(std::abs(mean0) < 1e-6);
  CHECK(std::abs(std0 - 1.0) < 1e-4);
}

TEST_CASE("normalizing an already standardized corpus is a fixed point") {
  Rng rng(6);
  std::vector<FeatureSequence> corpus;
  FeatureSequence seq;
  seq.data = MatD(500, 4);
  for (double& v : seq.data.d) v = rng.normal();
  corpus.push_back(seq);
  const NormStats stats = compute_norm_stats(corpus);
  const FeatureSequence once = normalize_global(seq, stats);
  const NormStats stats2 = compute_norm_stats({once});
  const FeatureSequence twice = normalize_global(once, stats2);
  for (std::size_t i = 0; i < once.data.d.size(); ++i) {
    CHECK(std::abs(twice.data.d[i] - once.data.d[i]) <= 1e-5);
  }
}

TEST_CASE("stats dimension mismatch is rejected") {
  FeatureSequence seq;
  seq.data = MatD(10, 4);
  NormStats stats;
  stats.mean.assign(3, 0.0);
  stats.stddev.assign(3, 1.0);
  CHECK_THROWS_AS(normalize_global(seq, stats), UserError);
}

TEST_CASE("extractors stay finite on degenerate inputs") {
  FrameConfig cfg;
  Rng rng(12);
  std::vector<std::vector<double>> cases;
  cases.push_back(std::vector<double>(800, 0.0));
  cases.push_back(std::vector<double>(800, 1e-300));  // denormal-ish
  cases.push_back(std::vector<double>(800, 1.0));
  std::vector<double> mix(800);
  for (double& v : mix) v = rng.uniform() < 0.5 ? 0.0 : rng.uniform(-1.0, 1.0);
  cases.push_back(mix);
  for (const auto& samples : cases) {
    const Waveform w = make_wave(samples);
    CHECK(all_finite(log_mel(w, cfg).data));
    CHECK(all_finite(mfcc(w, cfg).data));
    CHECK(all_finite(spectral_contrast(w, cfg).data));
    CHECK(all_finite(spectral_rolloff(w, cfg).data));
    CHECK(all_finite(zero_crossing_rate(w, cfg).data));
  }
}

TEST_CASE("feature dump round trip") {
  FrameConfig cfg;
  const Waveform w = make_wave(synth_tone(500.0, 0.1, 16000, 0.5), "dumped");
  const FeatureSequence seq = log_mel(w, cfg);
  const auto path =
      (std::filesystem::temp_directory_path() / "brq_test_features_dump.bin").string();
  write_feature_dump(path, "dumped", seq);
  write_feature_dump(path, "dumped2", seq, /*append=*/true);
  const auto blocks = read_feature_dump(path);
  REQUIRE(blocks.size() == 2);
  CHECK(blocks[0].id == "dumped");
  CHECK(blocks[1].id == "dumped2");
  CHECK(blocks[0].seq.frames() == seq.frames());
  CHECK(blocks[0].seq.dims() == seq.dims());
  for (std::size_t i = 0; i < seq.data.d.size(); ++i) {
    CHECK(blocks[0].seq.data.d[i] ==
          doctest::Approx(seq.data.d[i]).epsilon(1e-6));  // f32 storage
  }
}
