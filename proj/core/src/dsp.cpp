// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#include "brq/dsp.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace brq {

void fft_radix2(std::vector<std::complex<double>>& buf) {
  const std::size_t n = buf.size();
  if (n == 0 || (n & (n - 1)) != 0) {
    throw std::invalid_argument("fft_radix2: size must be a power of two");
  }
  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(buf[i], buf[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = buf[i + k];
        const std::complex<double> v = buf[i + k + len / 2] * w;
        buf[i + k] = u + v;
        buf[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

std::vector<double> hann_window(int length) {
  std::vector<double> w(length);
  for (int i = 0; i < length; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * i / length));
  }
  return w;
}

int frame_count(std::size_t n_samples, int frame_len, int hop) {
  if (n_samples < static_cast<std::size_t>(frame_len)) {
    throw std::invalid_argument("frame_count: signal shorter than one frame");
  }
  return 1 + static_cast<int>((n_samples - static_cast<std::size_t>(frame_len)) /
                              static_cast<std::size_t>(hop));
}

}  // namespace brq
