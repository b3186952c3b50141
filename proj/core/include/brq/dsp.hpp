// Copyright 2026 the brq authors
//
// Licensed under the Apache License, Version 2.0

#ifndef BRQ_DSP_HPP
#define BRQ_DSP_HPP

#include <complex>
#include <vector>

namespace brq {

// In-place iterative radix-2 FFT. Size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& buf);

// Periodic Hann window of the given length.
std::vector<double> hann_window(int length);

// Number of frames for the shared framing law:
// frames = 1 + floor((len - frame_len) / hop). Throws if len < frame_len.
int frame_count(std::size_t n_samples, int frame_len, int hop);

}  // namespace brq

#endif  // BRQ_DSP_HPP
