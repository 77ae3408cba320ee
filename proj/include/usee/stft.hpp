#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "usee/fft.hpp"
#include "usee/wav.hpp"

namespace usee {

struct StftParams {
  std::size_t win_length = 640;  // periodic Hann
  std::size_t hop_length = 320;
  std::size_t fft_size = 1024;
  // optional |.|^p magnitude compression applied to the stored values; 1.0 = off
  double compress_exponent = 1.0;

  bool operator==(const StftParams&) const = default;
};

struct ComplexSpectrogram {
  std::vector<cplx> data;  // row-major, num_frames x num_bins
  std::size_t num_frames = 0;
  std::size_t num_bins = 0;
  StftParams params;

  cplx& at(std::size_t frame, std::size_t bin) { return data[frame * num_bins + bin]; }
  const cplx& at(std::size_t frame, std::size_t bin) const {
    return data[frame * num_bins + bin];
  }
};

namespace detail {

inline std::vector<double> hann_periodic(std::size_t n) {
  std::vector<double> w(n);
  const double pi = 3.14159265358979323846264338327950288;
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(n)));
  return w;
}

// reflection index into [0, n), clamping degenerates gracefully for short inputs
inline std::size_t reflect_index(long long i, std::size_t n) {
  if (n == 1) return 0;
  long long period = 2 * (static_cast<long long>(n) - 1);
  long long m = ((i % period) + period) % period;
  if (m >= static_cast<long long>(n)) m = period - m;
  return static_cast<std::size_t>(m);
}

}  // namespace detail

inline std::size_t stft_num_frames(std::size_t num_samples, const StftParams& p) {
  return (num_samples + p.hop_length - 1) / p.hop_length;  // ceil(len/hop)
}

// Center-padded analysis. Frame count is ceil(len/hop); hop 320 keeps the
// spectrogram frame-aligned with the acoustic embedder.
inline ComplexSpectrogram stft(const Waveform& w, const StftParams& p = {}) {
  if (w.samples.empty()) throw std::invalid_argument("stft: empty waveform");
  if (w.sample_rate != kSampleRate) throw std::invalid_argument("stft: sample rate must be 16000");
  if (p.fft_size < p.win_length) throw std::invalid_argument("stft: fft_size < win_length");

  const std::size_t pad = p.win_length / 2;
  const std::size_t nf = stft_num_frames(w.samples.size(), p);
  const auto win = detail::hann_periodic(p.win_length);

  ComplexSpectrogram s;
  s.num_frames = nf;
  s.num_bins = p.fft_size / 2 + 1;
  s.params = p;
  s.data.resize(nf * s.num_bins);

  std::vector<double> frame(p.win_length);
  for (std::size_t t = 0; t < nf; ++t) {
    const long long start = static_cast<long long>(t * p.hop_length) - static_cast<long long>(pad);
    for (std::size_t i = 0; i < p.win_length; ++i) {
      std::size_t idx = detail::reflect_index(start + static_cast<long long>(i), w.samples.size());
      frame[i] = w.samples[idx] * win[i];
    }
    auto bins = rfft(frame, p.fft_size);
    for (std::size_t k = 0; k < s.num_bins; ++k) {
      cplx v = bins[k];
      if (p.compress_exponent != 1.0) {
        double m = std::abs(v);
        if (m > 0.0) v *= std::pow(m, p.compress_exponent - 1.0);
      }
      s.at(t, k) = v;
    }
  }
  return s;
}

// Windowed overlap-add with per-sample window-power normalization.
inline Waveform istft(const ComplexSpectrogram& s, std::size_t length) {
  const StftParams& p = s.params;
  if (s.num_bins != p.fft_size / 2 + 1)
    throw std::invalid_argument("istft: bin count inconsistent with fft size");
  const std::size_t pad = p.win_length / 2;
  const auto win = detail::hann_periodic(p.win_length);

  const std::size_t padded_len = (s.num_frames > 0 ? (s.num_frames - 1) * p.hop_length : 0) + p.win_length;
  std::vector<double> acc(padded_len, 0.0), norm(padded_len, 0.0);

  std::vector<cplx> bins(s.num_bins);
  for (std::size_t t = 0; t < s.num_frames; ++t) {
    for (std::size_t k = 0; k < s.num_bins; ++k) {
      cplx v = s.at(t, k);
      if (p.compress_exponent != 1.0) {
        double m = std::abs(v);
        if (m > 0.0) v *= std::pow(m, 1.0 / p.compress_exponent - 1.0);
      }
      bins[k] = v;
    }
    auto frame = irfft(bins, p.fft_size);
    const std::size_t off = t * p.hop_length;
    for (std::size_t i = 0; i < p.win_length; ++i) {
      acc[off + i] += frame[i] * win[i];
      norm[off + i] += win[i] * win[i];
    }
  }

  Waveform out;
  out.samples.assign(length, 0.0);
  for (std::size_t n = 0; n < length; ++n) {
    std::size_t idx = n + pad;
    if (idx < padded_len && norm[idx] > 1e-15) out.samples[n] = acc[idx] / norm[idx];
  }
  return out;
}

// elementwise helpers used by the diffusion state math
inline ComplexSpectrogram& scale(ComplexSpectrogram& s, double a) {
  for (auto& v : s.data) v *= a;
  return s;
}

}  // namespace usee
