#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "usee/stft.hpp"
#include "usee/wav.hpp"

namespace usee {

inline constexpr double kSiSdrCap = 100.0;  // reported value for a perfect match

inline double signal_power(const std::vector<double>& x, std::size_t begin = 0,
                           std::size_t end = SIZE_MAX) {
  end = std::min(end, x.size());
  if (begin >= end) return 0.0;
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += x[i] * x[i];
  return acc / static_cast<double>(end - begin);
}

// scale-invariant SDR in dB; capped at 100 dB
inline double si_sdr(const Waveform& ref, const Waveform& est) {
  if (ref.size() != est.size()) throw std::invalid_argument("si_sdr: length mismatch");
  double ss = 0.0, se = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ss += ref.samples[i] * ref.samples[i];
    se += est.samples[i] * ref.samples[i];
  }
  if (ss <= 0.0) throw std::invalid_argument("si_sdr: silent reference");
  const double alpha = se / ss;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    double t = alpha * ref.samples[i];
    double e = t - est.samples[i];
    num += t * t;
    den += e * e;
  }
  if (den <= 0.0 || num / den > std::pow(10.0, kSiSdrCap / 10.0)) return kSiSdrCap;
  return 10.0 * std::log10(num / den);
}

// mean of per-frame SNRs, frames of 320 samples, each clipped to [-10, 35] dB
inline double segmental_snr(const Waveform& ref, const Waveform& est,
                            std::size_t frame_len = 320) {
  if (ref.size() != est.size()) throw std::invalid_argument("segmental_snr: length mismatch");
  double acc = 0.0;
  std::size_t n = 0;
  for (std::size_t off = 0; off + frame_len <= ref.size(); off += frame_len) {
    double ps = 0.0, pe = 0.0;
    for (std::size_t i = off; i < off + frame_len; ++i) {
      ps += ref.samples[i] * ref.samples[i];
      double d = ref.samples[i] - est.samples[i];
      pe += d * d;
    }
    if (ps <= 0.0) continue;
    double snr = 10.0 * std::log10(ps / std::max(pe, 1e-20));
    acc += std::clamp(snr, -10.0, 35.0);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("segmental_snr: no active frames");
  return acc / static_cast<double>(n);
}

// RMS over frames and bins of 20 (log10|R| - log10|E|), magnitude floor 1e-8
inline double log_spectral_distance(const Waveform& ref, const Waveform& est,
                                    const StftParams& p = {}) {
  if (ref.size() != est.size())
    throw std::invalid_argument("log_spectral_distance: length mismatch");
  auto r = stft(ref, p);
  auto e = stft(est, p);
  double acc = 0.0;
  for (std::size_t i = 0; i < r.data.size(); ++i) {
    double lr = std::log10(std::max(std::abs(r.data[i]), 1e-8));
    double le = std::log10(std::max(std::abs(e.data[i]), 1e-8));
    double d = 20.0 * (lr - le);
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(r.data.size()));
}

struct DecayError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Schroeder backward integration; line fit on the -5..-25 dB range of the
// decay curve; RT60 from the fitted slope.
inline double estimate_rt60(const Waveform& w) {
  const std::size_t n = w.size();
  if (n < 64) throw DecayError("estimate_rt60: signal too short");
  std::vector<double> sch(n);
  double acc = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    acc += w.samples[i] * w.samples[i];
    sch[i] = acc;
  }
  if (sch[0] <= 0.0) throw DecayError("estimate_rt60: silent signal");
  std::size_t i5 = n, i25 = n;
  for (std::size_t i = 0; i < n; ++i) {
    double db = 10.0 * std::log10(sch[i] / sch[0]);
    if (i5 == n && db <= -5.0) i5 = i;
    if (db <= -25.0) {
      i25 = i;
      break;
    }
  }
  // the -25 dB point of an undamped signal only appears in the last few
  // percent of the backward integral; treat that as "no measurable decay"
  if (i25 == n || i25 > (n * 95) / 100 || i25 <= i5 + 8)
    throw DecayError("no measurable decay");

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  const double fs = static_cast<double>(w.sample_rate);
  std::size_t cnt = 0;
  for (std::size_t i = i5; i <= i25; ++i) {
    double x = static_cast<double>(i) / fs;
    double y = 10.0 * std::log10(sch[i] / sch[0]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  const double m = static_cast<double>(cnt);
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);  // dB per second
  if (!(slope < 0.0)) throw DecayError("no measurable decay");
  return -60.0 / slope;
}

struct MetricReport {
  double si_sdr_db = 0.0;
  double seg_snr_db = 0.0;
  double lsd = 0.0;
  std::optional<double> rt60_s;
};

inline MetricReport compute_metrics(const Waveform& ref, const Waveform& est) {
  MetricReport r;
  r.si_sdr_db = si_sdr(ref, est);
  r.seg_snr_db = segmental_snr(ref, est);
  r.lsd = log_spectral_distance(ref, est);
  try {
    r.rt60_s = estimate_rt60(est);
  } catch (const DecayError&) {
    r.rt60_s.reset();
  }
  return r;
}

}  // namespace usee
