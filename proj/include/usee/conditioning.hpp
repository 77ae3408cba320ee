#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "usee/net.hpp"
#include "usee/sde.hpp"
#include "usee/stft.hpp"

namespace usee {

inline constexpr std::size_t kAcousticBands = 13;
inline constexpr double kLogFloor = -23.025850929940457;  // log(1e-10)

// Stand-in acoustic embedder: 13 log-mel band energies per hop-320 frame,
// framed exactly like stft() so frame counts always match. Any embedder with
// the same hop and a fixed width can substitute.
inline std::vector<double> embed_acoustic(const Waveform& w, const StftParams& p = {}) {
  if (w.samples.empty()) throw std::invalid_argument("embed_acoustic: empty waveform");
  auto spec = stft(w, p);
  const std::size_t nb = spec.num_bins;
  const double nyquist = kSampleRate / 2.0;

  // triangular mel filters, kAcousticBands of them over [0, nyquist]
  auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double mel_max = hz_to_mel(nyquist);
  std::vector<double> centers(kAcousticBands + 2);
  for (std::size_t i = 0; i < centers.size(); ++i)
    centers[i] = mel_to_hz(mel_max * static_cast<double>(i) / (kAcousticBands + 1));

  std::vector<double> out(spec.num_frames * kAcousticBands);
  for (std::size_t t = 0; t < spec.num_frames; ++t) {
    for (std::size_t b = 0; b < kAcousticBands; ++b) {
      const double lo = centers[b], mid = centers[b + 1], hi = centers[b + 2];
      double acc = 0.0;
      for (std::size_t k = 0; k < nb; ++k) {
        double f = nyquist * static_cast<double>(k) / static_cast<double>(nb - 1);
        double wgt = 0.0;
        if (f > lo && f < mid)
          wgt = (f - lo) / (mid - lo);
        else if (f >= mid && f < hi)
          wgt = (hi - f) / (hi - mid);
        acc += wgt * std::norm(spec.at(t, k));
      }
      out[t * kAcousticBands + b] = std::log(std::max(acc, 1e-10));
    }
  }
  return out;
}

// lowercase + whitespace split; digit runs with a trailing unit are split in two
inline std::vector<std::string> tokenize_prompt(const std::string& prompt) {
  std::vector<std::string> toks;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    // "10db" -> "10", "db"
    std::size_t i = 0;
    while (i < cur.size() && (std::isdigit(static_cast<unsigned char>(cur[i])) || cur[i] == '.' ||
                              (i == 0 && (cur[i] == '-' || cur[i] == '+'))))
      ++i;
    if (i > 0 && i < cur.size() && std::isdigit(static_cast<unsigned char>(cur[0]))) {
      toks.push_back(cur.substr(0, i));
      toks.push_back(cur.substr(i));
    } else {
      toks.push_back(cur);
    }
    cur.clear();
  };
  for (char ch : prompt) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      flush();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  flush();
  return toks;
}

// token -> id against a fixed vocabulary; index 0 is the shared UNK
inline std::vector<int> tokens_to_ids(const std::vector<std::string>& toks,
                                      const std::vector<std::string>& vocab) {
  std::vector<int> ids;
  ids.reserve(toks.size());
  for (const auto& t : toks) {
    int id = 0;
    for (std::size_t i = 1; i < vocab.size(); ++i)
      if (vocab[i] == t) {
        id = static_cast<int>(i);
        break;
      }
    ids.push_back(id);
  }
  return ids;
}

// embedding-table lookup; empty prompt -> empty sequence
inline std::vector<std::vector<double>> embed_text(const std::string& prompt,
                                                   const ScoreNetParams& params) {
  auto ids = tokens_to_ids(tokenize_prompt(prompt), params.cfg.vocab);
  const std::size_t E = params.cfg.text_dim;
  const double* emb = params.at("emb");
  std::vector<std::vector<double>> out;
  out.reserve(ids.size());
  for (int id : ids)
    out.emplace_back(emb + static_cast<std::size_t>(id) * E,
                     emb + static_cast<std::size_t>(id + 1) * E);
  return out;
}

// Per-step conditioning input. Frame-indexed members share one frame count.
struct ConditionBundle {
  ComplexSpectrogram source_spec;            // Y
  ComplexSpectrogram interp_spec;            // w(t) Y + (1 - w(t)) x_t
  std::vector<double> acoustic_frames;       // num_frames * 13
  std::vector<int> text_token_ids;           // for the trainable embedding table
  std::vector<std::vector<double>> text_embeds;

  std::size_t num_frames() const { return source_spec.num_frames; }
};

inline void update_interp(ConditionBundle& b, double t, const std::vector<cplx>& x_t,
                          const SdeSchedule& sched) {
  if (x_t.size() != b.source_spec.data.size())
    throw std::invalid_argument("build_bundle: state/source shape mismatch");
  const double w = cond_interp_weight(t, sched);
  b.interp_spec = b.source_spec;
  for (std::size_t i = 0; i < x_t.size(); ++i)
    b.interp_spec.data[i] = w * b.source_spec.data[i] + (1.0 - w) * x_t[i];
}

inline ConditionBundle build_bundle(const Waveform& y, const std::string& prompt, double t,
                                    const std::vector<cplx>& x_t, const SdeSchedule& sched,
                                    const ScoreNetParams& params, const StftParams& sp = {}) {
  ConditionBundle b;
  b.source_spec = stft(y, sp);
  b.acoustic_frames = embed_acoustic(y, sp);
  if (b.acoustic_frames.size() / kAcousticBands != b.source_spec.num_frames)
    throw std::runtime_error("build_bundle: acoustic/spectrogram frame misalignment");
  b.text_token_ids = tokens_to_ids(tokenize_prompt(prompt), params.cfg.vocab);
  b.text_embeds = embed_text(prompt, params);
  update_interp(b, t, x_t, sched);
  return b;
}

}  // namespace usee
