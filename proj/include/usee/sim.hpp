#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "usee/fft.hpp"
#include "usee/prompt.hpp"
#include "usee/rng.hpp"
#include "usee/wav.hpp"

namespace usee {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// room impulse responses

inline double rt60_for_room(RoomSize r) {
  switch (r) {
    case RoomSize::Small: return 0.2;
    case RoomSize::Medium: return 0.5;
    default: return 0.9;
  }
}

struct RirSpec {
  RoomSize room_size = RoomSize::Medium;
  double rt60_s = 0.5;
  std::size_t length = 0;        // samples; 0 = auto (1.2 * rt60)
  std::size_t direct_delay = 64; // samples before the direct impulse

  static RirSpec for_room(RoomSize r) {
    RirSpec s;
    s.room_size = r;
    s.rt60_s = rt60_for_room(r);
    return s;
  }
};

// unit direct impulse followed by Gaussian noise under the exponential
// envelope exp(-6.9 t / rt60) (60 dB decay at rt60); peak is the direct path
inline Waveform synth_rir(const RirSpec& spec, Rng& rng) {
  if (!(spec.rt60_s > 0.0)) throw std::invalid_argument("synth_rir: rt60 must be > 0");
  std::size_t len = spec.length;
  if (len == 0) len = spec.direct_delay + static_cast<std::size_t>(1.2 * spec.rt60_s * kSampleRate);
  Waveform h;
  h.samples.assign(len, 0.0);
  if (spec.direct_delay >= len) throw std::invalid_argument("synth_rir: direct_delay past end");
  h.samples[spec.direct_delay] = 1.0;
  double tail_max = 0.0;
  for (std::size_t n = spec.direct_delay + 1; n < len; ++n) {
    double t = static_cast<double>(n - spec.direct_delay) / kSampleRate;
    double v = 0.3 * rng.gaussian() * std::exp(-6.9 * t / spec.rt60_s);
    h.samples[n] = v;
    tail_max = std::max(tail_max, std::abs(v));
  }
  if (tail_max >= 1.0) {
    double s = 0.95 / tail_max;
    for (std::size_t n = spec.direct_delay + 1; n < len; ++n) h.samples[n] *= s;
  }
  return h;
}

// linear convolution; result peak-limited to [-1, 1] by uniform rescale
inline Waveform apply_rir(const Waveform& clean, const Waveform& rir) {
  if (clean.samples.empty() || rir.samples.empty())
    throw std::invalid_argument("apply_rir: empty input");
  Waveform out;
  out.samples = fft_convolve(clean.samples, rir.samples);
  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  if (peak > 1.0)
    for (auto& v : out.samples) v /= peak;
  return out;
}

// ---------------------------------------------------------------------------
// SNR mixing

inline double signal_power_span(const Waveform& w, std::size_t begin, std::size_t end) {
  end = std::min(end, w.size());
  if (begin >= end) return 0.0;
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += w.samples[i] * w.samples[i];
  return acc / static_cast<double>(end - begin);
}

// Scales noise so that 10 log10(P_clean / P_noise) over [span_begin, span_end)
// equals snr_db, then mixes. snr_db == +inf means "no noise".
inline std::pair<Waveform, Waveform> mix_at_snr(const Waveform& clean, const Waveform& noise,
                                                double snr_db, std::size_t span_begin = 0,
                                                std::size_t span_end = SIZE_MAX) {
  if (clean.size() != noise.size()) throw std::invalid_argument("mix_at_snr: length mismatch");
  if (std::isinf(snr_db) && snr_db > 0) {
    Waveform zero;
    zero.samples.assign(noise.size(), 0.0);
    return {clean, zero};
  }
  span_end = std::min(span_end, clean.size());
  const double pc = signal_power_span(clean, span_begin, span_end);
  const double pn = signal_power_span(noise, span_begin, span_end);
  if (pc <= 0.0 || pn <= 0.0)
    throw std::invalid_argument("mix_at_snr: silent signal over the mixing region");
  const double scale = std::sqrt(pc / (pn * std::pow(10.0, snr_db / 10.0)));
  Waveform scaled = noise;
  for (auto& v : scaled.samples) v *= scale;
  Waveform mix = clean;
  for (std::size_t i = 0; i < mix.size(); ++i) mix.samples[i] += scaled.samples[i];
  return {std::move(mix), std::move(scaled)};
}

inline double measured_snr_db(const Waveform& clean, const Waveform& noise,
                              std::size_t span_begin = 0, std::size_t span_end = SIZE_MAX) {
  return 10.0 * std::log10(signal_power_span(clean, span_begin, span_end) /
                           signal_power_span(noise, span_begin, span_end));
}

// ---------------------------------------------------------------------------
// length alignment (insert / repeat rule)

struct AlignedPair {
  Waveform clean;   // zero-padded to the common length
  Waveform noise;   // tiled/truncated to the common length
  std::size_t insert_offset = 0;  // where the clean span starts
  std::size_t clean_len = 0;      // original clean length
};

// shorter clean: insert at a uniformly random offset inside the background;
// longer clean: background tiled end-to-end then truncated
inline AlignedPair align_lengths(const Waveform& clean, const Waveform& noise, Rng& rng) {
  if (clean.samples.empty() || noise.samples.empty())
    throw std::invalid_argument("align_lengths: empty input");
  AlignedPair out;
  out.clean_len = clean.size();
  if (clean.size() <= noise.size()) {
    const std::size_t slack = noise.size() - clean.size();
    out.insert_offset = slack == 0 ? 0 : rng.uniform_index(slack + 1);
    out.clean.samples.assign(noise.size(), 0.0);
    std::copy(clean.samples.begin(), clean.samples.end(),
              out.clean.samples.begin() + static_cast<long>(out.insert_offset));
    out.noise = noise;
  } else {
    out.clean = clean;
    out.insert_offset = 0;
    out.noise.samples.resize(clean.size());
    for (std::size_t i = 0; i < clean.size(); ++i)
      out.noise.samples[i] = noise.samples[i % noise.size()];
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic corpora (desk-scale stand-ins for real datasets)

inline const std::vector<std::vector<std::string>>& noise_label_vocabulary() {
  static const std::vector<std::vector<std::string>> v = {
      {"rain"}, {"dog", "barking"}, {"traffic"}, {"babble"}};
  return v;
}

inline std::string label_to_filename(const std::vector<std::string>& label) {
  std::string s;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (i) s += '_';
    s += label[i];
  }
  return s;
}

// harmonic tone complex with a syllable-like amplitude envelope
inline Waveform synth_clean_speechlike(Rng& rng, double duration_s = 1.0) {
  const std::size_t n = static_cast<std::size_t>(duration_s * kSampleRate);
  const double pi = 3.14159265358979323846;
  const double f0 = rng.uniform(100.0, 260.0);
  const int harmonics = 4 + static_cast<int>(rng.uniform_index(5));
  std::vector<double> phase(harmonics);
  for (auto& p : phase) p = rng.uniform(0.0, 2.0 * pi);
  const double env_rate = rng.uniform(2.0, 4.0);  // syllables per second
  const double env_phase = rng.uniform(0.0, 2.0 * pi);
  Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / kSampleRate;
    double env = 0.55 + 0.45 * std::sin(2.0 * pi * env_rate * t + env_phase);
    double v = 0.0;
    for (int k = 1; k <= harmonics; ++k)
      v += std::sin(2.0 * pi * f0 * k * t + phase[k - 1]) / static_cast<double>(k);
    w.samples[i] = 0.35 * env * v / 1.5;
  }
  return w;
}

// filtered-noise classes named by the label vocabulary
inline Waveform synth_noise_class(const std::string& label_file, Rng& rng,
                                  double duration_s = 1.0) {
  const std::size_t n = static_cast<std::size_t>(duration_s * kSampleRate);
  Waveform w;
  w.samples.assign(n, 0.0);
  if (label_file == "rain") {
    // high-passed white noise (first difference)
    double prev = rng.gaussian();
    for (std::size_t i = 0; i < n; ++i) {
      double cur = rng.gaussian();
      w.samples[i] = 0.15 * (cur - prev);
      prev = cur;
    }
  } else if (label_file == "traffic") {
    // one-pole low-pass rumble
    double state = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      state = 0.97 * state + 0.03 * rng.gaussian();
      w.samples[i] = 6.0 * state;
    }
  } else if (label_file == "dog_barking") {
    // band-limited noise bursts
    double state = 0.0;
    const double pi = 3.14159265358979323846;
    double burst_rate = rng.uniform(1.5, 3.0);
    double burst_phase = rng.uniform(0.0, 2.0 * pi);
    for (std::size_t i = 0; i < n; ++i) {
      double t = static_cast<double>(i) / kSampleRate;
      double gate = std::sin(2.0 * pi * burst_rate * t + burst_phase) > 0.55 ? 1.0 : 0.02;
      state = 0.6 * state + rng.gaussian();
      w.samples[i] = 0.12 * gate * state;
    }
  } else {  // babble: several detuned harmonic complexes plus noise
    const double pi = 3.14159265358979323846;
    for (int v = 0; v < 4; ++v) {
      double f0 = rng.uniform(90.0, 300.0);
      double ph = rng.uniform(0.0, 2.0 * pi);
      double rate = rng.uniform(2.0, 5.0);
      for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / kSampleRate;
        double env = 0.5 + 0.5 * std::sin(2.0 * pi * rate * t + ph);
        w.samples[i] += 0.05 * env * std::sin(2.0 * pi * f0 * t + ph);
      }
    }
    for (std::size_t i = 0; i < n; ++i) w.samples[i] += 0.03 * rng.gaussian();
  }
  double peak = 0.0;
  for (double v : w.samples) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (auto& v : w.samples) v *= 0.4 / peak;
  return w;
}

// writes clean/*.wav and noise/<label>__*.wav under root
inline void make_synthetic_corpus(const fs::path& root, std::size_t n_clean,
                                  std::size_t n_per_noise_label, std::uint64_t seed) {
  fs::create_directories(root / "clean");
  fs::create_directories(root / "noise");
  for (std::size_t i = 0; i < n_clean; ++i) {
    Rng rng = Rng::derive(seed, i);
    auto w = synth_clean_speechlike(rng, 0.8 + 0.1 * static_cast<double>(i % 5));
    write_wav((root / "clean" / ("clean_" + std::to_string(i) + ".wav")).string(), w);
  }
  std::size_t idx = 1000;
  for (const auto& label : noise_label_vocabulary()) {
    const std::string lf = label_to_filename(label);
    for (std::size_t i = 0; i < n_per_noise_label; ++i, ++idx) {
      Rng rng = Rng::derive(seed, idx);
      auto w = synth_noise_class(lf, rng, 1.0 + 0.2 * static_cast<double>(i % 3));
      write_wav((root / "noise" / (lf + "__" + std::to_string(i) + ".wav")).string(), w);
    }
  }
}

// ---------------------------------------------------------------------------
// dataset manifest

struct ManifestEntry {
  std::string source_path;  // relative to the manifest
  std::string target_path;
  EditCommand command;
  std::uint64_t seed = 0;
  std::optional<double> measured_snr_db;
  std::optional<double> rt60_s;
  std::size_t span_begin = 0;  // clean-active span in samples
  std::size_t span_end = 0;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  fs::path dir;  // directory the relative paths resolve against
};

inline nlohmann::json command_to_json(const EditCommand& cmd) {
  nlohmann::json j;
  switch (cmd.action) {
    case EditAction::AddBackground: j["action"] = "add_background"; break;
    case EditAction::AddReverb: j["action"] = "add_reverb"; break;
    case EditAction::RemoveNoise: j["action"] = "remove_noise"; break;
    case EditAction::RemoveReverb: j["action"] = "remove_reverb"; break;
  }
  if (!cmd.sound_label.empty()) {
    std::string s;
    for (std::size_t i = 0; i < cmd.sound_label.size(); ++i) {
      if (i) s += ' ';
      s += cmd.sound_label[i];
    }
    j["sound_label"] = s;
  }
  if (cmd.snr_db) j["snr_db"] = *cmd.snr_db;
  if (cmd.room_size) j["room_size"] = to_string(*cmd.room_size);
  return j;
}

inline EditCommand command_from_json(const nlohmann::json& j) {
  EditCommand cmd;
  const std::string a = j.at("action").get<std::string>();
  if (a == "add_background")
    cmd.action = EditAction::AddBackground;
  else if (a == "add_reverb")
    cmd.action = EditAction::AddReverb;
  else if (a == "remove_noise")
    cmd.action = EditAction::RemoveNoise;
  else if (a == "remove_reverb")
    cmd.action = EditAction::RemoveReverb;
  else
    throw std::invalid_argument("manifest: unknown action " + a);
  if (j.contains("sound_label")) cmd.sound_label = tokenize_prompt(j["sound_label"]);
  if (j.contains("snr_db")) cmd.snr_db = j["snr_db"].get<double>();
  if (j.contains("room_size")) {
    const std::string r = j["room_size"].get<std::string>();
    cmd.room_size = r == "small"  ? RoomSize::Small
                    : r == "medium" ? RoomSize::Medium
                                    : RoomSize::Large;
  }
  return cmd;
}

inline void save_manifest(const DatasetManifest& m, const fs::path& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write manifest " + path.string());
  for (const auto& e : m.entries) {
    nlohmann::json j;
    j["source_path"] = e.source_path;
    j["target_path"] = e.target_path;
    j["command"] = command_to_json(e.command);
    j["seed"] = e.seed;
    if (e.measured_snr_db) j["measured_snr_db"] = *e.measured_snr_db;
    if (e.rt60_s) j["rt60_s"] = *e.rt60_s;
    j["span_begin"] = e.span_begin;
    j["span_end"] = e.span_end;
    f << j.dump() << '\n';
  }
}

inline DatasetManifest load_manifest(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest " + path.string());
  DatasetManifest m;
  m.dir = path.parent_path();
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    ManifestEntry e;
    e.source_path = j.at("source_path").get<std::string>();
    e.target_path = j.at("target_path").get<std::string>();
    e.command = command_from_json(j.at("command"));
    e.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("measured_snr_db")) e.measured_snr_db = j["measured_snr_db"].get<double>();
    if (j.contains("rt60_s")) e.rt60_s = j["rt60_s"].get<double>();
    e.span_begin = j.value("span_begin", 0u);
    e.span_end = j.value("span_end", 0u);
    m.entries.push_back(std::move(e));
  }
  return m;
}

// relative share of each pair kind in a simulated dataset
struct TaskMix {
  double enhance_denoise = 0.25;
  double enhance_dereverb = 0.25;
  double edit_add_background = 0.25;
  double edit_add_reverb = 0.25;
};

namespace detail {

inline std::vector<fs::path> list_wavs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".wav") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<std::string> label_from_noise_file(const fs::path& p) {
  std::string stem = p.stem().string();
  auto pos = stem.find("__");
  if (pos != std::string::npos) stem = stem.substr(0, pos);
  for (auto& c : stem)
    if (c == '_') c = ' ';
  return tokenize_prompt(stem);
}

}  // namespace detail

// Builds n_pairs of (source, target) wav files plus a JSONL manifest under
// out_dir. Enhancement: source = corrupted, target = clean. Editing: source =
// clean, target = corrupted. Fully reproducible from (master_seed, index).
inline DatasetManifest build_dataset(const fs::path& clean_dir, const fs::path& noise_dir,
                                     std::size_t n_pairs, const TaskMix& mix,
                                     std::uint64_t master_seed, const fs::path& out_dir) {
  auto cleans = detail::list_wavs(clean_dir);
  auto noises = detail::list_wavs(noise_dir);
  if (cleans.empty()) throw std::runtime_error("build_dataset: empty clean corpus");
  if (noises.empty()) throw std::runtime_error("build_dataset: empty noise corpus");
  fs::create_directories(out_dir / "audio");

  const double w_total =
      mix.enhance_denoise + mix.enhance_dereverb + mix.edit_add_background + mix.edit_add_reverb;
  DatasetManifest m;
  m.dir = out_dir;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    ManifestEntry e;
    e.seed = Rng::derive_seed(master_seed, i);
    Rng rng(e.seed);

    const Waveform clean = read_wav(cleans[rng.uniform_index(cleans.size())].string());
    const double pick = rng.uniform(0.0, w_total);
    Waveform source, target;

    if (pick < mix.enhance_denoise + mix.edit_add_background) {
      // additive background task
      const fs::path noise_path = noises[rng.uniform_index(noises.size())];
      const Waveform noise = read_wav(noise_path.string());
      auto aligned = align_lengths(clean, noise, rng);
      const double snr = std::round(rng.uniform(0.0, 15.0) * 10.0) / 10.0;
      const std::size_t sb = aligned.insert_offset;
      const std::size_t se = aligned.insert_offset + aligned.clean_len;
      auto [mixed, scaled] = mix_at_snr(aligned.clean, aligned.noise, snr, sb, se);
      double peak = 0.0;
      for (double v : mixed.samples) peak = std::max(peak, std::abs(v));
      if (peak > 1.0) {
        for (auto& v : mixed.samples) v /= peak;
        for (auto& v : aligned.clean.samples) v /= peak;
        for (auto& v : scaled.samples) v /= peak;
      }
      e.measured_snr_db = measured_snr_db(aligned.clean, scaled, sb, se);
      e.span_begin = sb;
      e.span_end = se;
      const bool editing = pick >= mix.enhance_denoise;
      if (editing) {
        e.command.action = EditAction::AddBackground;
        e.command.sound_label = detail::label_from_noise_file(noise_path);
        e.command.snr_db = snr;
        source = aligned.clean;
        target = mixed;
      } else {
        e.command.action = EditAction::RemoveNoise;
        source = mixed;
        target = aligned.clean;
      }
    } else {
      // reverberation task
      const RoomSize room = static_cast<RoomSize>(rng.uniform_index(3));
      auto rir = synth_rir(RirSpec::for_room(room), rng);
      auto wet = apply_rir(clean, rir);
      Waveform dry = clean;
      dry.samples.resize(wet.size(), 0.0);
      e.rt60_s = rt60_for_room(room);
      e.span_begin = 0;
      e.span_end = clean.size();
      const bool editing =
          pick >= mix.enhance_denoise + mix.edit_add_background + mix.enhance_dereverb;
      if (editing) {
        e.command.action = EditAction::AddReverb;
        e.command.room_size = room;
        source = dry;
        target = wet;
      } else {
        e.command.action = EditAction::RemoveReverb;
        source = wet;
        target = dry;
      }
    }

    const std::string idx = std::to_string(i);
    e.source_path = "audio/pair_" + idx + "_source.wav";
    e.target_path = "audio/pair_" + idx + "_target.wav";
    write_wav((out_dir / e.source_path).string(), source);
    write_wav((out_dir / e.target_path).string(), target);
    m.entries.push_back(std::move(e));
  }
  return m;
}

}  // namespace usee
