#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "usee/checkpoint.hpp"
#include "usee/checks.hpp"
#include "usee/conditioning.hpp"
#include "usee/config.hpp"
#include "usee/metrics.hpp"
#include "usee/net.hpp"
#include "usee/prompt.hpp"
#include "usee/sim.hpp"
#include "usee/solver.hpp"
#include "usee/stft.hpp"

namespace usee {

// grammar keywords + noise label words; index 0 is UNK
inline std::vector<std::string> default_vocab() {
  std::vector<std::string> v = {"<unk>", "add",  "background",    "sound",  "as",
                                "with",  "snr",  "db",            "remove", "noise",
                                "reverberation", "room",          "size",   "small",
                                "medium",        "large"};
  for (const auto& label : noise_label_vocabulary())
    for (const auto& tok : label)
      if (std::find(v.begin(), v.end(), tok) == v.end()) v.push_back(tok);
  return v;
}

// complex spectrogram <-> per-frame real channel layout [re..., im...]
inline std::vector<double> state_to_channels(const std::vector<cplx>& x, std::size_t num_frames,
                                             std::size_t num_bins, double scale = 1.0) {
  std::vector<double> out(num_frames * 2 * num_bins);
  for (std::size_t f = 0; f < num_frames; ++f)
    for (std::size_t b = 0; b < num_bins; ++b) {
      out[f * 2 * num_bins + b] = scale * x[f * num_bins + b].real();
      out[f * 2 * num_bins + num_bins + b] = scale * x[f * num_bins + b].imag();
    }
  return out;
}

inline std::vector<cplx> channels_to_state(const std::vector<double>& ch, std::size_t num_frames,
                                           std::size_t num_bins, double scale = 1.0) {
  std::vector<cplx> out(num_frames * num_bins);
  for (std::size_t f = 0; f < num_frames; ++f)
    for (std::size_t b = 0; b < num_bins; ++b)
      out[f * num_bins + b] = scale * cplx(ch[f * 2 * num_bins + b],
                                           ch[f * 2 * num_bins + num_bins + b]);
  return out;
}

inline ScoreNetConfig model_config_for_audio(const RunConfig& c, const StftParams& sp = {}) {
  ScoreNetConfig m;
  m.state_channels = 2 * (sp.fft_size / 2 + 1);
  m.cond_channels = m.state_channels;
  m.acoustic_dim = kAcousticBands;
  m.context_radius = c.context_radius;
  m.hidden = c.hidden;
  m.attn_dim = c.attn_dim;
  m.text_dim = c.text_dim;
  m.time_freqs = c.time_freqs;
  m.vocab = default_vocab();
  return m;
}

// ---------------------------------------------------------------------------
// simulate

inline fs::path run_simulate(const RunConfig& cfg, std::size_t n_pairs, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  fs::path clean_dir = cfg.clean_dir;
  fs::path noise_dir = cfg.noise_dir;
  if (cfg.clean_dir.empty() || cfg.noise_dir.empty()) {
    // no corpora configured: generate the synthetic stand-in corpus
    make_synthetic_corpus(out_dir / "corpus", cfg.clean_count, cfg.noise_per_label, cfg.seed);
    clean_dir = out_dir / "corpus" / "clean";
    noise_dir = out_dir / "corpus" / "noise";
  }
  TaskMix mix;
  auto manifest = build_dataset(clean_dir, noise_dir, n_pairs, mix, cfg.seed, out_dir);
  const fs::path mpath = out_dir / "manifest.jsonl";
  save_manifest(manifest, mpath);
  return mpath;
}

// ---------------------------------------------------------------------------
// training data assembly

struct LoadedItem {
  std::size_t num_frames = 0;
  std::vector<double> x0;        // target spectrogram channels (scaled)
  std::vector<double> y;         // source spectrogram channels (scaled)
  std::vector<double> acoustic;  // num_frames * 13
  std::vector<int> tokens;
};

inline std::vector<LoadedItem> load_training_items(const DatasetManifest& m, const RunConfig& cfg,
                                                   const ScoreNetConfig& mc,
                                                   const StftParams& sp = {}) {
  std::vector<LoadedItem> items;
  items.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    Waveform src = read_wav((m.dir / e.source_path).string());
    Waveform tgt = read_wav((m.dir / e.target_path).string());
    auto sy = stft(src, sp);
    auto sx = stft(tgt, sp);
    LoadedItem it;
    it.num_frames = std::min(sy.num_frames, sx.num_frames);
    it.y = state_to_channels(sy.data, sy.num_frames, sy.num_bins, cfg.spec_scale);
    it.x0 = state_to_channels(sx.data, sx.num_frames, sx.num_bins, cfg.spec_scale);
    it.y.resize(it.num_frames * mc.state_channels);
    it.x0.resize(it.num_frames * mc.state_channels);
    it.acoustic = embed_acoustic(src, sp);
    it.acoustic.resize(it.num_frames * kAcousticBands);
    it.tokens = tokens_to_ids(tokenize_prompt(format_command(e.command)), mc.vocab);
    items.push_back(std::move(it));
  }
  return items;
}

inline TrainBatch make_batch(const std::vector<LoadedItem>& items, const RunConfig& cfg,
                             const ScoreNetConfig& mc, Rng& rng) {
  TrainBatch batch;
  batch.reserve(cfg.batch_size);
  const std::size_t C = mc.state_channels;
  for (std::size_t b = 0; b < cfg.batch_size; ++b) {
    const auto& src = items[rng.uniform_index(items.size())];
    const std::size_t len = std::min<std::size_t>(cfg.max_frames, src.num_frames);
    const std::size_t start =
        src.num_frames == len ? 0 : rng.uniform_index(src.num_frames - len + 1);
    TrainItem it;
    it.num_frames = len;
    it.x0.assign(src.x0.begin() + static_cast<long>(start * C),
                 src.x0.begin() + static_cast<long>((start + len) * C));
    it.y.assign(src.y.begin() + static_cast<long>(start * C),
                src.y.begin() + static_cast<long>((start + len) * C));
    it.acoustic.assign(src.acoustic.begin() + static_cast<long>(start * kAcousticBands),
                       src.acoustic.begin() + static_cast<long>((start + len) * kAcousticBands));
    it.tokens = src.tokens;
    it.t = sample_t_sigma2(rng, cfg.sched);
    it.z.resize(len * C);
    for (auto& v : it.z) v = rng.gaussian();
    batch.push_back(std::move(it));
  }
  return batch;
}

// ---------------------------------------------------------------------------
// train

inline fs::path run_train(const RunConfig& cfg, const fs::path& manifest_path,
                          const fs::path& out_ckpt,
                          const std::optional<fs::path>& resume_from = std::nullopt,
                          std::ostream& log = std::cout) {
  auto manifest = load_manifest(manifest_path);
  if (manifest.entries.empty()) throw std::runtime_error("train: empty manifest");
  const ScoreNetConfig mc = model_config_for_audio(cfg);
  Rng rng(cfg.seed);
  ScoreNetParams params = resume_from ? load_checkpoint(resume_from->string())
                                      : init_params(mc, rng);
  auto items = load_training_items(manifest, cfg, mc);

  OptimizerConfig oc;
  oc.learning_rate = cfg.learning_rate;
  oc.steps = cfg.train_steps;
  oc.log_every = cfg.log_every;

  const fs::path loss_csv = out_ckpt.string() + ".loss.csv";
  std::ofstream csv(loss_csv, std::ios::trunc);
  csv << "step,loss\n";
  auto sampler = [&](Rng& r) { return make_batch(items, cfg, mc, r); };
  auto result = train(
      params, sampler, cfg.sched, oc, rng, nullptr,
      [&](std::size_t step, double loss) {
        csv << step << "," << loss << "\n";
        log << "step " << step << " loss " << loss << "\n";
      });
  (void)result;
  save_checkpoint(params, out_ckpt.string());
  return out_ckpt;
}

// ---------------------------------------------------------------------------
// enhance / edit

// full conditional reverse-diffusion run on one waveform
inline Waveform generate(const RunConfig& cfg, const ScoreNetParams& params, const Waveform& in,
                         const EditCommand& cmd, Rng& rng, const StftParams& sp = {}) {
  auto sy = stft(in, sp);
  const std::size_t Tf = sy.num_frames, B = sy.num_bins;
  std::vector<cplx> y_state(sy.data);
  for (auto& v : y_state) v *= cfg.spec_scale;
  auto y_ch = state_to_channels(y_state, Tf, B);
  auto acoustic = embed_acoustic(in, sp);
  auto tokens = tokens_to_ids(tokenize_prompt(format_command(cmd)), params.cfg.vocab);

  auto score_fn = [&](const std::vector<cplx>& x, double t) {
    NetInput ni;
    ni.num_frames = Tf;
    ni.t = t;
    ni.sigma = kernel_std(t, cfg.sched);
    ni.state = state_to_channels(x, Tf, B);
    const double wc = cond_interp_weight(t, cfg.sched);
    ni.cond.resize(ni.state.size());
    for (std::size_t i = 0; i < ni.state.size(); ++i)
      ni.cond[i] = wc * y_ch[i] + (1.0 - wc) * ni.state[i];
    ni.acoustic = acoustic;
    ni.tokens = tokens;
    auto s = net_score(params, ni);
    return channels_to_state(s, Tf, B);
  };

  auto x_hat = sample(y_state, score_fn, cfg.sched, cfg.solver, rng);
  ComplexSpectrogram out_spec = sy;
  for (std::size_t i = 0; i < x_hat.size(); ++i) out_spec.data[i] = x_hat[i] / cfg.spec_scale;
  return istft(out_spec, in.size());
}

inline MetricReport run_generate_file(const RunConfig& cfg, const fs::path& ckpt,
                                      const fs::path& in_wav, const std::string& prompt,
                                      const fs::path& out_wav, bool editing) {
  EditCommand cmd = parse_prompt(prompt);  // throws with position on NoMatch
  const bool is_edit_cmd =
      cmd.action == EditAction::AddBackground || cmd.action == EditAction::AddReverb;
  if (editing != is_edit_cmd)
    throw std::invalid_argument(editing
                                    ? "edit expects an Add* prompt; use enhance for Remove*"
                                    : "enhance expects a Remove* prompt; use edit for Add*");
  auto params = load_checkpoint(ckpt.string());
  Waveform in = read_wav(in_wav.string());
  Rng rng(Rng::derive_seed(cfg.seed, 0x9e37));
  Waveform out = generate(cfg, params, in, cmd, rng);
  write_wav(out_wav.string(), out);
  MetricReport r;
  r.lsd = log_spectral_distance(in, out);
  try {
    r.rt60_s = estimate_rt60(out);
  } catch (const DecayError&) {
    r.rt60_s.reset();
  }
  return r;
}

// ---------------------------------------------------------------------------
// eval

inline void run_eval(const RunConfig& cfg, const fs::path& ckpt, const fs::path& manifest_path,
                     const fs::path& out_csv) {
  auto manifest = load_manifest(manifest_path);
  auto params = load_checkpoint(ckpt.string());
  std::ofstream csv(out_csv, std::ios::trunc);
  csv << "entry_id,si_sdr_db,seg_snr_db,lsd,rt60_s\n";
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    Waveform src = read_wav((manifest.dir / e.source_path).string());
    Waveform tgt = read_wav((manifest.dir / e.target_path).string());
    Rng rng(Rng::derive_seed(cfg.seed, 0xe7a1 + i));
    Waveform out = generate(cfg, params, src, e.command, rng);
    auto r = compute_metrics(tgt, out);
    csv << i << "," << r.si_sdr_db << "," << r.seg_snr_db << "," << r.lsd << ",";
    if (r.rt60_s) csv << *r.rt60_s;
    csv << "\n";
  }
}

// ---------------------------------------------------------------------------
// kernel-check

inline bool run_kernel_check(const RunConfig& cfg, std::ostream& os = std::cout) {
  std::vector<CheckResult> results;
  results.push_back(check_variance_ode(cfg.sched, 1e-4));
  results.push_back(check_kernel_moments(cfg.sched, 10000, 1e-3, {0.25, 0.5, 1.0}, 0.01, 0.05,
                                         Rng::derive_seed(cfg.seed, 101)));
  results.push_back(
      check_reverse_recovery(cfg.sched, 2000, 200, 0.05, 0.10, Rng::derive_seed(cfg.seed, 202)));
  results.push_back(check_gradients(cfg.sched, 1e-4, 1e-4, Rng::derive_seed(cfg.seed, 303)));
  bool all = true;
  for (const auto& r : results) {
    os << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": " << r.detail << "\n";
    all = all && r.passed;
  }
  return all;
}

}  // namespace usee
