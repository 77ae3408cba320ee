#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>

#include "usee/metrics.hpp"
#include "usee/sim.hpp"

using namespace usee;

namespace {

Waveform rand_wave(std::size_t n, std::uint64_t seed, double amp = 0.3) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = amp * rng.uniform(-1.0, 1.0);
  return w;
}

// exponentially decaying noise with an exact 60 dB time constant
Waveform decay_wave(double rt60, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = static_cast<double>(i) / kSampleRate;
    w.samples[i] = rng.gaussian() * std::pow(10.0, -3.0 * t / rt60);
  }
  return w;
}

}  // namespace

TEST_CASE("mix_at_snr hits the requested SNR exactly over the active span") {
  auto clean = rand_wave(8000, 1);
  auto noise = rand_wave(8000, 2);
  for (double snr : {-5.0, 0.0, 3.7, 10.0, 15.0}) {
    auto [mix, scaled] = mix_at_snr(clean, noise, snr);
    REQUIRE(measured_snr_db(clean, scaled) == Catch::Approx(snr).margin(1e-9));
    for (std::size_t i = 0; i < mix.size(); ++i)
      REQUIRE(mix.samples[i] == Catch::Approx(clean.samples[i] + scaled.samples[i]));
  }
}

TEST_CASE("mix_at_snr measures power over the given span only") {
  auto clean = rand_wave(8000, 3);
  // silence the clean outside the span; the SNR should be set over [2000, 6000)
  for (std::size_t i = 0; i < 2000; ++i) clean.samples[i] = 0.0;
  for (std::size_t i = 6000; i < 8000; ++i) clean.samples[i] = 0.0;
  auto noise = rand_wave(8000, 4);
  auto [mix, scaled] = mix_at_snr(clean, noise, 5.0, 2000, 6000);
  REQUIRE(measured_snr_db(clean, scaled, 2000, 6000) == Catch::Approx(5.0).margin(1e-9));
  // over the full file the SNR is lower because the clean is partly silent
  REQUIRE(measured_snr_db(clean, scaled) < 5.0);
}

TEST_CASE("infinite SNR returns the clean signal and zero noise") {
  auto clean = rand_wave(1000, 5);
  auto noise = rand_wave(1000, 6);
  auto [mix, scaled] = mix_at_snr(clean, noise, std::numeric_limits<double>::infinity());
  REQUIRE(mix.samples == clean.samples);
  for (double v : scaled.samples) REQUIRE(v == 0.0);
}

TEST_CASE("mix_at_snr rejects silent inputs and length mismatches") {
  auto clean = rand_wave(100, 7);
  Waveform silent;
  silent.samples.assign(100, 0.0);
  REQUIRE_THROWS_AS(mix_at_snr(clean, silent, 0.0), std::invalid_argument);
  REQUIRE_THROWS_AS(mix_at_snr(silent, clean, 0.0), std::invalid_argument);
  auto shorter = rand_wave(50, 8);
  REQUIRE_THROWS_AS(mix_at_snr(clean, shorter, 0.0), std::invalid_argument);
}

TEST_CASE("align_lengths: equal lengths pass through unchanged") {
  auto clean = rand_wave(500, 9);
  auto noise = rand_wave(500, 10);
  Rng rng(1);
  auto a = align_lengths(clean, noise, rng);
  REQUIRE(a.insert_offset == 0);
  REQUIRE(a.clean.samples == clean.samples);
  REQUIRE(a.noise.samples == noise.samples);
}

TEST_CASE("align_lengths inserts a short clean at a uniform offset") {
  auto clean = rand_wave(300, 11);
  auto noise = rand_wave(1000, 12);
  Rng rng(77);
  double mean_off = 0.0;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    auto a = align_lengths(clean, noise, rng);
    REQUIRE(a.clean.size() == 1000);
    REQUIRE(a.insert_offset <= 700);
    REQUIRE(a.clean_len == 300);
    mean_off += static_cast<double>(a.insert_offset);
    // zero padding outside the span, exact copy inside
    REQUIRE(a.clean.samples[a.insert_offset + 5] == clean.samples[5]);
    if (a.insert_offset > 0) REQUIRE(a.clean.samples[a.insert_offset - 1] == 0.0);
  }
  mean_off /= n;
  REQUIRE(mean_off == Catch::Approx(350.0).margin(15.0));
}

TEST_CASE("align_lengths tiles a short background under a long clean") {
  auto clean = rand_wave(1000, 13);
  auto noise = rand_wave(300, 14);
  Rng rng(3);
  auto a = align_lengths(clean, noise, rng);
  REQUIRE(a.noise.size() == 1000);
  for (std::size_t i = 0; i < 1000; ++i)
    REQUIRE(a.noise.samples[i] == noise.samples[i % 300]);
}

TEST_CASE("synthetic RIRs decay at the requested RT60") {
  Rng rng(21);
  double prev = 0.0;
  for (RoomSize room : {RoomSize::Small, RoomSize::Medium, RoomSize::Large}) {
    auto spec = RirSpec::for_room(room);
    spec.length = static_cast<std::size_t>(2.0 * spec.rt60_s * kSampleRate);
    auto h = synth_rir(spec, rng);
    // drop the direct impulse so the tail dominates the decay estimate
    Waveform tail;
    tail.samples.assign(h.samples.begin() + static_cast<long>(spec.direct_delay + 1),
                        h.samples.end());
    double est = estimate_rt60(tail);
    INFO("room " << to_string(room) << " want " << spec.rt60_s << " got " << est);
    REQUIRE(std::abs(est - spec.rt60_s) / spec.rt60_s < 0.2);
    REQUIRE(est > prev);
    prev = est;
  }
}

TEST_CASE("a unit-impulse RIR leaves the signal unchanged") {
  auto clean = rand_wave(2000, 22);
  Waveform delta;
  delta.samples.assign(10, 0.0);
  delta.samples[0] = 1.0;
  auto out = apply_rir(clean, delta);
  REQUIRE(out.size() == 2009);
  for (std::size_t i = 0; i < 2000; ++i)
    REQUIRE(out.samples[i] == Catch::Approx(clean.samples[i]).margin(1e-10));
}

TEST_CASE("fft convolution matches the quadratic-time oracle") {
  auto a = rand_wave(257, 23);
  auto b = rand_wave(91, 24);
  auto fast = fft_convolve(a.samples, b.samples);
  REQUIRE(fast.size() == 257 + 91 - 1);
  for (std::size_t n = 0; n < fast.size(); n += 13) {
    double ref = 0.0;
    for (std::size_t k = 0; k < b.samples.size(); ++k)
      if (n >= k && n - k < a.samples.size()) ref += a.samples[n - k] * b.samples[k];
    REQUIRE(std::abs(fast[n] - ref) < 1e-9);
  }
}

TEST_CASE("si_sdr caps at 100 dB for perfect and scaled copies") {
  auto ref = rand_wave(4000, 31);
  REQUIRE(si_sdr(ref, ref) == kSiSdrCap);
  Waveform scaled = ref;
  for (auto& v : scaled.samples) v *= 0.3;
  REQUIRE(si_sdr(ref, scaled) == kSiSdrCap);  // scale invariance
}

TEST_CASE("si_sdr of signal-plus-orthogonal-noise matches the power ratio") {
  const double pi = std::acos(-1.0);
  Waveform ref, est;
  ref.samples.resize(16000);
  est.samples.resize(16000);
  for (std::size_t i = 0; i < 16000; ++i) {
    double t = static_cast<double>(i);
    ref.samples[i] = std::sin(2.0 * pi * 100.0 * t / 16000.0);
    est.samples[i] = ref.samples[i] + 0.1 * std::sin(2.0 * pi * 200.0 * t / 16000.0);
  }
  // orthogonal error with power ratio (1/2) / (0.01/2) = 100 -> 20 dB
  REQUIRE(si_sdr(ref, est) == Catch::Approx(20.0).margin(1e-6));
}

TEST_CASE("segmental snr clips each frame into [-10, 35] dB") {
  auto ref = rand_wave(3200, 33);
  REQUIRE(segmental_snr(ref, ref) == Catch::Approx(35.0));
  Waveform junk = rand_wave(3200, 34, 40.0);
  REQUIRE(segmental_snr(ref, junk) == Catch::Approx(-10.0));
}

TEST_CASE("log spectral distance is zero for identical signals and symmetric") {
  auto a = rand_wave(4800, 35);
  auto b = rand_wave(4800, 36);
  REQUIRE(log_spectral_distance(a, a) == Catch::Approx(0.0).margin(1e-12));
  REQUIRE(log_spectral_distance(a, b) == Catch::Approx(log_spectral_distance(b, a)));
}

TEST_CASE("a uniform gain of 2 gives an LSD of 20 log10 2") {
  auto a = rand_wave(4800, 37);
  Waveform b = a;
  for (auto& v : b.samples) v *= 2.0;
  REQUIRE(log_spectral_distance(b, a) == Catch::Approx(20.0 * std::log10(2.0)).margin(1e-6));
}

TEST_CASE("rt60 estimation recovers a known exponential decay") {
  for (double rt : {0.2, 0.5, 0.9}) {
    auto w = decay_wave(rt, static_cast<std::size_t>(2.5 * rt * kSampleRate), 41);
    REQUIRE(std::abs(estimate_rt60(w) - rt) / rt < 0.1);
  }
}

TEST_CASE("rt60 estimation refuses stationary noise") {
  auto w = rand_wave(16000, 42);
  REQUIRE_THROWS_AS(estimate_rt60(w), DecayError);
}

TEST_CASE("compute_metrics fills all fields and skips rt60 gracefully") {
  auto ref = rand_wave(6400, 43);
  auto est = rand_wave(6400, 44);
  auto r = compute_metrics(ref, est);
  REQUIRE(std::isfinite(r.si_sdr_db));
  REQUIRE(std::isfinite(r.seg_snr_db));
  REQUIRE(r.lsd > 0.0);
  REQUIRE_FALSE(r.rt60_s.has_value());  // stationary noise has no decay
}

TEST_CASE("synthetic corpora are reproducible and non-silent") {
  namespace fsys = std::filesystem;
  auto root = fsys::temp_directory_path() / "usee_corpus_test";
  fsys::remove_all(root);
  make_synthetic_corpus(root, 3, 2, 12345);
  auto cleans = usee::detail::list_wavs(root / "clean");
  auto noises = usee::detail::list_wavs(root / "noise");
  REQUIRE(cleans.size() == 3);
  REQUIRE(noises.size() == 8);  // 4 labels x 2
  for (const auto& p : noises) {
    auto w = read_wav(p.string());
    REQUIRE(signal_power_span(w, 0, w.size()) > 0.0);
    auto label = usee::detail::label_from_noise_file(p);
    REQUIRE_FALSE(label.empty());
  }
  // regenerate into a second directory: bit-identical files
  auto root2 = fsys::temp_directory_path() / "usee_corpus_test2";
  fsys::remove_all(root2);
  make_synthetic_corpus(root2, 3, 2, 12345);
  auto w1 = read_wav((root / "clean" / "clean_0.wav").string());
  auto w2 = read_wav((root2 / "clean" / "clean_0.wav").string());
  REQUIRE(w1.samples == w2.samples);
}

TEST_CASE("noise filenames map back to multi-word labels") {
  REQUIRE(usee::detail::label_from_noise_file("noise/dog_barking__3.wav") ==
          std::vector<std::string>{"dog", "barking"});
  REQUIRE(usee::detail::label_from_noise_file("rain__0.wav") ==
          std::vector<std::string>{"rain"});
}

TEST_CASE("build_dataset writes a loadable manifest with per-entry seeds") {
  namespace fsys = std::filesystem;
  auto root = fsys::temp_directory_path() / "usee_dataset_test";
  fsys::remove_all(root);
  make_synthetic_corpus(root / "corpus", 4, 2, 99);
  auto m = build_dataset(root / "corpus" / "clean", root / "corpus" / "noise", 12, TaskMix{}, 7,
                         root / "out");
  REQUIRE(m.entries.size() == 12);
  save_manifest(m, root / "out" / "manifest.jsonl");
  auto loaded = load_manifest(root / "out" / "manifest.jsonl");
  REQUIRE(loaded.entries.size() == 12);
  std::vector<std::uint64_t> seeds;
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& a = m.entries[i];
    const auto& b = loaded.entries[i];
    REQUIRE(a.source_path == b.source_path);
    REQUIRE(a.command == b.command);
    REQUIRE(a.seed == b.seed);
    REQUIRE(a.span_begin == b.span_begin);
    REQUIRE(a.span_end == b.span_end);
    seeds.push_back(a.seed);
    auto src = read_wav((root / "out" / a.source_path).string());
    auto tgt = read_wav((root / "out" / a.target_path).string());
    REQUIRE(src.size() == tgt.size());
    validate_command(a.command);
    if (a.measured_snr_db)
      REQUIRE(std::abs(*b.measured_snr_db - *a.measured_snr_db) < 1e-6);
  }
  std::sort(seeds.begin(), seeds.end());
  REQUIRE(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());  // unique
}

TEST_CASE("noisy-pair entries honor the manifest's measured SNR") {
  namespace fsys = std::filesystem;
  auto root = fsys::temp_directory_path() / "usee_dataset_snr";
  fsys::remove_all(root);
  make_synthetic_corpus(root / "corpus", 3, 2, 5);
  TaskMix mix{1.0, 0.0, 0.0, 0.0};  // denoise only
  auto m = build_dataset(root / "corpus" / "clean", root / "corpus" / "noise", 6, mix, 11,
                         root / "out");
  for (const auto& e : m.entries) {
    REQUIRE(e.command.action == EditAction::RemoveNoise);
    REQUIRE(e.measured_snr_db.has_value());
    auto src = read_wav((root / "out" / e.source_path).string());  // mixed
    auto tgt = read_wav((root / "out" / e.target_path).string());  // clean
    Waveform noise;
    noise.samples.resize(src.size());
    for (std::size_t i = 0; i < src.size(); ++i)
      noise.samples[i] = src.samples[i] - tgt.samples[i];
    double snr = measured_snr_db(tgt, noise, e.span_begin, e.span_end);
    // 16-bit quantization perturbs the measurement slightly
    REQUIRE(std::abs(snr - *e.measured_snr_db) < 0.1);
    REQUIRE(*e.measured_snr_db > -1.0);
    REQUIRE(*e.measured_snr_db < 16.0);
  }
}

TEST_CASE("reverb-pair entries record the room RT60") {
  namespace fsys = std::filesystem;
  auto root = fsys::temp_directory_path() / "usee_dataset_rvb";
  fsys::remove_all(root);
  make_synthetic_corpus(root / "corpus", 3, 1, 5);
  TaskMix mix{0.0, 0.0, 0.0, 1.0};  // add-reverb editing only
  auto m = build_dataset(root / "corpus" / "clean", root / "corpus" / "noise", 5, mix, 13,
                         root / "out");
  for (const auto& e : m.entries) {
    REQUIRE(e.command.action == EditAction::AddReverb);
    REQUIRE(e.command.room_size.has_value());
    REQUIRE(e.rt60_s == rt60_for_room(*e.command.room_size));
  }
}

TEST_CASE("build_dataset is reproducible from the master seed") {
  namespace fsys = std::filesystem;
  auto root = fsys::temp_directory_path() / "usee_dataset_repro";
  fsys::remove_all(root);
  make_synthetic_corpus(root / "corpus", 3, 2, 4);
  auto m1 = build_dataset(root / "corpus" / "clean", root / "corpus" / "noise", 5, TaskMix{}, 17,
                          root / "a");
  auto m2 = build_dataset(root / "corpus" / "clean", root / "corpus" / "noise", 5, TaskMix{}, 17,
                          root / "b");
  for (std::size_t i = 0; i < 5; ++i) {
    REQUIRE(m1.entries[i].command == m2.entries[i].command);
    auto w1 = read_wav((root / "a" / m1.entries[i].source_path).string());
    auto w2 = read_wav((root / "b" / m2.entries[i].source_path).string());
    REQUIRE(w1.samples == w2.samples);
  }
}
