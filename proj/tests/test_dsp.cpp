#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "usee/conditioning.hpp"
#include "usee/fft.hpp"
#include "usee/rng.hpp"
#include "usee/stft.hpp"
#include "usee/wav.hpp"

using namespace usee;
namespace fs = std::filesystem;

namespace {

Waveform random_waveform(std::size_t n, std::uint64_t seed, double amp = 0.5) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(n);
  for (auto& s : w.samples) s = amp * rng.uniform(-1.0, 1.0);
  return w;
}

double snr_db(const Waveform& ref, const Waveform& est) {
  double ps = 0.0, pe = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    ps += ref.samples[i] * ref.samples[i];
    double d = ref.samples[i] - est.samples[i];
    pe += d * d;
  }
  return 10.0 * std::log10(ps / std::max(pe, 1e-300));
}

fs::path tmpdir() {
  auto p = fs::temp_directory_path() / "usee_dsp_tests";
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("fft inverts on random data") {
  Rng rng(7);
  std::vector<cplx> a(256);
  for (auto& v : a) v = rng.gaussian_complex();
  auto b = ifft(fft(a));
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(std::abs(a[i] - b[i]) < 1e-12);
}

TEST_CASE("rfft matches a direct DFT") {
  Rng rng(8);
  std::vector<double> x(64);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  auto bins = rfft(x, 64);
  const double pi = std::acos(-1.0);
  for (std::size_t k = 0; k <= 32; ++k) {
    cplx ref{};
    for (std::size_t n = 0; n < 64; ++n)
      ref += x[n] * std::exp(cplx(0.0, -2.0 * pi * double(k * n) / 64.0));
    REQUIRE(std::abs(bins[k] - ref) < 1e-10);
  }
}

TEST_CASE("silence maps to an all-zero spectrogram with ceil(len/hop) frames") {
  Waveform w;
  w.samples.assign(16000, 0.0);
  auto s = stft(w);
  REQUIRE(s.num_frames == 50);
  REQUIRE(s.num_bins == 513);
  for (const auto& v : s.data) REQUIRE(std::abs(v) == 0.0);
}

TEST_CASE("pure 1 kHz sine concentrates energy near the 1 kHz bin") {
  Waveform w;
  w.samples.resize(16000);
  const double pi = std::acos(-1.0);
  for (std::size_t i = 0; i < w.size(); ++i)
    w.samples[i] = 0.5 * std::sin(2.0 * pi * 1000.0 * i / 16000.0);
  auto s = stft(w);
  const double bin_hz = 16000.0 / 1024.0;
  const std::size_t want = static_cast<std::size_t>(std::lround(1000.0 / bin_hz));
  for (std::size_t t = 2; t + 2 < s.num_frames; ++t) {
    std::size_t best = 0;
    double best_mag = -1.0;
    for (std::size_t k = 0; k < s.num_bins; ++k) {
      double m = std::abs(s.at(t, k));
      if (m > best_mag) {
        best_mag = m;
        best = k;
      }
    }
    REQUIRE(std::abs(static_cast<long>(best) - static_cast<long>(want)) <= 1);
  }
}

TEST_CASE("stft frames match a direct DFT of each windowed frame") {
  auto w = random_waveform(4000, 42);
  auto s = stft(w);
  // interior frame, recomputed by hand
  const std::size_t t = 5;
  const auto win = usee::detail::hann_periodic(640);
  std::vector<double> frame(640);
  const long long start = static_cast<long long>(t * 320) - 320;
  for (std::size_t i = 0; i < 640; ++i)
    frame[i] = w.samples[static_cast<std::size_t>(start + static_cast<long long>(i))] * win[i];
  const double pi = std::acos(-1.0);
  for (std::size_t k = 0; k < s.num_bins; k += 37) {
    cplx ref{};
    for (std::size_t n = 0; n < 640; ++n)
      ref += frame[n] * std::exp(cplx(0.0, -2.0 * pi * double(k * n) / 1024.0));
    REQUIRE(std::abs(s.at(t, k) - ref) < 1e-9);
  }
}

TEST_CASE("istft(stft(w)) reconstructs with SNR >= 60 dB") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    auto w = random_waveform(9000 + 511 * seed, seed);
    auto rec = istft(stft(w), w.size());
    REQUIRE(snr_db(w, rec) >= 60.0);
  }
}

TEST_CASE("all-zero spectrogram synthesizes silence") {
  Waveform w;
  w.samples.assign(3200, 0.0);
  auto s = stft(w);
  auto rec = istft(s, 3200);
  for (double v : rec.samples) REQUIRE(v == 0.0);
}

TEST_CASE("stft(istft(S)) is idempotent on analyzed spectrograms") {
  auto w = random_waveform(6400, 17);
  auto s = stft(w);
  auto s2 = stft(istft(s, w.size()));
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < s.data.size(); ++i) {
    num += std::norm(s.data[i] - s2.data[i]);
    den += std::norm(s.data[i]);
  }
  REQUIRE(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("stft is linear") {
  auto w1 = random_waveform(5000, 5);
  auto w2 = random_waveform(5000, 6);
  Waveform mix;
  mix.samples.resize(5000);
  for (std::size_t i = 0; i < 5000; ++i)
    mix.samples[i] = 0.7 * w1.samples[i] - 1.3 * w2.samples[i];
  auto sm = stft(mix);
  auto s1 = stft(w1);
  auto s2 = stft(w2);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < sm.data.size(); ++i) {
    cplx want = 0.7 * s1.data[i] - 1.3 * s2.data[i];
    num += std::norm(sm.data[i] - want);
    den += std::norm(want);
  }
  REQUIRE(std::sqrt(num / den) < 1e-6);
}

TEST_CASE("windowed-frame energy matches its spectrum (Parseval)") {
  auto w = random_waveform(4000, 23);
  auto s = stft(w);
  const auto win = usee::detail::hann_periodic(640);
  const std::size_t t = 4;
  std::vector<double> frame(640);
  const long long start = static_cast<long long>(t * 320) - 320;
  double time_energy = 0.0;
  for (std::size_t i = 0; i < 640; ++i) {
    frame[i] = w.samples[static_cast<std::size_t>(start + static_cast<long long>(i))] * win[i];
    time_energy += frame[i] * frame[i];
  }
  double freq_energy = 0.0;
  for (std::size_t k = 0; k < s.num_bins; ++k) {
    double wgt = (k == 0 || k == s.num_bins - 1) ? 1.0 : 2.0;
    freq_energy += wgt * std::norm(s.at(t, k));
  }
  freq_energy /= 1024.0;
  REQUIRE(std::abs(time_energy - freq_energy) / time_energy < 1e-6);
}

TEST_CASE("stft rejects empty input and wrong sample rate") {
  Waveform empty;
  REQUIRE_THROWS_AS(stft(empty), std::invalid_argument);
  Waveform wrong;
  wrong.samples.assign(100, 0.1);
  wrong.sample_rate = 8000;
  REQUIRE_THROWS_AS(stft(wrong), std::invalid_argument);
}

TEST_CASE("wav write/read round-trips quantized samples") {
  auto w = random_waveform(1234, 99, 0.9);
  for (auto& s : w.samples) s = quantize_sample(s) / 32767.0;  // pre-quantize
  auto path = (tmpdir() / "rt.wav").string();
  write_wav(path, w);
  auto r = read_wav(path);
  REQUIRE(r.size() == w.size());
  for (std::size_t i = 0; i < w.size(); ++i) REQUIRE(r.samples[i] == w.samples[i]);
}

namespace {

// hand-built wav with arbitrary format fields
void write_raw_wav(const std::string& path, std::uint16_t channels, std::uint32_t rate,
                   std::uint16_t bits, std::size_t n_frames) {
  std::vector<unsigned char> b;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
  };
  auto u16 = [&](std::uint16_t v) {
    b.push_back(v & 0xff);
    b.push_back((v >> 8) & 0xff);
  };
  const std::uint32_t bytes = static_cast<std::uint32_t>(n_frames * channels * bits / 8);
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  u32(36 + bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  u32(16);
  u16(1);
  u16(channels);
  u32(rate);
  u32(rate * channels * bits / 8);
  u16(static_cast<std::uint16_t>(channels * bits / 8));
  u16(bits);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  u32(bytes);
  b.resize(b.size() + bytes, 0);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("wav reader rejects stereo and non-16kHz files") {
  auto stereo = (tmpdir() / "stereo.wav").string();
  write_raw_wav(stereo, 2, 16000, 16, 100);
  REQUIRE_THROWS_WITH(read_wav(stereo), Catch::Matchers::ContainsSubstring("channel count"));

  auto low = (tmpdir() / "8k.wav").string();
  write_raw_wav(low, 1, 8000, 16, 100);
  REQUIRE_THROWS_WITH(read_wav(low), Catch::Matchers::ContainsSubstring("resample"));
}

TEST_CASE("stft frame count equals the acoustic embedder frame count") {
  for (std::size_t n : {320u, 641u, 16000u, 4321u}) {
    auto w = random_waveform(n, n);
    auto s = stft(w);
    auto a = embed_acoustic(w);
    REQUIRE(a.size() / kAcousticBands == s.num_frames);
  }
}
