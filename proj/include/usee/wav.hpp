#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace usee {

inline constexpr int kSampleRate = 16000;

struct Waveform {
  std::vector<double> samples;  // nominal range [-1, 1]
  int sample_rate = kSampleRate;

  std::size_t size() const { return samples.size(); }
};

struct WavError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::uint32_t rd_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t rd_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void wr_u32(std::vector<unsigned char>& b, std::uint32_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
  b.push_back((v >> 16) & 0xff);
  b.push_back((v >> 24) & 0xff);
}
inline void wr_u16(std::vector<unsigned char>& b, std::uint16_t v) {
  b.push_back(v & 0xff);
  b.push_back((v >> 8) & 0xff);
}

}  // namespace detail

inline std::int16_t quantize_sample(double x) {
  double v = std::clamp(x, -1.0, 1.0) * 32767.0;
  return static_cast<std::int16_t>(std::lrint(v));
}

// RIFF / 16-bit signed PCM / mono / 16 kHz only
inline Waveform read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw WavError("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(f)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 44 || std::memcmp(buf.data(), "RIFF", 4) != 0 ||
      std::memcmp(buf.data() + 8, "WAVE", 4) != 0)
    throw WavError(path + ": not a RIFF/WAVE file");

  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0, fmt_tag = 0;
  std::uint32_t rate = 0;
  Waveform w;
  bool have_data = false;
  while (pos + 8 <= buf.size()) {
    const unsigned char* hdr = buf.data() + pos;
    std::uint32_t chunk_size = detail::rd_u32(hdr + 4);
    std::size_t body = pos + 8;
    if (std::memcmp(hdr, "fmt ", 4) == 0 && body + 16 <= buf.size()) {
      fmt_tag = detail::rd_u16(buf.data() + body);
      channels = detail::rd_u16(buf.data() + body + 2);
      rate = detail::rd_u32(buf.data() + body + 4);
      bits = detail::rd_u16(buf.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw WavError(path + ": data chunk before fmt chunk");
      if (fmt_tag != 1 || bits != 16)
        throw WavError(path + ": unsupported format (need 16-bit PCM)");
      if (channels != 1) throw WavError(path + ": unsupported channel count (need mono)");
      if (rate != kSampleRate)
        throw WavError(path + ": sample rate " + std::to_string(rate) +
                       " Hz unsupported; resample to 16000 Hz first");
      std::size_t n = std::min<std::size_t>(chunk_size, buf.size() - body) / 2;
      w.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        std::int16_t s = static_cast<std::int16_t>(
            detail::rd_u16(buf.data() + body + 2 * i));
        w.samples[i] = static_cast<double>(s) / 32767.0;
      }
      have_data = true;
    }
    pos = body + chunk_size + (chunk_size & 1);
  }
  if (!have_data) throw WavError(path + ": missing data chunk");
  w.sample_rate = kSampleRate;
  return w;
}

inline void write_wav(const std::string& path, const Waveform& w) {
  if (w.sample_rate != kSampleRate) throw WavError("write_wav: sample rate must be 16000");
  std::vector<unsigned char> b;
  b.reserve(44 + 2 * w.samples.size());
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(2 * w.samples.size());
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  detail::wr_u32(b, 36 + data_bytes);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  detail::wr_u32(b, 16);
  detail::wr_u16(b, 1);  // PCM
  detail::wr_u16(b, 1);  // mono
  detail::wr_u32(b, kSampleRate);
  detail::wr_u32(b, kSampleRate * 2);
  detail::wr_u16(b, 2);
  detail::wr_u16(b, 16);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  detail::wr_u32(b, data_bytes);
  for (double s : w.samples) {
    std::int16_t q = quantize_sample(s);
    detail::wr_u16(b, static_cast<std::uint16_t>(q));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw WavError("cannot write " + path);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
  if (!f) throw WavError("write failed: " + path);
}

}  // namespace usee
