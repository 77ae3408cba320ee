#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "usee/net.hpp"

namespace usee {

// Flat float64 array prefixed by a plain-text header naming slices and shapes.
inline void save_checkpoint(const ScoreNetParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write checkpoint " + path);
  const auto& c = p.cfg;
  f << "USEE-CKPT v1\n"
    << "state_channels " << c.state_channels << "\n"
    << "cond_channels " << c.cond_channels << "\n"
    << "acoustic_dim " << c.acoustic_dim << "\n"
    << "context_radius " << c.context_radius << "\n"
    << "hidden " << c.hidden << "\n"
    << "attn_dim " << c.attn_dim << "\n"
    << "text_dim " << c.text_dim << "\n"
    << "time_freqs " << c.time_freqs << "\n";
  f << "vocab " << c.vocab.size();
  for (const auto& t : c.vocab) f << ' ' << t;
  f << "\n";
  for (const auto& s : p.slices())
    f << "slice " << s.name << ' ' << s.offset << ' ' << s.rows << ' ' << s.cols << "\n";
  f << "data " << p.flat.size() << "\n";
  f.write(reinterpret_cast<const char*>(p.flat.data()),
          static_cast<std::streamsize>(p.flat.size() * sizeof(double)));
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

inline ScoreNetParams load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint " + path);
  std::string line;
  if (!std::getline(f, line) || line != "USEE-CKPT v1")
    throw std::runtime_error(path + ": not a checkpoint file");
  ScoreNetParams p;
  std::size_t count = 0;
  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "state_channels") ss >> p.cfg.state_channels;
    else if (key == "cond_channels") ss >> p.cfg.cond_channels;
    else if (key == "acoustic_dim") ss >> p.cfg.acoustic_dim;
    else if (key == "context_radius") ss >> p.cfg.context_radius;
    else if (key == "hidden") ss >> p.cfg.hidden;
    else if (key == "attn_dim") ss >> p.cfg.attn_dim;
    else if (key == "text_dim") ss >> p.cfg.text_dim;
    else if (key == "time_freqs") ss >> p.cfg.time_freqs;
    else if (key == "vocab") {
      std::size_t n;
      ss >> n;
      p.cfg.vocab.resize(n);
      for (auto& t : p.cfg.vocab) ss >> t;
    } else if (key == "slice") {
      // shapes are re-derived from the config; lines kept for inspection
    } else if (key == "data") {
      ss >> count;
      break;
    } else {
      throw std::runtime_error(path + ": unknown header line: " + line);
    }
  }
  if (count != p.param_count())
    throw std::runtime_error(path + ": checkpoint size does not match architecture");
  p.flat.resize(count);
  f.read(reinterpret_cast<char*>(p.flat.data()),
         static_cast<std::streamsize>(count * sizeof(double)));
  if (!f) throw std::runtime_error(path + ": truncated checkpoint data");
  return p;
}

}  // namespace usee
