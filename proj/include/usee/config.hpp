#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "usee/net.hpp"
#include "usee/sde.hpp"
#include "usee/solver.hpp"

namespace usee {

// Run configuration: plain-text key-value with [section] headers.
struct RunConfig {
  SdeSchedule sched;
  SolverConfig solver;

  // model hyperparameters
  std::size_t hidden = 128;
  std::size_t attn_dim = 64;
  std::size_t text_dim = 64;
  std::size_t context_radius = 1;
  std::size_t time_freqs = 8;
  double spec_scale = 1.0 / 320.0;  // STFT values scaled into the SDE's working range
  std::size_t max_frames = 16;      // training crop length

  // training
  double learning_rate = 1e-3;
  std::size_t batch_size = 16;
  std::size_t train_steps = 500;
  std::size_t log_every = 10;

  // data
  std::string clean_dir;
  std::string noise_dir;
  std::size_t clean_count = 20;
  std::size_t noise_per_label = 4;

  std::uint64_t seed = 0;
  bool seed_set = false;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

inline void apply_config_key(RunConfig& c, const std::string& section, const std::string& key,
                             const std::string& value) {
  auto as_d = [&] { return std::stod(value); };
  auto as_u = [&] { return static_cast<std::size_t>(std::stoull(value)); };
  const std::string k = section.empty() ? key : section + "." + key;
  if (k == "sde.gamma") c.sched.gamma = as_d();
  else if (k == "sde.sigma_min") c.sched.sigma_min = as_d();
  else if (k == "sde.sigma_max") c.sched.sigma_max = as_d();
  else if (k == "sde.t_min") c.sched.t_min = as_d();
  else if (k == "sde.t_max") c.sched.t_max = as_d();
  else if (k == "sde.interp_mode") c.sched.interp_mode = interp_mode_from_string(value);
  else if (k == "solver.num_steps") c.solver.num_steps = as_u();
  else if (k == "solver.corrector_steps") c.solver.corrector_steps = as_u();
  else if (k == "solver.corrector_snr") c.solver.corrector_snr = as_d();
  else if (k == "model.hidden") c.hidden = as_u();
  else if (k == "model.attn_dim") c.attn_dim = as_u();
  else if (k == "model.text_dim") c.text_dim = as_u();
  else if (k == "model.context_radius") c.context_radius = as_u();
  else if (k == "model.time_freqs") c.time_freqs = as_u();
  else if (k == "model.spec_scale") c.spec_scale = as_d();
  else if (k == "model.max_frames") c.max_frames = as_u();
  else if (k == "train.learning_rate") c.learning_rate = as_d();
  else if (k == "train.batch_size") c.batch_size = as_u();
  else if (k == "train.steps") c.train_steps = as_u();
  else if (k == "train.log_every") c.log_every = as_u();
  else if (k == "data.clean_dir") c.clean_dir = value;
  else if (k == "data.noise_dir") c.noise_dir = value;
  else if (k == "data.clean_count") c.clean_count = as_u();
  else if (k == "data.noise_per_label") c.noise_per_label = as_u();
  else if (k == "run.seed") { c.seed = std::stoull(value); c.seed_set = true; }
  else throw std::invalid_argument("config: unknown key " + k);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  RunConfig c;
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string s = detail::trim(line);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[' && s.back() == ']') {
      section = detail::trim(s.substr(1, s.size() - 2));
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config " + path + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    apply_config_key(c, section, detail::trim(s.substr(0, eq)), detail::trim(s.substr(eq + 1)));
  }
  return c;
}

inline void save_config(const RunConfig& c, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  f << "[sde]\n"
    << "gamma = " << c.sched.gamma << "\n"
    << "sigma_min = " << c.sched.sigma_min << "\n"
    << "sigma_max = " << c.sched.sigma_max << "\n"
    << "t_min = " << c.sched.t_min << "\n"
    << "t_max = " << c.sched.t_max << "\n"
    << "interp_mode = " << to_string(c.sched.interp_mode) << "\n\n"
    << "[solver]\n"
    << "num_steps = " << c.solver.num_steps << "\n"
    << "corrector_steps = " << c.solver.corrector_steps << "\n"
    << "corrector_snr = " << c.solver.corrector_snr << "\n\n"
    << "[model]\n"
    << "hidden = " << c.hidden << "\n"
    << "attn_dim = " << c.attn_dim << "\n"
    << "text_dim = " << c.text_dim << "\n"
    << "context_radius = " << c.context_radius << "\n"
    << "time_freqs = " << c.time_freqs << "\n"
    << "spec_scale = " << c.spec_scale << "\n"
    << "max_frames = " << c.max_frames << "\n\n"
    << "[train]\n"
    << "learning_rate = " << c.learning_rate << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "steps = " << c.train_steps << "\n"
    << "log_every = " << c.log_every << "\n\n"
    << "[data]\n";
  if (!c.clean_dir.empty()) f << "clean_dir = " << c.clean_dir << "\n";
  if (!c.noise_dir.empty()) f << "noise_dir = " << c.noise_dir << "\n";
  f << "clean_count = " << c.clean_count << "\n"
    << "noise_per_label = " << c.noise_per_label << "\n\n"
    << "[run]\n"
    << "seed = " << c.seed << "\n";
}

}  // namespace usee
