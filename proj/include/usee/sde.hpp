#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include "usee/rng.hpp"

namespace usee {

enum class InterpMode { Exponential, Linear };

inline std::string to_string(InterpMode m) {
  return m == InterpMode::Exponential ? "exponential" : "linear";
}
inline InterpMode interp_mode_from_string(const std::string& s) {
  if (s == "exponential") return InterpMode::Exponential;
  if (s == "linear") return InterpMode::Linear;
  throw std::invalid_argument("unknown interp_mode: " + s);
}

// Forward-process parameters; process time normalized to [0, 1].
struct SdeSchedule {
  double gamma = 1.5;
  double sigma_min = 0.05;
  double sigma_max = 0.5;
  double t_min = 0.03;
  double t_max = 1.0;
  InterpMode interp_mode = InterpMode::Exponential;

  void validate() const {
    if (!(gamma > 0.0)) throw std::invalid_argument("schedule: gamma must be > 0");
    if (!(sigma_max > sigma_min && sigma_min > 0.0))
      throw std::invalid_argument("schedule: need sigma_max > sigma_min > 0");
    if (!(0.0 <= t_min && t_min < t_max && t_max <= 1.0))
      throw std::invalid_argument("schedule: need 0 <= t_min < t_max <= 1");
  }

  double log_ratio() const { return std::log(sigma_max / sigma_min); }
};

namespace detail {

template <class T>
T draw_standard_noise(Rng& rng);

template <>
inline double draw_standard_noise<double>(Rng& rng) {
  return rng.gaussian();
}
template <>
inline std::complex<double> draw_standard_noise<std::complex<double>>(Rng& rng) {
  return rng.gaussian_complex();
}

}  // namespace detail

// f(x_t, t) = gamma * (y - x_t)
template <class T>
std::vector<T> drift(const std::vector<T>& x_t, const std::vector<T>& y, double /*t*/,
                     const SdeSchedule& sched) {
  if (x_t.size() != y.size()) throw std::invalid_argument("drift: shape mismatch");
  std::vector<T> out(x_t.size());
  for (std::size_t i = 0; i < x_t.size(); ++i) out[i] = sched.gamma * (y[i] - x_t[i]);
  return out;
}

// g(t) = sigma_min * (sigma_max/sigma_min)^t * sqrt(2 log(sigma_max/sigma_min))
inline double diffusion_coeff(double t, const SdeSchedule& sched) {
  const double L = sched.log_ratio();
  return sched.sigma_min * std::pow(sched.sigma_max / sched.sigma_min, t) * std::sqrt(2.0 * L);
}

// closed-form variance of the perturbation kernel
inline double kernel_variance(double t, const SdeSchedule& sched) {
  const double L = sched.log_ratio();
  const double r2t = std::pow(sched.sigma_max / sched.sigma_min, 2.0 * t);
  const double v = sched.sigma_min * sched.sigma_min * (r2t - std::exp(-2.0 * sched.gamma * t)) *
                   L / (sched.gamma + L);
  return v > 0.0 ? v : 0.0;  // clip the ~0 negative round-off at t=0
}

inline double kernel_std(double t, const SdeSchedule& sched) {
  return std::sqrt(kernel_variance(t, sched));
}

// exponential-mode mean weight on x0; linear mode uses (1 - t)
inline double mean_weight(double t, const SdeSchedule& sched) {
  if (sched.interp_mode == InterpMode::Linear) return 1.0 - t;
  return std::exp(-sched.gamma * t);
}

template <class T>
struct KernelMoments {
  std::vector<T> mean;
  double std = 0.0;
};

template <class T>
KernelMoments<T> kernel_moments(const std::vector<T>& x0, const std::vector<T>& y, double t,
                                const SdeSchedule& sched) {
  if (x0.size() != y.size()) throw std::invalid_argument("kernel_moments: shape mismatch");
  KernelMoments<T> m;
  m.mean.resize(x0.size());
  const double w = mean_weight(t, sched);
  for (std::size_t i = 0; i < x0.size(); ++i) m.mean[i] = w * x0[i] + (1.0 - w) * y[i];
  m.std = kernel_std(t, sched);
  return m;
}

// draws x_t = mean + sigma(t) * z, z ~ N(0, I); returns z alongside
template <class T>
std::pair<std::vector<T>, std::vector<T>> sample_forward(const std::vector<T>& x0,
                                                         const std::vector<T>& y, double t,
                                                         const SdeSchedule& sched, Rng& rng) {
  auto m = kernel_moments(x0, y, t, sched);
  std::vector<T> z(x0.size()), x_t(x0.size());
  for (std::size_t i = 0; i < x0.size(); ++i) {
    z[i] = detail::draw_standard_noise<T>(rng);
    x_t[i] = m.mean[i] + m.std * z[i];
  }
  return {std::move(x_t), std::move(z)};
}

}  // namespace usee
