#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "usee/sde.hpp"

namespace usee {

struct SolverConfig {
  std::size_t num_steps = 30;
  std::size_t corrector_steps = 1;
  double corrector_snr = 0.5;  // Langevin step-size ratio r
  bool final_denoise = true;   // one noise-free predictor step from t_min toward 0

  void validate() const {
    if (num_steps < 1) throw std::invalid_argument("solver: num_steps must be >= 1");
    if (!(corrector_snr > 0.0)) throw std::invalid_argument("solver: corrector_snr must be > 0");
  }
};

namespace detail {

template <class T>
double vec_norm(const std::vector<T>& v) {
  double acc = 0.0;
  for (const auto& x : v) acc += std::norm(std::complex<double>(x));
  return std::sqrt(acc);
}
inline double vec_norm(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

}  // namespace detail

// x_T ~ N(y, sigma(t_max)^2 I)
template <class T>
std::vector<T> init_state(const std::vector<T>& y, const SdeSchedule& sched, Rng& rng) {
  const double s = kernel_std(sched.t_max, sched);
  std::vector<T> x(y.size());
  for (std::size_t i = 0; i < y.size(); ++i)
    x[i] = y[i] + s * detail::draw_standard_noise<T>(rng);
  return x;
}

// One reverse Euler-Maruyama step from t to t - |dt|:
//   x <- x - [f(x,t) - g(t)^2 s] |dt| + g(t) sqrt(|dt|) z
// Score is any callable (x, t) -> state of the same shape.
template <class T, class Score>
std::vector<T> predictor_step(std::vector<T> x, const std::vector<T>& y, double t, double dt_abs,
                              Score&& score, const SdeSchedule& sched, Rng& rng,
                              bool with_noise = true) {
  if (x.size() != y.size()) throw std::invalid_argument("predictor: shape mismatch");
  const double g = diffusion_coeff(t, sched);
  auto s = score(x, t);
  if (s.size() != x.size()) throw std::invalid_argument("predictor: score shape mismatch");
  const double g2 = g * g;
  const double noise_scale = with_noise ? g * std::sqrt(dt_abs) : 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    T f = sched.gamma * (y[i] - x[i]);
    x[i] += -(f - g2 * s[i]) * dt_abs;
    if (with_noise) x[i] += noise_scale * detail::draw_standard_noise<T>(rng);
  }
  return x;
}

// Annealed Langevin corrector: eps = 2 (r ||z|| / ||s||)^2, x <- x + eps s + sqrt(2 eps) z.
// The norm-ratio step size is heavy-tailed in low dimensions (||s|| can pass
// near zero), so eps is clamped to a small fraction of sigma(t)^2; the Langevin
// update stays stable for any target whose variance is >= sigma(t)^2.
inline constexpr double kCorrectorEpsCap = 0.05;

template <class T, class Score>
std::vector<T> corrector_step(std::vector<T> x, const std::vector<T>& /*y*/, double t,
                              Score&& score, const SdeSchedule& sched, Rng& rng, double r) {
  auto s = score(x, t);
  std::vector<T> z(x.size());
  for (auto& v : z) v = detail::draw_standard_noise<T>(rng);
  const double sn = detail::vec_norm(s);
  if (sn == 0.0) return x;  // degenerate score: skip
  const double zn = detail::vec_norm(z);
  const double eps =
      std::min(2.0 * (r * zn / sn) * (r * zn / sn), kCorrectorEpsCap * kernel_variance(t, sched));
  const double nz = std::sqrt(2.0 * eps);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += eps * s[i] + nz * z[i];
  return x;
}

// full reverse run: init at t_max, N uniform predictor steps down to t_min,
// corrector applications after each predictor step
template <class T, class Score>
std::vector<T> sample(const std::vector<T>& y, Score&& score, const SdeSchedule& sched,
                      const SolverConfig& cfg, Rng& rng) {
  cfg.validate();
  sched.validate();
  auto x = init_state(y, sched, rng);
  const double dt = (sched.t_max - sched.t_min) / static_cast<double>(cfg.num_steps);
  for (std::size_t i = 0; i < cfg.num_steps; ++i) {
    const double t = sched.t_max - static_cast<double>(i) * dt;
    x = predictor_step(std::move(x), y, t, dt, score, sched, rng);
    const double t_next = t - dt;
    for (std::size_t c = 0; c < cfg.corrector_steps; ++c)
      x = corrector_step(std::move(x), y, t_next, score, sched, rng, cfg.corrector_snr);
  }
  if (cfg.final_denoise)
    x = predictor_step(std::move(x), y, sched.t_min, sched.t_min, score, sched, rng,
                       /*with_noise=*/false);
  return x;
}

}  // namespace usee
