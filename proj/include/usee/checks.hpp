#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "usee/net.hpp"
#include "usee/score.hpp"
#include "usee/sde.hpp"
#include "usee/solver.hpp"

namespace usee {

// Numeric self-checks shared by the kernel-check subcommand and the
// acceptance suite.

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Monte-Carlo Euler integration of the forward SDE (scalar, antithetic pairs)
// against the closed-form kernel moments.
inline CheckResult check_kernel_moments(const SdeSchedule& sched, std::size_t n_paths,
                                        double dt, const std::vector<double>& ts,
                                        double tol_mean_rel, double tol_var_rel,
                                        std::uint64_t seed,
                                        // test hook: extra factor applied to g(t)^2
                                        double variance_corruption = 1.0) {
  CheckResult res{"kernel-moments", true, ""};
  const double x0 = 2.0, y = 0.0;
  Rng rng(seed);
  const double t_end = *std::max_element(ts.begin(), ts.end());
  const std::size_t total_steps = static_cast<std::size_t>(std::lround(t_end / dt));
  const std::size_t n_pairs = n_paths / 2;

  std::vector<double> xs(2 * n_pairs, x0);
  std::vector<std::size_t> checkpoints;
  for (double t : ts)
    checkpoints.push_back(static_cast<std::size_t>(std::lround(t / dt)));

  std::size_t next_cp = 0;
  std::vector<std::size_t> order(checkpoints.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return checkpoints[a] < checkpoints[b]; });

  char buf[160];
  for (std::size_t k = 0; k <= total_steps; ++k) {
    while (next_cp < order.size() && checkpoints[order[next_cp]] == k) {
      const double t = ts[order[next_cp]];
      double mean = 0.0;
      for (double x : xs) mean += x;
      mean /= static_cast<double>(xs.size());
      double var = 0.0;
      for (double x : xs) var += (x - mean) * (x - mean);
      var /= static_cast<double>(xs.size() - 1);
      const double w = std::exp(-sched.gamma * t);
      const double ref_mean = w * x0 + (1.0 - w) * y;
      const double ref_var = kernel_variance(t, sched);
      const double em = std::abs(mean - ref_mean) / std::abs(ref_mean);
      const double ev = std::abs(var - ref_var) / ref_var;
      std::snprintf(buf, sizeof(buf),
                    "t=%.2f mean_err=%.4f%% (tol %.1f%%) var_err=%.4f%% (tol %.1f%%); ", t,
                    100 * em, 100 * tol_mean_rel, 100 * ev, 100 * tol_var_rel);
      res.detail += buf;
      if (em > tol_mean_rel || ev > tol_var_rel) res.passed = false;
      ++next_cp;
    }
    if (k == total_steps) break;
    const double t = static_cast<double>(k) * dt;
    const double g = diffusion_coeff(t, sched) * std::sqrt(variance_corruption);
    const double gs = g * std::sqrt(dt);
    for (std::size_t i = 0; i < n_pairs; ++i) {
      const double z = rng.gaussian();
      double& xa = xs[2 * i];
      double& xb = xs[2 * i + 1];
      xa += sched.gamma * (y - xa) * dt + gs * z;
      xb += sched.gamma * (y - xb) * dt - gs * z;
    }
  }
  return res;
}

// Reverse sampling with the analytic Gaussian-prior score must recover the
// prior moments of the scalar task x0 ~ N(2, 0.3^2), y = 0.
inline CheckResult check_reverse_recovery(const SdeSchedule& sched, std::size_t n_runs,
                                          std::size_t n_steps, double mean_tol_abs,
                                          double std_tol_rel, std::uint64_t seed) {
  CheckResult res{"reverse-recovery", true, ""};
  GaussianPriorTask task;
  task.prior_mean = {2.0};
  task.prior_std = 0.3;
  task.y = {0.0};
  task.sched = sched;
  auto score = [&task](const std::vector<double>& x, double t) { return task.score(x, t); };

  SolverConfig cfg;
  cfg.num_steps = n_steps;
  cfg.corrector_steps = 1;
  Rng rng(seed);
  std::vector<double> out(n_runs);
  for (std::size_t r = 0; r < n_runs; ++r)
    out[r] = sample(task.y, score, sched, cfg, rng)[0];
  double mean = 0.0;
  for (double v : out) mean += v;
  mean /= static_cast<double>(n_runs);
  double var = 0.0;
  for (double v : out) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n_runs - 1);
  const double sd = std::sqrt(var);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "mean=%.4f (want 2 +- %.3f) std=%.4f (want 0.3 +- %.0f%%)",
                mean, mean_tol_abs, sd, 100 * std_tol_rel);
  res.detail = buf;
  if (std::abs(mean - 2.0) > mean_tol_abs) res.passed = false;
  if (std::abs(sd - 0.3) > std_tol_rel * 0.3) res.passed = false;
  return res;
}

// central finite differences of dsm_loss over every parameter
inline CheckResult check_gradients(const SdeSchedule& sched, double eps, double tol_rel,
                                   std::uint64_t seed) {
  CheckResult res{"gradient-check", true, ""};
  ScoreNetConfig cfg;
  cfg.state_channels = 6;
  cfg.cond_channels = 6;
  cfg.acoustic_dim = 3;
  cfg.context_radius = 1;
  cfg.hidden = 8;
  cfg.attn_dim = 5;
  cfg.text_dim = 4;
  cfg.time_freqs = 2;
  cfg.vocab = {"<unk>", "alpha", "beta"};
  Rng rng(seed);
  ScoreNetParams p = init_params(cfg, rng);
  // move weights away from the small-decoder init so gradients are non-trivial
  for (auto& v : p.flat) v += 0.1 * rng.uniform(-1.0, 1.0);

  TrainBatch batch(2);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    auto& it = batch[b];
    it.num_frames = 2;
    const std::size_t n = it.num_frames * cfg.state_channels;
    it.x0.resize(n);
    it.y.resize(n);
    it.z.resize(n);
    it.acoustic.resize(it.num_frames * cfg.acoustic_dim);
    for (auto& v : it.x0) v = rng.uniform(-1.0, 1.0);
    for (auto& v : it.y) v = rng.uniform(-1.0, 1.0);
    for (auto& v : it.z) v = rng.gaussian();
    for (auto& v : it.acoustic) v = rng.uniform(-1.0, 1.0);
    it.tokens = b == 0 ? std::vector<int>{1, 2, 0} : std::vector<int>{};
    it.t = 0.2 + 0.5 * static_cast<double>(b);
  }

  auto lg = dsm_loss(p, batch, sched);
  double max_rel = 0.0;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < p.flat.size(); ++i) {
    const double orig = p.flat[i];
    p.flat[i] = orig + eps;
    const double lp = dsm_loss(p, batch, sched).loss;
    p.flat[i] = orig - eps;
    const double lm = dsm_loss(p, batch, sched).loss;
    p.flat[i] = orig;
    const double fd = (lp - lm) / (2.0 * eps);
    const double an = lg.grad[i];
    const double rel = std::abs(fd - an) / std::max(std::abs(fd) + std::abs(an), 1e-3);
    if (rel > max_rel) {
      max_rel = rel;
      worst = i;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%zu params, max rel err %.3e at index %zu (tol %.0e)",
                p.flat.size(), max_rel, worst, tol_rel);
  res.detail = buf;
  res.passed = max_rel <= tol_rel;
  return res;
}

// d(sigma^2)/dt == -2 gamma sigma^2 + g(t)^2 by central differences over a grid
inline CheckResult check_variance_ode(const SdeSchedule& sched, double tol_rel) {
  CheckResult res{"variance-ode", true, ""};
  const double h = 1e-6;
  double max_rel = 0.0;
  for (double t = 0.05; t <= 0.99; t += 0.02) {
    const double lhs = (kernel_variance(t + h, sched) - kernel_variance(t - h, sched)) / (2 * h);
    const double g = diffusion_coeff(t, sched);
    const double rhs = -2.0 * sched.gamma * kernel_variance(t, sched) + g * g;
    max_rel = std::max(max_rel, std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-12));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max rel err %.3e (tol %.0e)", max_rel, tol_rel);
  res.detail = buf;
  res.passed = max_rel <= tol_rel;
  return res;
}

}  // namespace usee
