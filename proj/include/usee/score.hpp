#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "usee/sde.hpp"

namespace usee {

// Exact conditional score for a known x0: -(x_t - mu(x0, y, t)) / sigma(t)^2.
template <class T>
struct AnalyticKernelScore {
  std::vector<T> x0;
  std::vector<T> y;
  SdeSchedule sched;

  std::vector<T> operator()(const std::vector<T>& x_t, double t) const {
    const double var = kernel_variance(t, sched);
    if (var <= 0.0) throw std::domain_error("analytic score: sigma(t) = 0");
    auto m = kernel_moments(x0, y, t, sched);
    std::vector<T> s(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) s[i] = -(x_t[i] - m.mean[i]) / var;
    return s;
  }
};

// Marginal score when x0 ~ N(m0, s0^2 I): the marginal at time t is Gaussian
// with mean w(t) m0 + (1 - w(t)) y and variance w(t)^2 s0^2 + sigma(t)^2.
struct GaussianPriorTask {
  std::vector<double> prior_mean;  // m0 per element
  double prior_std = 1.0;
  std::vector<double> y;
  SdeSchedule sched;

  double marginal_mean(std::size_t i, double t) const {
    const double w = mean_weight(t, sched);
    return w * prior_mean[i] + (1.0 - w) * y[i];
  }
  double marginal_var(double t) const {
    const double w = mean_weight(t, sched);
    return w * w * prior_std * prior_std + kernel_variance(t, sched);
  }

  std::vector<double> score(const std::vector<double>& x_t, double t) const {
    if (x_t.size() != prior_mean.size() || x_t.size() != y.size())
      throw std::invalid_argument("analytic score: shape mismatch");
    const double var = marginal_var(t);
    if (var <= 0.0) throw std::domain_error("analytic score: zero marginal variance");
    std::vector<double> s(x_t.size());
    for (std::size_t i = 0; i < x_t.size(); ++i) s[i] = -(x_t[i] - marginal_mean(i, t)) / var;
    return s;
  }

  // log of the (unnormalized-constant-included) marginal density; finite-difference
  // gradients of this must match score()
  double log_density(const std::vector<double>& x_t, double t) const {
    const double var = marginal_var(t);
    double acc = 0.0;
    for (std::size_t i = 0; i < x_t.size(); ++i) {
      double d = x_t[i] - marginal_mean(i, t);
      acc += d * d;
    }
    const double pi = 3.14159265358979323846;
    return -0.5 * acc / var -
           0.5 * static_cast<double>(x_t.size()) * std::log(2.0 * pi * var);
  }
};

}  // namespace usee
