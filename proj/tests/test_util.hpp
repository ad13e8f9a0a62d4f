#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>

#include <doctest.h>

#include "mabsa/tensor.hpp"

namespace test_util {

inline double rel_err(double a, double b) {
  // Guarded relative error: near-zero components are compared absolutely so
  // finite-difference roundoff does not dominate.
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

inline mabsa::Tensor random_tensor(std::vector<int> shape, std::mt19937_64& rng,
                                   bool requires_grad = false, double scale = 1.0) {
  return mabsa::Tensor::uniform(std::move(shape), -scale, scale, rng, requires_grad);
}

/// Central finite differences against reverse-mode gradients for every
/// component of every parameter. `loss_fn` must be a pure function of the
/// parameter values.
inline double max_gradient_error(const std::function<mabsa::Tensor()>& loss_fn,
                                 std::span<mabsa::Parameter> params, double eps = 1e-5) {
  mabsa::zero_grads(params);
  mabsa::Tensor loss = loss_fn();
  mabsa::backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    const auto g = p.tensor.grad();
    analytic.emplace_back(g.begin(), g.end());
    if (analytic.back().empty()) analytic.back().assign(p.tensor.numel(), 0.0);
  }
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].tensor.values_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + eps;
      const double up = loss_fn().item();
      values[i] = saved - eps;
      const double down = loss_fn().item();
      values[i] = saved;
      const double fd = (up - down) / (2.0 * eps);
      worst = std::max(worst, rel_err(analytic[pi][i], fd));
    }
  }
  mabsa::zero_grads(params);
  return worst;
}

/// Unique scratch directory under the system temp root, removed on destruction.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& stem) {
    path = std::filesystem::temp_directory_path() /
           (stem + "-" + std::to_string(std::random_device{}()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

}  // namespace test_util
