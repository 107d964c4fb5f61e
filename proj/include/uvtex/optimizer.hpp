// Copyright 2026 The uvtex Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "uvtex/common.hpp"

namespace uvtex {

enum class OptimizerKind { GradientDescent, Adam };

inline OptimizerKind parse_optimizer_kind(const std::string& s) {
  if (s == "gd" || s == "sgd" || s == "gradient-descent") return OptimizerKind::GradientDescent;
  if (s == "adam") return OptimizerKind::Adam;
  throw InputError("unknown optimizer '" + s + "' (expected gd or adam)");
}

inline std::string to_string(OptimizerKind k) {
  return k == OptimizerKind::Adam ? "adam" : "gd";
}

/// Descent step on a flat parameter vector. Adam keeps first/second moment
/// state per parameter with the usual bias correction.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double learning_rate, std::size_t size)
      : kind_(kind), lr_(learning_rate) {
    if (kind_ == OptimizerKind::Adam) {
      m_.assign(size, 0.0);
      v_.assign(size, 0.0);
    }
  }

  template <typename T>
  void step(std::span<T> params, std::span<const double> grad) {
    if (params.size() != grad.size())
      throw ShapeError("optimizer: parameter and gradient sizes differ");
    if (kind_ == OptimizerKind::GradientDescent) {
      for (std::size_t i = 0; i < params.size(); ++i)
        params[i] = static_cast<T>(static_cast<double>(params[i]) - lr_ * grad[i]);
      return;
    }
    if (m_.size() != params.size()) throw ShapeError("optimizer: state size mismatch");
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      const double update = lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + kEpsilon);
      params[i] = static_cast<T>(static_cast<double>(params[i]) - update);
    }
  }

  OptimizerKind kind() const { return kind_; }

  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEpsilon = 1e-8;

 private:
  OptimizerKind kind_;
  double lr_;
  long t_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace uvtex
