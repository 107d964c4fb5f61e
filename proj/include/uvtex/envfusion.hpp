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

// Environment-feature fusion: an environment model predicts a multiplicative
// and an additive map from the masked reference image, and the raw render is
// fused with them pixel by pixel. Models are fitted against environment
// ground truth with an area-weighted binary cross-entropy.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "uvtex/geometry.hpp"
#include "uvtex/hash.hpp"
#include "uvtex/image.hpp"
#include "uvtex/optimizer.hpp"
#include "uvtex/renderer.hpp"

namespace uvtex {

template <typename T = double>
struct EnvFeatureMaps {
  Image<T> mul;
  Image<T> add;

  static EnvFeatureMaps constant(int w, int h, T mul_value, T add_value) {
    return {Image<T>(w, h, 3, mul_value), Image<T>(w, h, 3, add_value)};
  }
};

/// x_ren = clamp(x_nr * mul + add) on foreground pixels; background stays 0.
template <typename T>
RenderedImage<T> fuse(const RenderedImage<T>& x_nr, const EnvFeatureMaps<T>& ef) {
  require_same_shape(x_nr.pixels, ef.mul, "fuse");
  require_same_shape(x_nr.pixels, ef.add, "fuse");
  RenderedImage<T> out{Image<T>(x_nr.pixels.width(), x_nr.pixels.height(), 3),
                       x_nr.foreground};
  for (std::size_t p = 0; p < x_nr.foreground.bits.size(); ++p) {
    if (!x_nr.foreground.bits[p]) continue;
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = p * 3 + c;
      out.pixels.data()[i] = clamp01(x_nr.pixels.data()[i] * ef.mul.data()[i] + ef.add.data()[i]);
    }
  }
  return out;
}

template <typename T>
struct FuseGradient {
  Image<T> x_nr;
  Image<T> mul;
  Image<T> add;
};

template <typename T>
FuseGradient<T> backward_fuse(const RenderedImage<T>& x_nr, const EnvFeatureMaps<T>& ef,
                              const Image<T>& upstream) {
  require_same_shape(x_nr.pixels, upstream, "backward_fuse");
  const int w = upstream.width(), h = upstream.height();
  FuseGradient<T> g{Image<T>(w, h, 3), Image<T>(w, h, 3), Image<T>(w, h, 3)};
  for (std::size_t p = 0; p < x_nr.foreground.bits.size(); ++p) {
    if (!x_nr.foreground.bits[p]) continue;
    for (int c = 0; c < 3; ++c) {
      const std::size_t i = p * 3 + c;
      const T pre = x_nr.pixels.data()[i] * ef.mul.data()[i] + ef.add.data()[i];
      if (pre < T(0) || pre > T(1)) continue;
      const T u = upstream.data()[i];
      g.x_nr.data()[i] = u * ef.mul.data()[i];
      g.mul.data()[i] = u * x_nr.pixels.data()[i];
      g.add.data()[i] = u;
    }
  }
  return g;
}

/// W(x_ref) = h * w / s, s = number of vehicle pixels.
template <typename T>
double view_weight(const Image<T>& x_ref, const Mask& vehicle) {
  require_same_dims(x_ref, vehicle, "view_weight");
  const std::size_t s = vehicle.count();
  if (s == 0) throw InputError("empty vehicle region");
  return static_cast<double>(x_ref.width()) * x_ref.height() / static_cast<double>(s);
}

inline constexpr double kBceEpsilon = 1e-7;

/// weight * mean over pixels and channels of binary cross-entropy.
template <typename T>
double efe_loss(const Image<T>& x_ren, const Image<T>& x_gt, double weight) {
  require_same_shape(x_ren, x_gt, "efe_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < x_ren.size(); ++i) {
    const double p = std::clamp(static_cast<double>(x_ren.data()[i]), kBceEpsilon, 1.0 - kBceEpsilon);
    const double t = x_gt.data()[i];
    acc -= t * std::log(p) + (1.0 - t) * std::log(1.0 - p);
  }
  return weight * acc / static_cast<double>(x_ren.size());
}

/// d efe_loss / d x_ren. Zero where the epsilon clamp is active.
template <typename T>
Image<T> efe_loss_grad(const Image<T>& x_ren, const Image<T>& x_gt, double weight) {
  require_same_shape(x_ren, x_gt, "efe_loss_grad");
  Image<T> g(x_ren.width(), x_ren.height(), x_ren.channels());
  const double n = static_cast<double>(x_ren.size());
  for (std::size_t i = 0; i < x_ren.size(); ++i) {
    const double p = x_ren.data()[i];
    if (p < kBceEpsilon || p > 1.0 - kBceEpsilon) continue;
    const double t = x_gt.data()[i];
    g.data()[i] = static_cast<T>(weight * (p - t) / (p * (1.0 - p)) / n);
  }
  return g;
}

template <typename T>
double mean_absolute_error(const Image<T>& a, const Image<T>& b) {
  require_same_shape(a, b, "mean_absolute_error");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(double(a.data()[i]) - double(b.data()[i]));
  return acc / static_cast<double>(a.size());
}

// ---------------------------------------------------------------------------
// Environment models

/// Predicts environment feature maps from the masked reference image x_ref.
class EnvModel {
 public:
  virtual ~EnvModel() = default;

  virtual std::string model_type() const = 0;
  virtual EnvFeatureMaps<double> predict(const Image<double>& x_ref) const = 0;
  /// Parameter gradient given gradients with respect to both maps.
  virtual std::vector<double> backward(const Image<double>& x_ref,
                                       const Image<double>& grad_mul,
                                       const Image<double>& grad_add) const = 0;
  virtual std::unique_ptr<EnvModel> clone() const = 0;

  std::vector<double>& parameters() { return params_; }
  const std::vector<double>& parameters() const { return params_; }

 protected:
  explicit EnvModel(std::vector<double> params) : params_(std::move(params)) {}

 private:
  std::vector<double> params_;
};

/// One multiplicative and one additive scalar shared by every pixel.
/// parameters = {mul, add}.
class GlobalScalarEnvModel final : public EnvModel {
 public:
  GlobalScalarEnvModel(double mul = 1.0, double add = 0.0) : EnvModel({mul, add}) {}

  std::string model_type() const override { return "global_scalar"; }

  EnvFeatureMaps<double> predict(const Image<double>& x_ref) const override {
    return EnvFeatureMaps<double>::constant(x_ref.width(), x_ref.height(),
                                            std::max(parameters()[0], 0.0), parameters()[1]);
  }

  std::vector<double> backward(const Image<double>&, const Image<double>& grad_mul,
                               const Image<double>& grad_add) const override {
    double gm = 0.0, ga = 0.0;
    for (double v : grad_mul.data()) gm += v;
    for (double v : grad_add.data()) ga += v;
    return {parameters()[0] > 0.0 ? gm : 0.0, ga};
  }

  std::unique_ptr<EnvModel> clone() const override {
    return std::make_unique<GlobalScalarEnvModel>(*this);
  }
};

/// Per-pixel affine maps driven by the reference image, per channel c:
///   mul = max(a_c * x_ref + b_c, 0),  add = c_c * x_ref + d_c.
/// parameters = {a_0, b_0, c_0, d_0, a_1, ...}.
class PerPixelAffineEnvModel final : public EnvModel {
 public:
  PerPixelAffineEnvModel()
      : EnvModel({0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0}) {}
  explicit PerPixelAffineEnvModel(std::vector<double> params) : EnvModel(std::move(params)) {
    if (parameters().size() != 12)
      throw InputError("per_pixel_affine model needs 12 parameters");
  }

  std::string model_type() const override { return "per_pixel_affine"; }

  EnvFeatureMaps<double> predict(const Image<double>& x_ref) const override {
    EnvFeatureMaps<double> ef{Image<double>(x_ref.width(), x_ref.height(), 3),
                              Image<double>(x_ref.width(), x_ref.height(), 3)};
    const auto& q = parameters();
    for (std::size_t p = 0; p < x_ref.pixel_count(); ++p)
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = p * 3 + c;
        const double r = x_ref.data()[i];
        ef.mul.data()[i] = std::max(q[4 * c] * r + q[4 * c + 1], 0.0);
        ef.add.data()[i] = q[4 * c + 2] * r + q[4 * c + 3];
      }
    return ef;
  }

  std::vector<double> backward(const Image<double>& x_ref, const Image<double>& grad_mul,
                               const Image<double>& grad_add) const override {
    std::vector<double> g(12, 0.0);
    const auto& q = parameters();
    for (std::size_t p = 0; p < x_ref.pixel_count(); ++p)
      for (int c = 0; c < 3; ++c) {
        const std::size_t i = p * 3 + c;
        const double r = x_ref.data()[i];
        if (q[4 * c] * r + q[4 * c + 1] > 0.0) {
          g[4 * c] += grad_mul.data()[i] * r;
          g[4 * c + 1] += grad_mul.data()[i];
        }
        g[4 * c + 2] += grad_add.data()[i] * r;
        g[4 * c + 3] += grad_add.data()[i];
      }
    return g;
  }

  std::unique_ptr<EnvModel> clone() const override {
    return std::make_unique<PerPixelAffineEnvModel>(*this);
  }
};

inline std::unique_ptr<EnvModel> make_env_model(const std::string& type) {
  if (type == "global_scalar" || type == "global-scalar")
    return std::make_unique<GlobalScalarEnvModel>();
  if (type == "per_pixel_affine" || type == "per-pixel-affine")
    return std::make_unique<PerPixelAffineEnvModel>();
  throw InputError("unknown environment model type '" + type + "'");
}

inline nlohmann::json env_model_to_json(const EnvModel& model) {
  return {{"model_type", model.model_type()}, {"parameters", model.parameters()}};
}

inline std::unique_ptr<EnvModel> env_model_from_json(const nlohmann::json& j) {
  if (!j.contains("model_type") || !j.contains("parameters"))
    throw InputError("environment model JSON needs model_type and parameters");
  auto model = make_env_model(j.at("model_type").get<std::string>());
  auto params = j.at("parameters").get<std::vector<double>>();
  if (params.size() != model->parameters().size())
    throw InputError("environment model has the wrong number of parameters");
  model->parameters() = std::move(params);
  return model;
}

inline void save_env_model(const std::filesystem::path& path, const EnvModel& model) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << env_model_to_json(model).dump(2) << "\n";
}

inline std::unique_ptr<EnvModel> load_env_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open environment model " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed environment model JSON: " + std::string(e.what()));
  }
  return env_model_from_json(j);
}

// ---------------------------------------------------------------------------
// Fitting

struct GroundTruthPair {
  Image<double> x_gt;   // colored vehicle under the environment, masked
  Image<double> x_ref;  // white vehicle under the environment, masked
  RenderedImage<double> x_nr;  // raw render of the colored vehicle
  Vec3 color;
  CameraTransform cam;
  Vec2 placement;

  const Mask& vehicle() const { return x_nr.foreground; }
};

struct FitConfig {
  double learning_rate = 0.01;
  int max_epochs = 40;
  int convergence_window = 5;
  double eta = 0.003;
  double gamma = 0.5;
  OptimizerKind optimizer = OptimizerKind::Adam;
  bool stop_at_convergence = false;

  void validate() const {
    if (!(eta > 0.0)) throw InputError("convergence threshold eta must be > 0");
    if (!(gamma >= 0.0 && gamma < 1.0)) throw InputError("smoothing gamma must lie in [0, 1)");
    if (max_epochs < 0) throw InputError("max_epochs must be >= 0");
    if (convergence_window < 1) throw InputError("convergence window must be >= 1");
  }
};

struct EpochRecord {
  int epoch = 0;              // 1-based
  double test_loss = 0.0;     // S_i: MAE of the fused render against x_gt
  double smoothed = 0.0;      // MS_i
  double train_loss = 0.0;    // mean weighted BCE after the update
};

struct FitResult {
  std::vector<EpochRecord> history;
  std::optional<int> converged_epoch;
};

/// MS_i = gamma * S_{i-1} + (1 - gamma) * S_i, with MS_1 = S_1.
inline std::vector<double> smooth_losses(std::span<const double> s, double gamma) {
  std::vector<double> ms(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    ms[i] = i == 0 ? s[0] : gamma * s[i - 1] + (1.0 - gamma) * s[i];
  return ms;
}

/// First 1-based epoch i whose smoothed loss is within eta of the mean
/// smoothed loss over the previous `window` epochs.
inline std::optional<int> converged_epoch(std::span<const double> smoothed, int window,
                                          double eta) {
  for (std::size_t i = static_cast<std::size_t>(window); i < smoothed.size(); ++i) {
    double mean = 0.0;
    for (std::size_t k = i - window; k < i; ++k) mean += smoothed[k];
    mean /= window;
    if (std::abs(mean - smoothed[i]) <= eta) return static_cast<int>(i) + 1;
  }
  return std::nullopt;
}

namespace detail {

// Pairs that share placement and camera share one x_ref and therefore one
// model prediction.
inline std::vector<std::vector<std::size_t>> group_by_view(std::span<const GroundTruthPair> pairs) {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> leader;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    bool placed = false;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const GroundTruthPair& l = pairs[leader[g]];
      if (l.cam == pairs[i].cam && l.placement.x == pairs[i].placement.x &&
          l.placement.y == pairs[i].placement.y) {
        groups[g].push_back(i);
        placed = true;
        break;
      }
    }
    if (!placed) {
      groups.push_back({i});
      leader.push_back(i);
    }
  }
  return groups;
}

}  // namespace detail

struct EnvObjective {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Sum of weighted BCE over all pairs and its parameter gradient. With
/// `shared_inference` each view group is predicted once and the map
/// gradients of its color variants are summed before the model backward.
inline EnvObjective env_objective(const EnvModel& model, std::span<const GroundTruthPair> pairs,
                                  bool shared_inference = true) {
  EnvObjective out{0.0, std::vector<double>(model.parameters().size(), 0.0)};
  auto accumulate = [&](const std::vector<std::size_t>& members) {
    const GroundTruthPair& lead = pairs[members.front()];
    const EnvFeatureMaps<double> ef = model.predict(lead.x_ref);
    const int w = lead.x_ref.width(), h = lead.x_ref.height();
    Image<double> g_mul(w, h, 3), g_add(w, h, 3);
    for (std::size_t idx : members) {
      const GroundTruthPair& pr = pairs[idx];
      const double weight = view_weight(pr.x_ref, pr.vehicle());
      const RenderedImage<double> x_ren = fuse(pr.x_nr, ef);
      out.loss += efe_loss(x_ren.pixels, pr.x_gt, weight);
      const auto g = backward_fuse(pr.x_nr, ef, efe_loss_grad(x_ren.pixels, pr.x_gt, weight));
      for (std::size_t i = 0; i < g_mul.size(); ++i) {
        g_mul.data()[i] += g.mul.data()[i];
        g_add.data()[i] += g.add.data()[i];
      }
    }
    const auto pg = model.backward(lead.x_ref, g_mul, g_add);
    for (std::size_t k = 0; k < pg.size(); ++k) out.grad[k] += pg[k];
  };
  if (shared_inference) {
    for (const auto& group : detail::group_by_view(pairs)) accumulate(group);
  } else {
    for (std::size_t i = 0; i < pairs.size(); ++i) accumulate({i});
  }
  return out;
}

inline double env_test_loss(const EnvModel& model, std::span<const GroundTruthPair> pairs) {
  double acc = 0.0;
  for (const GroundTruthPair& pr : pairs)
    acc += mean_absolute_error(fuse(pr.x_nr, model.predict(pr.x_ref)).pixels, pr.x_gt);
  return acc / static_cast<double>(pairs.size());
}

/// Full-batch fit: one optimizer step per epoch on the mean weighted BCE.
/// `test_pairs` defaults to the training pairs.
inline FitResult fit_env_model(EnvModel& model, std::span<const GroundTruthPair> pairs,
                               const FitConfig& cfg,
                               std::span<const GroundTruthPair> test_pairs = {}) {
  cfg.validate();
  if (pairs.empty()) throw InputError("fit_env_model needs at least one pair");
  if (test_pairs.empty()) test_pairs = pairs;
  Optimizer opt(cfg.optimizer, cfg.learning_rate, model.parameters().size());
  FitResult result;
  std::vector<double> s;
  const double n = static_cast<double>(pairs.size());
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EnvObjective obj = env_objective(model, pairs);
    for (double& g : obj.grad) g /= n;
    for (double g : obj.grad)
      if (!std::isfinite(g))
        throw NumericalError("environment fit diverged at epoch " + std::to_string(epoch) +
                             ": non-finite gradient");
    opt.step(std::span<double>(model.parameters()), std::span<const double>(obj.grad));
    const double train = env_objective(model, pairs).loss / n;
    const double test = env_test_loss(model, test_pairs);
    if (!std::isfinite(train) || !std::isfinite(test))
      throw NumericalError("environment fit diverged at epoch " + std::to_string(epoch) +
                           ": non-finite loss");
    s.push_back(test);
    const double ms = epoch == 1 ? test : cfg.gamma * s[s.size() - 2] + (1.0 - cfg.gamma) * test;
    result.history.push_back({epoch, test, ms, train});
    if (!result.converged_epoch) {
      std::vector<double> smoothed;
      for (const auto& r : result.history) smoothed.push_back(r.smoothed);
      result.converged_epoch = converged_epoch(smoothed, cfg.convergence_window, cfg.eta);
      if (result.converged_epoch && cfg.stop_at_convergence) break;
    }
  }
  return result;
}

inline void write_loss_history_csv(const std::filesystem::path& path, const FitResult& r) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "epoch,S,MS\n";
  out.precision(17);
  for (const auto& rec : r.history) out << rec.epoch << ',' << rec.test_loss << ',' << rec.smoothed << '\n';
}

// ---------------------------------------------------------------------------
// Offline render cache

/// Raw renders keyed by (camera, color) and stored as content-addressed files,
/// so each (camera, color) combination is rendered once however many
/// placements or epochs reuse it.
class RenderCache {
 public:
  explicit RenderCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  static std::string key(const CameraTransform& cam, const Vec3& color) {
    std::ostringstream ss;
    ss.precision(17);
    ss << cam.azimuth << ' ' << cam.elevation << ' ' << cam.distance << ' ' << cam.image_width
       << ' ' << cam.image_height << ' ' << cam.field_of_view << ' ' << color.x << ' '
       << color.y << ' ' << color.z;
    return sha1_hex(ss.str());
  }

  template <typename RenderFn>
  RenderedImage<double> get_or_render(const CameraTransform& cam, const Vec3& color,
                                      RenderFn&& render) {
    const std::filesystem::path file = dir_ / (key(cam, color) + ".bin");
    if (std::filesystem::exists(file)) {
      ++hits_;
      return read(file);
    }
    ++misses_;
    RenderedImage<double> img = render(cam, color);
    write(file, img);
    return img;
  }

  int hits() const { return hits_; }
  int misses() const { return misses_; }

 private:
  static void write(const std::filesystem::path& file, const RenderedImage<double>& img) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw InputError("cannot write render cache entry " + file.string());
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.pixels.width()));
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(img.pixels.height()));
    for (double v : img.pixels.data()) detail::put_le<double>(out, v);
    out.write(reinterpret_cast<const char*>(img.foreground.bits.data()),
              static_cast<std::streamsize>(img.foreground.bits.size()));
  }

  static RenderedImage<double> read(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot read render cache entry " + file.string());
    const int w = static_cast<int>(detail::get_le<std::uint32_t>(in));
    const int h = static_cast<int>(detail::get_le<std::uint32_t>(in));
    RenderedImage<double> img{Image<double>(w, h, 3), Mask(w, h)};
    for (double& v : img.pixels.data()) v = detail::get_le<double>(in);
    if (!in.read(reinterpret_cast<char*>(img.foreground.bits.data()),
                 static_cast<std::streamsize>(img.foreground.bits.size())))
      throw InputError("truncated render cache entry " + file.string());
    return img;
  }

  std::filesystem::path dir_;
  int hits_ = 0;
  int misses_ = 0;
};

}  // namespace uvtex
