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

// Adversarial texture optimization: detection-score attack loss, UV smoothness
// loss, random output augmentation, a small differentiable stand-in detector,
// and the loop that descends the total loss through
//   UV map -> facet texture -> raster -> fusion -> composite -> ROA -> detector.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "uvtex/detection.hpp"
#include "uvtex/envfusion.hpp"
#include "uvtex/geometry.hpp"
#include "uvtex/image.hpp"
#include "uvtex/optimizer.hpp"
#include "uvtex/renderer.hpp"
#include "uvtex/sampler.hpp"
#include "uvtex/scenegen.hpp"

namespace uvtex {

// ---------------------------------------------------------------------------
// Losses

inline constexpr double kScoreEpsilon = 1e-7;

/// -log(1 - score), score clamped to [0, 1 - eps].
inline double attack_loss(double score) {
  return -std::log(1.0 - std::clamp(score, 0.0, 1.0 - kScoreEpsilon));
}

inline double attack_loss_grad(double score) {
  if (score < 0.0 || score > 1.0 - kScoreEpsilon) return 0.0;
  return 1.0 / (1.0 - score);
}

/// Mean squared difference between vertically and horizontally adjacent UV
/// pixels: sum over valid neighbor pairs (no wraparound), averaged over the
/// channels, divided by H * W.
template <typename T>
double smooth_loss(const Image<T>& uv) {
  if (uv.width() < 2 || uv.height() < 2) throw InputError("smooth_loss needs a map of at least 2x2");
  const int w = uv.width(), h = uv.height(), ch = uv.channels();
  double acc = 0.0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const double v = uv.at(x, y, c);
        if (x + 1 < w) {
          const double d = v - uv.at(x + 1, y, c);
          acc += d * d;
        }
        if (y + 1 < h) {
          const double d = v - uv.at(x, y + 1, c);
          acc += d * d;
        }
      }
  return acc / ch / (static_cast<double>(w) * h);
}

template <typename T>
Image<T> smooth_loss_grad(const Image<T>& uv) {
  const int w = uv.width(), h = uv.height(), ch = uv.channels();
  const double scale = 2.0 / ch / (static_cast<double>(w) * h);
  Image<T> g(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < ch; ++c) {
        const double v = uv.at(x, y, c);
        if (x + 1 < w) {
          const double d = scale * (v - uv.at(x + 1, y, c));
          g.at(x, y, c) += static_cast<T>(d);
          g.at(x + 1, y, c) -= static_cast<T>(d);
        }
        if (y + 1 < h) {
          const double d = scale * (v - uv.at(x, y + 1, c));
          g.at(x, y, c) += static_cast<T>(d);
          g.at(x, y + 1, c) -= static_cast<T>(d);
        }
      }
  return g;
}

// ---------------------------------------------------------------------------
// Random output augmentation

struct RoaParams {
  double scale_min = 0.9, scale_max = 1.1;
  double shift = 5.0;  // pixels, symmetric range
  double brightness = 0.1;  // symmetric range
  double contrast_min = 0.9, contrast_max = 1.1;
  std::uint64_t seed = 0;

  void validate() const {
    for (double v : {scale_min, scale_max, shift, brightness, contrast_min, contrast_max})
      if (!std::isfinite(v)) throw InputError("ROA ranges must be finite");
    if (!(scale_min > 0.0) || scale_max < scale_min) throw InputError("ROA scale range must be positive");
    if (contrast_max < contrast_min || shift < 0.0 || brightness < 0.0)
      throw InputError("ROA ranges are inverted");
  }

  static RoaParams identity() { return {1.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0}; }
};

/// One draw of augmentation parameters.
struct RoaSample {
  double scale = 1.0;
  double shift_x = 0.0;
  double shift_y = 0.0;
  double brightness = 0.0;
  double contrast = 1.0;
};

inline RoaSample sample_roa(const RoaParams& p, std::uint64_t step) {
  p.validate();
  Rng rng = Rng::derive(p.seed, step);
  RoaSample s;
  s.scale = rng.uniform(p.scale_min, p.scale_max);
  s.shift_x = rng.uniform(-p.shift, p.shift);
  s.shift_y = rng.uniform(-p.shift, p.shift);
  s.brightness = rng.uniform(-p.brightness, p.brightness);
  s.contrast = rng.uniform(p.contrast_min, p.contrast_max);
  return s;
}

namespace detail {

// Source position (pixel-center coordinates) read by output pixel (x, y)
// under scaling about the image center followed by translation.
inline Vec2 roa_source(const RoaSample& s, int x, int y, int w, int h) {
  const double cx = 0.5 * w, cy = 0.5 * h;
  return {(x + 0.5 - cx - s.shift_x) / s.scale + cx - 0.5,
          (y + 0.5 - cy - s.shift_y) / s.scale + cy - 0.5};
}

template <typename Fn>
void for_each_bilinear_tap(const Vec2& src, int w, int h, Fn&& fn) {
  const double fx = std::floor(src.x), fy = std::floor(src.y);
  for (int dy = 0; dy <= 1; ++dy)
    for (int dx = 0; dx <= 1; ++dx) {
      const double wx = 1.0 - std::abs(fx + dx - src.x);
      const double wy = 1.0 - std::abs(fy + dy - src.y);
      const double wgt = wx * wy;
      const int px = static_cast<int>(fx) + dx, py = static_cast<int>(fy) + dy;
      if (wgt == 0.0 || px < 0 || py < 0 || px >= w || py >= h) continue;  // zero outside
      fn(px, py, wgt);
    }
}

}  // namespace detail

/// contrast about 0.5, then brightness, clamped to [0,1]; then scale and
/// translate with bilinear resampling (zero outside the source image).
template <typename T>
Image<T> roa_apply(const Image<T>& img, const RoaSample& s) {
  const int w = img.width(), h = img.height(), ch = img.channels();
  Image<T> photo(w, h, ch);
  for (std::size_t i = 0; i < img.size(); ++i)
    photo.data()[i] = clamp01(static_cast<T>(s.contrast * (img.data()[i] - 0.5) + 0.5 + s.brightness));
  if (s.scale == 1.0 && s.shift_x == 0.0 && s.shift_y == 0.0) return photo;
  Image<T> out(w, h, ch);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const Vec2 src = detail::roa_source(s, x, y, w, h);
      detail::for_each_bilinear_tap(src, w, h, [&](int px, int py, double wgt) {
        for (int c = 0; c < ch; ++c) out.at(x, y, c) += static_cast<T>(wgt * photo.at(px, py, c));
      });
    }
  return out;
}

template <typename T>
Image<T> roa_apply(const Image<T>& img, const RoaParams& params, std::uint64_t step) {
  return roa_apply(img, sample_roa(params, step));
}

/// Gradient of roa_apply with respect to its input, parameters held fixed.
template <typename T>
Image<T> backward_roa(const Image<T>& img, const RoaSample& s, const Image<T>& upstream) {
  require_same_shape(img, upstream, "backward_roa");
  const int w = img.width(), h = img.height(), ch = img.channels();
  Image<T> g_photo(w, h, ch);
  if (s.scale == 1.0 && s.shift_x == 0.0 && s.shift_y == 0.0) {
    g_photo = upstream;
  } else {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Vec2 src = detail::roa_source(s, x, y, w, h);
        detail::for_each_bilinear_tap(src, w, h, [&](int px, int py, double wgt) {
          for (int c = 0; c < ch; ++c) g_photo.at(px, py, c) += static_cast<T>(wgt * upstream.at(x, y, c));
        });
      }
  }
  Image<T> g(w, h, ch);
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double pre = s.contrast * (img.data()[i] - 0.5) + 0.5 + s.brightness;
    if (pre >= 0.0 && pre <= 1.0) g.data()[i] = static_cast<T>(s.contrast * g_photo.data()[i]);
  }
  return g;
}

// ---------------------------------------------------------------------------
// Toy detector

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct ToyDetectorConfig {
  int cell_size = 16;
  int top_k = 16;
  double weight_scale = 4.0;
  double objectness_bias = 0.0;
  double class_bias = 0.0;
  std::uint64_t seed = 0;
};

/// Anchor grid detector: each cell's mean color drives a sigmoid objectness
/// and a sigmoid class confidence through fixed seeded weights. The box is the
/// cell itself.
class ToyDetector final : public Detector {
 public:
  explicit ToyDetector(const ToyDetectorConfig& cfg = {}) : cfg_(cfg) {
    if (cfg.cell_size < 1 || cfg.top_k < 1) throw InputError("toy detector: bad cell size or top_k");
    Rng rng(cfg.seed);
    for (double& v : w_obj_) v = cfg.weight_scale * rng.normal();
    for (double& v : w_cls_) v = cfg.weight_scale * rng.normal();
  }

  ToyDetector(const ToyDetectorConfig& cfg, std::array<double, 3> w_obj, std::array<double, 3> w_cls)
      : cfg_(cfg), w_obj_(w_obj), w_cls_(w_cls) {}

  const std::array<double, 3>& objectness_weights() const { return w_obj_; }
  const std::array<double, 3>& class_weights() const { return w_cls_; }
  const ToyDetectorConfig& config() const { return cfg_; }

  std::vector<Detection> detect(const Image<double>& img) const override {
    check(img);
    const int cols = img.width() / cfg_.cell_size, rows = img.height() / cfg_.cell_size;
    std::vector<Detection> all;
    all.reserve(static_cast<std::size_t>(cols) * rows);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) {
        const auto mean = cell_mean(img, c, r);
        Detection d;
        d.box = {double(c * cfg_.cell_size), double(r * cfg_.cell_size),
                 double((c + 1) * cfg_.cell_size), double((r + 1) * cfg_.cell_size)};
        d.objectness = sigmoid(affine(w_obj_, cfg_.objectness_bias, mean));
        d.class_confidence = sigmoid(affine(w_cls_, cfg_.class_bias, mean));
        d.anchor = r * cols + c;
        all.push_back(d);
      }
    std::stable_sort(all.begin(), all.end(), [](const Detection& a, const Detection& b) {
      return a.objectness * a.class_confidence > b.objectness * b.class_confidence;
    });
    if (all.size() > static_cast<std::size_t>(cfg_.top_k)) all.resize(cfg_.top_k);
    return all;
  }

  Image<double> backward(const Image<double>& img,
                         std::span<const DetectionGrad> grads) const override {
    check(img);
    const int cols = img.width() / cfg_.cell_size;
    const double inv_area = 1.0 / (double(cfg_.cell_size) * cfg_.cell_size);
    Image<double> g(img.width(), img.height(), 3);
    for (const DetectionGrad& dg : grads) {
      if (dg.anchor < 0) continue;
      const int c = dg.anchor % cols, r = dg.anchor / cols;
      const auto mean = cell_mean(img, c, r);
      const double so = sigmoid(affine(w_obj_, cfg_.objectness_bias, mean));
      const double sc = sigmoid(affine(w_cls_, cfg_.class_bias, mean));
      std::array<double, 3> d_mean{};
      for (int k = 0; k < 3; ++k)
        d_mean[k] = dg.d_objectness * so * (1.0 - so) * w_obj_[k] +
                    dg.d_class_confidence * sc * (1.0 - sc) * w_cls_[k];
      for (int y = r * cfg_.cell_size; y < (r + 1) * cfg_.cell_size; ++y)
        for (int x = c * cfg_.cell_size; x < (c + 1) * cfg_.cell_size; ++x)
          for (int k = 0; k < 3; ++k) g.at(x, y, k) += d_mean[k] * inv_area;
    }
    return g;
  }

 private:
  void check(const Image<double>& img) const {
    if (img.channels() != 3 || img.width() % cfg_.cell_size != 0 ||
        img.height() % cfg_.cell_size != 0)
      throw InputError("toy detector: image dimensions must be divisible by the cell size (" +
                       std::to_string(cfg_.cell_size) + ")");
  }

  std::array<double, 3> cell_mean(const Image<double>& img, int c, int r) const {
    std::array<double, 3> acc{};
    for (int y = r * cfg_.cell_size; y < (r + 1) * cfg_.cell_size; ++y)
      for (int x = c * cfg_.cell_size; x < (c + 1) * cfg_.cell_size; ++x)
        for (int k = 0; k < 3; ++k) acc[k] += img.at(x, y, k);
    for (double& v : acc) v /= double(cfg_.cell_size) * cfg_.cell_size;
    return acc;
  }

  static double affine(const std::array<double, 3>& w, double b, const std::array<double, 3>& x) {
    return w[0] * x[0] + w[1] * x[1] + w[2] * x[2] + b;
  }

  ToyDetectorConfig cfg_;
  std::array<double, 3> w_obj_{};
  std::array<double, 3> w_cls_{};
};

// ---------------------------------------------------------------------------
// Texture optimization

struct AttackConfig {
  double alpha = 1.0;
  double beta = 0.01;
  double learning_rate = 0.01;
  int epochs = 4;
  SamplerKind sampler = SamplerKind::UvTraversal;
  OptimizerKind optimizer = OptimizerKind::GradientDescent;
  int texture_size = 4;
  int uv_width = 64;
  int uv_height = 64;
  std::uint64_t seed = 0;
  bool use_roa = true;
  RoaParams roa;

  void validate() const {
    if (!(alpha >= 0.0) || !(beta >= 0.0)) throw InputError("alpha and beta must be >= 0");
    if (!(learning_rate >= 0.0)) throw InputError("learning rate must be >= 0");
    if (epochs < 0) throw InputError("epochs must be >= 0");
    if (texture_size < 2) throw InputError("texture size must be >= 2");
    if (uv_width < 2 || uv_height < 2) throw InputError("UV dimensions must be >= 2");
    roa.validate();
  }
};

inline double total_loss(double atk, double sm, const AttackConfig& cfg) {
  return cfg.alpha * atk + cfg.beta * sm;
}

struct StepRecord {
  int step = 0;
  double attack = 0.0;
  double smooth = 0.0;
  double total = 0.0;
  double max_detection_score = 0.0;
};

struct StepEvaluation {
  StepRecord record;
  UVMap<double> grad;  // d total / d UV (empty unless requested)
};

/// The differentiable pipeline for a fixed mesh and scene set. Geometry,
/// visibility and environment maps do not depend on the texture and are
/// computed once per scene.
class AttackPipeline {
 public:
  AttackPipeline(std::span<const Scene> scenes, const Mesh& mesh, const Detector& detector,
                 const EnvModel& env, const AttackConfig& cfg)
      : mesh_(mesh),
        detector_(detector),
        cfg_(cfg),
        index_(build_uv_index(mesh, cfg.uv_width, cfg.uv_height)),
        sampler_(mesh, index_, cfg.texture_size, cfg.sampler) {
    cfg.validate();
    for (const Scene& s : scenes) {
      if (!s.gt) continue;
      PreparedScene p;
      p.gt = *s.gt;
      p.tape = trace_visibility(mesh, cfg.texture_size, s.cam);
      const auto seg = segment_scene(s.i_in, s.mask);
      p.background = seg.background;
      p.env = env.predict(seg.foreground);
      if (p.tape.width != s.i_in.width() || p.tape.height != s.i_in.height())
        throw InputError("scene image size does not match its camera");
      scenes_.push_back(std::move(p));
    }
    if (scenes_.empty()) throw InputError("no scene with a visible vehicle to attack");
  }

  std::size_t scene_count() const { return scenes_.size(); }
  const FacetUVIndex& uv_index() const { return index_; }

  RoaSample roa_for_step(int step) const {
    return cfg_.use_roa ? sample_roa(cfg_.roa, static_cast<std::uint64_t>(step)) : RoaSample{};
  }

  /// Forward (and optionally backward) for one scene under a fixed ROA draw.
  StepEvaluation evaluate(const UVMap<double>& uv, std::size_t scene, const RoaSample& roa,
                          bool with_grad) const {
    const PreparedScene& ps = scenes_.at(scene);
    const FacetTextureTensor<double> tex = sampler_.forward(uv);
    const RenderedImage<double> x_nr = apply_tape(ps.tape, tex);
    const RenderedImage<double> x_ren = fuse(x_nr, ps.env);
    const Image<double> i_out = composite(x_ren, ps.background);
    const Image<double> i_roa = roa_apply(i_out, roa);
    const std::vector<Detection> dets = detector_.detect(i_roa);
    const DetectionScore ds = detection_score(dets, ps.gt);

    StepEvaluation ev;
    ev.record.attack = attack_loss(ds.score);
    ev.record.smooth = smooth_loss(uv);
    ev.record.total = total_loss(ev.record.attack, ev.record.smooth, cfg_);
    ev.record.max_detection_score = ds.score;
    if (!std::isfinite(ev.record.total))
      throw NumericalError("non-finite loss in stage 'loss'");
    if (!with_grad) return ev;

    std::vector<DetectionGrad> dgrads;
    const double d_score = cfg_.alpha * attack_loss_grad(ds.score);
    if (ds.index >= 0 && d_score != 0.0) {
      const Detection& d = dets[ds.index];
      DetectionGrad g;
      g.anchor = d.anchor;
      g.d_objectness = d_score * ds.iou * d.class_confidence;
      g.d_class_confidence = d_score * ds.iou * d.objectness;
      const BoxGradient bg = iou_grad(d.box, ps.gt);
      for (int k = 0; k < 4; ++k) g.d_box[k] = d_score * d.objectness * d.class_confidence * bg[k];
      dgrads.push_back(g);
    }
    const Image<double> g_roa = checked(detector_.backward(i_roa, dgrads), "detector");
    const Image<double> g_out = checked(backward_roa(i_out, roa, g_roa), "augmentation");
    const Image<double> g_ren = checked(backward_composite(x_ren, ps.background, g_out), "composite");
    const Image<double> g_nr = checked(backward_fuse(x_nr, ps.env, g_ren).x_nr, "fusion");
    const FacetTextureTensor<double> g_tex = backward_rasterize(ps.tape, g_nr);
    ev.grad = checked(sampler_.backward(g_tex), "sampler");
    const Image<double> g_sm = smooth_loss_grad(uv);
    for (std::size_t i = 0; i < ev.grad.size(); ++i) ev.grad.data()[i] += cfg_.beta * g_sm.data()[i];
    checked(ev.grad, "smooth loss");
    return ev;
  }

 private:
  struct PreparedScene {
    Box gt;
    RenderTape tape;
    Image<double> background;
    EnvFeatureMaps<double> env;
  };

  static const Image<double>& checked(const Image<double>& g, const char* stage) {
    for (double v : g.data())
      if (!std::isfinite(v))
        throw NumericalError(std::string("non-finite gradient in stage '") + stage + "'");
    return g;
  }

  const Mesh& mesh_;
  const Detector& detector_;
  AttackConfig cfg_;
  FacetUVIndex index_;
  TextureSampler sampler_;
  std::vector<PreparedScene> scenes_;
};

struct AttackResult {
  UVMap<double> uv;
  std::vector<StepRecord> trace;
};

/// Projected descent on alpha * L_atk + beta * L_sm over `epochs` passes of
/// the scene set (fixed order). Starts from `init` or a seeded random map.
inline AttackResult optimize_texture(std::span<const Scene> scenes, const Mesh& mesh,
                                     const Detector& detector, const EnvModel& env,
                                     const AttackConfig& cfg,
                                     std::optional<UVMap<double>> init = std::nullopt) {
  AttackPipeline pipeline(scenes, mesh, detector, env, cfg);
  AttackResult result;
  result.uv = init ? std::move(*init) : random_uv_map<double>(cfg.uv_width, cfg.uv_height, cfg.seed);
  if (result.uv.width() != cfg.uv_width || result.uv.height() != cfg.uv_height)
    throw InputError("initial UV map does not match the configured UV size");
  Optimizer opt(cfg.optimizer, cfg.learning_rate, result.uv.size());
  int step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t s = 0; s < pipeline.scene_count(); ++s, ++step) {
      StepEvaluation ev = pipeline.evaluate(result.uv, s, pipeline.roa_for_step(step), true);
      opt.step(std::span<double>(result.uv.data()), std::span<const double>(ev.grad.data()));
      clamp_uv_map(result.uv);
      ev.record.step = step;
      result.trace.push_back(ev.record);
    }
  }
  return result;
}

inline void write_attack_trace_csv(const std::filesystem::path& path,
                                   std::span<const StepRecord> trace) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "step,L_atk,L_sm,L_total,max_H_d\n";
  out.precision(17);
  for (const auto& r : trace)
    out << r.step << ',' << r.attack << ',' << r.smooth << ',' << r.total << ','
        << r.max_detection_score << '\n';
}

}  // namespace uvtex
