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

#include <algorithm>
#include <array>
#include <span>
#include <vector>

#include "uvtex/common.hpp"
#include "uvtex/image.hpp"

namespace uvtex {

/// Axis-aligned box in continuous pixel coordinates, max exclusive.
struct Box {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double area() const { return std::max(0.0, x_max - x_min) * std::max(0.0, y_max - y_min); }
  bool valid() const { return x_min <= x_max && y_min <= y_max; }

  friend bool operator==(const Box&, const Box&) = default;
};

/// Gradient of a scalar with respect to the four box coordinates.
using BoxGradient = std::array<double, 4>;

inline double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// d iou(a, gt) / d a. Zero when the boxes do not overlap.
inline BoxGradient iou_grad(const Box& a, const Box& gt) {
  BoxGradient g{};
  const double iw = std::min(a.x_max, gt.x_max) - std::max(a.x_min, gt.x_min);
  const double ih = std::min(a.y_max, gt.y_max) - std::max(a.y_min, gt.y_min);
  if (iw <= 0.0 || ih <= 0.0) return g;
  const double inter = iw * ih;
  const double uni = a.area() + gt.area() - inter;
  if (uni <= 0.0) return g;
  const double aw = a.x_max - a.x_min, ah = a.y_max - a.y_min;
  // Partial derivatives of the intersection width/height w.r.t. a's sides.
  const double diw_dx0 = a.x_min > gt.x_min ? -1.0 : 0.0;
  const double diw_dx1 = a.x_max < gt.x_max ? 1.0 : 0.0;
  const double dih_dy0 = a.y_min > gt.y_min ? -1.0 : 0.0;
  const double dih_dy1 = a.y_max < gt.y_max ? 1.0 : 0.0;
  const std::array<double, 4> d_inter{diw_dx0 * ih, dih_dy0 * iw, diw_dx1 * ih, dih_dy1 * iw};
  const std::array<double, 4> d_area{-ah, -aw, ah, aw};
  for (int k = 0; k < 4; ++k) {
    const double d_uni = d_area[k] - d_inter[k];
    g[k] = (d_inter[k] * uni - inter * d_uni) / (uni * uni);
  }
  return g;
}

struct Detection {
  Box box;
  double objectness = 0.0;
  double class_confidence = 0.0;
  int anchor = -1;  // detector-specific id used to route gradients
};

/// Upstream gradient for one detection's outputs.
struct DetectionGrad {
  int anchor = -1;
  double d_objectness = 0.0;
  double d_class_confidence = 0.0;
  BoxGradient d_box{};
};

/// Pluggable detector: a pure function from image to detections with a
/// reverse-mode path from scores and boxes back to the input pixels.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(const Image<double>& img) const = 0;
  virtual Image<double> backward(const Image<double>& img,
                                 std::span<const DetectionGrad> grads) const = 0;
};

struct DetectionScore {
  double score = 0.0;  // max over detections of IoU * H_c * H_o
  int index = -1;      // arg-max detection, first on ties; -1 if none
  double iou = 0.0;
};

inline DetectionScore detection_score(std::span<const Detection> dets, const Box& gt) {
  DetectionScore best;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const double overlap = iou(dets[i].box, gt);
    const double hd = overlap * dets[i].class_confidence * dets[i].objectness;
    if (best.index < 0 || hd > best.score) {
      best = {hd, static_cast<int>(i), overlap};
    }
  }
  return best;
}

}  // namespace uvtex
