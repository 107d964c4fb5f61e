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

// Z-buffered rasterization of a facet-textured mesh, plus the scene
// segmentation / background composition around it.
//
// The rasterizer records, for every covered pixel, the texels it read and
// their weights (the RenderTape). With geometry and camera fixed the render is
// a linear function of the texture, and the tape is exactly that linear map,
// so the texture gradient is a plain scatter through the tape.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "uvtex/geometry.hpp"
#include "uvtex/image.hpp"
#include "uvtex/sampler.hpp"

namespace uvtex {

template <typename T = double>
struct RenderedImage {
  Image<T> pixels;
  Mask foreground;  // 1 where a facet won the depth test
};

struct RenderTape {
  int width = 0;
  int height = 0;
  int facet_count = 0;
  int texture_size = 0;
  std::vector<std::int32_t> facet;               // per pixel, kNoFacet if empty
  std::vector<TrilinearFootprint> footprint;     // per pixel

  std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

template <typename T>
struct RasterResult {
  RenderedImage<T> image;
  RenderTape tape;
};

/// Pixel colors from a texture through a recorded tape. This is the linear
/// part of rasterize(); background pixels are zero.
template <typename T>
RenderedImage<T> apply_tape(const RenderTape& tape, const FacetTextureTensor<T>& tex) {
  if (tex.facet_count != tape.facet_count || tex.texture_size != tape.texture_size)
    throw ShapeError("texture does not match the render tape");
  RenderedImage<T> out{Image<T>(tape.width, tape.height, 3), Mask(tape.width, tape.height)};
  for (std::size_t p = 0; p < tape.facet.size(); ++p) {
    if (tape.facet[p] == kNoFacet) continue;
    out.foreground.bits[p] = 1;
    const TrilinearFootprint& fp = tape.footprint[p];
    for (int c = 0; c < 3; ++c)
      out.pixels.data()[p * 3 + c] = static_cast<T>(interpolate(fp.weight, fp.count, [&](int k) {
        return static_cast<double>(tex.values[fp.texel[k] * 3 + c]);
      }));
  }
  return out;
}

/// Records which facet covers each pixel and where in its texture cube the
/// pixel reads. Facets with a vertex at or behind the near plane are skipped.
inline RenderTape trace_visibility(const Mesh& mesh, int texture_size,
                                   const CameraTransform& cam) {
  const Mat4 vp = camera_matrix(cam);
  const int w = cam.image_width, h = cam.image_height;
  RenderTape tape;
  tape.width = w;
  tape.height = h;
  tape.facet_count = mesh.facet_count();
  tape.texture_size = texture_size;
  tape.facet.assign(static_cast<std::size_t>(w) * h, kNoFacet);
  tape.footprint.assign(tape.facet.size(), TrilinearFootprint{});
  std::vector<double> depth(tape.facet.size(), std::numeric_limits<double>::infinity());

  for (int m = 0; m < mesh.facet_count(); ++m) {
    const Facet& f = mesh.facets[m];
    std::array<Vec2, 3> s{};
    std::array<double, 3> z{}, inv_w{};
    bool clipped = false;
    for (int k = 0; k < 3; ++k) {
      const Vec3& v = mesh.vertices[f.vertex[k]];
      const auto clip = vp.apply({v.x, v.y, v.z, 1.0});
      if (clip[3] <= kNearPlane) {
        clipped = true;
        break;
      }
      inv_w[k] = 1.0 / clip[3];
      s[k] = ndc_to_image(clip[0] * inv_w[k], clip[1] * inv_w[k], w, h);
      z[k] = clip[2] * inv_w[k];
    }
    if (clipped) continue;
    const double area = (s[1].x - s[0].x) * (s[2].y - s[0].y) -
                        (s[2].x - s[0].x) * (s[1].y - s[0].y);
    if (std::abs(area) < 1e-12) continue;

    const double min_x = std::min({s[0].x, s[1].x, s[2].x});
    const double max_x = std::max({s[0].x, s[1].x, s[2].x});
    const double min_y = std::min({s[0].y, s[1].y, s[2].y});
    const double max_y = std::max({s[0].y, s[1].y, s[2].y});
    const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
    const int x1 = std::min(w - 1, static_cast<int>(std::ceil(max_x - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
    const int y1 = std::min(h - 1, static_cast<int>(std::ceil(max_y - 0.5)));
    for (int py = y0; py <= y1; ++py) {
      for (int px = x0; px <= x1; ++px) {
        const double cx = px + 0.5, cy = py + 0.5;
        // Edge functions normalized by the signed area: no back-face culling.
        const double l0 = ((s[1].x - cx) * (s[2].y - cy) - (s[2].x - cx) * (s[1].y - cy)) / area;
        const double l1 = ((s[2].x - cx) * (s[0].y - cy) - (s[0].x - cx) * (s[2].y - cy)) / area;
        const double l2 = ((s[0].x - cx) * (s[1].y - cy) - (s[1].x - cx) * (s[0].y - cy)) / area;
        if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
        const double d = l0 * z[0] + l1 * z[1] + l2 * z[2];
        if (d < -1.0 || d > 1.0) continue;
        const std::size_t p = tape.pixel(px, py);
        if (!(d < depth[p])) continue;  // equal depth keeps the lower facet id
        depth[p] = d;
        // Perspective-correct barycentrics select the texture-cube position.
        const double q0 = l0 * inv_w[0], q1 = l1 * inv_w[1], q2 = l2 * inv_w[2];
        const double qs = q0 + q1 + q2;
        const double scale = (texture_size - 1) / qs;
        tape.facet[p] = m;
        tape.footprint[p] =
            trilinear_footprint(m, {q0 * scale, q1 * scale, q2 * scale}, texture_size);
      }
    }
  }
  return tape;
}

template <typename T>
RasterResult<T> rasterize(const Mesh& mesh, const FacetTextureTensor<T>& tex,
                          const CameraTransform& cam) {
  if (tex.facet_count != mesh.facet_count())
    throw ShapeError("texture facet count does not match mesh");
  RenderTape tape = trace_visibility(mesh, tex.texture_size, cam);
  RenderedImage<T> image = apply_tape(tape, tex);
  return {std::move(image), std::move(tape)};
}

/// Adjoint of apply_tape: texture gradient from an image gradient.
template <typename T>
FacetTextureTensor<T> backward_rasterize(const RenderTape& tape, const Image<T>& upstream) {
  if (upstream.width() != tape.width || upstream.height() != tape.height ||
      upstream.channels() != 3)
    throw ShapeError("image gradient does not match the render tape");
  std::vector<double> acc(static_cast<std::size_t>(tape.facet_count) * tape.texture_size *
                              tape.texture_size * tape.texture_size * 3,
                          0.0);
  for (std::size_t p = 0; p < tape.facet.size(); ++p) {
    if (tape.facet[p] == kNoFacet) continue;
    const TrilinearFootprint& fp = tape.footprint[p];
    for (int k = 0; k < fp.count; ++k)
      for (int c = 0; c < 3; ++c)
        acc[fp.texel[k] * 3 + c] += fp.weight[k] * static_cast<double>(upstream.data()[p * 3 + c]);
  }
  FacetTextureTensor<T> grad(tape.facet_count, tape.texture_size);
  for (std::size_t i = 0; i < acc.size(); ++i) grad.values[i] = static_cast<T>(acc[i]);
  return grad;
}

// ---------------------------------------------------------------------------
// Scene segmentation and composition

template <typename T>
struct SegmentedScene {
  Image<T> foreground;  // x_ref
  Image<T> background;  // B
};

/// Splits an input image with a vehicle mask (vehicle = 0, background = 1).
template <typename T>
SegmentedScene<T> segment_scene(const Image<T>& i_in, const Mask& mask) {
  require_same_dims(i_in, mask, "segment_scene");
  for (auto b : mask.bits)
    if (b > 1) throw InputError("segment_scene: mask is not binary");
  SegmentedScene<T> out{Image<T>(i_in.width(), i_in.height(), i_in.channels()),
                        Image<T>(i_in.width(), i_in.height(), i_in.channels())};
  const int ch = i_in.channels();
  for (std::size_t p = 0; p < mask.bits.size(); ++p) {
    const bool is_bg = mask.bits[p] != 0;
    for (int c = 0; c < ch; ++c) {
      const T v = i_in.data()[p * ch + c];
      (is_bg ? out.background : out.foreground).data()[p * ch + c] = v;
    }
  }
  return out;
}

/// I_out = X_ren + B, with B suppressed under the rendered foreground.
template <typename T>
Image<T> composite(const RenderedImage<T>& x_ren, const Image<T>& background) {
  require_same_shape(x_ren.pixels, background, "composite");
  require_same_dims(x_ren.pixels, x_ren.foreground, "composite");
  Image<T> out(background.width(), background.height(), background.channels());
  const int ch = background.channels();
  for (std::size_t p = 0; p < x_ren.foreground.bits.size(); ++p) {
    const bool fg = x_ren.foreground.bits[p] != 0;
    for (int c = 0; c < ch; ++c) {
      const std::size_t i = p * ch + c;
      out.data()[i] = clamp01(x_ren.pixels.data()[i] + (fg ? T(0) : background.data()[i]));
    }
  }
  return out;
}

/// Gradient of composite() with respect to the rendered foreground pixels.
template <typename T>
Image<T> backward_composite(const RenderedImage<T>& x_ren, const Image<T>& background,
                            const Image<T>& upstream) {
  require_same_shape(x_ren.pixels, upstream, "backward_composite");
  Image<T> grad(upstream.width(), upstream.height(), upstream.channels());
  const int ch = upstream.channels();
  for (std::size_t p = 0; p < x_ren.foreground.bits.size(); ++p) {
    const bool fg = x_ren.foreground.bits[p] != 0;
    for (int c = 0; c < ch; ++c) {
      const std::size_t i = p * ch + c;
      const T sum = x_ren.pixels.data()[i] + (fg ? T(0) : background.data()[i]);
      if (sum >= T(0) && sum <= T(1)) grad.data()[i] = upstream.data()[i];
    }
  }
  return grad;
}

}  // namespace uvtex
