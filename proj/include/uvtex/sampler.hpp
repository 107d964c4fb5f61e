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

// UV map -> facet texture tensor sampling.
//
// Two samplers are provided:
//
//   * Tensor traversal: every texel (m, x, y, z) of the facet cube is projected
//     into the UV map and gathers a bilinear read of the four surrounding
//     pixels. UV pixels that no texel lands near never receive a gradient.
//
//   * UV traversal: every owned UV pixel is projected into its facet cube at
//     barycentric * (ts - 1) and scatters its color to the eight surrounding
//     texels with trilinear weights. Texel values are then normalized by the
//     accumulated weight. Texels that received no mass fall back to the
//     tensor-traversal read so that every texel stays defined.
//
// Both samplers are linear in the UV map. The sampling weights depend only on
// geometry, so each sampler is split into a plan (geometry, built once) and
// cheap forward/backward applications.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "uvtex/geometry.hpp"
#include "uvtex/image.hpp"

namespace uvtex {

/// Facet-aligned texture cube [nf, ts, ts, ts, 3]. Also used for gradients
/// with respect to the texture.
template <typename T = double>
struct FacetTextureTensor {
  int facet_count = 0;
  int texture_size = 0;
  std::vector<T> values;

  FacetTextureTensor() = default;
  FacetTextureTensor(int nf, int ts, T fill = T(0))
      : facet_count(nf),
        texture_size(ts),
        values(static_cast<std::size_t>(nf) * ts * ts * ts * 3, fill) {
    if (ts < 2) throw InputError("texture size must be >= 2");
    if (nf < 1) throw InputError("facet count must be >= 1");
  }

  std::size_t texel_count() const { return values.size() / 3; }

  std::size_t texel(int m, int x, int y, int z) const {
    const std::size_t ts = static_cast<std::size_t>(texture_size);
    return ((static_cast<std::size_t>(m) * ts + x) * ts + y) * ts + z;
  }

  T& at(int m, int x, int y, int z, int c) { return values[texel(m, x, y, z) * 3 + c]; }
  const T& at(int m, int x, int y, int z, int c) const {
    return values[texel(m, x, y, z) * 3 + c];
  }

  bool same_shape(const FacetTextureTensor& o) const {
    return facet_count == o.facet_count && texture_size == o.texture_size;
  }

  friend bool operator==(const FacetTextureTensor&,
                         const FacetTextureTensor&) = default;
};

/// Accumulated UV-traversal weights [nf, ts, ts, ts].
struct WeightTensor {
  int facet_count = 0;
  int texture_size = 0;
  std::vector<double> weights;

  WeightTensor() = default;
  WeightTensor(int nf, int ts)
      : facet_count(nf),
        texture_size(ts),
        weights(static_cast<std::size_t>(nf) * ts * ts * ts, 0.0) {}

  friend bool operator==(const WeightTensor&, const WeightTensor&) = default;
};

enum class SamplerKind { TensorTraversal, UvTraversal };

inline SamplerKind parse_sampler_kind(const std::string& s) {
  if (s == "tensor-traversal" || s == "tensor_traversal") return SamplerKind::TensorTraversal;
  if (s == "uv-traversal" || s == "uv_traversal") return SamplerKind::UvTraversal;
  throw InputError("unknown sampling method '" + s +
                   "' (expected tensor-traversal or uv-traversal)");
}

inline std::string to_string(SamplerKind k) {
  return k == SamplerKind::TensorTraversal ? "tensor-traversal" : "uv-traversal";
}

// ---------------------------------------------------------------------------
// Projections

/// Texel (x, y, z) of facet m -> continuous UV-map pixel coordinates. The
/// texel indices act as unnormalized barycentric weights on the facet's UV
/// vertices; the all-zero texel maps to vertex 0.
inline Vec2 project_facet_point(const Mesh& mesh, int m, int x, int y, int z,
                                int ts, int wt, int ht) {
  if (m < 0 || m >= mesh.facet_count()) throw InputError("facet id out of range");
  if (x < 0 || y < 0 || z < 0 || x >= ts || y >= ts || z >= ts)
    throw InputError("texel index out of range");
  const Facet& f = mesh.facets[m];
  const double sum = static_cast<double>(x + y + z);
  Vec2 uv = f.uv[0];
  if (sum > 0.0) {
    const double w0 = x / sum, w1 = y / sum, w2 = z / sum;
    uv = {w0 * f.uv[0].x + w1 * f.uv[1].x + w2 * f.uv[2].x,
          w0 * f.uv[0].y + w1 * f.uv[1].y + w2 * f.uv[2].y};
  }
  return uv_to_pixel(uv, wt, ht);
}

/// Sum of samples with weights that add up to one, taken relative to the
/// first sample so that equal samples reproduce their value exactly. The
/// first weight is stored as one minus the others to match.
template <std::size_t N, typename Get>
double interpolate(const std::array<double, N>& weight, int count, Get&& sample) {
  const double v0 = sample(0);
  double acc = 0.0;
  for (int k = 1; k < count; ++k) acc += weight[k] * (sample(k) - v0);
  return v0 + acc;
}

template <std::size_t N>
void complete_first_weight(std::array<double, N>& weight, int count) {
  double rest = 0.0;
  for (int k = 1; k < count; ++k) rest += weight[k];
  weight[0] = 1.0 - rest;
}

/// Four UV pixels around a continuous pixel position with their bilinear
/// weights. Corners outside the map read the nearest border pixel.
struct BilinearFootprint {
  std::array<std::uint32_t, 4> pixel{};
  std::array<double, 4> weight{};
};

inline BilinearFootprint bilinear_footprint(const Vec2& p, int wt, int ht) {
  BilinearFootprint fp;
  const double fa = std::floor(p.x), fb = std::floor(p.y);
  int k = 0;
  for (int dy = 0; dy <= 1; ++dy) {
    for (int dx = 0; dx <= 1; ++dx, ++k) {
      const double ca = fa + dx, cb = fb + dy;
      fp.weight[k] = (1.0 - std::abs(ca - p.x)) * (1.0 - std::abs(cb - p.y));
      const int px = std::clamp(static_cast<int>(ca), 0, wt - 1);
      const int py = std::clamp(static_cast<int>(cb), 0, ht - 1);
      fp.pixel[k] = static_cast<std::uint32_t>(py * wt + px);
    }
  }
  complete_first_weight(fp.weight, 4);
  return fp;
}

/// Up to eight texels around continuous facet-cube coordinates, with
/// trilinear weights. Zero-weight corners are dropped.
struct TrilinearFootprint {
  std::array<std::uint32_t, 8> texel{};
  std::array<double, 8> weight{};
  int count = 0;
};

inline TrilinearFootprint trilinear_footprint(int m, const std::array<double, 3>& abc,
                                              int ts) {
  TrilinearFootprint fp;
  std::array<int, 3> lo{};
  std::array<std::array<double, 2>, 3> w{};
  for (int axis = 0; axis < 3; ++axis) {
    const double v = std::clamp(abc[axis], 0.0, static_cast<double>(ts - 1));
    const double f = std::floor(v);
    lo[axis] = static_cast<int>(f);
    w[axis][0] = 1.0 - (v - f);
    w[axis][1] = v - f;
  }
  const std::size_t s = static_cast<std::size_t>(ts);
  for (int i = 0; i < 8; ++i) {
    const int dx = i & 1, dy = (i >> 1) & 1, dz = (i >> 2) & 1;
    const double wi = w[0][dx] * w[1][dy] * w[2][dz];
    if (wi == 0.0) continue;
    const int x = std::min(lo[0] + dx, ts - 1);
    const int y = std::min(lo[1] + dy, ts - 1);
    const int z = std::min(lo[2] + dz, ts - 1);
    fp.texel[fp.count] =
        static_cast<std::uint32_t>(((static_cast<std::size_t>(m) * s + x) * s + y) * s + z);
    fp.weight[fp.count] = wi;
    ++fp.count;
  }
  complete_first_weight(fp.weight, fp.count);
  return fp;
}

// ---------------------------------------------------------------------------
// Tensor traversal

/// Precomputed bilinear footprint of every texel.
class TensorTraversalPlan {
 public:
  TensorTraversalPlan(const Mesh& mesh, int wt, int ht, int ts)
      : facet_count_(mesh.facet_count()), ts_(ts), wt_(wt), ht_(ht) {
    if (ts < 2) throw InputError("texture size must be >= 2");
    if (wt < 2 || ht < 2) throw InputError("UV dimensions must be >= 2");
    footprints_.reserve(static_cast<std::size_t>(facet_count_) * ts * ts * ts);
    for (int m = 0; m < facet_count_; ++m)
      for (int x = 0; x < ts; ++x)
        for (int y = 0; y < ts; ++y)
          for (int z = 0; z < ts; ++z)
            footprints_.push_back(bilinear_footprint(
                project_facet_point(mesh, m, x, y, z, ts, wt, ht), wt, ht));
  }

  int facet_count() const { return facet_count_; }
  int texture_size() const { return ts_; }
  int uv_width() const { return wt_; }
  int uv_height() const { return ht_; }
  const BilinearFootprint& footprint(std::size_t texel) const {
    return footprints_[texel];
  }

  template <typename T>
  FacetTextureTensor<T> forward(const UVMap<T>& uv) const {
    check_uv(uv);
    FacetTextureTensor<T> out(facet_count_, ts_);
    for (std::size_t t = 0; t < footprints_.size(); ++t) read_texel(uv, t, out);
    return out;
  }

  /// Bilinear read of a single texel into `out`.
  template <typename T>
  void read_texel(const UVMap<T>& uv, std::size_t texel,
                  FacetTextureTensor<T>& out) const {
    const BilinearFootprint& fp = footprints_[texel];
    for (int c = 0; c < 3; ++c)
      out.values[texel * 3 + c] = static_cast<T>(interpolate(fp.weight, 4, [&](int k) {
        return static_cast<double>(uv.data()[fp.pixel[k] * 3 + c]);
      }));
  }

  /// Adds the adjoint of a single texel read into a UV-sized accumulator.
  template <typename T>
  void scatter_texel(const FacetTextureTensor<T>& upstream, std::size_t texel,
                     std::vector<double>& grad) const {
    const BilinearFootprint& fp = footprints_[texel];
    for (int k = 0; k < 4; ++k)
      for (int c = 0; c < 3; ++c)
        grad[fp.pixel[k] * 3 + c] +=
            fp.weight[k] * static_cast<double>(upstream.values[texel * 3 + c]);
  }

  template <typename T>
  UVMap<T> backward(const FacetTextureTensor<T>& upstream) const {
    check_upstream(upstream);
    std::vector<double> grad(static_cast<std::size_t>(wt_) * ht_ * 3, 0.0);
    for (std::size_t t = 0; t < footprints_.size(); ++t)
      scatter_texel(upstream, t, grad);
    return to_image<T>(grad);
  }

  template <typename T>
  void check_upstream(const FacetTextureTensor<T>& upstream) const {
    if (upstream.facet_count != facet_count_ || upstream.texture_size != ts_ ||
        upstream.values.size() != footprints_.size() * 3)
      throw ShapeError("texture gradient shape does not match [nf, ts, ts, ts, 3]");
  }

  template <typename T>
  UVMap<T> to_image(const std::vector<double>& grad) const {
    UVMap<T> out(wt_, ht_, 3);
    for (std::size_t i = 0; i < grad.size(); ++i) out.data()[i] = static_cast<T>(grad[i]);
    return out;
  }

 private:
  template <typename T>
  void check_uv(const UVMap<T>& uv) const {
    require_uv_map(uv);
    if (uv.width() != wt_ || uv.height() != ht_)
      throw ShapeError("UV map dimensions do not match the sampling plan");
  }

  int facet_count_;
  int ts_;
  int wt_;
  int ht_;
  std::vector<BilinearFootprint> footprints_;
};

template <typename T>
FacetTextureTensor<T> sample_tensor_traversal(const UVMap<T>& uv, const Mesh& mesh,
                                              int ts) {
  require_uv_map(uv);
  return TensorTraversalPlan(mesh, uv.width(), uv.height(), ts).forward(uv);
}

template <typename T>
UVMap<T> backward_tensor_traversal(const FacetTextureTensor<T>& upstream,
                                   const Mesh& mesh, int wt, int ht) {
  if (upstream.facet_count != mesh.facet_count())
    throw ShapeError("texture gradient facet count does not match mesh");
  return TensorTraversalPlan(mesh, wt, ht, upstream.texture_size).backward(upstream);
}

// ---------------------------------------------------------------------------
// UV traversal

/// Scatter footprints of every owned UV pixel, the accumulated weight tensor,
/// and the back-fill list of texels that received no mass.
class UvTraversalPlan {
 public:
  UvTraversalPlan(const Mesh& mesh, const FacetUVIndex& index, int ts)
      : fallback_(mesh, index.width, index.height, ts),
        weights_(mesh.facet_count(), ts),
        anchor_(weights_.weights.size(), kNoAnchor) {
    if (static_cast<std::size_t>(index.width) * index.height != index.owner.size())
      throw InputError("UV index is inconsistent with its dimensions");
    pixel_footprints_.resize(index.owner.size());
    for (std::size_t p = 0; p < index.owner.size(); ++p) {
      const std::int32_t m = index.owner[p];
      if (m == kNoFacet) continue;
      if (m >= mesh.facet_count())
        throw InputError("UV index references a facet outside the mesh");
      std::array<double, 3> abc = index.barycentric[p];
      for (double& v : abc) v *= (ts - 1);
      const TrilinearFootprint fp = trilinear_footprint(m, abc, ts);
      for (int k = 0; k < fp.count; ++k) {
        weights_.weights[fp.texel[k]] += fp.weight[k];
        if (anchor_[fp.texel[k]] == kNoAnchor && fp.weight[k] != 0.0) anchor_[fp.texel[k]] = p;
      }
      pixel_footprints_[p] = fp;
    }
    for (std::size_t t = 0; t < weights_.weights.size(); ++t)
      if (weights_.weights[t] == 0.0) backfilled_.push_back(t);
  }

  int facet_count() const { return weights_.facet_count; }
  int texture_size() const { return weights_.texture_size; }
  int uv_width() const { return fallback_.uv_width(); }
  int uv_height() const { return fallback_.uv_height(); }
  const WeightTensor& weights() const { return weights_; }
  const std::vector<std::size_t>& backfilled_texels() const { return backfilled_; }
  const TrilinearFootprint& pixel_footprint(std::size_t p) const {
    return pixel_footprints_[p];
  }

  template <typename T>
  FacetTextureTensor<T> forward(const UVMap<T>& uv) const {
    require_uv_map(uv);
    if (uv.width() != uv_width() || uv.height() != uv_height())
      throw ShapeError("UV map dimensions do not match the UV index");
    // Accumulate offsets from each texel's first contributing pixel so a
    // constant map normalizes back to the constant exactly.
    auto value = [&](std::size_t p, int c) { return static_cast<double>(uv.data()[p * 3 + c]); };
    std::vector<double> acc(weights_.weights.size() * 3, 0.0);
    for (std::size_t p = 0; p < pixel_footprints_.size(); ++p) {
      const TrilinearFootprint& fp = pixel_footprints_[p];
      for (int k = 0; k < fp.count; ++k) {
        const std::size_t t = fp.texel[k];
        for (int c = 0; c < 3; ++c)
          acc[t * 3 + c] += fp.weight[k] * (value(p, c) - value(anchor_[t], c));
      }
    }
    FacetTextureTensor<T> out(facet_count(), texture_size());
    for (std::size_t t = 0; t < weights_.weights.size(); ++t) {
      const double w = weights_.weights[t];
      if (w == 0.0) continue;
      for (int c = 0; c < 3; ++c)
        out.values[t * 3 + c] = static_cast<T>(value(anchor_[t], c) + acc[t * 3 + c] / w);
    }
    for (std::size_t t : backfilled_) fallback_.read_texel(uv, t, out);
    return out;
  }

  template <typename T>
  UVMap<T> backward(const FacetTextureTensor<T>& upstream) const {
    fallback_.check_upstream(upstream);
    std::vector<double> grad(pixel_footprints_.size() * 3, 0.0);
    for (std::size_t p = 0; p < pixel_footprints_.size(); ++p) {
      const TrilinearFootprint& fp = pixel_footprints_[p];
      for (int k = 0; k < fp.count; ++k) {
        const double scale = fp.weight[k] / weights_.weights[fp.texel[k]];
        for (int c = 0; c < 3; ++c)
          grad[p * 3 + c] += scale * static_cast<double>(upstream.values[fp.texel[k] * 3 + c]);
      }
    }
    for (std::size_t t : backfilled_) fallback_.scatter_texel(upstream, t, grad);
    return fallback_.to_image<T>(grad);
  }

 private:
  static constexpr std::size_t kNoAnchor = static_cast<std::size_t>(-1);

  TensorTraversalPlan fallback_;
  WeightTensor weights_;
  std::vector<std::size_t> anchor_;
  std::vector<TrilinearFootprint> pixel_footprints_;
  std::vector<std::size_t> backfilled_;
};

template <typename T>
struct UvTraversalSample {
  FacetTextureTensor<T> texture;
  WeightTensor weights;
};

template <typename T>
UvTraversalSample<T> sample_uv_traversal(const UVMap<T>& uv, const Mesh& mesh,
                                         const FacetUVIndex& index, int ts) {
  UvTraversalPlan plan(mesh, index, ts);
  return {plan.forward(uv), plan.weights()};
}

template <typename T>
UVMap<T> backward_uv_traversal(const FacetTextureTensor<T>& upstream, const Mesh& mesh,
                               const FacetUVIndex& index, const WeightTensor& weights,
                               int ts) {
  if (upstream.facet_count != weights.facet_count ||
      upstream.texture_size != weights.texture_size || upstream.texture_size != ts)
    throw ShapeError("weight tensor does not match the texture gradient (stale weights?)");
  UvTraversalPlan plan(mesh, index, ts);
  if (plan.weights().weights.size() != weights.weights.size())
    throw ShapeError("weight tensor dimensions differ from the UV index");
  return plan.backward(upstream);
}

/// Either sampler behind one interface.
class TextureSampler {
 public:
  TextureSampler(const Mesh& mesh, const FacetUVIndex& index, int ts, SamplerKind kind)
      : kind_(kind) {
    if (kind == SamplerKind::UvTraversal)
      uv_.emplace_back(mesh, index, ts);
    else
      tensor_.emplace_back(mesh, index.width, index.height, ts);
  }

  SamplerKind kind() const { return kind_; }

  template <typename T>
  FacetTextureTensor<T> forward(const UVMap<T>& uv) const {
    return kind_ == SamplerKind::UvTraversal ? uv_.front().forward(uv)
                                             : tensor_.front().forward(uv);
  }

  template <typename T>
  UVMap<T> backward(const FacetTextureTensor<T>& upstream) const {
    return kind_ == SamplerKind::UvTraversal ? uv_.front().backward(upstream)
                                             : tensor_.front().backward(upstream);
  }

 private:
  SamplerKind kind_;
  std::vector<UvTraversalPlan> uv_;
  std::vector<TensorTraversalPlan> tensor_;
};

// ---------------------------------------------------------------------------
// Coverage

enum class Coverage : std::uint8_t { Optimized, Unoptimized, Unowned };

struct CoverageMap {
  int width = 0;
  int height = 0;
  std::vector<Coverage> flags;

  std::size_t count(Coverage c) const {
    return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), c));
  }
  std::size_t owned() const { return flags.size() - count(Coverage::Unowned); }
};

/// Marks which owned UV pixels receive a gradient from an all-ones texture
/// gradient under the chosen sampler.
inline CoverageMap coverage_map(const Mesh& mesh, int wt, int ht, int ts,
                                SamplerKind method) {
  const FacetUVIndex index = build_uv_index(mesh, wt, ht);
  const TextureSampler sampler(mesh, index, ts, method);
  const FacetTextureTensor<double> ones(mesh.facet_count(), ts, 1.0);
  const UVMap<double> grad = sampler.backward(ones);
  CoverageMap cov{wt, ht, std::vector<Coverage>(index.owner.size(), Coverage::Unowned)};
  for (std::size_t p = 0; p < index.owner.size(); ++p) {
    if (index.owner[p] == kNoFacet) continue;
    bool touched = false;
    for (int c = 0; c < 3; ++c) touched |= std::abs(grad.data()[p * 3 + c]) > 0.0;
    cov.flags[p] = touched ? Coverage::Optimized : Coverage::Unoptimized;
  }
  return cov;
}

/// OPTIMIZED = white, UNOPTIMIZED = red, UNOWNED = black.
inline Image<double> coverage_heatmap(const CoverageMap& cov) {
  Image<double> img(cov.width, cov.height, 3);
  for (std::size_t p = 0; p < cov.flags.size(); ++p) {
    const auto [r, g, b] = cov.flags[p] == Coverage::Optimized     ? std::array{1.0, 1.0, 1.0}
                           : cov.flags[p] == Coverage::Unoptimized ? std::array{1.0, 0.0, 0.0}
                                                                    : std::array{0.0, 0.0, 0.0};
    img.data()[p * 3] = r;
    img.data()[p * 3 + 1] = g;
    img.data()[p * 3 + 2] = b;
  }
  return img;
}

inline nlohmann::json coverage_summary(const CoverageMap& cov) {
  return {{"width", cov.width},
          {"height", cov.height},
          {"owned", cov.owned()},
          {"optimized", cov.count(Coverage::Optimized)},
          {"unoptimized", cov.count(Coverage::Unoptimized)},
          {"unowned", cov.count(Coverage::Unowned)}};
}

}  // namespace uvtex
