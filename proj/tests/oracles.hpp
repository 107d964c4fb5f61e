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


// Scalar brute-force reference implementations used only by the tests.
// They share data types with the library but none of its kernels.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "uvtex/uvtex.hpp"

namespace oracle {

using uvtex::FacetTextureTensor;
using uvtex::Image;
using uvtex::Mesh;

inline double tent(double d) { return std::max(0.0, 1.0 - std::abs(d)); }

inline std::size_t texel_id(int m, int x, int y, int z, int ts) {
  return ((static_cast<std::size_t>(m) * ts + x) * ts + y) * ts + z;
}

/// Bilinear read as a sum of tent functions over the pixel lattice; lattice
/// points outside the map read the nearest border pixel.
inline std::array<double, 3> bilinear_read(const Image<double>& uv, double a, double b) {
  std::array<double, 3> out{};
  const int ia = static_cast<int>(std::floor(a)), ib = static_cast<int>(std::floor(b));
  for (int j = ib - 1; j <= ib + 2; ++j)
    for (int i = ia - 1; i <= ia + 2; ++i) {
      const double w = tent(a - i) * tent(b - j);
      if (w == 0.0) continue;
      const int ci = std::clamp(i, 0, uv.width() - 1), cj = std::clamp(j, 0, uv.height() - 1);
      for (int c = 0; c < 3; ++c) out[c] += w * uv.at(ci, cj, c);
    }
  return out;
}

/// UV point of texel (x, y, z) of facet m, in pixel units.
inline std::array<double, 2> texel_pixel(const Mesh& mesh, int m, int x, int y, int z,
                                         int wt, int ht) {
  const auto& f = mesh.facets[m];
  double u = f.uv[0].x, v = f.uv[0].y;
  if (x + y + z > 0) {
    const double s = x + y + z;
    u = (x * f.uv[0].x + y * f.uv[1].x + z * f.uv[2].x) / s;
    v = (x * f.uv[0].y + y * f.uv[1].y + z * f.uv[2].y) / s;
  }
  return {u * wt - 0.5, v * ht - 0.5};
}

inline FacetTextureTensor<double> tensor_traversal(const Image<double>& uv, const Mesh& mesh,
                                                   int ts) {
  FacetTextureTensor<double> out(mesh.facet_count(), ts);
  for (int m = 0; m < mesh.facet_count(); ++m)
    for (int x = 0; x < ts; ++x)
      for (int y = 0; y < ts; ++y)
        for (int z = 0; z < ts; ++z) {
          const auto p = texel_pixel(mesh, m, x, y, z, uv.width(), uv.height());
          const auto rgb = bilinear_read(uv, p[0], p[1]);
          for (int c = 0; c < 3; ++c) out.values[texel_id(m, x, y, z, ts) * 3 + c] = rgb[c];
        }
  return out;
}

/// Signed-area barycentrics, clamped and renormalized; empty when outside.
inline std::optional<std::array<double, 3>> uv_bary(const uvtex::Facet& f, double u, double v) {
  auto cross2 = [](double ax, double ay, double bx, double by) { return ax * by - ay * bx; };
  const auto &A = f.uv[0], &B = f.uv[1], &C = f.uv[2];
  const double total = cross2(B.x - A.x, B.y - A.y, C.x - A.x, C.y - A.y);
  if (std::abs(total) / 2.0 <= uvtex::kDegenerateUvArea) return std::nullopt;
  std::array<double, 3> l{cross2(B.x - u, B.y - v, C.x - u, C.y - v) / total,
                          cross2(C.x - u, C.y - v, A.x - u, A.y - v) / total,
                          cross2(A.x - u, A.y - v, B.x - u, B.y - v) / total};
  for (double b : l)
    if (b < -1e-12) return std::nullopt;
  double s = 0.0;
  for (double& b : l) s += (b = std::max(b, 0.0));
  for (double& b : l) b /= s;
  return l;
}

struct Ownership {
  std::vector<int> owner;
  std::vector<std::array<double, 3>> bary;
};

inline Ownership ownership(const Mesh& mesh, int wt, int ht) {
  Ownership o;
  o.owner.assign(static_cast<std::size_t>(wt) * ht, -1);
  o.bary.resize(o.owner.size());
  for (int y = 0; y < ht; ++y)
    for (int x = 0; x < wt; ++x)
      for (int m = 0; m < mesh.facet_count(); ++m) {
        const auto l = uv_bary(mesh.facets[m], (x + 0.5) / wt, (y + 0.5) / ht);
        if (!l) continue;
        o.owner[y * wt + x] = m;
        o.bary[y * wt + x] = *l;
        break;
      }
  return o;
}

/// Trilinear weight of texel (tx, ty, tz) for continuous cube coordinates.
inline double trilinear_weight(const std::array<double, 3>& abc, int ts, int tx, int ty,
                               int tz) {
  const double hi = ts - 1;
  return tent(std::clamp(abc[0], 0.0, hi) - tx) * tent(std::clamp(abc[1], 0.0, hi) - ty) *
         tent(std::clamp(abc[2], 0.0, hi) - tz);
}

struct UvTraversalResult {
  FacetTextureTensor<double> texture;
  std::vector<double> weights;
};

/// Per texel: weighted mean over every owned UV pixel of its facet; texels
/// no pixel reaches take the tensor-traversal read.
inline UvTraversalResult uv_traversal(const Image<double>& uv, const Mesh& mesh, int ts) {
  const int wt = uv.width(), ht = uv.height();
  const Ownership own = ownership(mesh, wt, ht);
  const auto fallback = tensor_traversal(uv, mesh, ts);
  UvTraversalResult r{FacetTextureTensor<double>(mesh.facet_count(), ts), {}};
  r.weights.assign(r.texture.texel_count(), 0.0);
  for (int m = 0; m < mesh.facet_count(); ++m)
    for (int x = 0; x < ts; ++x)
      for (int y = 0; y < ts; ++y)
        for (int z = 0; z < ts; ++z) {
          const std::size_t t = texel_id(m, x, y, z, ts);
          double W = 0.0;
          std::array<double, 3> acc{};
          for (std::size_t p = 0; p < own.owner.size(); ++p) {
            if (own.owner[p] != m) continue;
            std::array<double, 3> abc = own.bary[p];
            for (double& v : abc) v *= ts - 1;
            const double w = trilinear_weight(abc, ts, x, y, z);
            W += w;
            for (int c = 0; c < 3; ++c) acc[c] += w * uv.data()[p * 3 + c];
          }
          r.weights[t] = W;
          for (int c = 0; c < 3; ++c)
            r.texture.values[t * 3 + c] = W > 0.0 ? acc[c] / W : fallback.values[t * 3 + c];
        }
  return r;
}

/// Half-space rasterizer with its own camera model and view-depth test.
struct Raster {
  Image<double> image;
  std::vector<int> facet;
};

inline Raster rasterize(const Mesh& mesh, const FacetTextureTensor<double>& tex,
                        const uvtex::CameraTransform& cam) {
  const int w = cam.image_width, h = cam.image_height, ts = tex.texture_size;
  const double az = cam.azimuth * M_PI / 180.0, el = cam.elevation * M_PI / 180.0;
  const std::array<double, 3> eye{cam.distance * std::cos(el) * std::cos(az),
                                  cam.distance * std::cos(el) * std::sin(az),
                                  cam.distance * std::sin(el)};
  auto sub = [](auto a, auto b) { return std::array<double, 3>{a[0] - b[0], a[1] - b[1], a[2] - b[2]}; };
  auto crs = [](auto a, auto b) {
    return std::array<double, 3>{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
                                 a[0] * b[1] - a[1] * b[0]};
  };
  auto dt = [](auto a, auto b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; };
  auto unit = [&](auto a) {
    const double n = std::sqrt(dt(a, a));
    return std::array<double, 3>{a[0] / n, a[1] / n, a[2] / n};
  };
  const auto fwd = unit(sub(std::array<double, 3>{0, 0, 0}, eye));
  std::array<double, 3> up{0, 0, 1};
  if (std::sqrt(dt(crs(fwd, up), crs(fwd, up))) < 1e-9) {
    up = {-std::cos(az), -std::sin(az), 0.0};
    if (cam.elevation < 0) up = {-up[0], -up[1], 0.0};
  }
  const auto right = unit(crs(fwd, up));
  const auto cup = crs(right, fwd);
  const double f = 1.0 / std::tan(cam.field_of_view * M_PI / 360.0);
  const double aspect = static_cast<double>(w) / h;

  Raster r{Image<double>(w, h, 3), std::vector<int>(static_cast<std::size_t>(w) * h, -1)};
  std::vector<double> zbuf(r.facet.size(), 1e300);
  for (int m = 0; m < mesh.facet_count(); ++m) {
    std::array<double, 3> sx{}, sy{}, depth{};
    bool ok = true;
    for (int k = 0; k < 3; ++k) {
      const auto& v = mesh.vertices[mesh.facets[m].vertex[k]];
      const auto rel = sub(std::array<double, 3>{v.x, v.y, v.z}, eye);
      depth[k] = dt(rel, fwd);
      if (depth[k] <= uvtex::kNearPlane) ok = false;
      sx[k] = (f / aspect * dt(rel, right) / depth[k] + 1.0) * 0.5 * w;
      sy[k] = (1.0 - f * dt(rel, cup) / depth[k]) * 0.5 * h;
    }
    if (!ok) continue;
    const double det = (sx[1] - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (sy[1] - sy[0]);
    if (std::abs(det) < 1e-12) continue;
    for (int py = 0; py < h; ++py)
      for (int px = 0; px < w; ++px) {
        const double cx = px + 0.5, cy = py + 0.5;
        // Solve c = s0 + l1 (s1 - s0) + l2 (s2 - s0).
        const double l1 = ((cx - sx[0]) * (sy[2] - sy[0]) - (sx[2] - sx[0]) * (cy - sy[0])) / det;
        const double l2 = ((sx[1] - sx[0]) * (cy - sy[0]) - (cx - sx[0]) * (sy[1] - sy[0])) / det;
        const double l0 = 1.0 - l1 - l2;
        if (l0 < -1e-12 || l1 < -1e-12 || l2 < -1e-12) continue;
        const std::array<double, 3> l{l0, l1, l2};
        double inv = 0.0;
        std::array<double, 3> q{};
        for (int k = 0; k < 3; ++k) inv += (q[k] = l[k] / depth[k]);
        const double z = 1.0 / inv;
        if (z > uvtex::kFarPlane) continue;
        const std::size_t p = static_cast<std::size_t>(py) * w + px;
        if (!(z < zbuf[p] * (1.0 - 1e-12))) continue;
        zbuf[p] = z;
        r.facet[p] = m;
        std::array<double, 3> abc{};
        for (int k = 0; k < 3; ++k) abc[k] = q[k] / inv * (ts - 1);
        for (int c = 0; c < 3; ++c) {
          double acc = 0.0;
          for (int x = 0; x < ts; ++x)
            for (int y = 0; y < ts; ++y)
              for (int zz = 0; zz < ts; ++zz) {
                const double wt = trilinear_weight(abc, ts, x, y, zz);
                if (wt != 0.0) acc += wt * tex.values[texel_id(m, x, y, zz, ts) * 3 + c];
              }
          r.image.at(px, py, c) = acc;
        }
      }
  }
  return r;
}

/// Random mesh with nf facets: random 3D triangles near the origin, UV
/// triangles inside [0, 1]^2 (they may overlap each other).
inline Mesh random_mesh(int nf, std::uint64_t seed) {
  uvtex::Rng rng(seed);
  Mesh mesh;
  for (int m = 0; m < nf; ++m) {
    uvtex::Facet f;
    for (int k = 0; k < 3; ++k) {
      mesh.vertices.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)});
      f.vertex[k] = static_cast<int>(mesh.vertices.size()) - 1;
      f.uv[k] = {rng.uniform(), rng.uniform()};
    }
    mesh.facets.push_back(f);
  }
  uvtex::validate_mesh(mesh);
  return mesh;
}

inline Image<double> random_image(int w, int h, std::uint64_t seed, double lo = 0.0,
                                  double hi = 1.0) {
  uvtex::Rng rng(seed);
  Image<double> img(w, h, 3);
  for (double& v : img.data()) v = rng.uniform(lo, hi);
  return img;
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

// ---------------------------------------------------------------------------
// Finite differences

struct GradCheck {
  int checked = 0;
  double worst = 0.0;  // worst relative error
};

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

/// Central differences of `f` at `n` seeded coordinates of `x`, compared with
/// the analytic gradient `g`.
inline GradCheck check_gradient(std::vector<double> x, const std::vector<double>& g,
                                const std::function<double(const std::vector<double>&)>& f,
                                int n, std::uint64_t seed, double h = 1e-4) {
  uvtex::Rng rng(seed);
  GradCheck r;
  for (int k = 0; k < n; ++k) {
    const std::size_t i = static_cast<std::size_t>(rng.next_u64() % x.size());
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    r.worst = std::max(r.worst, relative_error(g[i], (fp - fm) / (2.0 * h)));
    ++r.checked;
  }
  return r;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// ---------------------------------------------------------------------------
// Environment fixtures

inline uvtex::Mask disc_mask(int w, int h, double r) {
  uvtex::Mask m(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      m.at(x, y) = std::hypot(x + 0.5 - w / 2.0, y + 0.5 - h / 2.0) < r;
  return m;
}

inline uvtex::RenderedImage<double> masked_render(const uvtex::Image<double>& img,
                                                 const uvtex::Mask& fg) {
  uvtex::RenderedImage<double> out{img, fg};
  for (std::size_t p = 0; p < fg.bits.size(); ++p)
    if (!fg.bits[p])
      for (int c = 0; c < 3; ++c) out.pixels.data()[p * 3 + c] = 0.0;
  return out;
}

/// Colored and white renders of one view under a known global environment.
inline std::vector<uvtex::GroundTruthPair> synthetic_pairs(double mul, double add, int views,
                                                           const std::vector<uvtex::Vec3>& colors) {
  std::vector<uvtex::GroundTruthPair> pairs;
  const uvtex::GlobalScalarEnvModel truth(mul, add);
  for (int v = 0; v < views; ++v) {
    const uvtex::Mask fg = disc_mask(24, 24, 4.0 + 2.0 * v);
    const auto shade = random_image(24, 24, 100 + v, 0.5, 1.0);
    const auto white = masked_render(shade, fg);
    for (const auto& col : colors) {
      uvtex::GroundTruthPair pr;
      uvtex::Image<double> colored = shade;
      for (std::size_t p = 0; p < fg.bits.size(); ++p) {
        colored.data()[p * 3] *= col.x;
        colored.data()[p * 3 + 1] *= col.y;
        colored.data()[p * 3 + 2] *= col.z;
      }
      pr.x_nr = masked_render(colored, fg);
      pr.x_ref = uvtex::fuse(white, truth.predict(white.pixels)).pixels;
      pr.x_gt = uvtex::fuse(pr.x_nr, truth.predict(pr.x_ref)).pixels;
      pr.color = col;
      pr.cam = {45.0 * v, 20.0, 6.0, 24, 24};
      pairs.push_back(std::move(pr));
    }
  }
  return pairs;
}

}  // namespace oracle
