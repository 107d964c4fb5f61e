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

// Mesh with a UV atlas, the UV texture image, the look-at camera, and the
// per-UV-pixel facet ownership index.
//
// Coordinate conventions used throughout the library:
//   * UV pixel (x, y) has its center at continuous UV ((x+0.5)/wt, (y+0.5)/ht).
//   * "Pixel coordinates" of a UV point are (u*wt - 0.5, v*ht - 0.5), so pixel
//     centers sit on integers.
//   * World space is Z-up; azimuth 0 looks from +X, elevation 90 from +Z.
#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "uvtex/common.hpp"
#include "uvtex/image.hpp"

namespace uvtex {

struct Facet {
  std::array<int, 3> vertex{};
  std::array<Vec2, 3> uv{};
  bool degenerate_uv = false;
};

/// Triangle mesh whose facets each carry three UV coordinates in [0,1]^2.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Facet> facets;

  int facet_count() const { return static_cast<int>(facets.size()); }
};

/// Signed area of a UV triangle (in UV units).
inline double uv_area(const Facet& f) {
  const Vec2 &a = f.uv[0], &b = f.uv[1], &c = f.uv[2];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

inline constexpr double kDegenerateUvArea = 1e-14;

/// Checks the mesh invariants and recomputes the degenerate flags.
inline void validate_mesh(Mesh& mesh) {
  if (mesh.facets.empty()) throw InputError("mesh has no facets");
  const int nv = static_cast<int>(mesh.vertices.size());
  for (std::size_t i = 0; i < mesh.facets.size(); ++i) {
    Facet& f = mesh.facets[i];
    for (int k = 0; k < 3; ++k) {
      if (f.vertex[k] < 0 || f.vertex[k] >= nv)
        throw InputError("facet " + std::to_string(i) +
                         ": vertex index out of range");
      if (f.uv[k].x < 0.0 || f.uv[k].x > 1.0 || f.uv[k].y < 0.0 ||
          f.uv[k].y > 1.0)
        throw InputError("facet " + std::to_string(i) +
                         ": UV coordinate outside [0,1]");
    }
    f.degenerate_uv = std::abs(uv_area(f)) <= kDegenerateUvArea;
  }
}

namespace detail {

// Resolves a 1-based (or negative, relative) OBJ index.
inline int resolve_obj_index(const std::string& tok, int count, int line_no) {
  int idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoi(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
  } catch (const std::exception&) {
    throw InputError("line " + std::to_string(line_no) + ": bad index '" + tok +
                     "'");
  }
  const int resolved = idx > 0 ? idx - 1 : count + idx;
  if (idx == 0 || resolved < 0 || resolved >= count)
    throw InputError("line " + std::to_string(line_no) +
                     ": out-of-range index " + tok);
  return resolved;
}

}  // namespace detail

/// Parses the OBJ subset (v, vt, f with v/vt references). Normals, groups and
/// material statements are ignored.
inline Mesh parse_obj(std::istream& in) {
  Mesh mesh;
  std::vector<Vec2> uvs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream ss(line);
    std::string tag;
    if (!(ss >> tag)) continue;
    const auto fail = [&](const std::string& msg) {
      return InputError("line " + std::to_string(line_no) + ": " + msg);
    };
    if (tag == "v") {
      Vec3 p;
      if (!(ss >> p.x >> p.y >> p.z)) throw fail("malformed vertex");
      mesh.vertices.push_back(p);
    } else if (tag == "vt") {
      Vec2 t;
      if (!(ss >> t.x >> t.y)) throw fail("malformed texture coordinate");
      uvs.push_back(t);
    } else if (tag == "f") {
      std::vector<std::string> refs;
      for (std::string r; ss >> r;) refs.push_back(r);
      if (refs.size() != 3) throw fail("non-triangular face");
      Facet f;
      for (int k = 0; k < 3; ++k) {
        const std::string& r = refs[k];
        const auto slash = r.find('/');
        if (slash == std::string::npos)
          throw fail("face vertex without texture coordinate");
        const auto slash2 = r.find('/', slash + 1);
        const std::string vt = r.substr(
            slash + 1, slash2 == std::string::npos ? std::string::npos
                                                   : slash2 - slash - 1);
        if (vt.empty()) throw fail("face vertex without texture coordinate");
        f.vertex[k] = detail::resolve_obj_index(
            r.substr(0, slash), static_cast<int>(mesh.vertices.size()), line_no);
        const int t = detail::resolve_obj_index(vt, static_cast<int>(uvs.size()),
                                                line_no);
        f.uv[k] = uvs[t];
        if (f.uv[k].x < 0.0 || f.uv[k].x > 1.0 || f.uv[k].y < 0.0 ||
            f.uv[k].y > 1.0)
          throw fail("texture coordinate outside [0,1]");
      }
      mesh.facets.push_back(f);
    }
  }
  if (mesh.facets.empty()) throw InputError("mesh has no faces");
  validate_mesh(mesh);
  return mesh;
}

inline Mesh load_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh: " + path.string());
  return parse_obj(in);
}

// ---------------------------------------------------------------------------
// UV map

template <typename T = double>
using UVMap = Image<T>;

template <typename T>
void require_uv_map(const UVMap<T>& uv) {
  if (uv.width() < 2 || uv.height() < 2 || uv.channels() != 3)
    throw InputError("UV map must be at least 2x2 with 3 channels");
}

/// Uniform random texture, the starting point of every attack run.
template <typename T = double>
UVMap<T> random_uv_map(int wt, int ht, std::uint64_t seed) {
  UVMap<T> uv(wt, ht, 3);
  Rng rng(seed);
  for (auto& v : uv.data()) v = static_cast<T>(rng.uniform());
  return uv;
}

template <typename T>
void clamp_uv_map(UVMap<T>& uv) {
  for (auto& v : uv.data()) v = clamp01(v);
}

/// Continuous UV -> UV-map pixel coordinates (pixel centers on integers).
inline Vec2 uv_to_pixel(const Vec2& uv, int wt, int ht) {
  return {uv.x * wt - 0.5, uv.y * ht - 0.5};
}

inline Vec2 pixel_center_uv(int x, int y, int wt, int ht) {
  return {(x + 0.5) / wt, (y + 0.5) / ht};
}

// ---------------------------------------------------------------------------
// Camera

struct CameraTransform {
  double azimuth = 0.0;    // degrees
  double elevation = 0.0;  // degrees
  double distance = 5.0;
  int image_width = 64;
  int image_height = 64;
  double field_of_view = 45.0;  // vertical, degrees

  void validate() const {
    if (!(distance > 0.0)) throw InputError("camera distance must be > 0");
    if (elevation < -90.0 || elevation > 90.0)
      throw InputError("camera elevation must lie in [-90, 90]");
    if (image_width < 16 || image_height < 16)
      throw InputError("camera image dimensions must be >= 16");
    if (!(field_of_view > 0.0 && field_of_view < 180.0))
      throw InputError("camera field of view must lie in (0, 180)");
  }

  friend bool operator==(const CameraTransform&,
                         const CameraTransform&) = default;
};

inline constexpr double kNearPlane = 0.05;
inline constexpr double kFarPlane = 1000.0;

inline Vec3 camera_position(const CameraTransform& cam) {
  const double az = deg_to_rad(cam.azimuth);
  const double el = deg_to_rad(cam.elevation);
  return {cam.distance * std::cos(el) * std::cos(az),
          cam.distance * std::cos(el) * std::sin(az),
          cam.distance * std::sin(el)};
}

/// World -> camera space, looking at the origin with +Z up. Near the poles the
/// up vector falls back to the horizontal direction pointing away from the
/// camera, which is the limit of the regular case.
inline Mat4 view_matrix(const CameraTransform& cam) {
  const Vec3 eye = camera_position(cam);
  const Vec3 forward = normalized(Vec3{} - eye);
  Vec3 up{0.0, 0.0, 1.0};
  if (norm(cross(forward, up)) < 1e-9) {
    const double az = deg_to_rad(cam.azimuth);
    up = {-std::cos(az), -std::sin(az), 0.0};
    if (cam.elevation < 0.0) up = -1.0 * up;
  }
  const Vec3 right = normalized(cross(forward, up));
  const Vec3 true_up = cross(right, forward);
  Mat4 v = Mat4::identity();
  const std::array<Vec3, 3> rows{right, true_up, -1.0 * forward};
  for (int r = 0; r < 3; ++r) {
    v(r, 0) = rows[r].x;
    v(r, 1) = rows[r].y;
    v(r, 2) = rows[r].z;
    v(r, 3) = -dot(rows[r], eye);
  }
  return v;
}

/// OpenGL-style perspective projection to clip space.
inline Mat4 projection_matrix(const CameraTransform& cam) {
  const double f = 1.0 / std::tan(deg_to_rad(cam.field_of_view) / 2.0);
  const double aspect =
      static_cast<double>(cam.image_width) / static_cast<double>(cam.image_height);
  Mat4 p;
  p(0, 0) = f / aspect;
  p(1, 1) = f;
  p(2, 2) = (kFarPlane + kNearPlane) / (kNearPlane - kFarPlane);
  p(2, 3) = 2.0 * kFarPlane * kNearPlane / (kNearPlane - kFarPlane);
  p(3, 2) = -1.0;
  return p;
}

/// View-projection transform for a validated camera.
inline Mat4 camera_matrix(const CameraTransform& cam) {
  cam.validate();
  return projection_matrix(cam) * view_matrix(cam);
}

/// NDC -> continuous image coordinates; pixel (i, j) has its center at
/// (i + 0.5, j + 0.5) and row 0 is the top of the image.
inline Vec2 ndc_to_image(double ndc_x, double ndc_y, int width, int height) {
  return {(ndc_x + 1.0) * 0.5 * width, (1.0 - ndc_y) * 0.5 * height};
}

// ---------------------------------------------------------------------------
// Facet ownership of UV pixels

inline constexpr std::int32_t kNoFacet = -1;

struct FacetUVIndex {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> owner;               // per pixel, kNoFacet if none
  std::vector<std::array<double, 3>> barycentric;  // of the pixel center

  std::size_t pixel(int x, int y) const {
    return static_cast<std::size_t>(y) * width + x;
  }
  std::size_t owned_count() const {
    return static_cast<std::size_t>(
        std::count_if(owner.begin(), owner.end(),
                      [](std::int32_t m) { return m != kNoFacet; }));
  }

  friend bool operator==(const FacetUVIndex&, const FacetUVIndex&) = default;
};

/// Barycentric coordinates of p in the UV triangle of `f` (unnormalized
/// inputs, exact edge functions).
inline std::array<double, 3> uv_barycentric(const Facet& f, const Vec2& p) {
  const Vec2 &a = f.uv[0], &b = f.uv[1], &c = f.uv[2];
  const double area2 = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
  const double w0 = (b.x - p.x) * (c.y - p.y) - (c.x - p.x) * (b.y - p.y);
  const double w1 = (c.x - p.x) * (a.y - p.y) - (a.x - p.x) * (c.y - p.y);
  const double w2 = (a.x - p.x) * (b.y - p.y) - (b.x - p.x) * (a.y - p.y);
  return {w0 / area2, w1 / area2, w2 / area2};
}

inline constexpr double kInsideTolerance = 1e-12;

/// Assigns each UV pixel center to the lowest-id facet whose UV triangle
/// contains it (boundary inclusive).
inline FacetUVIndex build_uv_index(const Mesh& mesh, int wt, int ht) {
  if (wt < 2 || ht < 2) throw InputError("UV dimensions must be >= 2");
  FacetUVIndex index;
  index.width = wt;
  index.height = ht;
  index.owner.assign(static_cast<std::size_t>(wt) * ht, kNoFacet);
  index.barycentric.assign(index.owner.size(), {0.0, 0.0, 0.0});

  for (int m = 0; m < mesh.facet_count(); ++m) {
    const Facet& f = mesh.facets[m];
    if (f.degenerate_uv || std::abs(uv_area(f)) <= kDegenerateUvArea) continue;
    double lo_x = 1.0, hi_x = 0.0, lo_y = 1.0, hi_y = 0.0;
    for (const Vec2& t : f.uv) {
      lo_x = std::min(lo_x, t.x);
      hi_x = std::max(hi_x, t.x);
      lo_y = std::min(lo_y, t.y);
      hi_y = std::max(hi_y, t.y);
    }
    // Candidate pixel centers (x+0.5)/wt within the UV bounding box.
    const int x0 = std::max(0, static_cast<int>(std::floor(lo_x * wt - 0.5)));
    const int x1 = std::min(wt - 1, static_cast<int>(std::ceil(hi_x * wt - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(lo_y * ht - 0.5)));
    const int y1 = std::min(ht - 1, static_cast<int>(std::ceil(hi_y * ht - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const std::size_t p = index.pixel(x, y);
        if (index.owner[p] != kNoFacet) continue;
        auto bc = uv_barycentric(f, pixel_center_uv(x, y, wt, ht));
        if (bc[0] < -kInsideTolerance || bc[1] < -kInsideTolerance ||
            bc[2] < -kInsideTolerance)
          continue;
        double sum = 0.0;
        for (double& b : bc) {
          b = std::max(b, 0.0);
          sum += b;
        }
        for (double& b : bc) b /= sum;
        index.owner[p] = m;
        index.barycentric[p] = bc;
      }
    }
  }
  return index;
}

// Binary cache layout (little-endian):
//   "UVIX" | u32 width | u32 height | per pixel: i32 owner, 3 x f64 barycentric
namespace detail {

inline bool host_is_little_endian() {
  const std::uint16_t probe = 1;
  std::uint8_t first = 0;
  std::memcpy(&first, &probe, 1);
  return first == 1;
}

template <typename V>
void put_le(std::ostream& out, V value) {
  unsigned char bytes[sizeof(V)];
  std::memcpy(bytes, &value, sizeof(V));
  if (!host_is_little_endian()) std::reverse(bytes, bytes + sizeof(V));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(V));
}

template <typename V>
V get_le(std::istream& in) {
  unsigned char bytes[sizeof(V)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(V)))
    throw InputError("truncated UV index cache");
  if (!host_is_little_endian()) std::reverse(bytes, bytes + sizeof(V));
  V value;
  std::memcpy(&value, bytes, sizeof(V));
  return value;
}

}  // namespace detail

inline void write_uv_index(std::ostream& out, const FacetUVIndex& index) {
  out.write("UVIX", 4);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.width));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.height));
  for (std::size_t p = 0; p < index.owner.size(); ++p) {
    detail::put_le<std::int32_t>(out, index.owner[p]);
    for (double b : index.barycentric[p]) detail::put_le<double>(out, b);
  }
}

inline FacetUVIndex read_uv_index(std::istream& in) {
  char magic[4] = {};
  if (!in.read(magic, 4) || std::memcmp(magic, "UVIX", 4) != 0)
    throw InputError("not a UV index cache (bad magic)");
  FacetUVIndex index;
  index.width = static_cast<int>(detail::get_le<std::uint32_t>(in));
  index.height = static_cast<int>(detail::get_le<std::uint32_t>(in));
  if (index.width < 2 || index.height < 2)
    throw InputError("UV index cache has invalid dimensions");
  const std::size_t n = static_cast<std::size_t>(index.width) * index.height;
  index.owner.resize(n);
  index.barycentric.resize(n);
  for (std::size_t p = 0; p < n; ++p) {
    index.owner[p] = detail::get_le<std::int32_t>(in);
    for (double& b : index.barycentric[p]) b = detail::get_le<double>(in);
  }
  return index;
}

inline void save_uv_index(const std::filesystem::path& path,
                          const FacetUVIndex& index) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  write_uv_index(out, index);
}

inline FacetUVIndex load_uv_index(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return read_uv_index(in);
}

}  // namespace uvtex
