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

// Synthetic multi-weather scenes: a grid of weather conditions x vehicle
// placements x camera viewpoints, each rendered, composed over a procedural
// background and degraded by a global weather transform.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "uvtex/detection.hpp"
#include "uvtex/envfusion.hpp"
#include "uvtex/geometry.hpp"
#include "uvtex/image.hpp"
#include "uvtex/renderer.hpp"
#include "uvtex/sampler.hpp"

namespace uvtex {

struct WeatherParams {
  double sun_altitude = 90.0;  // degrees
  double fog_density = 0.0;    // [0, 100]
  Vec3 fog_color{0.7, 0.7, 0.7};

  void validate() const {
    if (!(fog_density >= 0.0 && fog_density <= 100.0))
      throw InputError("fog density must lie in [0, 100]");
  }
};

inline constexpr double kMinSunBrightness = 0.05;

inline double sun_brightness(double sun_altitude) {
  return std::clamp(std::sin(deg_to_rad(std::max(sun_altitude, 0.0))), kMinSunBrightness, 1.0);
}

/// Global lighting factor followed by a fog blend toward fog_color. The
/// foreground mask is accepted for interface symmetry; the transform is the
/// same on every pixel.
template <typename T>
Image<T> apply_weather(const Image<T>& img, const Mask& fg_mask, const WeatherParams& w) {
  require_same_dims(img, fg_mask, "apply_weather");
  w.validate();
  const double light = sun_brightness(w.sun_altitude);
  const double f = w.fog_density / 100.0;
  const std::array<double, 3> fog{w.fog_color.x, w.fog_color.y, w.fog_color.z};
  Image<T> out(img.width(), img.height(), img.channels());
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < img.channels(); ++c) {
      const std::size_t i = p * img.channels() + c;
      out.data()[i] = static_cast<T>((1.0 - f) * (light * img.data()[i]) + f * fog[c % 3]);
    }
  return out;
}

/// Tight bounding box of the foreground, max exclusive.
inline Box extract_gt(const Mask& fg) {
  int x0 = fg.width, y0 = fg.height, x1 = -1, y1 = -1;
  for (int y = 0; y < fg.height; ++y)
    for (int x = 0; x < fg.width; ++x)
      if (fg(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < 0) throw InputError("vehicle fully occluded/out of frame");
  return {double(x0), double(y0), double(x1 + 1), double(y1 + 1)};
}

inline constexpr int kCarClassId = 0;

struct Scene {
  Image<double> i_in;
  Mask mask;  // vehicle = 0, background = 1
  std::optional<Box> gt;
  int class_id = kCarClassId;
  CameraTransform cam;
  Vec2 placement;
  WeatherParams weather;
};

/// Deterministic background standing in for the environment at a vehicle
/// placement. Different placements give different backgrounds.
inline Image<double> procedural_background(int width, int height, const Vec2& placement) {
  Image<double> bg(width, height, 3);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double u = x + 13.0 * placement.x, v = y + 13.0 * placement.y;
      const double base = 0.45 + 0.2 * std::sin(0.19 * u) * std::cos(0.13 * v);
      const double road = y > height * 0.6 ? -0.15 : 0.0;
      bg.at(x, y, 0) = clamp01(base + road + 0.05);
      bg.at(x, y, 1) = clamp01(base + road + 0.08 * std::sin(0.07 * u + 1.0));
      bg.at(x, y, 2) = clamp01(base + road + 0.1);
    }
  return bg;
}

// ---------------------------------------------------------------------------
// Grid generation

struct CameraJitter {
  double azimuth = 0.0;    // +/- degrees
  double elevation = 0.0;  // +/- degrees
  double distance = 0.0;   // +/- fraction of the distance
};

struct GridOptions {
  int texture_size = 4;
  std::optional<CameraJitter> jitter;
  std::uint64_t seed = 0;
};

inline std::size_t grid_size(std::size_t weathers, std::size_t placements, std::size_t cams) {
  return weathers * placements * cams;
}

inline CameraTransform jittered(const CameraTransform& cam, const CameraJitter& j, Rng& rng) {
  CameraTransform out = cam;
  out.azimuth += rng.uniform(-j.azimuth, j.azimuth);
  out.elevation = std::clamp(out.elevation + rng.uniform(-j.elevation, j.elevation), -90.0, 90.0);
  out.distance *= 1.0 + rng.uniform(-j.distance, j.distance);
  return out;
}

/// Streams every scene of weathers x placements x cams (in that nesting
/// order) to `sink`. The raw render only depends on the camera, so each
/// un-jittered camera is rasterized once and reused across placements.
inline void for_each_scene(const Mesh& mesh, const UVMap<double>& uv, const EnvModel* env,
                           std::span<const WeatherParams> weathers,
                           std::span<const CameraTransform> cams,
                           std::span<const Vec2> placements, const GridOptions& opts,
                           const std::function<void(Scene&&)>& sink) {
  if (weathers.empty() || cams.empty() || placements.empty())
    throw InputError("scene grid needs non-empty weather, camera and placement lists");
  for (const auto& w : weathers) w.validate();
  const FacetUVIndex index = build_uv_index(mesh, uv.width(), uv.height());
  const FacetTextureTensor<double> tex =
      UvTraversalPlan(mesh, index, opts.texture_size).forward(uv);

  std::vector<std::optional<RenderedImage<double>>> cached(cams.size());
  auto render = [&](const CameraTransform& cam) {
    RenderedImage<double> x_nr = rasterize(mesh, tex, cam).image;
    if (env) x_nr = fuse(x_nr, env->predict(x_nr.pixels));
    return x_nr;
  };

  std::uint64_t scene_index = 0;
  for (const WeatherParams& weather : weathers)
    for (const Vec2& placement : placements)
      for (std::size_t c = 0; c < cams.size(); ++c, ++scene_index) {
        CameraTransform cam = cams[c];
        RenderedImage<double> x_ren;
        if (opts.jitter) {
          Rng rng = Rng::derive(opts.seed, scene_index);
          cam = jittered(cam, *opts.jitter, rng);
          x_ren = render(cam);
        } else {
          if (!cached[c]) cached[c] = render(cam);
          x_ren = *cached[c];
        }
        const Image<double> bg =
            procedural_background(cam.image_width, cam.image_height, placement);
        Scene scene;
        scene.i_in = apply_weather(composite(x_ren, bg), x_ren.foreground, weather);
        scene.mask = x_ren.foreground.inverted();
        if (x_ren.foreground.count() > 0) scene.gt = extract_gt(x_ren.foreground);
        scene.cam = cam;
        scene.placement = placement;
        scene.weather = weather;
        sink(std::move(scene));
      }
}

inline std::vector<Scene> generate_grid(const Mesh& mesh, const UVMap<double>& uv,
                                        const EnvModel* env,
                                        std::span<const WeatherParams> weathers,
                                        std::span<const CameraTransform> cams,
                                        std::span<const Vec2> placements,
                                        const GridOptions& opts = {}) {
  std::vector<Scene> scenes;
  scenes.reserve(grid_size(weathers.size(), placements.size(), cams.size()));
  for_each_scene(mesh, uv, env, weathers, cams, placements, opts,
                 [&](Scene&& s) { scenes.push_back(std::move(s)); });
  return scenes;
}

/// 4 sun altitudes x 4 fog densities of the base weather grid.
inline std::vector<WeatherParams> base_weather_grid() {
  std::vector<WeatherParams> out;
  for (double sun : {-90.0, -30.0, 30.0, 90.0})
    for (double fog : {0.0, 25.0, 50.0, 90.0}) out.push_back({sun, fog, {0.7, 0.7, 0.7}});
  return out;
}

/// Enhanced grid: sun altitudes shifted so fewer conditions are fully dark.
inline std::vector<WeatherParams> enhanced_weather_grid() {
  std::vector<WeatherParams> out;
  for (double sun : {-90.0, 10.0, 45.0, 90.0})
    for (double fog : {0.0, 25.0, 50.0, 90.0}) out.push_back({sun, fog, {0.7, 0.7, 0.7}});
  return out;
}

/// 8 azimuths (every 45 degrees) x 4 elevations x 4 distances = 128 views.
/// `distance_scale` maps the 5/10/15/20 m distances into model units.
inline std::vector<CameraTransform> camera_sweep(int width, int height,
                                                 double distance_scale = 1.0,
                                                 double fov = 45.0) {
  std::vector<CameraTransform> out;
  for (int a = 0; a < 8; ++a)
    for (double el : {0.0, 22.5, 45.0, 67.5})
      for (double d : {5.0, 10.0, 15.0, 20.0})
        out.push_back({45.0 * a, el, d * distance_scale, width, height, fov});
  return out;
}

// ---------------------------------------------------------------------------
// Dataset on disk: one directory per scene with image.png, mask.png, meta.json.

inline nlohmann::json scene_meta(const Scene& s) {
  nlohmann::json j = {
      {"sun_altitude", s.weather.sun_altitude},
      {"fog_density", s.weather.fog_density},
      {"fog_color", {s.weather.fog_color.x, s.weather.fog_color.y, s.weather.fog_color.z}},
      {"azimuth", s.cam.azimuth},
      {"elevation", s.cam.elevation},
      {"distance", s.cam.distance},
      {"field_of_view", s.cam.field_of_view},
      {"placement", {s.placement.x, s.placement.y}},
      {"class_id", s.class_id}};
  if (s.gt)
    j["gt"] = {s.gt->x_min, s.gt->y_min, s.gt->x_max, s.gt->y_max};
  else
    j["gt"] = nullptr;
  return j;
}

inline void save_scene(const std::filesystem::path& dir, const Scene& s) {
  std::filesystem::create_directories(dir);
  write_png(dir / "image.png", s.i_in);
  write_mask_png(dir / "mask.png", s.mask);
  std::ofstream out(dir / "meta.json");
  if (!out) throw InputError("cannot write " + (dir / "meta.json").string());
  out << scene_meta(s).dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

inline Scene load_scene(const std::filesystem::path& dir) {
  Scene s;
  s.i_in = read_png(dir / "image.png");
  s.mask = read_mask_png(dir / "mask.png");
  require_same_dims(s.i_in, s.mask, "load_scene");
  const nlohmann::json j = read_json_file(dir / "meta.json");
  try {
    s.weather.sun_altitude = j.at("sun_altitude").get<double>();
    s.weather.fog_density = j.at("fog_density").get<double>();
    const auto fc = j.at("fog_color").get<std::vector<double>>();
    if (fc.size() != 3) throw InputError("fog_color needs 3 components");
    s.weather.fog_color = {fc[0], fc[1], fc[2]};
    s.cam.azimuth = j.at("azimuth").get<double>();
    s.cam.elevation = j.at("elevation").get<double>();
    s.cam.distance = j.at("distance").get<double>();
    s.cam.field_of_view = j.value("field_of_view", 45.0);
    s.cam.image_width = s.i_in.width();
    s.cam.image_height = s.i_in.height();
    const auto pl = j.at("placement").get<std::vector<double>>();
    if (pl.size() != 2) throw InputError("placement needs 2 components");
    s.placement = {pl[0], pl[1]};
    s.class_id = j.value("class_id", kCarClassId);
    if (!j.at("gt").is_null()) {
      const auto g = j.at("gt").get<std::vector<double>>();
      if (g.size() != 4) throw InputError("gt needs 4 components");
      s.gt = Box{g[0], g[1], g[2], g[3]};
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError("bad scene metadata in " + dir.string() + ": " + e.what());
  }
  s.cam.validate();
  return s;
}

/// Scene directories directly under `root`, in lexicographic order.
inline std::vector<std::filesystem::path> list_dataset_dirs(const std::filesystem::path& root) {
  if (!std::filesystem::is_directory(root))
    throw InputError("dataset directory not found: " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory() && std::filesystem::exists(e.path() / "meta.json"))
      dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw InputError("no samples found in " + root.string());
  return dirs;
}

inline std::vector<Scene> load_scene_set(const std::filesystem::path& root) {
  std::vector<Scene> scenes;
  for (const auto& d : list_dataset_dirs(root)) scenes.push_back(load_scene(d));
  return scenes;
}

// ---------------------------------------------------------------------------
// Environment ground truth: white reference and colored variants per view.

/// Renders the vehicle painted a single color.
inline RenderedImage<double> render_solid(const Mesh& mesh, const CameraTransform& cam,
                                          const Vec3& color, int ts) {
  FacetTextureTensor<double> tex(mesh.facet_count(), ts);
  for (std::size_t t = 0; t < tex.texel_count(); ++t) {
    tex.values[t * 3] = color.x;
    tex.values[t * 3 + 1] = color.y;
    tex.values[t * 3 + 2] = color.z;
  }
  return rasterize(mesh, tex, cam).image;
}

inline Image<double> masked(const Image<double>& img, const Mask& fg) {
  Image<double> out(img.width(), img.height(), img.channels());
  for (std::size_t p = 0; p < fg.bits.size(); ++p)
    if (fg.bits[p])
      for (int c = 0; c < img.channels(); ++c)
        out.data()[p * img.channels() + c] = img.data()[p * img.channels() + c];
  return out;
}

/// One GroundTruthPair per (weather, placement, camera, color). Raw renders
/// go through `cache` when given, so each (camera, color) renders once.
inline std::vector<GroundTruthPair> generate_env_pairs(
    const Mesh& mesh, std::span<const WeatherParams> weathers,
    std::span<const CameraTransform> cams, std::span<const Vec2> placements,
    std::span<const Vec3> colors, int ts = 4, RenderCache* cache = nullptr) {
  if (weathers.empty() || cams.empty() || placements.empty() || colors.empty())
    throw InputError("environment pair generation needs non-empty lists");
  auto raw = [&](const CameraTransform& cam, const Vec3& color) {
    auto fn = [&](const CameraTransform& c, const Vec3& col) {
      return render_solid(mesh, c, col, ts);
    };
    return cache ? cache->get_or_render(cam, color, fn) : fn(cam, color);
  };
  std::vector<GroundTruthPair> pairs;
  for (const WeatherParams& weather : weathers)
    for (const Vec2& placement : placements)
      for (const CameraTransform& cam : cams) {
        const RenderedImage<double> white = raw(cam, {1.0, 1.0, 1.0});
        if (white.foreground.count() == 0) continue;
        const Image<double> x_ref =
            masked(apply_weather(white.pixels, white.foreground, weather), white.foreground);
        for (const Vec3& color : colors) {
          GroundTruthPair pr;
          pr.x_nr = raw(cam, color);
          pr.x_gt = masked(apply_weather(pr.x_nr.pixels, pr.x_nr.foreground, weather),
                           pr.x_nr.foreground);
          pr.x_ref = x_ref;
          pr.color = color;
          pr.cam = cam;
          pr.placement = placement;
          pairs.push_back(std::move(pr));
        }
      }
  return pairs;
}

inline void save_env_pair(const std::filesystem::path& dir, const GroundTruthPair& pr) {
  std::filesystem::create_directories(dir);
  write_png(dir / "x_gt.png", pr.x_gt);
  write_png(dir / "x_ref.png", pr.x_ref);
  write_png(dir / "x_nr.png", pr.x_nr.pixels);
  write_mask_png(dir / "mask.png", pr.x_nr.foreground.inverted());
  const nlohmann::json j = {{"color", {pr.color.x, pr.color.y, pr.color.z}},
                            {"azimuth", pr.cam.azimuth},
                            {"elevation", pr.cam.elevation},
                            {"distance", pr.cam.distance},
                            {"field_of_view", pr.cam.field_of_view},
                            {"placement", {pr.placement.x, pr.placement.y}}};
  std::ofstream out(dir / "meta.json");
  out << j.dump(2) << "\n";
}

inline GroundTruthPair load_env_pair(const std::filesystem::path& dir) {
  GroundTruthPair pr;
  pr.x_gt = read_png(dir / "x_gt.png");
  pr.x_ref = read_png(dir / "x_ref.png");
  pr.x_nr.pixels = read_png(dir / "x_nr.png");
  pr.x_nr.foreground = read_mask_png(dir / "mask.png").inverted();
  require_same_shape(pr.x_gt, pr.x_ref, "load_env_pair");
  require_same_shape(pr.x_gt, pr.x_nr.pixels, "load_env_pair");
  require_same_dims(pr.x_gt, pr.x_nr.foreground, "load_env_pair");
  const nlohmann::json j = read_json_file(dir / "meta.json");
  try {
    const auto col = j.at("color").get<std::vector<double>>();
    if (col.size() != 3) throw InputError("color needs 3 components");
    pr.color = {col[0], col[1], col[2]};
    pr.cam.azimuth = j.at("azimuth").get<double>();
    pr.cam.elevation = j.at("elevation").get<double>();
    pr.cam.distance = j.at("distance").get<double>();
    pr.cam.field_of_view = j.value("field_of_view", 45.0);
    pr.cam.image_width = pr.x_gt.width();
    pr.cam.image_height = pr.x_gt.height();
    const auto pl = j.at("placement").get<std::vector<double>>();
    if (pl.size() != 2) throw InputError("placement needs 2 components");
    pr.placement = {pl[0], pl[1]};
  } catch (const nlohmann::json::exception& e) {
    throw InputError("bad pair metadata in " + dir.string() + ": " + e.what());
  }
  return pr;
}

inline std::vector<GroundTruthPair> load_env_pairs(const std::filesystem::path& root) {
  std::vector<GroundTruthPair> pairs;
  for (const auto& d : list_dataset_dirs(root)) pairs.push_back(load_env_pair(d));
  return pairs;
}

}  // namespace uvtex
