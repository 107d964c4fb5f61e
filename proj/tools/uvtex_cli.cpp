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

// uvtex command-line tool.
//
// Exit codes: 0 success, 2 input error, 3 environment-fit divergence,
// 4 attack numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "uvtex/uvtex.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "uvtex 0.1.0";

enum ExitCode { kOk = 0, kInputError = 2, kFitDiverged = 3, kAttackFailed = 4 };

std::vector<double> parse_list(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ',');) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw uvtex::InputError(std::string("bad number '") + tok + "' in " + what);
    }
  }
  if (out.empty()) throw uvtex::InputError(std::string("empty list for ") + what);
  return out;
}

uvtex::Vec3 parse_rgb(const std::string& s, const char* what) {
  const auto v = parse_list(s, what);
  if (v.size() != 3) throw uvtex::InputError(std::string(what) + " needs r,g,b");
  return {v[0], v[1], v[2]};
}

std::vector<uvtex::Vec3> parse_colors(const std::string& s) {
  std::vector<uvtex::Vec3> out;
  std::stringstream ss(s);
  for (std::string tok; std::getline(ss, tok, ';');) out.push_back(parse_rgb(tok, "--colors"));
  if (out.empty()) throw uvtex::InputError("--colors is empty");
  return out;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw uvtex::InputError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

/// Shared flags describing a grid of views and weathers.
struct ViewOptions {
  int image_size = 64;
  double fov = 45.0;
  std::string azimuths = "0,90,180,270";
  std::string elevations = "20";
  std::string distances = "6";
  std::string weather_preset;
  std::string sun = "90";
  std::string fog = "0";
  std::string fog_color = "0.7,0.7,0.7";
  int placements = 1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--image-size", image_size, "Square render size in pixels")->capture_default_str();
    cmd->add_option("--fov", fov, "Vertical field of view (degrees)")->capture_default_str();
    cmd->add_option("--azimuths", azimuths, "Comma-separated azimuths (degrees)")->capture_default_str();
    cmd->add_option("--elevations", elevations, "Comma-separated elevations (degrees)")->capture_default_str();
    cmd->add_option("--distances", distances, "Comma-separated camera distances")->capture_default_str();
    cmd->add_option("--weather-preset", weather_preset,
                    "base or enhanced 4x4 weather grid (overrides --sun/--fog)");
    cmd->add_option("--sun", sun, "Comma-separated sun altitudes (degrees)")->capture_default_str();
    cmd->add_option("--fog", fog, "Comma-separated fog densities [0,100]")->capture_default_str();
    cmd->add_option("--fog-color", fog_color, "Fog color r,g,b")->capture_default_str();
    cmd->add_option("--placements", placements, "Number of vehicle placements")->capture_default_str();
  }

  std::vector<uvtex::CameraTransform> cameras() const {
    std::vector<uvtex::CameraTransform> cams;
    for (double az : parse_list(azimuths, "--azimuths"))
      for (double el : parse_list(elevations, "--elevations"))
        for (double d : parse_list(distances, "--distances")) {
          uvtex::CameraTransform cam{az, el, d, image_size, image_size, fov};
          cam.validate();
          cams.push_back(cam);
        }
    return cams;
  }

  std::vector<uvtex::WeatherParams> weathers() const {
    if (weather_preset == "base") return uvtex::base_weather_grid();
    if (weather_preset == "enhanced") return uvtex::enhanced_weather_grid();
    if (!weather_preset.empty()) throw uvtex::InputError("unknown weather preset " + weather_preset);
    std::vector<uvtex::WeatherParams> out;
    const uvtex::Vec3 color = parse_rgb(fog_color, "--fog-color");
    for (double s : parse_list(sun, "--sun"))
      for (double f : parse_list(fog, "--fog")) {
        uvtex::WeatherParams w{s, f, color};
        w.validate();
        out.push_back(w);
      }
    return out;
  }

  std::vector<uvtex::Vec2> placement_list() const {
    if (placements < 1) throw uvtex::InputError("--placements must be >= 1");
    std::vector<uvtex::Vec2> out;
    for (int i = 0; i < placements; ++i) out.push_back({double(i), double(i % 3)});
    return out;
  }
};

/// Flat record of every option of a subcommand, as given or defaulted. The
/// same object fed back through --config reproduces the run.
json collect_arguments(const CLI::App* cmd) {
  json args = json::object();
  for (const CLI::Option* opt : cmd->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      args[name] = r.empty() ? "true" : r.back();
    } else if (!opt->get_default_str().empty()) {
      args[name] = opt->get_default_str();
    }
  }
  return args;
}

json base_manifest(const CLI::App* cmd, std::uint64_t seed) {
  return {{"command", cmd->get_name()},
          {"tool_version", kToolVersion},
          {"seed", seed},
          {"arguments", collect_arguments(cmd)}};
}

// ---------------------------------------------------------------------------

struct CoverageCmd {
  std::string mesh;
  int uv_size = 64;
  int ts = 2;
  std::string method = "uv-traversal";
  std::string out_dir = "coverage_out";

  int run(const CLI::App* cmd) const {
    const uvtex::Mesh m = uvtex::load_mesh(mesh);
    const auto kind = uvtex::parse_sampler_kind(method);
    const uvtex::CoverageMap cov = uvtex::coverage_map(m, uv_size, uv_size, ts, kind);
    fs::create_directories(out_dir);
    uvtex::write_png(fs::path(out_dir) / "coverage.png", uvtex::coverage_heatmap(cov));
    json summary = uvtex::coverage_summary(cov);
    summary["method"] = uvtex::to_string(kind);
    summary["texture_size"] = ts;
    write_json(fs::path(out_dir) / "coverage.json", summary);
    json manifest = base_manifest(cmd, 0);
    manifest["input_hashes"] = {{"mesh", uvtex::git_blob_hash_file(mesh)}};
    manifest["outputs"] = {"coverage.png", "coverage.json"};
    write_json(fs::path(out_dir) / "manifest.json", manifest);
    std::cout << summary.dump() << "\n";
    return kOk;
  }
};

struct GenScenesCmd {
  std::string mesh;
  std::string uv_png;
  int uv_size = 64;
  int ts = 4;
  std::string out_dir = "scenes";
  bool jitter = false;
  std::uint64_t seed = 0;
  ViewOptions views;

  int run(const CLI::App* cmd) const {
    const uvtex::Mesh m = uvtex::load_mesh(mesh);
    const uvtex::UVMap<double> uv = uv_png.empty()
                                        ? uvtex::UVMap<double>(uv_size, uv_size, 3, 1.0)
                                        : uvtex::read_png(uv_png);
    uvtex::GridOptions opts;
    opts.texture_size = ts;
    opts.seed = seed;
    if (jitter) opts.jitter = uvtex::CameraJitter{10.0, 5.0, 0.1};
    const auto weathers = views.weathers();
    const auto cams = views.cameras();
    const auto placements = views.placement_list();
    fs::create_directories(out_dir);
    std::size_t n = 0;
    uvtex::for_each_scene(m, uv, nullptr, weathers, cams, placements, opts,
                          [&](uvtex::Scene&& s) {
                            char name[32];
                            std::snprintf(name, sizeof(name), "scene_%05zu", n++);
                            uvtex::save_scene(fs::path(out_dir) / name, s);
                          });
    json manifest = base_manifest(cmd, seed);
    manifest["input_hashes"] = {{"mesh", uvtex::git_blob_hash_file(mesh)}};
    if (!uv_png.empty()) manifest["input_hashes"]["uv"] = uvtex::git_blob_hash_file(uv_png);
    manifest["scene_count"] = n;
    write_json(fs::path(out_dir) / "manifest.json", manifest);
    std::cout << "wrote " << n << " scenes to " << out_dir << "\n";
    return kOk;
  }
};

struct GenPairsCmd {
  std::string mesh;
  int ts = 4;
  std::string out_dir = "pairs";
  std::string colors = "1,0,0;0,1,0;0,0,1";
  std::string cache_dir;
  ViewOptions views;

  int run(const CLI::App* cmd) const {
    const uvtex::Mesh m = uvtex::load_mesh(mesh);
    const auto weathers = views.weathers();
    const auto cams = views.cameras();
    const auto placements = views.placement_list();
    const auto cols = parse_colors(colors);
    std::optional<uvtex::RenderCache> cache;
    if (!cache_dir.empty()) cache.emplace(cache_dir);
    const auto pairs = uvtex::generate_env_pairs(m, weathers, cams, placements, cols, ts,
                                                 cache ? &*cache : nullptr);
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "pair_%05zu", i);
      uvtex::save_env_pair(fs::path(out_dir) / name, pairs[i]);
    }
    json manifest = base_manifest(cmd, 0);
    manifest["input_hashes"] = {{"mesh", uvtex::git_blob_hash_file(mesh)}};
    manifest["pair_count"] = pairs.size();
    write_json(fs::path(out_dir) / "manifest.json", manifest);
    std::cout << "wrote " << pairs.size() << " pairs to " << out_dir << "\n";
    return kOk;
  }
};

struct FitEnvCmd {
  std::string dataset;
  std::string model = "global_scalar";
  double lr = 0.01;
  double eta = 0.003;
  double gamma = 0.5;
  int epochs = 40;
  std::string optimizer = "adam";
  std::string out_dir = "env_out";

  int run(const CLI::App* cmd) const {
    uvtex::FitConfig cfg;
    cfg.learning_rate = lr;
    cfg.eta = eta;
    cfg.gamma = gamma;
    cfg.max_epochs = epochs;
    cfg.optimizer = uvtex::parse_optimizer_kind(optimizer);
    cfg.validate();
    const auto pairs = uvtex::load_env_pairs(dataset);
    auto env = uvtex::make_env_model(model);
    uvtex::FitResult result;
    try {
      result = uvtex::fit_env_model(*env, pairs, cfg);
    } catch (const uvtex::NumericalError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kFitDiverged;
    }
    fs::create_directories(out_dir);
    uvtex::save_env_model(fs::path(out_dir) / "env_model.json", *env);
    uvtex::write_loss_history_csv(fs::path(out_dir) / "loss_history.csv", result);
    json manifest = base_manifest(cmd, 0);
    manifest["pair_count"] = pairs.size();
    manifest["converged_epoch"] =
        result.converged_epoch ? json(*result.converged_epoch) : json(nullptr);
    manifest["outputs"] = {"env_model.json", "loss_history.csv"};
    write_json(fs::path(out_dir) / "manifest.json", manifest);
    std::cout << "converged_epoch: "
              << (result.converged_epoch ? std::to_string(*result.converged_epoch) : "none")
              << "\nparameters: " << json(env->parameters()).dump() << "\n";
    return kOk;
  }
};

struct AttackCmd {
  std::string scene_dir;
  std::string mesh;
  std::string env_model;
  double alpha = 1.0;
  double beta = 0.01;
  double lr = 0.01;
  int epochs = 4;
  std::uint64_t seed = 0;
  std::string optimizer = "gd";
  std::string sampler = "uv-traversal";
  int ts = 4;
  int uv_size = 64;
  bool no_roa = false;
  std::uint64_t detector_seed = 0;
  double detector_scale = 4.0;
  std::string out_dir = "attack_out";

  int run(const CLI::App* cmd) const {
    uvtex::AttackConfig cfg;
    cfg.alpha = alpha;
    cfg.beta = beta;
    cfg.learning_rate = lr;
    cfg.epochs = epochs;
    cfg.seed = seed;
    cfg.optimizer = uvtex::parse_optimizer_kind(optimizer);
    cfg.sampler = uvtex::parse_sampler_kind(sampler);
    cfg.texture_size = ts;
    cfg.uv_width = cfg.uv_height = uv_size;
    cfg.use_roa = !no_roa;
    cfg.roa.seed = seed;
    cfg.validate();
    const uvtex::Mesh m = uvtex::load_mesh(mesh);
    const auto env = uvtex::load_env_model(env_model);
    const auto dirs = uvtex::list_dataset_dirs(scene_dir);
    std::vector<uvtex::Scene> scenes;
    for (const auto& d : dirs) scenes.push_back(uvtex::load_scene(d));
    uvtex::ToyDetectorConfig dcfg;
    dcfg.seed = detector_seed;
    dcfg.weight_scale = detector_scale;
    const uvtex::ToyDetector detector(dcfg);

    uvtex::AttackResult result;
    try {
      result = uvtex::optimize_texture(scenes, m, detector, *env, cfg);
    } catch (const uvtex::NumericalError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kAttackFailed;
    }
    fs::create_directories(out_dir);
    uvtex::write_png(fs::path(out_dir) / "uv.png", result.uv);
    uvtex::write_attack_trace_csv(fs::path(out_dir) / "trace.csv", result.trace);

    json manifest = base_manifest(cmd, seed);
    manifest["config"] = {{"alpha", alpha},   {"beta", beta},         {"lr", lr},
                          {"epochs", epochs}, {"optimizer", optimizer}, {"sampler", sampler},
                          {"ts", ts},         {"uv_size", uv_size},   {"roa", !no_roa}};
    json scene_hashes = json::object();
    json scene_list = json::array();
    for (const auto& d : dirs) {
      const std::string name = d.filename().string();
      scene_list.push_back(name);
      scene_hashes[name] = uvtex::git_blob_hash(
          uvtex::read_file_bytes(d / "image.png") + uvtex::read_file_bytes(d / "mask.png") +
          uvtex::read_file_bytes(d / "meta.json"));
    }
    manifest["scenes"] = scene_list;
    manifest["input_hashes"] = {{"mesh", uvtex::git_blob_hash_file(mesh)},
                                {"env_model", uvtex::git_blob_hash_file(env_model)},
                                {"scenes", scene_hashes}};
    manifest["outputs"] = {{"uv", "uv.png"},
                           {"trace", "trace.csv"},
                           {"uv_hash", uvtex::git_blob_hash_file(fs::path(out_dir) / "uv.png")}};
    manifest["steps"] = result.trace.size();
    write_json(fs::path(out_dir) / "manifest.json", manifest);
    if (!result.trace.empty())
      std::cout << "final L_total: " << result.trace.back().total
                << "  max H_d: " << result.trace.back().max_detection_score << "\n";
    std::cout << "wrote " << (fs::path(out_dir) / "uv.png").string() << "\n";
    return kOk;
  }
};

struct RenderCmd {
  std::string mesh;
  std::string uv_png;
  std::string cam = "0,20,6";
  int image_size = 64;
  double fov = 45.0;
  std::string weather = "90,0";
  std::string fog_color = "0.7,0.7,0.7";
  std::string env_model;
  std::string background;
  int ts = 4;
  std::string out = "render.png";

  int run(const CLI::App* cmd) const {
    const uvtex::Mesh m = uvtex::load_mesh(mesh);
    const uvtex::UVMap<double> uv = uvtex::read_png(uv_png);
    uvtex::require_uv_map(uv);
    const auto c = parse_list(cam, "--cam");
    if (c.size() != 3) throw uvtex::InputError("--cam needs azimuth,elevation,distance");
    const uvtex::CameraTransform camera{c[0], c[1], c[2], image_size, image_size, fov};
    camera.validate();
    const auto wv = parse_list(weather, "--weather");
    if (wv.size() != 2) throw uvtex::InputError("--weather needs sun_altitude,fog_density");
    const uvtex::WeatherParams w{wv[0], wv[1], parse_rgb(fog_color, "--fog-color")};
    w.validate();

    const uvtex::FacetUVIndex index = uvtex::build_uv_index(m, uv.width(), uv.height());
    const auto tex = uvtex::UvTraversalPlan(m, index, ts).forward(uv);
    const auto raster = uvtex::rasterize(m, tex, camera);
    uvtex::RenderedImage<double> x_ren = raster.image;
    if (!env_model.empty()) {
      const auto env = uvtex::load_env_model(env_model);
      x_ren = uvtex::fuse(x_ren, env->predict(x_ren.pixels));
    }
    uvtex::Image<double> bg(image_size, image_size, 3);
    if (!background.empty()) {
      bg = uvtex::read_png(background);
      uvtex::require_same_shape(bg, x_ren.pixels, "--background");
    }
    const auto out_img = uvtex::apply_weather(uvtex::composite(x_ren, bg), x_ren.foreground, w);
    if (auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
    uvtex::write_png(out, out_img);
    std::cout << "wrote " << out << " (" << x_ren.foreground.count() << " vehicle pixels)\n";
    (void)cmd;
    return kOk;
  }
};

/// Expands --config FILE into --key=value flags placed right after the
/// subcommand, so explicit flags later on the command line take precedence.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  for (std::size_t i = 1; i < args.size(); ++i) {
    std::string file;
    std::size_t erase = 0;
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[i + 1];
      erase = 2;
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
      erase = 1;
    } else {
      continue;
    }
    args.erase(args.begin() + static_cast<long>(i), args.begin() + static_cast<long>(i + erase));
    json j = uvtex::read_json_file(file);
    if (j.contains("arguments") && j["arguments"].is_object()) j = j["arguments"];  // a run manifest
    if (!j.is_object()) throw uvtex::InputError("config file must hold a JSON object");
    std::vector<std::string> injected;
    for (const auto& [key, value] : j.items()) {
      std::string v = value.is_string() ? value.get<std::string>() : value.dump();
      injected.push_back("--" + key + "=" + v);
    }
    args.insert(args.begin() + 2, injected.begin(), injected.end());
    break;
  }
  return args;
}

int run(std::vector<std::string> args);

int replay(const std::string& manifest_path, const std::string& out_override) {
  const json m = uvtex::read_json_file(manifest_path);
  if (!m.contains("command") || !m.contains("arguments"))
    throw uvtex::InputError("not a run manifest: " + manifest_path);
  std::vector<std::string> args{"uvtex", m["command"].get<std::string>()};
  for (const auto& [key, value] : m["arguments"].items()) {
    std::string v = value.is_string() ? value.get<std::string>() : value.dump();
    if ((key == "out-dir" || key == "out") && !out_override.empty()) v = out_override;
    args.push_back("--" + key + "=" + v);
  }
  return run(args);
}

int run(std::vector<std::string> args) {
  CLI::App app{"Differentiable UV texture sampling, rendering and adversarial texture optimization"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  CoverageCmd coverage;
  auto* cov = app.add_subcommand("coverage", "Which UV pixels a sampler can optimize");
  cov->add_option("mesh,--mesh", coverage.mesh, "OBJ mesh")->required();
  cov->add_option("--uv-size", coverage.uv_size, "UV map width and height")->capture_default_str();
  cov->add_option("--ts", coverage.ts, "Facet texture size")->capture_default_str();
  cov->add_option("--method", coverage.method, "tensor-traversal or uv-traversal")->capture_default_str();
  cov->add_option("--out-dir", coverage.out_dir)->capture_default_str();

  GenScenesCmd gen;
  auto* gs = app.add_subcommand("gen-scenes", "Render a synthetic multi-weather scene grid");
  gs->add_option("mesh,--mesh", gen.mesh, "OBJ mesh")->required();
  gs->add_option("--uv", gen.uv_png, "UV texture PNG (default: white)");
  gs->add_option("--uv-size", gen.uv_size)->capture_default_str();
  gs->add_option("--ts", gen.ts)->capture_default_str();
  gs->add_option("--out-dir", gen.out_dir)->capture_default_str();
  gs->add_flag("--jitter", gen.jitter, "Random camera perturbations");
  gs->add_option("--seed", gen.seed)->capture_default_str();
  gen.views.add_to(gs);

  GenPairsCmd pairs;
  auto* gp = app.add_subcommand("gen-pairs", "Render environment ground-truth pairs");
  gp->add_option("mesh,--mesh", pairs.mesh, "OBJ mesh")->required();
  gp->add_option("--ts", pairs.ts)->capture_default_str();
  gp->add_option("--out-dir", pairs.out_dir)->capture_default_str();
  gp->add_option("--colors", pairs.colors, "Semicolon-separated r,g,b colors")->capture_default_str();
  gp->add_option("--cache-dir", pairs.cache_dir, "Offline render cache directory");
  pairs.views.add_to(gp);

  FitEnvCmd fit;
  auto* fe = app.add_subcommand("fit-env", "Fit an environment model to ground-truth pairs");
  fe->add_option("dataset,--dataset", fit.dataset, "Directory of pair_* samples")->required();
  fe->add_option("--model", fit.model, "global_scalar or per_pixel_affine")->capture_default_str();
  fe->add_option("--lr", fit.lr)->capture_default_str();
  fe->add_option("--eta", fit.eta, "Convergence threshold")->capture_default_str();
  fe->add_option("--gamma", fit.gamma, "Loss smoothing factor")->capture_default_str();
  fe->add_option("--epochs", fit.epochs)->capture_default_str();
  fe->add_option("--optimizer", fit.optimizer, "adam or gd")->capture_default_str();
  fe->add_option("--out-dir", fit.out_dir)->capture_default_str();

  AttackCmd attack;
  auto* at = app.add_subcommand("attack", "Optimize an adversarial UV texture");
  at->add_option("scene-dir,--scene-dir", attack.scene_dir, "Directory of scene_* samples")->required();
  at->add_option("mesh,--mesh", attack.mesh, "OBJ mesh")->required();
  at->add_option("--env-model", attack.env_model, "Fitted environment model JSON")->required();
  at->add_option("--alpha", attack.alpha)->capture_default_str();
  at->add_option("--beta", attack.beta)->capture_default_str();
  at->add_option("--lr", attack.lr)->capture_default_str();
  at->add_option("--epochs", attack.epochs)->capture_default_str();
  at->add_option("--seed", attack.seed)->capture_default_str();
  at->add_option("--optimizer", attack.optimizer, "gd or adam")->capture_default_str();
  at->add_option("--sampler", attack.sampler, "uv-traversal or tensor-traversal")->capture_default_str();
  at->add_option("--ts", attack.ts)->capture_default_str();
  at->add_option("--uv-size", attack.uv_size)->capture_default_str();
  at->add_flag("--no-roa", attack.no_roa, "Disable random output augmentation");
  at->add_option("--detector-seed", attack.detector_seed)->capture_default_str();
  at->add_option("--detector-scale", attack.detector_scale)->capture_default_str();
  at->add_option("--out-dir", attack.out_dir)->capture_default_str();

  RenderCmd render;
  auto* rd = app.add_subcommand("render", "Render a textured mesh for inspection");
  rd->add_option("mesh,--mesh", render.mesh, "OBJ mesh")->required();
  rd->add_option("uv,--uv", render.uv_png, "UV texture PNG")->required();
  rd->add_option("--cam", render.cam, "azimuth,elevation,distance")->capture_default_str();
  rd->add_option("--image-size", render.image_size)->capture_default_str();
  rd->add_option("--fov", render.fov)->capture_default_str();
  rd->add_option("--weather", render.weather, "sun_altitude,fog_density")->capture_default_str();
  rd->add_option("--fog-color", render.fog_color)->capture_default_str();
  rd->add_option("--env-model", render.env_model, "Environment model JSON");
  rd->add_option("--background", render.background, "Background PNG (default black)");
  rd->add_option("--ts", render.ts)->capture_default_str();
  rd->add_option("--out", render.out)->capture_default_str();

  std::string manifest_path, replay_out;
  auto* rp = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  rp->add_option("manifest", manifest_path)->required();
  rp->add_option("--out-dir", replay_out, "Override the recorded output location");

  for (CLI::App* sub : app.get_subcommands({}))
    sub->add_option("--config", "JSON file supplying any flag; explicit flags win");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(std::move(argv_rev));
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  if (*cov) return coverage.run(cov);
  if (*gs) return gen.run(gs);
  if (*gp) return pairs.run(gp);
  if (*fe) return fit.run(fe);
  if (*at) return attack.run(at);
  if (*rd) return render.run(rd);
  if (*rp) return replay(manifest_path, replay_out);
  return kInputError;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(expand_config(std::vector<std::string>(argv, argv + argc)));
  } catch (const uvtex::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const uvtex::NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kAttackFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
}
