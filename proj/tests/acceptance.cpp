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

// Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
// criterion fails, except those listed in kKnownLimitations (see README).

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "uvtex/uvtex.hpp"

namespace fs = std::filesystem;
using uvtex::FacetTextureTensor;
using uvtex::Image;

namespace {

const fs::path kFixtures = UVTEX_FIXTURES;

// Criteria that fail for documented reasons and do not fail the run.
const std::set<int> kKnownLimitations = {};

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(4);
  ss << v;
  return ss.str();
}

FacetTextureTensor<double> random_tensor(int nf, int ts, std::uint64_t seed, double lo, double hi) {
  uvtex::Rng rng(seed);
  FacetTextureTensor<double> t(nf, ts);
  for (double& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

struct Fixture {
  std::string name;
  uvtex::Mesh mesh;
  int wt, ht, ts;
};

std::vector<Fixture> fixtures() {
  std::vector<Fixture> out;
  out.push_back({"quad", uvtex::load_mesh(kFixtures / "quad.obj"), 16, 16, 4});
  out.push_back({"cube", uvtex::load_mesh(kFixtures / "cube.obj"), 32, 32, 4});
  out.push_back({"half_square", uvtex::load_mesh(kFixtures / "half_square.obj"), 12, 20, 3});
  const int dims[][3] = {{8, 8, 4}, {16, 12, 2}, {32, 32, 8}, {20, 28, 3}};
  std::uint64_t seed = 200;
  for (const auto& d : dims) {
    out.push_back({"random" + std::to_string(seed), oracle::random_mesh(3 + seed % 9, seed), d[0],
                   d[1], d[2]});
    ++seed;
  }
  return out;
}

std::vector<uvtex::CameraTransform> views() {
  return {{30.0, 25.0, 6.0}, {210.0, -10.0, 5.0, 48, 32}, {0.0, 90.0, 4.0},
          {123.0, 40.0, 7.0, 64, 64, 30.0}};
}

std::vector<uvtex::Scene> cube_scenes(const uvtex::Mesh& mesh, int size, double distance,
                                      const std::vector<std::array<double, 2>>& az_el) {
  const uvtex::UVMap<double> white(64, 64, 3, 1.0);
  const std::vector<uvtex::WeatherParams> weathers{{90.0, 0.0}};
  std::vector<uvtex::CameraTransform> cams;
  for (const auto& v : az_el) cams.push_back({v[0], v[1], distance, size, size, 45.0});
  const std::vector<uvtex::Vec2> placements{{0.0, 0.0}};
  return uvtex::generate_grid(mesh, white, nullptr, weathers, cams, placements);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + UVTEX_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

// 1. Samplers, ownership and rasterizer agree with brute-force oracles.
Outcome oracle_equivalence() {
  Timer t;
  double worst = 0.0;
  std::size_t ownership_mismatch = 0, facet_mismatch = 0;
  const auto fx = fixtures();
  std::uint64_t seed = 1;
  for (const auto& f : fx) {
    const auto uv = oracle::random_image(f.wt, f.ht, seed++);
    const auto index = uvtex::build_uv_index(f.mesh, f.wt, f.ht);
    const auto own = oracle::ownership(f.mesh, f.wt, f.ht);
    for (std::size_t p = 0; p < own.owner.size(); ++p) {
      if (index.owner[p] != own.owner[p]) {
        ++ownership_mismatch;
        continue;
      }
      if (own.owner[p] >= 0)
        for (int k = 0; k < 3; ++k)
          worst = std::max(worst, std::abs(index.barycentric[p][k] - own.bary[p][k]));
    }
    worst = std::max(worst, oracle::max_abs_diff(uvtex::sample_tensor_traversal(uv, f.mesh, f.ts).values,
                                                 oracle::tensor_traversal(uv, f.mesh, f.ts).values));
    const auto got = uvtex::sample_uv_traversal(uv, f.mesh, index, f.ts);
    const auto ref = oracle::uv_traversal(uv, f.mesh, f.ts);
    worst = std::max(worst, oracle::max_abs_diff(got.texture.values, ref.texture.values));
    worst = std::max(worst, oracle::max_abs_diff(got.weights.weights, ref.weights));
    for (const auto& cam : views()) {
      const auto tex = random_tensor(f.mesh.facet_count(), f.ts, seed++, 0.0, 1.0);
      const auto r = uvtex::rasterize(f.mesh, tex, cam);
      const auto o = oracle::rasterize(f.mesh, tex, cam);
      for (std::size_t p = 0; p < o.facet.size(); ++p) {
        if (r.tape.facet[p] != o.facet[p]) {
          ++facet_mismatch;
          continue;
        }
        for (int c = 0; c < 3; ++c)
          worst = std::max(worst, std::abs(r.image.pixels.data()[p * 3 + c] - o.image.data()[p * 3 + c]));
      }
    }
  }
  const double secs = t.seconds();
  return {worst <= 1e-12 && ownership_mismatch == 0 && facet_mismatch == 0 && secs < 10.0,
          std::to_string(fx.size()) + " fixtures, max diff " + fmt(worst) + ", ownership mismatches " +
              std::to_string(ownership_mismatch) + ", raster mismatches " +
              std::to_string(facet_mismatch) + ", " + fmt(secs) + " s"};
}

// 2. Every backward pass agrees with central differences.
Outcome finite_differences() {
  Timer t;
  double worst_linear = 0.0, worst_chain = 0.0;
  int checked = 0;
  auto note = [&](const oracle::GradCheck& g, double& worst) {
    worst = std::max(worst, g.worst);
    checked += g.checked;
  };

  // Samplers, through a random linear functional of the texture.
  const auto cube = uvtex::load_mesh(kFixtures / "cube.obj");
  const auto index = uvtex::build_uv_index(cube, 32, 32);
  for (auto kind : {uvtex::SamplerKind::TensorTraversal, uvtex::SamplerKind::UvTraversal}) {
    const uvtex::TextureSampler s(cube, index, 4, kind);
    const auto uv = oracle::random_image(32, 32, 3);
    const auto g = random_tensor(cube.facet_count(), 4, 4, -1.0, 1.0);
    auto f = [&](const std::vector<double>& x) {
      Image<double> img(32, 32, 3);
      img.data() = x;
      return oracle::dot(g.values, s.forward(img).values);
    };
    note(oracle::check_gradient(uv.data(), s.backward(g).data(), f, 60, 5), worst_linear);
  }

  // Rasterizer.
  {
    const uvtex::CameraTransform cam{30.0, 25.0, 6.0};
    const auto tape = uvtex::trace_visibility(cube, 4, cam);
    const auto up = oracle::random_image(cam.image_width, cam.image_height, 6, -1, 1);
    const auto tex = random_tensor(12, 4, 7, 0.0, 1.0);
    auto f = [&](const std::vector<double>& x) {
      FacetTextureTensor<double> tt(12, 4);
      tt.values = x;
      return oracle::dot(up.data(), uvtex::rasterize(cube, tt, cam).image.pixels.data());
    };
    note(oracle::check_gradient(tex.values, uvtex::backward_rasterize(tape, up).values, f, 60, 8),
         worst_linear);
  }

  // Environment fusion, all three inputs.
  {
    const auto fg = oracle::disc_mask(16, 16, 6);
    const auto x = oracle::masked_render(oracle::random_image(16, 16, 9, 0.2, 0.6), fg);
    uvtex::EnvFeatureMaps<double> ef{oracle::random_image(16, 16, 10, 0.5, 1.2),
                                     oracle::random_image(16, 16, 11, -0.1, 0.1)};
    const auto up = oracle::random_image(16, 16, 12, -1, 1);
    const auto g = uvtex::backward_fuse(x, ef, up);
    auto via_x = [&](const std::vector<double>& v) {
      auto xx = x;
      xx.pixels.data() = v;
      return oracle::dot(up.data(), uvtex::fuse(xx, ef).pixels.data());
    };
    auto via_mul = [&](const std::vector<double>& v) {
      auto e = ef;
      e.mul.data() = v;
      return oracle::dot(up.data(), uvtex::fuse(x, e).pixels.data());
    };
    auto via_add = [&](const std::vector<double>& v) {
      auto e = ef;
      e.add.data() = v;
      return oracle::dot(up.data(), uvtex::fuse(x, e).pixels.data());
    };
    note(oracle::check_gradient(x.pixels.data(), g.x_nr.data(), via_x, 60, 13), worst_linear);
    note(oracle::check_gradient(ef.mul.data(), g.mul.data(), via_mul, 60, 14), worst_linear);
    note(oracle::check_gradient(ef.add.data(), g.add.data(), via_add, 60, 15), worst_linear);
  }

  // Random output augmentation.
  {
    const auto img = oracle::random_image(32, 32, 16, 0.2, 0.8);
    const auto up = oracle::random_image(32, 32, 17, -1, 1);
    uvtex::RoaParams p;
    p.seed = 3;
    const auto s = uvtex::sample_roa(p, 2);
    auto f = [&](const std::vector<double>& v) {
      auto m = img;
      m.data() = v;
      return oracle::dot(up.data(), uvtex::roa_apply(m, s).data());
    };
    note(oracle::check_gradient(img.data(), uvtex::backward_roa(img, s, up).data(), f, 60, 18),
         worst_linear);
  }

  // Losses: environment BCE, smoothness, environment model parameters.
  {
    const auto p = oracle::random_image(10, 10, 19, 0.05, 0.95), tgt = oracle::random_image(10, 10, 20);
    auto f = [&](const std::vector<double>& v) {
      auto m = p;
      m.data() = v;
      return uvtex::efe_loss(m, tgt, 3.0);
    };
    note(oracle::check_gradient(p.data(), uvtex::efe_loss_grad(p, tgt, 3.0).data(), f, 60, 21),
         worst_linear);
    const auto uv = oracle::random_image(9, 8, 22);
    auto fs_ = [&](const std::vector<double>& v) {
      auto m = uv;
      m.data() = v;
      return uvtex::smooth_loss(m);
    };
    note(oracle::check_gradient(uv.data(), uvtex::smooth_loss_grad(uv).data(), fs_, 60, 23),
         worst_linear);
    const auto pairs = oracle::synthetic_pairs(0.6, 0.2, 2, {{1, 0.3, 0.3}, {0.3, 0.3, 1}});
    uvtex::Rng rng(24);
    std::vector<double> qv(12);
    for (double& v : qv) v = rng.uniform(0.1, 0.5);
    const uvtex::PerPixelAffineEnvModel model(qv);
    auto fe = [&](const std::vector<double>& params) {
      return uvtex::env_objective(uvtex::PerPixelAffineEnvModel(params), pairs).loss;
    };
    // Clamped outputs put kinks within 1e-4 of this point, so use a finer step.
    note(oracle::check_gradient(qv, uvtex::env_objective(model, pairs).grad, fe, 60, 25, 1e-6),
         worst_chain);
  }

  // Full chain: UV map -> sampler -> rasterizer -> fusion -> ROA -> detector -> loss.
  {
    const auto scenes = cube_scenes(cube, 64, 5.0, {{30.0, 25.0}, {120.0, 25.0}});
    const uvtex::ToyDetector det;
    const uvtex::GlobalScalarEnvModel env(0.9, 0.05);
    for (auto sampler : {uvtex::SamplerKind::UvTraversal, uvtex::SamplerKind::TensorTraversal}) {
      uvtex::AttackConfig cfg;
      cfg.uv_width = cfg.uv_height = 32;
      cfg.sampler = sampler;
      cfg.roa.seed = 5;
      const uvtex::AttackPipeline pipe(scenes, cube, det, env, cfg);
      const auto uv = oracle::random_image(32, 32, 26, 0.2, 0.8);
      const auto roa = pipe.roa_for_step(1);
      const auto ev = pipe.evaluate(uv, 0, roa, true);
      auto f = [&](const std::vector<double>& v) {
        auto m = uv;
        m.data() = v;
        return pipe.evaluate(m, 0, roa, false).record.total;
      };
      note(oracle::check_gradient(uv.data(), ev.grad.data(), f, 60, 27), worst_chain);
    }
  }

  const double secs = t.seconds();
  return {worst_linear < 1e-4 && worst_chain < 1e-3 && secs < 60.0,
          std::to_string(checked) + " coordinates, worst relative error " + fmt(worst_linear) +
              " (linear stages) / " + fmt(worst_chain) + " (composite), " + fmt(secs) + " s"};
}

// 3. Coverage report from the command-line tool.
Outcome coverage_report(const fs::path& tmp) {
  int tensor_unopt = -1, uv_unopt = -1;
  for (const std::string method : {"tensor-traversal", "uv-traversal"}) {
    const fs::path out = tmp / ("coverage_" + method);
    if (run_cli("coverage " + q(kFixtures / "quad.obj") + " --uv-size 64 --ts 2 --method " + method +
                " --out-dir " + q(out)) != 0)
      return {false, "coverage command failed for " + method};
    const auto j = uvtex::read_json_file(out / "coverage.json");
    (method == "uv-traversal" ? uv_unopt : tensor_unopt) = j.at("unoptimized").get<int>();
  }
  return {tensor_unopt > 0 && uv_unopt == 0, "unoptimized pixels: tensor-traversal " +
                                                 std::to_string(tensor_unopt) + ", uv-traversal " +
                                                 std::to_string(uv_unopt)};
}

// 4. Both samplers are linear and preserve constant maps.
Outcome linearity() {
  double worst_lin = 0.0, worst_const = 0.0;
  for (const auto& f : fixtures()) {
    const auto index = uvtex::build_uv_index(f.mesh, f.wt, f.ht);
    for (auto kind : {uvtex::SamplerKind::TensorTraversal, uvtex::SamplerKind::UvTraversal}) {
      const uvtex::TextureSampler s(f.mesh, index, f.ts, kind);
      const auto u = oracle::random_image(f.wt, f.ht, 1, -2, 2);
      const auto v = oracle::random_image(f.wt, f.ht, 2, -2, 2);
      Image<double> mix = u;
      for (std::size_t i = 0; i < mix.size(); ++i) mix.data()[i] = 0.7 * u.data()[i] - 1.3 * v.data()[i];
      const auto a = s.forward(u), b = s.forward(v), c = s.forward(mix);
      for (std::size_t i = 0; i < c.values.size(); ++i)
        worst_lin = std::max(worst_lin, std::abs(c.values[i] - (0.7 * a.values[i] - 1.3 * b.values[i])));
      for (double k : {0.0, 0.37, 1.0})
        for (double x : s.forward(Image<double>(f.wt, f.ht, 3, k)).values)
          worst_const = std::max(worst_const, std::abs(x - k));
    }
  }
  return {worst_lin <= 1e-9 && worst_const <= 1e-9,
          "max linearity error " + fmt(worst_lin) + ", max constant error " + fmt(worst_const)};
}

// 5. Closed-loop attack lowers the detection score.
Outcome attack_efficacy() {
  Timer t;
  const auto cube = uvtex::load_mesh(kFixtures / "cube.obj");
  // Default view set of the scene generator: four sides at 20 degrees elevation.
  const auto scenes = cube_scenes(cube, 64, 6.0, {{0.0, 20.0}, {90.0, 20.0}, {180.0, 20.0}, {270.0, 20.0}});
  uvtex::AttackConfig cfg;
  cfg.epochs = 125;  // 500 steps over 4 scenes
  cfg.learning_rate = 0.01;
  cfg.beta = 0.01;
  cfg.optimizer = uvtex::OptimizerKind::Adam;
  const auto r = uvtex::optimize_texture(scenes, cube, uvtex::ToyDetector{},
                                         uvtex::GlobalScalarEnvModel{}, cfg);
  const std::size_t n = r.trace.size(), tenth = n / 10;
  double first = 0.0, last = 0.0;
  for (std::size_t i = 0; i < tenth; ++i) {
    first += r.trace[i].max_detection_score / tenth;
    last += r.trace[n - 1 - i].max_detection_score / tenth;
  }
  const double secs = t.seconds();
  return {n == 500 && last < 0.5 * first && secs < 300.0,
          std::to_string(n) + " steps, mean max score first 10% " + fmt(first) + ", last 10% " +
              fmt(last) + " (ratio " + fmt(last / first) + "), " + fmt(secs) + " s"};
}

// 6. Environment loss, view weight and global-scalar recovery.
Outcome env_fit() {
  const Image<double> half(8, 8, 3, 0.5);
  const double loss = uvtex::efe_loss(half, half, 1.0);
  uvtex::Mask m(100, 100);
  for (int i = 0; i < 2500; ++i) m.bits[i * 4] = 1;
  const double w = uvtex::view_weight(Image<double>(100, 100, 3), m);
  const auto pairs = oracle::synthetic_pairs(0.7, 0.1, 3, {{1, 0.2, 0.2}, {0.2, 0.9, 0.3}});
  uvtex::GlobalScalarEnvModel model;
  uvtex::FitConfig cfg;
  cfg.max_epochs = 200;
  const auto r = uvtex::fit_env_model(model, pairs, cfg);
  const double em = std::abs(model.parameters()[0] - 0.7), ea = std::abs(model.parameters()[1] - 0.1);
  return {std::abs(loss - std::log(2.0)) < 1e-12 && w == 4.0 && em <= 1e-2 && ea <= 1e-2 &&
              r.history.size() <= 200,
          "loss " + fmt(loss) + ", view weight " + fmt(w) + ", fitted (" +
              fmt(model.parameters()[0]) + ", " + fmt(model.parameters()[1]) + ") vs (0.7, 0.1) in " +
              std::to_string(r.history.size()) + " epochs"};
}

// 7. Attack-side spot values.
Outcome attack_spot_values() {
  Image<double> m(2, 2, 1);
  m.at(1, 0, 0) = 1.0;
  m.at(1, 1, 0) = 1.0;
  const double sm = uvtex::smooth_loss(m);
  const double io = uvtex::iou({0, 0, 10, 10}, {5, 5, 15, 15});
  const double al = uvtex::attack_loss(0.5);
  return {std::abs(sm - 0.5) < 1e-12 && std::abs(io - 1.0 / 7.0) < 1e-12 &&
              std::abs(al - std::log(2.0)) < 1e-12,
          "smooth " + fmt(sm) + ", iou " + fmt(io) + ", attack loss " + fmt(al)};
}

// 8. Same seed and inputs give a byte-identical texture through the CLI.
Outcome reproducibility(const fs::path& tmp) {
  const auto cube = uvtex::load_mesh(kFixtures / "cube.obj");
  const auto scenes = cube_scenes(cube, 32, 5.0, {{30.0, 25.0}, {150.0, 30.0}});
  for (std::size_t i = 0; i < scenes.size(); ++i)
    uvtex::save_scene(tmp / "scenes" / ("scene_" + std::to_string(i)), scenes[i]);
  uvtex::save_env_model(tmp / "env.json", uvtex::GlobalScalarEnvModel(0.9, 0.05));
  std::string hashes[2];
  for (int run = 0; run < 2; ++run) {
    const fs::path out = tmp / ("attack_" + std::to_string(run));
    if (run_cli("attack " + q(tmp / "scenes") + " " + q(kFixtures / "cube.obj") + " --env-model " +
                q(tmp / "env.json") + " --epochs 10 --seed 7 --uv-size 32 --out-dir " + q(out)) != 0)
      return {false, "attack command failed"};
    hashes[run] = uvtex::git_blob_hash_file(out / "uv.png");
  }
  return {hashes[0] == hashes[1], "uv.png hashes " + hashes[0] + " / " + hashes[1]};
}

// 9. Grid generation yields |W| x |P| x |C| scenes.
Outcome grid_counts() {
  const auto quad = uvtex::load_mesh(kFixtures / "quad.obj");
  const uvtex::UVMap<double> uv(8, 8, 3, 0.5);
  std::mt19937 rng(42);
  int ok = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t nw = 1 + rng() % 4, nc = 1 + rng() % 4, np = 1 + rng() % 4;
    const std::vector<uvtex::WeatherParams> w(nw);
    const std::vector<uvtex::CameraTransform> cams(nc, {0.0, 90.0, 5.0, 16, 16, 45.0});
    const std::vector<uvtex::Vec2> pl(np);
    const auto scenes = uvtex::generate_grid(quad, uv, nullptr, w, cams, pl);
    ok += scenes.size() == nw * nc * np && uvtex::grid_size(nw, np, nc) == nw * nc * np;
  }
  const std::size_t full = uvtex::grid_size(uvtex::base_weather_grid().size(), 20,
                                            uvtex::camera_sweep(64, 64).size());
  return {ok == 10 && full == 40960,
          std::to_string(ok) + "/10 random grids match, 16 x 20 x 128 = " + std::to_string(full)};
}

}  // namespace

int main() {
  const fs::path tmp = fs::temp_directory_path() / "uvtex_acceptance";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"oracle equivalence", oracle_equivalence},
      {"finite-difference gradients", finite_differences},
      {"coverage report", [&] { return coverage_report(tmp); }},
      {"linearity and constant preservation", linearity},
      {"attack efficacy", attack_efficacy},
      {"environment loss and fit", env_fit},
      {"attack loss spot values", attack_spot_values},
      {"reproducible CLI attack", [&] { return reproducibility(tmp); }},
      {"scene grid counts", grid_counts},
  };

  int blocking = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const bool known = kKnownLimitations.count(id) > 0;
    std::printf("%s criterion %d: %s: %s%s\n", o.pass ? "PASS" : "FAIL", id,
                criteria[i].first.c_str(), o.detail.c_str(),
                !o.pass && known ? " [known limitation, see README]" : "");
    std::fflush(stdout);
    if (!o.pass && !known) ++blocking;
  }
  fs::remove_all(tmp);
  return blocking == 0 ? 0 : 1;
}
