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


// End-to-end walk through the library: coverage of both samplers, a small
// scene grid, and a short texture attack against the toy detector.
//
//   uvtex_quickstart [mesh.obj]

#include <iostream>
#include <vector>

#include "uvtex/uvtex.hpp"

int main(int argc, char** argv) {
  const char* path = argc > 1 ? argv[1] : UVTEX_DEMO_MESH;
  const uvtex::Mesh mesh = uvtex::load_mesh(path);
  std::cout << "mesh: " << mesh.facet_count() << " facets\n";

  for (auto kind : {uvtex::SamplerKind::TensorTraversal, uvtex::SamplerKind::UvTraversal}) {
    const auto cov = uvtex::coverage_map(mesh, 64, 64, 2, kind);
    std::cout << uvtex::to_string(kind) << ": " << uvtex::coverage_summary(cov).dump() << "\n";
  }

  const uvtex::UVMap<double> white(64, 64, 3, 1.0);
  const std::vector<uvtex::WeatherParams> weathers{{90.0, 0.0}, {30.0, 25.0}};
  std::vector<uvtex::CameraTransform> cams;
  for (double az : {30.0, 210.0}) cams.push_back({az, 25.0, 6.0, 64, 64, 45.0});
  const std::vector<uvtex::Vec2> placements{{0.0, 0.0}};
  const auto scenes = uvtex::generate_grid(mesh, white, nullptr, weathers, cams, placements);
  std::cout << "scenes: " << scenes.size() << "\n";

  const uvtex::ToyDetector detector;
  const uvtex::GlobalScalarEnvModel env;
  uvtex::AttackConfig cfg;
  cfg.epochs = 25;
  cfg.optimizer = uvtex::OptimizerKind::Adam;
  const auto result = uvtex::optimize_texture(scenes, mesh, detector, env, cfg);
  const auto& first = result.trace.front();
  const auto& last = result.trace.back();
  std::cout << "max H_d: " << first.max_detection_score << " -> " << last.max_detection_score
            << " over " << result.trace.size() << " steps\n";
  uvtex::write_png("quickstart_uv.png", result.uv);
  std::cout << "wrote quickstart_uv.png\n";
}
