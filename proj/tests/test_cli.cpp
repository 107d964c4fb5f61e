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

// Drives the command-line tool as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "uvtex/uvtex.hpp"

namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = UVTEX_FIXTURES;

int cli(const std::string& args) {
  const std::string cmd = std::string("\"") + UVTEX_CLI + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("uvtex_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Small scene set plus a fitted model for attack runs.
  void prepare_attack_inputs() {
    ASSERT_EQ(cli("gen-scenes " + q(kFixtures / "cube.obj") + " --image-size 32 --out-dir " +
                  q(dir_ / "scenes")),
              0);
    ASSERT_EQ(cli("gen-pairs " + q(kFixtures / "cube.obj") +
                  " --image-size 32 --sun 30 --fog 20 --azimuths 0,90 --colors \"1,0,0;0,0,1\" --out-dir " +
                  q(dir_ / "pairs")),
              0);
    ASSERT_EQ(cli("fit-env " + q(dir_ / "pairs") + " --epochs 50 --out-dir " + q(dir_ / "env")), 0);
  }

  std::string attack_args(const fs::path& out) const {
    return "attack " + q(dir_ / "scenes") + " " + q(kFixtures / "cube.obj") + " --env-model " +
           q(dir_ / "env" / "env_model.json") + " --epochs 5 --seed 3 --uv-size 32 --out-dir " +
           q(out);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, CoverageJsonOnQuad) {
  for (const std::string method : {"tensor-traversal", "uv-traversal"}) {
    const fs::path out = dir_ / method;
    ASSERT_EQ(cli("coverage " + q(kFixtures / "quad.obj") + " --uv-size 64 --ts 2 --method " +
                  method + " --out-dir " + q(out)),
              0);
    const auto j = uvtex::read_json_file(out / "coverage.json");
    EXPECT_EQ(j.at("owned").get<int>() + j.at("unowned").get<int>(), 4096);
    EXPECT_EQ(j.at("optimized").get<int>() + j.at("unoptimized").get<int>(),
              j.at("owned").get<int>());
    if (method == "tensor-traversal")
      EXPECT_GT(j.at("unoptimized").get<int>(), 0);
    else
      EXPECT_EQ(j.at("unoptimized").get<int>(), 0);
    EXPECT_TRUE(fs::exists(out / "coverage.png"));
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
  }
}

TEST_F(Cli, MissingMeshExitsWithInputError) {
  EXPECT_EQ(cli("coverage " + q(dir_ / "nope.obj") + " --out-dir " + q(dir_ / "o")), 2);
}

TEST_F(Cli, MalformedMeshExitsWithInputError) {
  std::ofstream(dir_ / "bad.obj") << "v 0 0 0\nv 1 0 0\nf 1 2 3\n";
  EXPECT_EQ(cli("coverage " + q(dir_ / "bad.obj") + " --out-dir " + q(dir_ / "o")), 2);
}

TEST_F(Cli, UnknownFlagAndMissingSubcommandFail) {
  EXPECT_EQ(cli(""), 2);
  EXPECT_EQ(cli("coverage " + q(kFixtures / "quad.obj") + " --bogus 1"), 2);
  EXPECT_EQ(cli("--help"), 0);
}

TEST_F(Cli, AttackRequiresEnvModel) {
  ASSERT_EQ(cli("gen-scenes " + q(kFixtures / "cube.obj") + " --image-size 32 --out-dir " +
                q(dir_ / "scenes")),
            0);
  EXPECT_EQ(cli("attack " + q(dir_ / "scenes") + " " + q(kFixtures / "cube.obj") +
                " --epochs 1 --out-dir " + q(dir_ / "atk")),
            2);
  EXPECT_FALSE(fs::exists(dir_ / "atk" / "uv.png"));
}

TEST_F(Cli, ConfigFileSuppliesFlagsAndExplicitFlagsWin) {
  std::ofstream(dir_ / "cfg.json") << R"({"uv-size": 16, "ts": 3, "method": "tensor-traversal"})";
  ASSERT_EQ(cli("coverage " + q(kFixtures / "quad.obj") + " --config " + q(dir_ / "cfg.json") +
                " --ts 2 --out-dir " + q(dir_ / "o")),
            0);
  const auto j = uvtex::read_json_file(dir_ / "o" / "coverage.json");
  EXPECT_EQ(j.at("width").get<int>(), 16);
  EXPECT_EQ(j.at("texture_size").get<int>(), 2);
  EXPECT_EQ(j.at("method").get<std::string>(), "tensor-traversal");
}

TEST_F(Cli, GenScenesWritesGrid) {
  ASSERT_EQ(cli("gen-scenes " + q(kFixtures / "cube.obj") +
                " --image-size 32 --azimuths 0,120 --elevations 10,30 --sun 90,30 --fog 0 --placements 2 --out-dir " +
                q(dir_ / "s")),
            0);
  EXPECT_EQ(uvtex::list_dataset_dirs(dir_ / "s").size(), 2u * 2u * 2u * 2u);
  EXPECT_EQ(uvtex::load_scene_set(dir_ / "s").size(), 16u);
}

TEST_F(Cli, FitEnvOutputs) {
  prepare_attack_inputs();
  EXPECT_TRUE(fs::exists(dir_ / "env" / "loss_history.csv"));
  const auto model = uvtex::load_env_model(dir_ / "env" / "env_model.json");
  ASSERT_NE(model, nullptr);
  const auto m = uvtex::read_json_file(dir_ / "env" / "manifest.json");
  EXPECT_EQ(m.at("command").get<std::string>(), "fit-env");
}

TEST_F(Cli, AttackIsDeterministicAndReplayable) {
  prepare_attack_inputs();
  ASSERT_EQ(cli(attack_args(dir_ / "a")), 0);
  ASSERT_EQ(cli(attack_args(dir_ / "b")), 0);
  const std::string ha = uvtex::git_blob_hash_file(dir_ / "a" / "uv.png");
  EXPECT_EQ(ha, uvtex::git_blob_hash_file(dir_ / "b" / "uv.png"));
  const auto m = uvtex::read_json_file(dir_ / "a" / "manifest.json");
  EXPECT_EQ(m.at("outputs").at("uv_hash").get<std::string>(), ha);
  EXPECT_EQ(m.at("seed").get<int>(), 3);
  EXPECT_EQ(m.at("input_hashes").at("scenes").size(), 4u);

  ASSERT_EQ(cli("replay " + q(dir_ / "a" / "manifest.json") + " --out-dir " + q(dir_ / "r")), 0);
  EXPECT_EQ(uvtex::git_blob_hash_file(dir_ / "r" / "uv.png"), ha);
}

TEST_F(Cli, DifferentSeedsGiveDifferentTextures) {
  prepare_attack_inputs();
  ASSERT_EQ(cli(attack_args(dir_ / "a")), 0);
  ASSERT_EQ(cli(attack_args(dir_ / "b") + " --seed 4"), 0);
  EXPECT_NE(uvtex::git_blob_hash_file(dir_ / "a" / "uv.png"),
            uvtex::git_blob_hash_file(dir_ / "b" / "uv.png"));
}

TEST_F(Cli, RenderWritesImage) {
  const uvtex::UVMap<double> uv(16, 16, 3, 0.5);
  uvtex::write_png(dir_ / "uv.png", uv);
  ASSERT_EQ(cli("render " + q(kFixtures / "cube.obj") + " " + q(dir_ / "uv.png") +
                " --cam 30,20,5 --image-size 32 --out " + q(dir_ / "r.png")),
            0);
  const auto img = uvtex::read_png(dir_ / "r.png");
  EXPECT_EQ(img.width(), 32);
}
