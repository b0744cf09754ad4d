#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "starpose/datasynth.hpp"
#include "starpose/errors.hpp"
#include "starpose/stpg.hpp"

using namespace starpose;

namespace {

const char* tmp_dir() {
  static std::string dir = [] {
    auto d = std::filesystem::temp_directory_path() / "starpose_datasynth_test";
    std::filesystem::create_directories(d);
    return d.string();
  }();
  return dir.c_str();
}

}  // namespace

TEST_CASE("ground truth satisfies the physical invariants by construction") {
  SynthConfig cfg;
  cfg.num_sequences = 3;
  cfg.frames = 24;
  const Dataset ds = synth_dataset(cfg, 7);
  const EnergyWeights w;

  for (int s = 0; s < 3; ++s) {
    const auto base_lengths = bone_lengths(ds.seq3d[s].frames[0], ds.topology);
    for (int t = 0; t < cfg.frames; ++t) {
      const Pose3d& gt = ds.seq3d[s].frames[t];

      // Constant bone lengths across frames.
      const auto lengths = bone_lengths(gt, ds.topology);
      for (std::size_t q = 0; q < lengths.size(); ++q) {
        CHECK(std::abs(lengths[q] - base_lengths[q]) <= 1e-9 * base_lengths[q]);
      }

      // Exact left/right symmetry (within kinematic rounding).
      CHECK(loss_symmetry(gt, ds.topology) <= 1e-9);

      // Zero reprojection residual at zero pixel noise.
      GuidanceContext ctx;
      ctx.topology = ds.topology;
      ctx.intrinsics = ds.camera;
      ctx.observed_2d = ds.seq2d[s].frames[t];
      ctx.root_position = ds.seq3d[s].root_trajectory[t];
      CHECK(loss_reprojection(gt, ctx) <= 1e-9);
    }

    // Window-based bone variation vanishes on ground truth.
    std::vector<Pose3d> window(ds.seq3d[s].frames.begin(), ds.seq3d[s].frames.begin() + 5);
    CHECK(loss_bone_variance(window, ds.seq3d[s].frames[5], ds.topology) <= 1e-9);
  }
}

TEST_CASE("generation is bit-deterministic per seed") {
  SynthConfig cfg;
  cfg.num_sequences = 2;
  cfg.frames = 10;
  cfg.noise_px = 1.5;
  const Dataset a = synth_dataset(cfg, 99);
  const Dataset b = synth_dataset(cfg, 99);
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 10; ++t) {
      CHECK(a.seq3d[s].frames[t].xyz == b.seq3d[s].frames[t].xyz);
      CHECK(a.seq2d[s].frames[t].uv == b.seq2d[s].frames[t].uv);
    }
  }
  const Dataset c = synth_dataset(cfg, 100);
  CHECK(a.seq3d[0].frames[0].xyz != c.seq3d[0].frames[0].xyz);
}

TEST_CASE("pixel noise strictly increases the expected reprojection loss") {
  SynthConfig clean_cfg;
  clean_cfg.num_sequences = 2;
  clean_cfg.frames = 30;
  SynthConfig noisy_cfg = clean_cfg;
  noisy_cfg.noise_px = 2.0;

  const Dataset clean = synth_dataset(clean_cfg, 5);
  const Dataset noisy = synth_dataset(noisy_cfg, 5);

  double clean_lp = 0.0, noisy_lp = 0.0;
  for (int s = 0; s < 2; ++s) {
    for (int t = 0; t < 30; ++t) {
      GuidanceContext ctx;
      ctx.topology = clean.topology;
      ctx.intrinsics = clean.camera;
      ctx.root_position = clean.seq3d[s].root_trajectory[t];
      ctx.observed_2d = clean.seq2d[s].frames[t];
      clean_lp += loss_reprojection(clean.seq3d[s].frames[t], ctx);
      ctx.observed_2d = noisy.seq2d[s].frames[t];
      noisy_lp += loss_reprojection(noisy.seq3d[s].frames[t], ctx);
    }
  }
  CHECK(noisy_lp > clean_lp + 1.0);
}

TEST_CASE("pose files round-trip bit-exactly") {
  SynthConfig cfg;
  cfg.num_sequences = 1;
  cfg.frames = 6;
  cfg.noise_px = 0.7;
  const Dataset ds = synth_dataset(cfg, 13);
  const auto base = std::filesystem::path(tmp_dir());

  const std::string p3 = (base / "roundtrip.poses3d.json").string();
  save_seq3d(p3, ds.seq3d[0]);
  const PoseSeq3d back3 = load_seq3d(p3);
  CHECK(back3.fps == ds.seq3d[0].fps);
  CHECK(back3.joint_names == ds.seq3d[0].joint_names);
  CHECK(back3.root_trajectory == ds.seq3d[0].root_trajectory);
  REQUIRE(back3.frame_count() == 6);
  for (int t = 0; t < 6; ++t) CHECK(back3.frames[t].xyz == ds.seq3d[0].frames[t].xyz);

  const std::string p2 = (base / "roundtrip.poses2d.json").string();
  save_seq2d(p2, ds.seq2d[0]);
  const PoseSeq2d back2 = load_seq2d(p2);
  REQUIRE(back2.frame_count() == 6);
  for (int t = 0; t < 6; ++t) CHECK(back2.frames[t].uv == ds.seq2d[0].frames[t].uv);
  CHECK(back2.has_intrinsics);
  CHECK(back2.intrinsics.fx == ds.camera.fx);
  CHECK(back2.root_trajectory == ds.seq2d[0].root_trajectory);
}

TEST_CASE("malformed pose files are rejected with a located parse error") {
  const auto base = std::filesystem::path(tmp_dir());
  const std::string path = (base / "truncated.poses3d.json").string();
  {
    std::ofstream out(path);
    out << "{\"format\": \"starpose-poseseq3d\", \"version\": 1, \"fps\": 25.0, \"joi";
  }
  try {
    load_seq3d(path);
    FAIL("expected a parse error");
  } catch (const DataError& e) {
    // The message carries the failure offset.
    CHECK(std::string(e.what()).find("byte") != std::string::npos);
  }
}

TEST_CASE("non-finite coordinates are rejected on save and on load") {
  SynthConfig cfg;
  cfg.num_sequences = 1;
  cfg.frames = 2;
  Dataset ds = synth_dataset(cfg, 17);
  const auto base = std::filesystem::path(tmp_dir());
  const std::string path = (base / "nan.poses3d.json").string();

  PoseSeq3d bad = ds.seq3d[0];
  bad.frames[0].joint(3)[1] = std::nan("");
  CHECK_THROWS_AS(save_seq3d(path, bad), NumericalError);

  // JSON null in place of a number is rejected on load.
  {
    std::ofstream out(path);
    out << R"({"format":"starpose-poseseq3d","version":1,"fps":25.0,"joints":["a"],)"
        << R"("root_trajectory":[[0,0,0]],"frames":[[[null,0,0]]]})";
  }
  CHECK_THROWS_AS(load_seq3d(path), DataError);
}

TEST_CASE("dataset write/load round trip through the manifest") {
  SynthConfig cfg;
  cfg.num_sequences = 4;
  cfg.frames = 8;
  const Dataset ds = synth_dataset(cfg, 19);
  const auto dir = (std::filesystem::path(tmp_dir()) / "dataset").string();
  const std::string manifest = write_dataset(ds, dir);
  const Dataset back = load_dataset(manifest);

  CHECK(back.train_indices == ds.train_indices);
  CHECK(back.test_indices == ds.test_indices);
  CHECK(back.topology.parents == ds.topology.parents);
  CHECK(back.camera.fx == ds.camera.fx);
  REQUIRE(back.seq3d.size() == 4);
  for (int s = 0; s < 4; ++s) {
    for (int t = 0; t < 8; ++t) {
      CHECK(back.seq3d[s].frames[t].xyz == ds.seq3d[s].frames[t].xyz);
      CHECK(back.seq2d[s].frames[t].uv == ds.seq2d[s].frames[t].uv);
    }
  }
}

TEST_CASE("bad bone table is rejected") {
  SynthConfig cfg;
  cfg.bone_lengths_mm = {100.0, 200.0};
  CHECK_THROWS_AS(synth_dataset(cfg, 1), DataError);
}
