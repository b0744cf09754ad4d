// End-to-end checks of the command-line tool: every command is exercised
// through a real process, and determinism is verified by byte comparison
// of repeated runs.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

namespace fs = std::filesystem;

std::string g_cli;
fs::path g_work;

int run_cli(const std::string& args) {
  const std::string cmd = g_cli + " " + args + " >> " + (g_work / "cli.log").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

const char* kTinyConfig = R"({
  "diffusion": {"steps": 50, "ddim_steps": 5},
  "gmm": {"components": 2},
  "model": {"hidden": 8, "heads": 2, "blocks": 1, "context_dim": 6, "context_embed": 8,
            "context_frames": 5, "hpim_dim": 8, "hpim_out": 4, "hpim_heads": 2,
            "step_embed_dim": 4, "history": 3},
  "guidance": {"rho": 0.02},
  "sampling": {"hypotheses": 2},
  "train": {"epochs": 2, "batch_size": 16, "lr": 1e-3, "pretrain_epochs": 5,
            "pretrain_lr": 1e-3},
  "synth": {"num_sequences": 3, "frames": 12, "train_fraction": 0.67}
})";

}  // namespace

TEST_CASE("cli end-to-end workflow") {
  const fs::path cfg_path = g_work / "run.json";
  write_file(cfg_path, kTinyConfig);
  const std::string cfg = " --config " + cfg_path.string();

  // synth: dataset generation, deterministic across runs.
  REQUIRE(run_cli("synth" + cfg + " --out " + (g_work / "data").string() + " --seed 5") == 0);
  REQUIRE(run_cli("synth" + cfg + " --out " + (g_work / "data2").string() + " --seed 5") == 0);
  CHECK(slurp(g_work / "data" / "seq000.poses2d.json") ==
        slurp(g_work / "data2" / "seq000.poses2d.json"));
  CHECK(slurp(g_work / "data" / "manifest.json") == slurp(g_work / "data2" / "manifest.json"));
  CHECK(fs::exists(g_work / "data" / "effective-config.json"));

  const std::string manifest = (g_work / "data" / "manifest.json").string();

  // fit-gmm and pretrain-context produce standalone checkpoints.
  REQUIRE(run_cli("fit-gmm" + cfg + " --in " + manifest + " --out " +
                  (g_work / "gmm.ckpt").string() + " --seed 5") == 0);
  CHECK(fs::exists(g_work / "gmm.ckpt"));
  CHECK(fs::exists(g_work / "gmm.ckpt.em_log.json"));
  CHECK(slurp(g_work / "gmm.ckpt").substr(0, 4) == "SPSE");

  REQUIRE(run_cli("pretrain-context" + cfg + " --in " + manifest + " --out " +
                  (g_work / "ctx.ckpt").string() + " --seed 5") == 0);
  CHECK(fs::exists(g_work / "ctx.ckpt"));

  // train: full pipeline at a toy budget; deterministic checkpoint bytes.
  REQUIRE(run_cli("train" + cfg + " --in " + manifest + " --out " +
                  (g_work / "model.ckpt").string() + " --seed 9") == 0);
  REQUIRE(run_cli("train" + cfg + " --in " + manifest + " --out " +
                  (g_work / "model2.ckpt").string() + " --seed 9") == 0);
  CHECK(slurp(g_work / "model.ckpt") == slurp(g_work / "model2.ckpt"));
  CHECK(fs::exists(g_work / "model.ckpt.training_log.json"));

  // infer: identical output files for identical seeds.
  write_file(g_work / "infer.json",
             std::string(kTinyConfig).insert(1, "\n  \"model_checkpoint\": \"" +
                                                    (g_work / "model.ckpt").string() + "\","));
  const std::string icfg = " --config " + (g_work / "infer.json").string();
  const std::string in2d = (g_work / "data" / "seq002.poses2d.json").string();
  REQUIRE(run_cli("infer" + icfg + " --in " + in2d + " --out " +
                  (g_work / "pred_a.poses3d.json").string() + " --seed 7") == 0);
  REQUIRE(run_cli("infer" + icfg + " --in " + in2d + " --out " +
                  (g_work / "pred_b.poses3d.json").string() + " --seed 7") == 0);
  CHECK(slurp(g_work / "pred_a.poses3d.json") == slurp(g_work / "pred_b.poses3d.json"));
  CHECK(fs::exists(g_work / "pred_a.poses3d.json.trace.json"));

  // A different seed changes the output.
  REQUIRE(run_cli("infer" + icfg + " --in " + in2d + " --out " +
                  (g_work / "pred_c.poses3d.json").string() + " --seed 8") == 0);
  CHECK(slurp(g_work / "pred_a.poses3d.json") != slurp(g_work / "pred_c.poses3d.json"));

  // eval: prediction against itself scores zero error.
  REQUIRE(run_cli("eval --pred " + (g_work / "pred_a.poses3d.json").string() + " --gt " +
                  (g_work / "pred_a.poses3d.json").string() + " --out " +
                  (g_work / "self_report.json").string()) == 0);
  const std::string self_report = slurp(g_work / "self_report.json");
  CHECK(self_report.find("\"mpjpe_mm\": 0.0") != std::string::npos);

  // eval against the ground truth emits a full report.
  REQUIRE(run_cli("eval --pred " + (g_work / "pred_a.poses3d.json").string() + " --gt " +
                  (g_work / "data" / "seq002.poses3d.json").string() + " --out " +
                  (g_work / "report.json").string()) == 0);
  CHECK(slurp(g_work / "report.json").find("p_mpjpe_mm") != std::string::npos);

  // guide-demo with rho 0: guided and unguided costs coincide.
  REQUIRE(run_cli("guide-demo" + icfg + " --in " + manifest + " --rho 0 --seed 4 --out " +
                  (g_work / "demo0.json").string()) == 0);
  {
    const std::string demo = slurp(g_work / "demo0.json");
    const auto g = demo.find("\"mpjpe_guided\"");
    const auto u = demo.find("\"mpjpe_unguided\"");
    REQUIRE(g != std::string::npos);
    REQUIRE(u != std::string::npos);
    const std::string gv = demo.substr(g + 16, demo.find_first_of(",}", g) - g - 16);
    const std::string uv = demo.substr(u + 18, demo.find_first_of(",}", u) - u - 18);
    CHECK(gv == uv);
  }

  // plot: overlays plus charts, byte-stable across runs.
  REQUIRE(run_cli("plot --pred " + (g_work / "pred_a.poses3d.json").string() + " --gt " +
                  (g_work / "data" / "seq002.poses3d.json").string() + " --in " +
                  (g_work / "model.ckpt.training_log.json").string() + " --out " +
                  (g_work / "plots").string()) == 0);
  CHECK(fs::exists(g_work / "plots" / "overlay_frame_0000.svg"));
  CHECK(fs::exists(g_work / "plots" / "training_curves.svg"));
  REQUIRE(run_cli("plot --pred " + (g_work / "pred_a.poses3d.json").string() + " --gt " +
                  (g_work / "data" / "seq002.poses3d.json").string() + " --out " +
                  (g_work / "plots2").string()) == 0);
  CHECK(slurp(g_work / "plots" / "overlay_frame_0000.svg") ==
        slurp(g_work / "plots2" / "overlay_frame_0000.svg"));

  // plot on an empty metric log yields a placeholder and exit 0.
  write_file(g_work / "empty_log.json", "{}");
  REQUIRE(run_cli("plot --in " + (g_work / "empty_log.json").string() + " --out " +
                  (g_work / "plots3").string()) == 0);
  CHECK(slurp(g_work / "plots3" / "placeholder.svg").find("no data") != std::string::npos);
}

TEST_CASE("cli exit codes") {
  CHECK(run_cli("") == 1);                       // missing subcommand
  CHECK(run_cli("bogus-subcommand") == 1);       // unknown subcommand
  CHECK(run_cli("eval --pred only") == 1);       // missing required flag
  CHECK(run_cli("eval --pred missing.json --gt missing.json") == 2);  // bad data
  CHECK(run_cli("infer --config /nonexistent.json --in a --out b") == 2);

  // Config with an unknown key is a data error.
  write_file(g_work / "bad.json", R"({"mystery": 1})");
  CHECK(run_cli("synth --config " + (g_work / "bad.json").string() + " --out " +
                (g_work / "x").string()) == 2);
}

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: cli_tests <cli-binary> <work-dir>\n");
    return 2;
  }
  g_cli = argv[1];
  g_work = argv[2];
  std::filesystem::create_directories(g_work);

  doctest::Context context;
  return context.run();
}
