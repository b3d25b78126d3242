#include <doctest.h>

#include <fstream>
#include <iostream>
#include <sstream>

#include "cli.hpp"
#include "dehaze/checkpoint.hpp"
#include "dehaze/image_io.hpp"
#include "dehaze/metrics.hpp"
#include "dehaze/trainer.hpp"
#include "support/fixtures.hpp"

using namespace dehaze;
using namespace dehaze::testing;

namespace {

int run(std::initializer_list<std::string> args, std::string* out = nullptr) {
  std::vector<std::string> storage = {"dehaze"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : storage) argv.push_back(s.c_str());
  std::ostringstream captured;
  std::streambuf* old = out ? std::cout.rdbuf(captured.rdbuf()) : nullptr;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data());
  if (out) {
    std::cout.rdbuf(old);
    *out = captured.str();
  }
  return code;
}

void write_rgbd_fixture(const std::filesystem::path& dir, int n, int size, std::uint64_t seed) {
  std::filesystem::create_directories(dir / "rgb");
  std::filesystem::create_directories(dir / "depth");
  for (const RgbdSample& s : make_rgbd_corpus(n, size, size, seed)) {
    save_ppm(dir / "rgb" / (s.id + ".ppm"), s.image);
    save_depth_raw(dir / "depth" / (s.id + ".dpf"), s.depth);
  }
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("exit codes: help is 0, usage problems are 1") {
  std::string out;
  CHECK(run({"--help"}, &out) == 0);
  CHECK(run({}, &out) == 1);                        // missing subcommand
  CHECK(run({"synth"}, &out) == 1);                 // missing required flags
  CHECK(run({"frobnicate"}, &out) == 1);            // unknown subcommand
  CHECK(run({"inspect", "--bogus-flag"}, &out) == 1);  // unknown flag
}

TEST_CASE("help text shows the protocol defaults") {
  std::string out;
  CHECK(run({"synth", "--help"}, &out) == 0);
  CHECK(out.find("0.2") != std::string::npos);
  CHECK(out.find("0.4") != std::string::npos);
  CHECK(out.find("256") != std::string::npos);
  CHECK(run({"train", "--help"}, &out) == 0);
  CHECK(out.find("100") != std::string::npos);  // W_L1
  CHECK(out.find("0.001") != std::string::npos);  // learning rate
  CHECK(run({"eval", "--help"}, &out) == 0);
  CHECK(out.find("0.05") != std::string::npos);  // score weight
}

TEST_CASE("train rejects a non-positive epoch count as a usage error") {
  std::string out;
  CHECK(run({"train", "--data", "x", "--epochs", "0"}, &out) == 1);
}

TEST_CASE("synth: deterministic paired dataset from matched stems") {
  TempDir dir("cli_synth");
  write_rgbd_fixture(dir.path(), 3, 48, 61);
  const auto out_a = (dir.path() / "out_a").string();
  const auto out_b = (dir.path() / "out_b").string();

  std::string out;
  const auto args = [&](const std::string& out_dir) {
    return std::initializer_list<std::string>{
        "synth", "--rgb-dir", (dir.path() / "rgb").string(), "--depth-dir",
        (dir.path() / "depth").string(), "--out-dir", out_dir, "--size", "32", "--seed", "5"};
  };
  CHECK(run(args(out_a), &out) == 0);
  CHECK(run(args(out_b), &out) == 0);

  const auto manifest = read_manifest(dir.path() / "out_a" / "manifest.tsv");
  CHECK(manifest.size() == 3);
  for (const auto& e : manifest) {
    CHECK(e.s_used >= 0.2f);
    CHECK(e.s_used <= 0.4f);
    CHECK(e.aug == Augmentation::none);
  }
  // same seed, byte-identical hazy images
  for (const auto& e : manifest)
    CHECK(slurp(dir.path() / "out_a" / "hazy" / (e.id + ".ppm")) ==
          slurp(dir.path() / "out_b" / "hazy" / (e.id + ".ppm")));

  CHECK(run({"synth", "--rgb-dir", (dir.path() / "depth").string(), "--depth-dir",
             (dir.path() / "depth").string(), "--out-dir", out_a},
            &out) == 2);  // no matched stems
}

TEST_CASE("inspect: generator summary reports 56 layers, discriminator reports 30x30") {
  std::string out;
  CHECK(run({"inspect", "--arch", "generator"}, &out) == 0);
  CHECK(out.find("conv_layers=56") != std::string::npos);
  CHECK(out.find("out=3x256x256") != std::string::npos);

  CHECK(run({"inspect", "--arch", "discriminator", "--size", "256"}, &out) == 0);
  CHECK(out.find("out=1x30x30") != std::string::npos);
  CHECK(out.find("rf=70") != std::string::npos);

  CHECK(run({"inspect", "--arch", "generator", "--size", "250"}, &out) == 2);
}

TEST_CASE("baseline improves PSNR on a synthesized hazy fixture") {
  TempDir dir("cli_baseline");
  write_rgbd_fixture(dir.path(), 2, 72, 67);
  const auto paired = (dir.path() / "paired").string();
  std::string out;
  REQUIRE(run({"synth", "--rgb-dir", (dir.path() / "rgb").string(), "--depth-dir",
               (dir.path() / "depth").string(), "--out-dir", paired, "--size", "64", "--seed",
               "9"},
              &out) == 0);
  const auto dehazed = (dir.path() / "dehazed").string();
  CHECK(run({"baseline", "--input", paired + "/hazy", "--output", dehazed, "--radius", "16"},
            &out) == 0);

  const EvalSummary before = evaluate_directory(paired + "/hazy", paired + "/clear");
  const EvalSummary after = evaluate_directory(dehazed, paired + "/clear");
  CHECK(after.mean_psnr > before.mean_psnr);
}

TEST_CASE("eval writes the CSV and prints the summary table") {
  TempDir dir("cli_eval");
  Rng rng(71);
  std::filesystem::create_directories(dir.path() / "pred");
  std::filesystem::create_directories(dir.path() / "gt");
  for (int i = 0; i < 2; ++i) {
    const Image<float> img = make_scene_image(16, 16, rng);
    save_ppm(dir.path() / "pred" / ("x" + std::to_string(i) + ".ppm"), img);
    save_ppm(dir.path() / "gt" / ("x" + std::to_string(i) + ".ppm"), img);
  }
  const auto csv_path = dir.path() / "report.csv";
  std::string out;
  CHECK(run({"eval", "--pred-dir", (dir.path() / "pred").string(), "--gt-dir",
             (dir.path() / "gt").string(), "--csv", csv_path.string()},
            &out) == 0);
  CHECK(out.find("SSIM     1.000") != std::string::npos);
  const std::string csv = slurp(csv_path);
  CHECK(csv.find("id,psnr,ssim,score") != std::string::npos);
  CHECK(csv.find("MEAN") != std::string::npos);

  CHECK(run({"eval", "--pred-dir", (dir.path() / "pred").string(), "--gt-dir",
             (dir.path() / "missing").string()},
            &out) == 2);
}

TEST_CASE("dehaze: checkpoint-driven inference enforces the trained size") {
  TempDir dir("cli_dehaze");
  // build a tiny checkpoint directly through the trainer
  TrainConfig config;
  config.generator.growth_rate = 2;
  config.generator.db_layers = {1};
  config.generator.bottleneck_layers = 1;
  config.generator.input_conv_channels = 4;
  config.generator.input_size = 16;
  config.discriminator.base_channels = 4;
  config.discriminator.multipliers = {1};
  config.discriminator.strides = {2};
  config.checkpoint_dir = dir.path();
  GanTrainer trainer(config);
  const auto ckpt_path = dir.path() / "model.dhz";
  save_checkpoint(ckpt_path, trainer.make_checkpoint(0, 0.0));

  Rng rng(73);
  save_ppm(dir.path() / "in16.ppm", make_scene_image(16, 16, rng));
  save_ppm(dir.path() / "in20.ppm", make_scene_image(20, 20, rng));

  std::string out;
  CHECK(run({"dehaze", "--ckpt", ckpt_path.string(), "--input",
             (dir.path() / "in16.ppm").string(), "--output",
             (dir.path() / "out16.ppm").string()},
            &out) == 0);
  const Image<float> result = load_ppm(dir.path() / "out16.ppm");
  CHECK(result.height == 16);
  CHECK(result.width == 16);

  // wrong-size input names the required size on stderr and exits 2
  CHECK(run({"dehaze", "--ckpt", ckpt_path.string(), "--input",
             (dir.path() / "in20.ppm").string(), "--output",
             (dir.path() / "out20.ppm").string()},
            &out) == 2);

  // directory mode produces one output per input with identical names
  std::filesystem::create_directories(dir.path() / "batch");
  save_ppm(dir.path() / "batch" / "a.ppm", make_scene_image(16, 16, rng));
  save_ppm(dir.path() / "batch" / "b.ppm", make_scene_image(16, 16, rng));
  CHECK(run({"dehaze", "--ckpt", ckpt_path.string(), "--input", (dir.path() / "batch").string(),
             "--output", (dir.path() / "batch_out").string()},
            &out) == 0);
  CHECK(std::filesystem::exists(dir.path() / "batch_out" / "a.ppm"));
  CHECK(std::filesystem::exists(dir.path() / "batch_out" / "b.ppm"));
}

TEST_CASE("config file supplies defaults that flags override") {
  TempDir dir("cli_config");
  std::ofstream cfg(dir.path() / "inspect.cfg");
  cfg << "arch = discriminator\nsize = 256\n";
  cfg.close();
  std::string out;
  CHECK(run({"inspect", "--config", (dir.path() / "inspect.cfg").string()}, &out) == 0);
  CHECK(out.find("out=1x30x30") != std::string::npos);
  // a flag overrides the file value
  CHECK(run({"inspect", "--config", (dir.path() / "inspect.cfg").string(), "--arch", "generator"},
            &out) == 0);
  CHECK(out.find("conv_layers=56") != std::string::npos);
}

TEST_SUITE_END();
