#include "cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include "dehaze/dataset.hpp"
#include "dehaze/dcp.hpp"
#include "dehaze/haze.hpp"
#include "dehaze/image_io.hpp"
#include "dehaze/metrics.hpp"
#include "dehaze/trainer.hpp"

namespace dehaze {
namespace {

namespace fs = std::filesystem;

struct SynthArgs {
  std::string rgb_dir, depth_dir, out_dir;
  int size = 256;
  double s_min = 0.2, s_max = 0.4, a = 1.0;
  std::uint64_t seed = 0;
};

int cmd_synth(const SynthArgs& args) {
  const auto rgb_stems = list_stems(args.rgb_dir, {".ppm"});
  std::vector<std::pair<std::string, fs::path>> matched;
  for (const std::string& stem : rgb_stems) {
    for (const char* ext : {".pgm", ".dpf"}) {
      const fs::path p = fs::path(args.depth_dir) / (stem + ext);
      if (fs::exists(p)) {
        matched.emplace_back(stem, p);
        break;
      }
    }
  }
  ensure(!matched.empty(), "synth: no filename stems matched between " + args.rgb_dir + " and " +
                               args.depth_dir);

  HazeSynthesisConfig<float> config;
  config.atmospheric_light = static_cast<float>(args.a);
  config.s_min = static_cast<float>(args.s_min);
  config.s_max = static_cast<float>(args.s_max);
  config.target_size = args.size;
  config.validate();

  Rng rng(args.seed);
  std::vector<PairedSample> samples;
  samples.reserve(matched.size());
  for (const auto& [stem, depth_path] : matched) {
    const RgbdSample rgbd = load_rgbd(fs::path(args.rgb_dir) / (stem + ".ppm"), depth_path);
    SynthesizedPair<float> pair = synthesize_pair(rgbd.image, rgbd.depth, config, rng);
    PairedSample s;
    s.id = stem;
    s.hazy = std::move(pair.hazy);
    s.clear = std::move(pair.clear);
    s.s_used = pair.s_used;
    samples.push_back(std::move(s));
  }
  save_paired_dataset(args.out_dir, samples);
  std::cout << "synthesized " << samples.size() << " pairs into " << args.out_dir << "\n";
  return 0;
}

struct TrainArgs {
  std::string data, ckpt_dir = "checkpoints";
  int epochs = 1;
  double lr = 1e-3;
  double w_gan = 2.0, w_l1 = 100.0, w_vgg = 10.0;
  int growth = 12;
  int size = 256;
  std::uint64_t seed = 0;
  int batch = 1;
  std::vector<int> db_layers = {4, 4, 4, 4, 4};
  int bottleneck = 15;
  int input_conv = 48;
  double dropout = 0.2;
  int disc_base = 64;
  std::string vgg_weights;
  // 0 means the proportional default (keep roughly 4.3% validation and 8.4%
  // test, at least one each).
  std::size_t n_train = 0, n_val = 0, n_test = 0;
};

int cmd_train(const TrainArgs& args) {
  std::vector<PairedSample> corpus = load_paired_dataset(args.data);

  SplitSpec split_spec;
  split_spec.seed = args.seed;
  if (args.n_train == 0 && args.n_val == 0 && args.n_test == 0) {
    const auto n = corpus.size();
    ensure(n >= 3, "train: corpus must have at least 3 samples");
    split_spec.n_val = std::max<std::size_t>(1, static_cast<std::size_t>(0.043 * n));
    split_spec.n_test = std::max<std::size_t>(1, static_cast<std::size_t>(0.084 * n));
    split_spec.n_train = n - split_spec.n_val - split_spec.n_test;
  } else {
    split_spec.n_train = args.n_train;
    split_spec.n_val = args.n_val;
    split_spec.n_test = args.n_test;
  }
  CorpusSplit split = split_corpus(std::move(corpus), split_spec);
  ensure(!split.train.empty(), "train: empty training split");
  ensure(!split.val.empty(), "train: empty validation split");
  const std::vector<PairedSample> train_set = augment_hflip(split.train);

  TrainConfig config;
  config.loss.w_gan = static_cast<float>(args.w_gan);
  config.loss.w_l1 = static_cast<float>(args.w_l1);
  config.loss.w_vgg = static_cast<float>(args.w_vgg);
  config.lr = static_cast<float>(args.lr);
  config.epochs = args.epochs;
  config.batch_size = args.batch;
  config.seed = args.seed;
  config.generator.growth_rate = args.growth;
  config.generator.db_layers = args.db_layers;
  config.generator.bottleneck_layers = args.bottleneck;
  config.generator.input_conv_channels = args.input_conv;
  config.generator.dropout_rate = args.dropout;
  config.generator.input_size = args.size;
  config.discriminator.base_channels = args.disc_base;
  config.checkpoint_dir = args.ckpt_dir;
  if (!args.vgg_weights.empty()) config.perceptual_weights = args.vgg_weights;
  config.log_echo = &std::cout;

  for (const PairedSample& s : train_set)
    ensure(s.hazy.height == args.size && s.hazy.width == args.size,
           "train: sample " + s.id + " is not " + std::to_string(args.size) + "x" +
               std::to_string(args.size) + "; resynthesize with --size " +
               std::to_string(args.size));

  GanTrainer trainer(config);
  const FitResult result = trainer.fit(train_set, split.val);
  std::ofstream log_out(fs::path(args.ckpt_dir) / "train_log.csv");
  log_out << result.log;
  std::cout << "best checkpoint: " << result.best_checkpoint.string() << " (score "
            << result.best_score << ")\n";
  return 0;
}

std::vector<std::pair<fs::path, fs::path>> io_pairs(const std::string& input,
                                                    const std::string& output) {
  std::vector<std::pair<fs::path, fs::path>> pairs;
  if (fs::is_directory(input)) {
    fs::create_directories(output);
    for (const std::string& stem : list_stems(input, {".ppm"}))
      pairs.emplace_back(fs::path(input) / (stem + ".ppm"), fs::path(output) / (stem + ".ppm"));
    ensure(!pairs.empty(), input + ": no .ppm files");
  } else {
    ensure(fs::exists(input), input + ": no such file");
    if (const fs::path parent = fs::path(output).parent_path(); !parent.empty())
      fs::create_directories(parent);
    pairs.emplace_back(input, output);
  }
  return pairs;
}

struct DehazeArgs {
  std::string ckpt, input, output;
};

int cmd_dehaze(const DehazeArgs& args) {
  const Checkpoint ckpt = load_checkpoint(args.ckpt);
  TrainConfig config;
  config.generator = generator_config_from_checkpoint(ckpt);
  config.discriminator = discriminator_config_from_checkpoint(ckpt);
  GanTrainer trainer(config);
  trainer.load(ckpt);
  for (const auto& [in_path, out_path] : io_pairs(args.input, args.output)) {
    const Image<float> hazy = load_ppm(in_path);
    save_ppm(out_path, trainer.dehaze(hazy));
  }
  return 0;
}

struct BaselineArgs {
  std::string input, output;
  double omega = 0.95, t0 = 0.1;
  int patch = 15;
  int radius = 40;
  double eps = 1e-3;
};

int cmd_baseline(const BaselineArgs& args) {
  DcpConfig config;
  config.omega = args.omega;
  config.t0 = args.t0;
  config.patch_size = args.patch;
  config.guided_radius = args.radius;
  config.guided_eps = args.eps;
  config.validate();
  for (const auto& [in_path, out_path] : io_pairs(args.input, args.output)) {
    const Image<float> hazy = load_ppm(in_path);
    save_ppm(out_path, dcp_dehaze(hazy, config).dehazed);
  }
  return 0;
}

struct EvalArgs {
  std::string pred_dir, gt_dir, csv;
  double w_psnr = 0.05, w_ssim = 1.0;
};

int cmd_eval(const EvalArgs& args) {
  ScoreWeights weights{args.w_psnr, args.w_ssim};
  const EvalSummary summary = evaluate_directory(args.pred_dir, args.gt_dir, weights);
  if (!args.csv.empty()) {
    std::ofstream out(args.csv);
    ensure(out.good(), args.csv + ": cannot open for writing");
    write_eval_csv(out, summary);
  }
  std::cout << format_eval_table(summary);
  return 0;
}

struct InspectArgs {
  std::string arch = "generator";
  int size = 256;
  int growth = 12;
  std::vector<int> db_layers = {4, 4, 4, 4, 4};
  int bottleneck = 15;
  int input_conv = 48;
  int disc_base = 64;
};

int cmd_inspect(const InspectArgs& args) {
  NetworkSpec spec;
  if (args.arch == "generator") {
    GeneratorConfig config;
    config.growth_rate = args.growth;
    config.db_layers = args.db_layers;
    config.bottleneck_layers = args.bottleneck;
    config.input_conv_channels = args.input_conv;
    config.input_size = args.size;
    spec = build_tiramisu(config);
  } else {
    DiscriminatorConfig config;
    config.base_channels = args.disc_base;
    spec = build_patch_discriminator(config);
  }
  const ShapeReport report = analyze(spec, args.size, args.size);
  std::cout << architecture_dump(spec, report);
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Single-image dehazing: scattering-model pair synthesis, conditional-GAN "
               "training, evaluation, and a dark-channel-prior baseline"};
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* synth_cmd = app.add_subcommand(
      "synth", "Synthesize hazy/clear pairs from RGB-D images via the scattering model");
  synth_cmd->set_config("--config");
  synth_cmd->add_option("--rgb-dir", synth.rgb_dir, "Directory of clear .ppm images")->required();
  synth_cmd->add_option("--depth-dir", synth.depth_dir, "Directory of .pgm/.dpf depth maps")
      ->required();
  synth_cmd->add_option("--out-dir", synth.out_dir, "Output paired-dataset directory")->required();
  synth_cmd->add_option("--size", synth.size, "Output image size")->capture_default_str();
  synth_cmd->add_option("--s-min", synth.s_min, "Transmission scale lower bound")
      ->capture_default_str();
  synth_cmd->add_option("--s-max", synth.s_max, "Transmission scale upper bound")
      ->capture_default_str();
  synth_cmd->add_option("--a", synth.a, "Atmospheric light")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Random seed")->capture_default_str();

  TrainArgs train;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train the conditional GAN on a paired dataset");
  train_cmd->set_config("--config");
  train_cmd->add_option("--data", train.data, "Paired dataset directory (hazy/, clear/, manifest.tsv)")
      ->required();
  train_cmd->add_option("--epochs", train.epochs, "Training epochs")
      ->check(CLI::PositiveNumber)
      ->required();
  train_cmd->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--w-gan", train.w_gan, "Adversarial loss weight")->capture_default_str();
  train_cmd->add_option("--w-l1", train.w_l1, "L1 loss weight")->capture_default_str();
  train_cmd->add_option("--w-vgg", train.w_vgg, "Perceptual loss weight")->capture_default_str();
  train_cmd->add_option("--growth", train.growth, "Dense block growth rate")->capture_default_str();
  train_cmd->add_option("--size", train.size, "Training image size")->capture_default_str();
  train_cmd->add_option("--seed", train.seed, "Random seed")->capture_default_str();
  train_cmd->add_option("--ckpt-dir", train.ckpt_dir, "Checkpoint directory")
      ->capture_default_str();
  train_cmd->add_option("--batch", train.batch, "Batch size")->capture_default_str();
  train_cmd->add_option("--db-layers", train.db_layers, "Composite layers per dense block")
      ->delimiter(',')
      ->capture_default_str();
  train_cmd->add_option("--bottleneck", train.bottleneck, "Bottleneck composite layers")
      ->capture_default_str();
  train_cmd->add_option("--input-conv", train.input_conv, "Input convolution channels")
      ->capture_default_str();
  train_cmd->add_option("--dropout", train.dropout, "Dropout rate")->capture_default_str();
  train_cmd->add_option("--disc-base", train.disc_base, "Discriminator base channels")
      ->capture_default_str();
  train_cmd->add_option("--vgg-weights", train.vgg_weights,
                        "Checkpoint-format weights for the perceptual extractor");
  train_cmd->add_option("--n-train", train.n_train, "Training split size (0 = proportional)")
      ->capture_default_str();
  train_cmd->add_option("--n-val", train.n_val, "Validation split size (0 = proportional)")
      ->capture_default_str();
  train_cmd->add_option("--n-test", train.n_test, "Test split size (0 = proportional)")
      ->capture_default_str();

  DehazeArgs dehaze_args;
  CLI::App* dehaze_cmd =
      app.add_subcommand("dehaze", "Run a trained generator on an image or directory");
  dehaze_cmd->set_config("--config");
  dehaze_cmd->add_option("--ckpt", dehaze_args.ckpt, "Checkpoint file (.dhz)")->required();
  dehaze_cmd->add_option("--input", dehaze_args.input, "Input .ppm image or directory")->required();
  dehaze_cmd->add_option("--output", dehaze_args.output, "Output image or directory")->required();

  BaselineArgs baseline;
  CLI::App* baseline_cmd =
      app.add_subcommand("baseline", "Dark-channel-prior dehazing (no training)");
  baseline_cmd->set_config("--config");
  baseline_cmd->add_option("--input", baseline.input, "Input .ppm image or directory")->required();
  baseline_cmd->add_option("--output", baseline.output, "Output image or directory")->required();
  baseline_cmd->add_option("--omega", baseline.omega, "Haze retention factor")
      ->capture_default_str();
  baseline_cmd->add_option("--t0", baseline.t0, "Transmission floor")->capture_default_str();
  baseline_cmd->add_option("--patch", baseline.patch, "Dark channel patch size")
      ->capture_default_str();
  baseline_cmd->add_option("--radius", baseline.radius, "Guided filter radius")
      ->capture_default_str();
  baseline_cmd->add_option("--eps", baseline.eps, "Guided filter regularization")
      ->capture_default_str();

  EvalArgs eval;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "PSNR/SSIM/score evaluation of paired directories");
  eval_cmd->set_config("--config");
  eval_cmd->add_option("--pred-dir", eval.pred_dir, "Predictions directory")->required();
  eval_cmd->add_option("--gt-dir", eval.gt_dir, "Ground truth directory")->required();
  eval_cmd->add_option("--csv", eval.csv, "CSV output path");
  eval_cmd->add_option("--w-psnr", eval.w_psnr, "Score weight for PSNR")->capture_default_str();
  eval_cmd->add_option("--w-ssim", eval.w_ssim, "Score weight for SSIM")->capture_default_str();

  InspectArgs inspect;
  CLI::App* inspect_cmd =
      app.add_subcommand("inspect", "Print the architecture table of a network");
  inspect_cmd->set_config("--config");
  inspect_cmd->add_option("--arch", inspect.arch, "generator or discriminator")
      ->check(CLI::IsMember({"generator", "discriminator"}))
      ->capture_default_str();
  inspect_cmd->add_option("--size", inspect.size, "Input size")->capture_default_str();
  inspect_cmd->add_option("--growth", inspect.growth, "Dense block growth rate")
      ->capture_default_str();
  inspect_cmd->add_option("--db-layers", inspect.db_layers, "Composite layers per dense block")
      ->delimiter(',')
      ->capture_default_str();
  inspect_cmd->add_option("--bottleneck", inspect.bottleneck, "Bottleneck composite layers")
      ->capture_default_str();
  inspect_cmd->add_option("--input-conv", inspect.input_conv, "Input convolution channels")
      ->capture_default_str();
  inspect_cmd->add_option("--disc-base", inspect.disc_base, "Discriminator base channels")
      ->capture_default_str();

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (synth_cmd->parsed()) return cmd_synth(synth);
    if (train_cmd->parsed()) return cmd_train(train);
    if (dehaze_cmd->parsed()) return cmd_dehaze(dehaze_args);
    if (baseline_cmd->parsed()) return cmd_baseline(baseline);
    if (eval_cmd->parsed()) return cmd_eval(eval);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace dehaze
