#include "dehaze/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dehaze {

void TrainConfig::validate() const {
  loss.validate();
  score_weights.validate();
  ensure(lr > 0.0f, "train config: learning rate must be positive");
  ensure(epochs >= 1, "train config: epochs must be >= 1");
  ensure(batch_size >= 1, "train config: batch size must be >= 1");
  ensure(validate_every >= 1, "train config: validation cadence must be >= 1");
  generator.validate();
  discriminator.validate();
}

std::uint64_t generator_fingerprint(const GeneratorConfig& config) {
  const NetworkSpec spec = build_tiramisu(config);
  const ShapeReport report = analyze(spec, config.input_size, config.input_size);
  return fingerprint(architecture_dump(spec, report));
}

namespace {

constexpr std::uint64_t kDiscriminatorSeedSalt = 0x9e3779b97f4a7c15ull;
constexpr std::uint64_t kPerceptualSeedSalt = 0x6a09e667f3bcc909ull;

void pack_config_meta(Checkpoint& ckpt, const TrainConfig& config) {
  const GeneratorConfig& g = config.generator;
  ckpt.add_scalar("meta.gen.growth", static_cast<float>(g.growth_rate));
  {
    std::vector<float> db;
    for (int l : g.db_layers) db.push_back(static_cast<float>(l));
    const auto n = static_cast<std::uint32_t>(db.size());
    ckpt.add("meta.gen.db_layers", {n}, std::move(db));
  }
  ckpt.add_scalar("meta.gen.bottleneck", static_cast<float>(g.bottleneck_layers));
  ckpt.add_scalar("meta.gen.input_conv", static_cast<float>(g.input_conv_channels));
  ckpt.add_scalar("meta.gen.dropout", static_cast<float>(g.dropout_rate));
  ckpt.add_scalar("meta.gen.input_size", static_cast<float>(g.input_size));

  const DiscriminatorConfig& d = config.discriminator;
  ckpt.add_scalar("meta.disc.base", static_cast<float>(d.base_channels));
  {
    std::vector<float> m;
    for (int v : d.multipliers) m.push_back(static_cast<float>(v));
    const auto n = static_cast<std::uint32_t>(m.size());
    ckpt.add("meta.disc.multipliers", {n}, std::move(m));
  }
  ckpt.add_scalar("meta.disc.kernel", static_cast<float>(d.kernel));
  {
    std::vector<float> s;
    for (int v : d.strides) s.push_back(static_cast<float>(v));
    const auto n = static_cast<std::uint32_t>(s.size());
    ckpt.add("meta.disc.strides", {n}, std::move(s));
  }
  ckpt.add_scalar("meta.disc.leaky_slope", static_cast<float>(d.leaky_slope));
}

}  // namespace

GeneratorConfig generator_config_from_checkpoint(const Checkpoint& ckpt) {
  GeneratorConfig g;
  g.growth_rate = static_cast<int>(ckpt.scalar("meta.gen.growth"));
  const CheckpointRecord* db = ckpt.find("meta.gen.db_layers");
  ensure(db != nullptr, "checkpoint: missing record meta.gen.db_layers");
  g.db_layers.clear();
  for (float v : db->data) g.db_layers.push_back(static_cast<int>(v));
  g.bottleneck_layers = static_cast<int>(ckpt.scalar("meta.gen.bottleneck"));
  g.input_conv_channels = static_cast<int>(ckpt.scalar("meta.gen.input_conv"));
  g.dropout_rate = static_cast<double>(ckpt.scalar("meta.gen.dropout"));
  g.input_size = static_cast<int>(ckpt.scalar("meta.gen.input_size"));
  return g;
}

DiscriminatorConfig discriminator_config_from_checkpoint(const Checkpoint& ckpt) {
  DiscriminatorConfig d;
  d.base_channels = static_cast<int>(ckpt.scalar("meta.disc.base"));
  const CheckpointRecord* m = ckpt.find("meta.disc.multipliers");
  ensure(m != nullptr, "checkpoint: missing record meta.disc.multipliers");
  d.multipliers.clear();
  for (float v : m->data) d.multipliers.push_back(static_cast<int>(v));
  d.kernel = static_cast<int>(ckpt.scalar("meta.disc.kernel"));
  const CheckpointRecord* s = ckpt.find("meta.disc.strides");
  ensure(s != nullptr, "checkpoint: missing record meta.disc.strides");
  d.strides.clear();
  for (float v : s->data) d.strides.push_back(static_cast<int>(v));
  d.leaky_slope = static_cast<double>(ckpt.scalar("meta.disc.leaky_slope"));
  return d;
}

GanTrainer::GanTrainer(const TrainConfig& config) : config_(config) {
  config_.validate();
  g_ = Network<float>::instantiate(build_tiramisu(config_.generator), config_.seed);
  d_ = Network<float>::instantiate(build_patch_discriminator(config_.discriminator),
                                   config_.seed ^ kDiscriminatorSeedSalt);
  if (config_.perceptual_weights) {
    Network<float> vgg_net =
        Network<float>::instantiate(build_vgg19_features(), config_.seed ^ kPerceptualSeedSalt);
    const Checkpoint ckpt = load_checkpoint(*config_.perceptual_weights);
    unpack_network(ckpt, vgg_net, "vgg.");
    vgg_ = PerceptualExtractor<float>::from_network(std::move(vgg_net));
  } else {
    vgg_ = PerceptualExtractor<float>::seeded(config_.seed ^ kPerceptualSeedSalt);
  }

  ad::AdamConfig<float> adam_cfg{config_.lr, config_.beta1, config_.beta2, config_.adam_eps};
  std::vector<ad::Tensor<float>*> g_params, d_params;
  for (auto& p : g_.params()) g_params.push_back(&p.value);
  for (auto& p : d_.params()) d_params.push_back(&p.value);
  adam_g_ = ad::AdamState<float>::init(g_params, adam_cfg);
  adam_d_ = ad::AdamState<float>::init(d_params, adam_cfg);
}

void GanTrainer::apply_adam(Network<float>& net, ad::AdamState<float>& state,
                            ad::Tape<float>& tape, const std::vector<int>& param_nodes) {
  std::vector<ad::Tensor<float>*> params;
  std::vector<ad::Tensor<float>> grads;
  params.reserve(net.params().size());
  grads.reserve(net.params().size());
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    params.push_back(&net.params()[i].value);
    grads.push_back(tape.grad(param_nodes[i]));
  }
  ad::adam_step(params, grads, state);
  net.bump_version(++update_seq_);
}

IterationReport GanTrainer::train_iteration(const Batch& batch, Rng& rng) {
  IterationReport report;
  step_generator(batch, rng, report);
  step_discriminator(batch, rng, report);
  return report;
}

// Generator step: one Adam update on L_T with the discriminator frozen.
void GanTrainer::step_generator(const Batch& batch, Rng& rng, IterationReport& report) {
  {
    ad::Tape<float> tape;
    const int x = tape.leaf(batch.hazy);
    const int y = tape.leaf(batch.clear);
    const auto gfwd = g_.forward(tape, x, /*training=*/true, &rng, /*params_require_grad=*/true);
    const int pair_fake = tape.concat_channels(x, gfwd.output);
    const auto dfwd =
        d_.forward(tape, pair_fake, /*training=*/true, &rng, /*params_require_grad=*/false);

    const int adv = generator_adversarial_loss(tape, dfwd.output);
    const int l1 = l1_loss(tape, gfwd.output, y);
    int vgg = -1;
    if (batch.ids.size() == 1) {
      auto it = target_feature_cache_.find(batch.ids[0]);
      if (it == target_feature_cache_.end()) {
        it = target_feature_cache_.emplace(batch.ids[0], vgg_.features_value(batch.clear)).first;
      }
      vgg = perceptual_loss_cached(tape, gfwd.output, it->second, vgg_,
                                   config_.loss.perceptual_scale);
    } else {
      vgg = perceptual_loss(tape, gfwd.output, y, vgg_, config_.loss.perceptual_scale);
    }
    const int total = total_generator_loss(tape, adv, l1, vgg, config_.loss);

    report.l_gan = static_cast<double>(tape.value(adv)[0]);
    report.l_l1 = static_cast<double>(tape.value(l1)[0]);
    report.l_vgg = static_cast<double>(tape.value(vgg)[0]);
    report.l_total = static_cast<double>(tape.value(total)[0]);
    ensure(std::isfinite(report.l_gan), "train_iteration: non-finite adversarial loss L_G");
    ensure(std::isfinite(report.l_l1), "train_iteration: non-finite L1 loss");
    ensure(std::isfinite(report.l_vgg), "train_iteration: non-finite perceptual loss L_vgg");
    ensure(std::isfinite(report.l_total), "train_iteration: non-finite total loss L_T");

    tape.backward(total);
    apply_adam(g_, adam_g_, tape, gfwd.param_nodes);
    report.g_update_seq = update_seq_;
  }
}

// Discriminator step: G(X) is recomputed with the updated generator and
// enters the graph as a constant (no gradient reaches the generator).
void GanTrainer::step_discriminator(const Batch& batch, Rng& rng, IterationReport& report) {
  {
    ad::Tape<float> tape;
    const int x = tape.leaf(batch.hazy);
    const int y = tape.leaf(batch.clear);
    const auto gfwd = g_.forward(tape, x, /*training=*/true, &rng, /*params_require_grad=*/false);
    std::vector<int> d_param_nodes;
    const int pair_real = tape.concat_channels(x, y);
    const auto d_real = d_.forward(tape, pair_real, /*training=*/true, &rng,
                                   /*params_require_grad=*/true, &d_param_nodes);
    const int pair_fake = tape.concat_channels(x, gfwd.output);
    const auto d_fake = d_.forward(tape, pair_fake, /*training=*/true, &rng,
                                   /*params_require_grad=*/true, &d_param_nodes);

    const int objective = discriminator_objective(tape, d_real.output, d_fake.output);
    const int neg = tape.affine(objective, -1.0f, 0.0f);
    report.neg_l_d = static_cast<double>(tape.value(neg)[0]);
    ensure(std::isfinite(report.neg_l_d), "train_iteration: non-finite discriminator objective L_D");

    tape.backward(neg);
    apply_adam(d_, adam_d_, tape, d_param_nodes);
    report.d_update_seq = update_seq_;
  }
}

double GanTrainer::validate(const std::vector<PairedSample>& val_set) {
  ensure(!val_set.empty(), "validate: empty validation set");
  double acc = 0.0;
  for (const PairedSample& s : val_set) {
    const Image<float> out = dehaze(s.hazy);
    acc += score(psnr(out, s.clear), ssim(out, s.clear), config_.score_weights);
  }
  return acc / static_cast<double>(val_set.size());
}

Image<float> GanTrainer::dehaze(const Image<float>& hazy) {
  ensure(hazy.height == config_.generator.input_size && hazy.width == config_.generator.input_size,
         "dehaze: input is " + std::to_string(hazy.width) + "x" + std::to_string(hazy.height) +
             " but the generator requires " + std::to_string(config_.generator.input_size) + "x" +
             std::to_string(config_.generator.input_size));
  ad::Tape<float> tape;
  const int x = tape.leaf(image_to_tensor(hazy));
  const auto fwd = g_.forward(tape, x, /*training=*/false, /*rng=*/nullptr,
                              /*params_require_grad=*/false);
  return tensor_to_image(tape.value(fwd.output));
}

FitResult GanTrainer::fit(const std::vector<PairedSample>& train_set,
                          const std::vector<PairedSample>& val_set, const Validator& validator) {
  ensure(!train_set.empty(), "fit: empty training set");
  if (!validator) ensure(!val_set.empty(), "fit: empty validation set");
  if (!config_.checkpoint_dir.empty()) std::filesystem::create_directories(config_.checkpoint_dir);

  FitResult result;
  result.best_score = -std::numeric_limits<double>::infinity();
  std::ostringstream log;
  auto emit = [&](const char* line) {
    log << line;
    if (config_.log_echo) *config_.log_echo << line << std::flush;
  };
  Rng rng(config_.seed);
  std::uint64_t iter = 0;

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    BatchStream stream = iterate_batches(train_set, config_.batch_size, config_.seed,
                                         static_cast<std::uint64_t>(epoch));
    Batch batch;
    while (stream.next(batch)) {
      const IterationReport rep = train_iteration(batch, rng);
      char line[256];
      std::snprintf(line, sizeof(line), "%llu,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                    static_cast<unsigned long long>(iter), rep.l_total, rep.l_gan, rep.l_l1,
                    rep.l_vgg, rep.neg_l_d);
      emit(line);
      ++iter;
    }

    if ((epoch + 1) % config_.validate_every != 0) continue;
    const double val_score = validator ? validator(*this, epoch) : validate(val_set);
    {
      char line[128];
      std::snprintf(line, sizeof(line), "VAL,%d,%.9g\n", epoch, val_score);
      emit(line);
    }
    // Save on strict improvement only.
    if (val_score > result.best_score) {
      result.best_score = val_score;
      char name[128];
      std::snprintf(name, sizeof(name), "ckpt_epoch%d_score%.4f.dhz", epoch, val_score);
      const std::filesystem::path path = config_.checkpoint_dir / name;
      save_checkpoint(path, make_checkpoint(epoch, val_score));
      std::ofstream best(config_.checkpoint_dir / "best");
      ensure(best.good(), "fit: cannot write best marker");
      best << path.string() << "\n";
      result.best_checkpoint = path;
      ++result.checkpoints_saved;
    }
  }
  result.log = log.str();
  return result;
}

Checkpoint GanTrainer::make_checkpoint(int epoch, double best_score) const {
  Checkpoint ckpt;
  ckpt.fingerprint = generator_fingerprint(config_.generator);
  pack_network(ckpt, g_, "g.");
  pack_network(ckpt, d_, "d.");
  for (std::size_t i = 0; i < g_.params().size(); ++i) {
    const auto& name = g_.params()[i].name;
    ckpt.add("adam_g.m." + name, {static_cast<std::uint32_t>(adam_g_.m[i].size())}, adam_g_.m[i]);
    ckpt.add("adam_g.v." + name, {static_cast<std::uint32_t>(adam_g_.v[i].size())}, adam_g_.v[i]);
  }
  for (std::size_t i = 0; i < d_.params().size(); ++i) {
    const auto& name = d_.params()[i].name;
    ckpt.add("adam_d.m." + name, {static_cast<std::uint32_t>(adam_d_.m[i].size())}, adam_d_.m[i]);
    ckpt.add("adam_d.v." + name, {static_cast<std::uint32_t>(adam_d_.v[i].size())}, adam_d_.v[i]);
  }
  ckpt.add_scalar("meta.epoch", static_cast<float>(epoch));
  ckpt.add_scalar("meta.best_score", static_cast<float>(best_score));
  ckpt.add_scalar("meta.adam_g.t", static_cast<float>(adam_g_.t));
  ckpt.add_scalar("meta.adam_d.t", static_cast<float>(adam_d_.t));
  ckpt.add_scalar("meta.adam.lr", config_.lr);
  ckpt.add_scalar("meta.adam.beta1", config_.beta1);
  ckpt.add_scalar("meta.adam.beta2", config_.beta2);
  ckpt.add_scalar("meta.adam.eps", config_.adam_eps);
  pack_config_meta(ckpt, config_);
  return ckpt;
}

void GanTrainer::load(const Checkpoint& ckpt) {
  const std::uint64_t expected = generator_fingerprint(config_.generator);
  ensure(ckpt.fingerprint == expected,
         "checkpoint: generator fingerprint mismatch (checkpoint was written for a different "
         "architecture)");
  unpack_network(ckpt, g_, "g.");
  unpack_network(ckpt, d_, "d.");
  auto load_adam = [&](ad::AdamState<float>& state, const Network<float>& net,
                       const std::string& prefix, const char* t_name) {
    for (std::size_t i = 0; i < net.params().size(); ++i) {
      const auto& name = net.params()[i].name;
      const CheckpointRecord* m = ckpt.find(prefix + ".m." + name);
      const CheckpointRecord* v = ckpt.find(prefix + ".v." + name);
      ensure(m && v, "checkpoint: missing adam state for " + name);
      ensure(m->data.size() == state.m[i].size() && v->data.size() == state.v[i].size(),
             "checkpoint: adam state size mismatch for " + name);
      state.m[i] = m->data;
      state.v[i] = v->data;
    }
    state.t = static_cast<std::int64_t>(ckpt.scalar(t_name));
  };
  load_adam(adam_g_, g_, "adam_g", "meta.adam_g.t");
  load_adam(adam_d_, d_, "adam_d", "meta.adam_d.t");
  target_feature_cache_.clear();
}

}  // namespace dehaze
