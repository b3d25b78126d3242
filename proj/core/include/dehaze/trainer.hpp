#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "dehaze/adam.hpp"
#include "dehaze/checkpoint.hpp"
#include "dehaze/dataset.hpp"
#include "dehaze/losses.hpp"
#include "dehaze/metrics.hpp"
#include "dehaze/network.hpp"

namespace dehaze {

struct TrainConfig {
  LossWeights loss;
  ScoreWeights score_weights;
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float adam_eps = 1e-8f;
  int epochs = 1;
  int batch_size = 1;
  std::uint64_t seed = 0;
  int validate_every = 1;  // epochs between validations
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  std::filesystem::path checkpoint_dir;
  // Optional external weights for the perceptual extractor (checkpoint
  // format, records under "vgg."); otherwise seeded-random frozen weights.
  std::optional<std::filesystem::path> perceptual_weights;
  // When set, fit() mirrors every log line here as it is produced.
  std::ostream* log_echo = nullptr;

  void validate() const;
};

struct IterationReport {
  double l_total = 0.0;
  double l_gan = 0.0;
  double l_l1 = 0.0;
  double l_vgg = 0.0;
  double neg_l_d = 0.0;
  // Monotonic update stamps; the generator step always precedes the
  // discriminator step within an iteration.
  std::uint64_t g_update_seq = 0;
  std::uint64_t d_update_seq = 0;
};

struct FitResult {
  std::filesystem::path best_checkpoint;
  std::string log;  // CSV: iter,l_total,l_gan,l_l1,l_vgg,neg_l_d plus VAL,epoch,score lines
  double best_score = 0.0;
  std::size_t checkpoints_saved = 0;
};

std::uint64_t generator_fingerprint(const GeneratorConfig& config);
GeneratorConfig generator_config_from_checkpoint(const Checkpoint& ckpt);
DiscriminatorConfig discriminator_config_from_checkpoint(const Checkpoint& ckpt);

// Alternating conditional-GAN optimization: per iteration one Adam step on
// the generator's weighted total loss with the discriminator frozen, then
// one Adam step on the negated discriminator objective with the generator
// output recomputed as a detached constant.
class GanTrainer {
 public:
  explicit GanTrainer(const TrainConfig& config);

  IterationReport train_iteration(const Batch& batch, Rng& rng);

  // The two halves of an iteration, usable standalone: the generator step
  // leaves every discriminator parameter untouched and vice versa.
  void step_generator(const Batch& batch, Rng& rng, IterationReport& report);
  void step_discriminator(const Batch& batch, Rng& rng, IterationReport& report);

  double validate(const std::vector<PairedSample>& val_set);

  // Validation hook: receives the trainer and the 0-based epoch, returns the
  // epoch's score. Used to script score sequences in tests; the default runs
  // validate() on val_set.
  using Validator = std::function<double(GanTrainer&, int epoch)>;

  FitResult fit(const std::vector<PairedSample>& train_set,
                const std::vector<PairedSample>& val_set, const Validator& validator = {});

  // Generator in eval mode (dropout off, batchnorm running stats) on one
  // image; input dimensions must match the configured size.
  Image<float> dehaze(const Image<float>& hazy);

  Checkpoint make_checkpoint(int epoch, double best_score) const;
  void load(const Checkpoint& ckpt);

  Network<float>& generator() { return g_; }
  Network<float>& discriminator() { return d_; }
  const TrainConfig& config() const { return config_; }

 private:
  TrainConfig config_;
  Network<float> g_;
  Network<float> d_;
  PerceptualExtractor<float> vgg_;
  ad::AdamState<float> adam_g_;
  ad::AdamState<float> adam_d_;
  std::uint64_t update_seq_ = 0;
  // Frozen target features per sample id (batch size 1 only; the extractor
  // is deterministic so cache hits are bit-exact).
  std::unordered_map<std::string, ad::Tensor<float>> target_feature_cache_;

  void apply_adam(Network<float>& net, ad::AdamState<float>& state, ad::Tape<float>& tape,
                  const std::vector<int>& param_nodes);
};

}  // namespace dehaze
