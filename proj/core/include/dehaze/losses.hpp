#pragma once

#include <cstdint>

#include "dehaze/autodiff.hpp"
#include "dehaze/network.hpp"

namespace dehaze {

struct LossWeights {
  float w_gan = 2.0f;
  float w_l1 = 100.0f;
  float w_vgg = 10.0f;
  float perceptual_scale = 1e-5f;  // the constant C scaling the feature MSE

  void validate() const {
    ensure(w_gan >= 0.0f && w_l1 >= 0.0f && w_vgg >= 0.0f && perceptual_scale >= 0.0f,
           "loss weights must be non-negative");
  }
};

// Arguments of log() are clamped to [kLogEpsilon, 1] so saturated sigmoid
// outputs cannot produce infinities.
inline constexpr double kLogEpsilon = 1e-7;

// Mean absolute difference over all elements (the batch mean realizes the
// expectation).
template <typename T>
int l1_loss(ad::Tape<T>& tape, int generated, int target) {
  return tape.mean(tape.abs(tape.sub(generated, target)));
}

template <typename T>
int mse_loss(ad::Tape<T>& tape, int a, int b) {
  const int d = tape.sub(a, b);
  return tape.mean(tape.mul(d, d));
}

// -mean(log D) over batch and patch locations, the non-saturating generator
// objective.
template <typename T>
int generator_adversarial_loss(ad::Tape<T>& tape, int disc_output_on_fake) {
  const int safe = tape.clamp(disc_output_on_fake, static_cast<T>(kLogEpsilon), T(1));
  return tape.affine(tape.mean(tape.log(safe)), T(-1), T(0));
}

// mean(log D(real) + log(1 - D(fake))); the trainer minimizes the negation.
template <typename T>
int discriminator_objective(ad::Tape<T>& tape, int disc_on_real, int disc_on_fake) {
  const int real_term =
      tape.log(tape.clamp(disc_on_real, static_cast<T>(kLogEpsilon), T(1)));
  const int fake_term = tape.log(
      tape.clamp(tape.affine(disc_on_fake, T(-1), T(1)), static_cast<T>(kLogEpsilon), T(1)));
  return tape.mean(tape.add(real_term, fake_term));
}

// w_gan * adv + w_l1 * l1 + w_vgg * vgg, as an exact weighted sum.
template <typename T>
int total_generator_loss(ad::Tape<T>& tape, int adv, int l1, int vgg, const LossWeights& w) {
  const int a = tape.affine(adv, static_cast<T>(w.w_gan), T(0));
  const int b = tape.affine(l1, static_cast<T>(w.w_l1), T(0));
  const int c = tape.affine(vgg, static_cast<T>(w.w_vgg), T(0));
  return tape.add(tape.add(a, b), c);
}

// Frozen convolutional feature pyramid with the VGG-19 topology truncated
// after the fourth pooling stage. Parameters come from a seed or an external
// weight file and never receive gradients; inputs are raw [0,1] images.
template <typename T>
class PerceptualExtractor {
 public:
  static PerceptualExtractor seeded(std::uint64_t seed) {
    PerceptualExtractor e;
    e.net_ = Network<T>::instantiate(build_vgg19_features(), seed);
    return e;
  }

  static PerceptualExtractor from_network(Network<T> net) {
    PerceptualExtractor e;
    e.net_ = std::move(net);
    return e;
  }

  int features(ad::Tape<T>& tape, int image_node) {
    return net_
        .forward(tape, image_node, /*training=*/false, /*rng=*/nullptr,
                 /*params_require_grad=*/false)
        .output;
  }

  ad::Tensor<T> features_value(const ad::Tensor<T>& image) {
    ad::Tape<T> tape;
    ad::Tensor<T> in = image;
    in.requires_grad = false;
    const int node = features(tape, tape.leaf(std::move(in)));
    return tape.value(node);
  }

  Network<T>& network() { return net_; }
  const Network<T>& network() const { return net_; }

 private:
  Network<T> net_;
};

// C * MSE(V(generated), V(target)).
template <typename T>
int perceptual_loss(ad::Tape<T>& tape, int generated, int target,
                    PerceptualExtractor<T>& extractor, T c) {
  const int fg = extractor.features(tape, generated);
  const int ft = extractor.features(tape, target);
  return tape.affine(mse_loss(tape, fg, ft), c, T(0));
}

// Variant taking precomputed target features (they are constant per target
// under a frozen extractor, so trainers can cache them).
template <typename T>
int perceptual_loss_cached(ad::Tape<T>& tape, int generated,
                           const ad::Tensor<T>& target_features,
                           PerceptualExtractor<T>& extractor, T c) {
  const int fg = extractor.features(tape, generated);
  ad::Tensor<T> tf = target_features;
  tf.requires_grad = false;
  const int ft = tape.leaf(std::move(tf));
  return tape.affine(mse_loss(tape, fg, ft), c, T(0));
}

// -- plain-value conveniences (fresh tape per call) ------------------------

template <typename T>
T l1_loss_value(const ad::Tensor<T>& a, const ad::Tensor<T>& b) {
  ad::Tape<T> tape;
  return tape.value(l1_loss(tape, tape.leaf(a), tape.leaf(b)))[0];
}

template <typename T>
T generator_adversarial_loss_value(const ad::Tensor<T>& d_fake) {
  ad::Tape<T> tape;
  return tape.value(generator_adversarial_loss(tape, tape.leaf(d_fake)))[0];
}

template <typename T>
T discriminator_objective_value(const ad::Tensor<T>& d_real, const ad::Tensor<T>& d_fake) {
  ad::Tape<T> tape;
  return tape.value(discriminator_objective(tape, tape.leaf(d_real), tape.leaf(d_fake)))[0];
}

template <typename T>
T perceptual_loss_value(const ad::Tensor<T>& a, const ad::Tensor<T>& b,
                        PerceptualExtractor<T>& extractor, T c) {
  ad::Tape<T> tape;
  return tape.value(perceptual_loss(tape, tape.leaf(a), tape.leaf(b), extractor, c))[0];
}

template <typename T>
T total_generator_loss_value(T adv, T l1, T vgg, const LossWeights& w) {
  return static_cast<T>(w.w_gan) * adv + static_cast<T>(w.w_l1) * l1 +
         static_cast<T>(w.w_vgg) * vgg;
}

}  // namespace dehaze
