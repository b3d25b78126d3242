#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "dehaze/autodiff.hpp"
#include "dehaze/error.hpp"
#include "dehaze/random.hpp"
#include "dehaze/tensor.hpp"

namespace dehaze {

// Declarative layer graph. Layers reference producers by index, so the graph
// is acyclic by construction; layer 0 is always the network input.

enum class LayerKind {
  input,
  conv,
  conv_transpose,
  batchnorm,
  relu,
  leaky_relu,
  sigmoid,
  dropout,
  avgpool2x2,
  maxpool2x2,
  concat,
};

const char* to_string(LayerKind k);

struct LayerDesc {
  LayerKind kind = LayerKind::input;
  std::vector<int> inputs;  // producer layer indices (concat has two)
  std::string tag;          // stable name, also used for parameter naming
  int out_channels = 0;     // conv / conv_transpose
  int kernel = 0;
  int stride = 1;
  int padding = 0;
  int output_padding = 0;       // conv_transpose only
  double rate = 0.0;            // dropout rate or leaky-relu slope
  bool counted_in_depth = false;  // convs on the dense path (the "56 layers")
};

struct NetworkSpec {
  std::string name;
  int input_channels = 0;
  std::vector<LayerDesc> layers;
  int output = 0;
};

// -- configurations -------------------------------------------------------

struct GeneratorConfig {
  int growth_rate = 12;
  std::vector<int> db_layers = {4, 4, 4, 4, 4};  // per encoder/decoder dense block
  int bottleneck_layers = 15;
  int input_conv_channels = 48;
  double dropout_rate = 0.2;
  int input_size = 256;

  void validate() const;
};

struct DiscriminatorConfig {
  int base_channels = 64;
  std::vector<int> multipliers = {1, 2, 4, 8};
  int kernel = 4;
  std::vector<int> strides = {2, 2, 2, 1};  // final 1-channel conv is stride 1
  double leaky_slope = 0.2;

  void validate() const;
};

// -- builders ---------------------------------------------------------------

// Fully-convolutional DenseNet encoder-decoder: input 3x3 conv, per encoder
// stage a dense block then a transition down (batchnorm, 1x1 conv, dropout,
// 2x2 average pool), a bottleneck dense block, per decoder stage a transition
// up (3x3 stride-2 transpose conv) concatenated with the matching encoder
// skip then a dense block, and a 1x1 output conv with sigmoid. Composite
// layers are batchnorm -> relu -> 3x3 conv (growth_rate filters) -> dropout
// with dense in-block concatenation; a block with L layers on c channels
// outputs c + L * growth_rate.
NetworkSpec build_tiramisu(const GeneratorConfig& config);

// 70x70-receptive-field patch discriminator on a 6-channel input (conditioning
// image stacked with the candidate): 4x4 convolutions with padding 1, leaky
// relu, batchnorm on all but the first stage, then a 4x4 stride-1 conv to one
// sigmoid channel. At the defaults a 256x256 input yields a 30x30 verdict map.
NetworkSpec build_patch_discriminator(const DiscriminatorConfig& config);

// VGG-19 convolutional topology truncated after the fourth pooling stage
// (16 convs, 4 max pools); used as the frozen perceptual feature extractor.
NetworkSpec build_vgg19_features();

// -- static analysis --------------------------------------------------------

struct LayerReport {
  int index = 0;
  LayerKind kind = LayerKind::input;
  std::string tag;
  std::array<int, 3> out_shape = {0, 0, 0};  // C,H,W
  std::int64_t layer_params = 0;
  std::int64_t cumulative_params = 0;
  double receptive_field = 1.0;
};

struct ShapeReport {
  std::vector<LayerReport> layers;
  std::array<int, 3> output_shape = {0, 0, 0};
  std::int64_t param_count = 0;
  int conv_layer_count = 0;  // dense-path convs only (input conv + composites)
  double receptive_field = 1.0;
  std::vector<int> spatial_trace;  // output H of every layer, in layer order
};

// Symbolic shape propagation plus the receptive-field recurrence
// rf' = rf + (k-1)*jump, jump' = jump*stride (jump/stride for transpose).
// Parameter counts cover kernels, biases and batchnorm affine pairs.
ShapeReport analyze(const NetworkSpec& spec, int input_h, int input_w);

// One line per layer: index, kind, hyperparameters, output shape, cumulative
// parameters, receptive field. Stable text; hashed for checkpoint matching.
std::string architecture_dump(const NetworkSpec& spec, const ShapeReport& report);

// FNV-1a (64-bit) over the architecture dump at the network's nominal size.
std::uint64_t fingerprint(const std::string& dump);

// -- instantiation ----------------------------------------------------------

template <typename T>
struct NamedTensor {
  std::string name;
  ad::Tensor<T> value;
};

template <typename T>
struct ForwardResult {
  int output = -1;
  std::vector<int> param_nodes;  // aligned with Network::params()
};

// A NetworkSpec with materialized parameters. Kernels use fan-in-scaled
// normal initialization (stddev sqrt(2/fan_in)), biases and batchnorm shifts
// start at zero, batchnorm scales at one. The version counter increments on
// every parameter update and orders updates across networks in the trainer.
template <typename T>
class Network {
 public:
  static Network instantiate(const NetworkSpec& spec, std::uint64_t seed);

  // Runs the layer graph on the tape. Parameters enter the tape as leaves;
  // passing the same `shared_param_nodes` vector to several forward calls
  // reuses one leaf per parameter so gradients accumulate across the calls.
  ForwardResult<T> forward(ad::Tape<T>& tape, int input_node, bool training, Rng* rng,
                           bool params_require_grad = true,
                           std::vector<int>* shared_param_nodes = nullptr);

  const NetworkSpec& spec() const { return spec_; }
  std::vector<NamedTensor<T>>& params() { return params_; }
  const std::vector<NamedTensor<T>>& params() const { return params_; }
  std::vector<NamedTensor<T>>& buffers() { return buffers_; }
  const std::vector<NamedTensor<T>>& buffers() const { return buffers_; }

  std::uint64_t version() const { return version_; }
  void bump_version(std::uint64_t seq) { version_ = seq; }

  std::int64_t param_element_count() const {
    std::int64_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

 private:
  NetworkSpec spec_;
  std::vector<NamedTensor<T>> params_;
  std::vector<NamedTensor<T>> buffers_;
  std::uint64_t version_ = 0;

  // param/buffer indices per layer, filled at instantiation
  struct Slots {
    int w = -1, b = -1, gamma = -1, beta = -1;  // params
    int run_mean = -1, run_var = -1;            // buffers
  };
  std::vector<Slots> slots_;
};

// -- template definitions ----------------------------------------------------

template <typename T>
Network<T> Network<T>::instantiate(const NetworkSpec& spec, std::uint64_t seed) {
  Network net;
  net.spec_ = spec;
  net.slots_.resize(spec.layers.size());
  Rng rng(seed);

  // Channel propagation mirrors analyze(); kept local so instantiation does
  // not depend on a spatial size.
  std::vector<int> channels(spec.layers.size(), 0);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& ld = spec.layers[i];
    Slots& slot = net.slots_[i];
    const int cin = ld.inputs.empty() ? spec.input_channels : channels[static_cast<std::size_t>(ld.inputs[0])];
    switch (ld.kind) {
      case LayerKind::input:
        channels[i] = spec.input_channels;
        break;
      case LayerKind::conv:
      case LayerKind::conv_transpose: {
        const bool tr = ld.kind == LayerKind::conv_transpose;
        // conv kernels are [F,C,kh,kw]; transpose kernels [Cin,Cout,kh,kw]
        const int d0 = tr ? cin : ld.out_channels;
        const int d1 = tr ? ld.out_channels : cin;
        ad::Tensor<T> w({d0, d1, ld.kernel, ld.kernel});
        const double stddev = std::sqrt(2.0 / (static_cast<double>(cin) * ld.kernel * ld.kernel));
        for (auto& v : w.data) v = static_cast<T>(rng.normal() * stddev);
        w.requires_grad = true;
        slot.w = static_cast<int>(net.params_.size());
        net.params_.push_back({ld.tag + ".w", std::move(w)});
        ad::Tensor<T> b({ld.out_channels});
        b.requires_grad = true;
        slot.b = static_cast<int>(net.params_.size());
        net.params_.push_back({ld.tag + ".b", std::move(b)});
        channels[i] = ld.out_channels;
        break;
      }
      case LayerKind::batchnorm: {
        ad::Tensor<T> gamma({cin}, T(1));
        gamma.requires_grad = true;
        slot.gamma = static_cast<int>(net.params_.size());
        net.params_.push_back({ld.tag + ".gamma", std::move(gamma)});
        ad::Tensor<T> beta({cin});
        beta.requires_grad = true;
        slot.beta = static_cast<int>(net.params_.size());
        net.params_.push_back({ld.tag + ".beta", std::move(beta)});
        slot.run_mean = static_cast<int>(net.buffers_.size());
        net.buffers_.push_back({ld.tag + ".run_mean", ad::Tensor<T>({cin}, T(0))});
        slot.run_var = static_cast<int>(net.buffers_.size());
        net.buffers_.push_back({ld.tag + ".run_var", ad::Tensor<T>({cin}, T(1))});
        channels[i] = cin;
        break;
      }
      case LayerKind::concat: {
        ensure(ld.inputs.size() == 2, "network: concat expects two inputs");
        channels[i] = channels[static_cast<std::size_t>(ld.inputs[0])] +
                      channels[static_cast<std::size_t>(ld.inputs[1])];
        break;
      }
      default:
        channels[i] = cin;
        break;
    }
  }
  return net;
}

template <typename T>
ForwardResult<T> Network<T>::forward(ad::Tape<T>& tape, int input_node, bool training, Rng* rng,
                                     bool params_require_grad,
                                     std::vector<int>* shared_param_nodes) {
  ForwardResult<T> result;
  if (shared_param_nodes && shared_param_nodes->size() != params_.size())
    shared_param_nodes->assign(params_.size(), -1);
  std::vector<int>& nodes = shared_param_nodes ? *shared_param_nodes : result.param_nodes;
  if (!shared_param_nodes) nodes.assign(params_.size(), -1);

  auto param_node = [&](int slot_index) {
    if (nodes[static_cast<std::size_t>(slot_index)] < 0) {
      ad::Tensor<T> copy = params_[static_cast<std::size_t>(slot_index)].value;
      copy.requires_grad = params_require_grad;
      nodes[static_cast<std::size_t>(slot_index)] = tape.leaf(std::move(copy));
    }
    return nodes[static_cast<std::size_t>(slot_index)];
  };

  std::vector<int> node_of(spec_.layers.size(), -1);
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerDesc& ld = spec_.layers[i];
    const Slots& slot = slots_[i];
    const int in0 = ld.inputs.empty() ? -1 : node_of[static_cast<std::size_t>(ld.inputs[0])];
    switch (ld.kind) {
      case LayerKind::input:
        node_of[i] = input_node;
        break;
      case LayerKind::conv:
        node_of[i] = tape.conv2d(in0, param_node(slot.w), param_node(slot.b), ld.stride,
                                 ld.padding, ad::ConvMode::normal);
        break;
      case LayerKind::conv_transpose:
        node_of[i] = tape.conv2d(in0, param_node(slot.w), param_node(slot.b), ld.stride,
                                 ld.padding, ad::ConvMode::transpose, ld.output_padding);
        break;
      case LayerKind::batchnorm:
        node_of[i] = tape.batchnorm(in0, param_node(slot.gamma), param_node(slot.beta),
                                    &buffers_[static_cast<std::size_t>(slot.run_mean)].value,
                                    &buffers_[static_cast<std::size_t>(slot.run_var)].value,
                                    training);
        break;
      case LayerKind::relu:
        node_of[i] = tape.relu(in0);
        break;
      case LayerKind::leaky_relu:
        node_of[i] = tape.leaky_relu(in0, static_cast<T>(ld.rate));
        break;
      case LayerKind::sigmoid:
        node_of[i] = tape.sigmoid(in0);
        break;
      case LayerKind::dropout:
        node_of[i] = tape.dropout(in0, static_cast<T>(ld.rate), training, rng);
        break;
      case LayerKind::avgpool2x2:
        node_of[i] = tape.avgpool2x2(in0);
        break;
      case LayerKind::maxpool2x2:
        node_of[i] = tape.maxpool2x2(in0);
        break;
      case LayerKind::concat:
        node_of[i] = tape.concat_channels(in0, node_of[static_cast<std::size_t>(ld.inputs[1])]);
        break;
    }
  }
  result.output = node_of[static_cast<std::size_t>(spec_.output)];
  if (shared_param_nodes) result.param_nodes = *shared_param_nodes;
  return result;
}

}  // namespace dehaze
