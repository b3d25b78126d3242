#include "dehaze/network.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace dehaze {

const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::input: return "input";
    case LayerKind::conv: return "conv";
    case LayerKind::conv_transpose: return "conv_t";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::dropout: return "dropout";
    case LayerKind::avgpool2x2: return "avgpool2x2";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::concat: return "concat";
  }
  return "?";
}

void GeneratorConfig::validate() const {
  ensure(growth_rate >= 1, "generator config: growth rate must be >= 1");
  ensure(!db_layers.empty(), "generator config: need at least one dense block");
  for (int l : db_layers) ensure(l >= 1, "generator config: dense block layer counts must be >= 1");
  ensure(bottleneck_layers >= 1, "generator config: bottleneck must have >= 1 layers");
  ensure(input_conv_channels >= 1, "generator config: input conv channels must be >= 1");
  ensure(dropout_rate >= 0.0 && dropout_rate < 1.0, "generator config: dropout rate must be in [0,1)");
  ensure(input_size > 0, "generator config: input size must be positive");
  const int factor = 1 << static_cast<int>(db_layers.size());
  ensure(input_size % factor == 0,
         "generator config: input size " + std::to_string(input_size) +
             " is not divisible by " + std::to_string(factor));
}

void DiscriminatorConfig::validate() const {
  ensure(base_channels >= 1, "discriminator config: base channels must be >= 1");
  ensure(!multipliers.empty(), "discriminator config: need at least one stage");
  ensure(multipliers.size() == strides.size(),
         "discriminator config: multipliers and strides must have equal length");
  for (int m : multipliers) ensure(m >= 1, "discriminator config: multipliers must be >= 1");
  for (int s : strides) ensure(s >= 1, "discriminator config: strides must be >= 1");
  ensure(kernel >= 1, "discriminator config: kernel must be >= 1");
  ensure(leaky_slope >= 0.0 && leaky_slope < 1.0, "discriminator config: bad leaky slope");
}

namespace {

struct SpecBuilder {
  NetworkSpec spec;

  int add(LayerDesc ld) {
    spec.layers.push_back(std::move(ld));
    return static_cast<int>(spec.layers.size()) - 1;
  }

  int input(int channels) {
    spec.input_channels = channels;
    LayerDesc ld;
    ld.kind = LayerKind::input;
    ld.tag = "input";
    return add(std::move(ld));
  }

  int conv(int in, const std::string& tag, int out_channels, int kernel, int stride, int padding,
           bool counted = false) {
    LayerDesc ld;
    ld.kind = LayerKind::conv;
    ld.inputs = {in};
    ld.tag = tag;
    ld.out_channels = out_channels;
    ld.kernel = kernel;
    ld.stride = stride;
    ld.padding = padding;
    ld.counted_in_depth = counted;
    return add(std::move(ld));
  }

  int conv_transpose(int in, const std::string& tag, int out_channels, int kernel, int stride,
                     int padding, int output_padding) {
    LayerDesc ld;
    ld.kind = LayerKind::conv_transpose;
    ld.inputs = {in};
    ld.tag = tag;
    ld.out_channels = out_channels;
    ld.kernel = kernel;
    ld.stride = stride;
    ld.padding = padding;
    ld.output_padding = output_padding;
    return add(std::move(ld));
  }

  int simple(LayerKind kind, int in, const std::string& tag, double rate = 0.0) {
    LayerDesc ld;
    ld.kind = kind;
    ld.inputs = {in};
    ld.tag = tag;
    ld.rate = rate;
    return add(std::move(ld));
  }

  int concat(int a, int b, const std::string& tag) {
    LayerDesc ld;
    ld.kind = LayerKind::concat;
    ld.inputs = {a, b};
    ld.tag = tag;
    return add(std::move(ld));
  }
};

// batchnorm -> relu -> 3x3 conv (growth filters) -> dropout, then dense
// concatenation onto the running stack.
int composite_layer(SpecBuilder& b, int in, const std::string& tag, int growth, double dropout) {
  int x = b.simple(LayerKind::batchnorm, in, tag + ".bn");
  x = b.simple(LayerKind::relu, x, tag + ".relu");
  x = b.conv(x, tag + ".conv", growth, 3, 1, 1, /*counted=*/true);
  x = b.simple(LayerKind::dropout, x, tag + ".drop", dropout);
  return b.concat(in, x, tag + ".cat");
}

int dense_block(SpecBuilder& b, int in, const std::string& tag, int layers, int growth,
                double dropout) {
  int x = in;
  for (int l = 0; l < layers; ++l)
    x = composite_layer(b, x, tag + ".l" + std::to_string(l), growth, dropout);
  return x;
}

}  // namespace

NetworkSpec build_tiramisu(const GeneratorConfig& config) {
  config.validate();
  SpecBuilder b;
  b.spec.name = "tiramisu-generator";
  const int n_stages = static_cast<int>(config.db_layers.size());

  int x = b.input(3);
  x = b.conv(x, "input_conv", config.input_conv_channels, 3, 1, 1, /*counted=*/true);

  std::vector<int> skips(static_cast<std::size_t>(n_stages));
  for (int i = 0; i < n_stages; ++i) {
    const std::string tag = "enc" + std::to_string(i);
    x = dense_block(b, x, tag, config.db_layers[static_cast<std::size_t>(i)], config.growth_rate,
                    config.dropout_rate);
    skips[static_cast<std::size_t>(i)] = x;
    // transition down: batchnorm, channel-preserving 1x1 conv, dropout, pool
    int td = b.simple(LayerKind::batchnorm, x, tag + ".td.bn");
    // channel count equals the block output: input channels + L*growth
    int ch = config.input_conv_channels;
    for (int j = 0; j <= i; ++j)
      ch += config.db_layers[static_cast<std::size_t>(j)] * config.growth_rate;
    td = b.conv(td, tag + ".td.conv", ch, 1, 1, 0);
    td = b.simple(LayerKind::dropout, td, tag + ".td.drop", config.dropout_rate);
    x = b.simple(LayerKind::avgpool2x2, td, tag + ".td.pool");
  }

  x = dense_block(b, x, "bottleneck", config.bottleneck_layers, config.growth_rate,
                  config.dropout_rate);

  // Each transition up carries the channels newly added by the block before
  // it (layers * growth), is concatenated with the same-resolution encoder
  // skip, and feeds the decoder dense block.
  int prev_layers = config.bottleneck_layers;
  for (int i = n_stages - 1; i >= 0; --i) {
    const std::string tag = "dec" + std::to_string(i);
    x = b.conv_transpose(x, tag + ".tu", prev_layers * config.growth_rate, 3, 2, 1, 1);
    x = b.concat(x, skips[static_cast<std::size_t>(i)], tag + ".skip_cat");
    x = dense_block(b, x, tag, config.db_layers[static_cast<std::size_t>(i)], config.growth_rate,
                    config.dropout_rate);
    prev_layers = config.db_layers[static_cast<std::size_t>(i)];
  }

  x = b.conv(x, "output_conv", 3, 1, 1, 0);
  x = b.simple(LayerKind::sigmoid, x, "output_act");
  b.spec.output = x;
  return b.spec;
}

NetworkSpec build_patch_discriminator(const DiscriminatorConfig& config) {
  config.validate();
  SpecBuilder b;
  b.spec.name = "patch-discriminator";
  int x = b.input(6);
  for (std::size_t k = 0; k < config.multipliers.size(); ++k) {
    const std::string tag = "d.c" + std::to_string(k);
    x = b.conv(x, tag + ".conv", config.base_channels * config.multipliers[k], config.kernel,
               config.strides[k], 1);
    if (k > 0) x = b.simple(LayerKind::batchnorm, x, tag + ".bn");
    x = b.simple(LayerKind::leaky_relu, x, tag + ".act", config.leaky_slope);
  }
  x = b.conv(x, "d.out.conv", 1, config.kernel, 1, 1);
  x = b.simple(LayerKind::sigmoid, x, "d.out.act");
  b.spec.output = x;
  return b.spec;
}

NetworkSpec build_vgg19_features() {
  SpecBuilder b;
  b.spec.name = "vgg19-pool4-features";
  const std::vector<std::vector<int>> stages = {
      {64, 64}, {128, 128}, {256, 256, 256, 256}, {512, 512, 512, 512}};
  int x = b.input(3);
  for (std::size_t s = 0; s < stages.size(); ++s) {
    for (std::size_t c = 0; c < stages[s].size(); ++c) {
      const std::string tag =
          "vgg.conv" + std::to_string(s + 1) + "_" + std::to_string(c + 1);
      x = b.conv(x, tag, stages[s][c], 3, 1, 1);
      x = b.simple(LayerKind::relu, x, tag + ".relu");
    }
    x = b.simple(LayerKind::maxpool2x2, x, "vgg.pool" + std::to_string(s + 1));
  }
  b.spec.output = x;
  return b.spec;
}

ShapeReport analyze(const NetworkSpec& spec, int input_h, int input_w) {
  ensure(!spec.layers.empty() && spec.layers[0].kind == LayerKind::input,
         "analyze: spec must start with an input layer");
  ensure(input_h > 0 && input_w > 0, "analyze: input dimensions must be positive");

  ShapeReport report;
  report.layers.resize(spec.layers.size());
  std::vector<double> jump(spec.layers.size(), 1.0);

  auto fail = [&](std::size_t i, const std::string& msg) {
    throw Error("analyze: layer " + std::to_string(i) + " (" + spec.layers[i].tag + ", " +
                to_string(spec.layers[i].kind) + "): " + msg);
  };

  std::int64_t cum = 0;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& ld = spec.layers[i];
    LayerReport& lr = report.layers[i];
    lr.index = static_cast<int>(i);
    lr.kind = ld.kind;
    lr.tag = ld.tag;

    auto in_of = [&](int which) -> const LayerReport& {
      const int idx = ld.inputs[static_cast<std::size_t>(which)];
      ensure(idx >= 0 && idx < static_cast<int>(i), "analyze: forward reference in spec");
      return report.layers[static_cast<std::size_t>(idx)];
    };

    switch (ld.kind) {
      case LayerKind::input:
        lr.out_shape = {spec.input_channels, input_h, input_w};
        jump[i] = 1.0;
        lr.receptive_field = 1.0;
        break;
      case LayerKind::conv: {
        const auto& in = in_of(0);
        const int c = in.out_shape[0], h = in.out_shape[1], w = in.out_shape[2];
        const int oh = (h + 2 * ld.padding - ld.kernel) / ld.stride + 1;
        const int ow = (w + 2 * ld.padding - ld.kernel) / ld.stride + 1;
        if (h + 2 * ld.padding < ld.kernel || oh <= 0 || ow <= 0)
          fail(i, "non-positive output for input " + std::to_string(h) + "x" + std::to_string(w));
        lr.out_shape = {ld.out_channels, oh, ow};
        lr.layer_params = static_cast<std::int64_t>(ld.out_channels) * c * ld.kernel * ld.kernel +
                          ld.out_channels;
        lr.receptive_field =
            in.receptive_field + (ld.kernel - 1) * jump[static_cast<std::size_t>(ld.inputs[0])];
        jump[i] = jump[static_cast<std::size_t>(ld.inputs[0])] * ld.stride;
        break;
      }
      case LayerKind::conv_transpose: {
        const auto& in = in_of(0);
        const int c = in.out_shape[0], h = in.out_shape[1], w = in.out_shape[2];
        const int oh = (h - 1) * ld.stride - 2 * ld.padding + ld.kernel + ld.output_padding;
        const int ow = (w - 1) * ld.stride - 2 * ld.padding + ld.kernel + ld.output_padding;
        if (oh <= 0 || ow <= 0) fail(i, "non-positive output");
        lr.out_shape = {ld.out_channels, oh, ow};
        lr.layer_params = static_cast<std::int64_t>(c) * ld.out_channels * ld.kernel * ld.kernel +
                          ld.out_channels;
        jump[i] = jump[static_cast<std::size_t>(ld.inputs[0])] / ld.stride;
        lr.receptive_field = in.receptive_field + (ld.kernel - 1) * jump[i];
        break;
      }
      case LayerKind::batchnorm: {
        const auto& in = in_of(0);
        lr.out_shape = in.out_shape;
        lr.layer_params = 2 * static_cast<std::int64_t>(in.out_shape[0]);
        lr.receptive_field = in.receptive_field;
        jump[i] = jump[static_cast<std::size_t>(ld.inputs[0])];
        break;
      }
      case LayerKind::avgpool2x2:
      case LayerKind::maxpool2x2: {
        const auto& in = in_of(0);
        if (in.out_shape[1] % 2 != 0 || in.out_shape[2] % 2 != 0)
          fail(i, "odd spatial dims " + std::to_string(in.out_shape[1]) + "x" +
                      std::to_string(in.out_shape[2]));
        lr.out_shape = {in.out_shape[0], in.out_shape[1] / 2, in.out_shape[2] / 2};
        lr.receptive_field =
            in.receptive_field + 1.0 * jump[static_cast<std::size_t>(ld.inputs[0])];
        jump[i] = jump[static_cast<std::size_t>(ld.inputs[0])] * 2.0;
        break;
      }
      case LayerKind::concat: {
        const auto& a = in_of(0);
        const auto& bb = in_of(1);
        if (a.out_shape[1] != bb.out_shape[1] || a.out_shape[2] != bb.out_shape[2])
          fail(i, "spatial mismatch " + std::to_string(a.out_shape[1]) + "x" +
                      std::to_string(a.out_shape[2]) + " vs " + std::to_string(bb.out_shape[1]) +
                      "x" + std::to_string(bb.out_shape[2]));
        lr.out_shape = {a.out_shape[0] + bb.out_shape[0], a.out_shape[1], a.out_shape[2]};
        lr.receptive_field = std::max(a.receptive_field, bb.receptive_field);
        jump[i] = std::max(jump[static_cast<std::size_t>(ld.inputs[0])],
                           jump[static_cast<std::size_t>(ld.inputs[1])]);
        break;
      }
      default: {  // relu, leaky_relu, sigmoid, dropout
        const auto& in = in_of(0);
        lr.out_shape = in.out_shape;
        lr.receptive_field = in.receptive_field;
        jump[i] = jump[static_cast<std::size_t>(ld.inputs[0])];
        break;
      }
    }
    cum += lr.layer_params;
    lr.cumulative_params = cum;
    report.spatial_trace.push_back(lr.out_shape[1]);
    if (ld.kind == LayerKind::conv && ld.counted_in_depth) ++report.conv_layer_count;
  }

  const LayerReport& out = report.layers[static_cast<std::size_t>(spec.output)];
  report.output_shape = out.out_shape;
  report.param_count = cum;
  report.receptive_field = out.receptive_field;
  return report;
}

std::string architecture_dump(const NetworkSpec& spec, const ShapeReport& report) {
  std::ostringstream os;
  os << spec.name << " input_channels=" << spec.input_channels << "\n";
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerDesc& ld = spec.layers[i];
    const LayerReport& lr = report.layers[i];
    char line[256];
    std::string hyper;
    if (ld.kind == LayerKind::conv || ld.kind == LayerKind::conv_transpose) {
      hyper = " k=" + std::to_string(ld.kernel) + " s=" + std::to_string(ld.stride) +
              " p=" + std::to_string(ld.padding);
      if (ld.output_padding) hyper += " op=" + std::to_string(ld.output_padding);
    } else if (ld.kind == LayerKind::dropout || ld.kind == LayerKind::leaky_relu) {
      char r[32];
      std::snprintf(r, sizeof(r), " rate=%.4g", ld.rate);
      hyper = r;
    }
    std::snprintf(line, sizeof(line), "%03zu %-10s %-22s%s out=%dx%dx%d params=%lld cum=%lld rf=%.6g\n",
                  i, to_string(ld.kind), ld.tag.c_str(), hyper.c_str(), lr.out_shape[0],
                  lr.out_shape[1], lr.out_shape[2], static_cast<long long>(lr.layer_params),
                  static_cast<long long>(lr.cumulative_params), lr.receptive_field);
    os << line;
  }
  os << "total conv_layers=" << report.conv_layer_count << " params=" << report.param_count
     << " rf=" << report.receptive_field << " out=" << report.output_shape[0] << "x"
     << report.output_shape[1] << "x" << report.output_shape[2] << "\n";
  return os.str();
}

std::uint64_t fingerprint(const std::string& dump) {
  // FNV-1a, 64-bit
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace dehaze
