#include "vsop3d/nn/backbone.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace vsop3d {

namespace {

constexpr std::int64_t kMinObsExtent = 8;  // three stride-2 pools

std::int64_t pooled(std::int64_t extent) { return (extent + 2 - 3) / 2 + 1; }

Tensor make_param(Shape shape, std::vector<double> values) {
  return Tensor::from(std::move(shape), std::move(values), true);
}

}  // namespace

std::string to_string(ConvKind kind) { return kind == ConvKind::kConv2d ? "conv2d" : "conv3d"; }

ConvKind parse_conv_kind(const std::string& text) {
  if (text == "conv2d" || text == "2d") return ConvKind::kConv2d;
  if (text == "conv3d" || text == "3d") return ConvKind::kConv3d;
  throw ConfigError("unknown conv_kind '" + text + "' (expected conv2d or conv3d)");
}

void BackboneConfig::validate() const {
  if (frames < 1) throw ConfigError("frames must be >= 1");
  if (width_multiplier < 1) throw ConfigError("width_multiplier must be >= 1");
  if (obs_channels < 1) throw ConfigError("obs_channels must be >= 1");
  if (num_actions < 1) throw ConfigError("num_actions must be >= 1");
  if (hidden_units < 1) throw ConfigError("hidden_units must be >= 1");
  for (auto c : base_channels) {
    if (c < 1) throw ConfigError("base_channels must be positive");
  }
  if (obs_height < kMinObsExtent || obs_width < kMinObsExtent) {
    throw ConfigError("observation " + std::to_string(obs_height) + "x" + std::to_string(obs_width) +
                      " is too small for three stride-2 pools (need at least 8x8)");
  }
}

std::int64_t BackboneConfig::input_channels() const {
  return conv_kind == ConvKind::kConv2d ? frames * obs_channels : obs_channels;
}

Shape BackboneConfig::observation_shape(std::int64_t batch) const {
  if (conv_kind == ConvKind::kConv2d) return {batch, frames * obs_channels, obs_height, obs_width};
  return {batch, obs_channels, frames, obs_height, obs_width};
}

std::vector<double> orthogonal_matrix(std::int64_t rows, std::int64_t cols, double gain, Rng& rng) {
  const bool transposed = rows < cols;
  const std::int64_t tall = transposed ? cols : rows;
  const std::int64_t wide = transposed ? rows : cols;
  Eigen::MatrixXd a(tall, wide);
  for (std::int64_t j = 0; j < wide; ++j) {
    for (std::int64_t i = 0; i < tall; ++i) a(i, j) = rng.normal();
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, wide);
  const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(wide, wide).triangularView<Eigen::Upper>();
  for (std::int64_t j = 0; j < wide; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  std::vector<double> out(static_cast<std::size_t>(rows * cols));
  for (std::int64_t i = 0; i < rows; ++i) {
    for (std::int64_t j = 0; j < cols; ++j) {
      out[i * cols + j] = gain * (transposed ? q(j, i) : q(i, j));
    }
  }
  return out;
}

Backbone::Backbone(const BackboneConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const bool three_d = config_.conv_kind == ConvKind::kConv3d;
  const double hidden_gain = std::sqrt(2.0);

  auto add_conv = [&](std::string name, std::int64_t in_c, std::int64_t out_c) {
    ConvLayer layer;
    layer.name = std::move(name);
    layer.spec = three_d ? ConvSpec::make3d(in_c, out_c, {3, 3, 3}, {1, 1, 1}, {1, 1, 1})
                         : ConvSpec::make2d(in_c, out_c, 3, 3, 1, 1);
    const std::int64_t fan_in = in_c * layer.spec.kernel[0] * 9;
    Shape shape = three_d ? Shape{out_c, in_c, 3, 3, 3} : Shape{out_c, in_c, 3, 3};
    layer.weight = make_param(shape, orthogonal_matrix(out_c, fan_in, hidden_gain, rng));
    layer.bias = make_param({out_c}, std::vector<double>(static_cast<std::size_t>(out_c), 0.0));
    convs_.push_back(std::move(layer));
  };

  std::int64_t channels = config_.input_channels();
  std::int64_t h = config_.obs_height, w = config_.obs_width;
  for (int stage = 0; stage < 3; ++stage) {
    const std::int64_t out_c = config_.base_channels[stage] * config_.width_multiplier;
    const std::string prefix = "stage" + std::to_string(stage);
    add_conv(prefix + ".conv", channels, out_c);
    for (int block = 0; block < 2; ++block) {
      for (int k = 0; k < 2; ++k) {
        add_conv(prefix + ".block" + std::to_string(block) + ".conv" + std::to_string(k), out_c, out_c);
      }
    }
    channels = out_c;
    h = pooled(h);
    w = pooled(w);
  }
  flat_features_ = channels * h * w;

  auto make_dense = [&](std::string name, std::int64_t in, std::int64_t out, double gain) {
    DenseLayer layer;
    layer.name = std::move(name);
    // Orthogonal over [out, in] as a linear map, stored transposed.
    const auto w_out_in = orthogonal_matrix(out, in, gain, rng);
    std::vector<double> w_in_out(w_out_in.size());
    for (std::int64_t i = 0; i < in; ++i) {
      for (std::int64_t o = 0; o < out; ++o) w_in_out[i * out + o] = w_out_in[o * in + i];
    }
    layer.weight = make_param({in, out}, std::move(w_in_out));
    layer.bias = make_param({out}, std::vector<double>(static_cast<std::size_t>(out), 0.0));
    return layer;
  };
  const std::int64_t hidden = config_.hidden_units * config_.width_multiplier;
  trunk_ = make_dense("trunk", flat_features_, hidden, hidden_gain);
  policy_ = make_dense("policy", hidden, config_.num_actions, 0.01);
  value_ = make_dense("value", hidden, 1, 1.0);
}

Tensor Backbone::conv(const ConvLayer& layer, const Tensor& x) const {
  const Tensor y = config_.conv_kind == ConvKind::kConv3d ? ops::conv3d(x, layer.weight, layer.spec)
                                                          : ops::conv2d(x, layer.weight, layer.spec);
  return ops::add_channel_bias(y, layer.bias);
}

PolicyValueOutput Backbone::forward(const Tensor& observations, Mode mode, double dropout_rate, Rng& rng) const {
  const Shape expected = config_.observation_shape(observations.rank() > 0 ? observations.dim(0) : 0);
  if (observations.shape() != expected) {
    throw DimensionError("Backbone::forward: observation batch " + shape_str(observations.shape()) +
                         " does not match expected " + shape_str(expected));
  }
  const bool drop = mode == Mode::kTrain && dropout_rate > 0.0;
  const std::int64_t n = observations.dim(0);

  Tensor x = observations;
  std::size_t layer = 0;
  for (int stage = 0; stage < 3; ++stage) {
    x = ops::max_pool_hw(conv(convs_[layer++], x));
    for (int block = 0; block < 2; ++block) {
      Tensor y = conv(convs_[layer++], ops::relu(x));
      y = conv(convs_[layer++], ops::relu(y));
      x = ops::add(x, y);
      if (drop) x = ops::dropout(x, dropout_rate, mode, rng);
    }
  }
  if (config_.conv_kind == ConvKind::kConv3d) x = ops::mean_axis(x, 2);
  x = ops::relu(ops::reshape(x, {n, flat_features_}));
  x = ops::relu(ops::dense(x, trunk_.weight, trunk_.bias));
  if (drop) x = ops::dropout(x, dropout_rate, mode, rng);

  PolicyValueOutput out;
  out.logits = ops::dense(x, policy_.weight, policy_.bias);
  out.value = ops::reshape(ops::dense(x, value_.weight, value_.bias), {n});
  return out;
}

std::vector<NamedTensor> Backbone::named_parameters() const {
  std::vector<NamedTensor> out;
  for (const auto& c : convs_) {
    out.push_back({c.name + ".weight", c.weight});
    out.push_back({c.name + ".bias", c.bias});
  }
  for (const DenseLayer* d : {&trunk_, &policy_, &value_}) {
    out.push_back({d->name + ".weight", d->weight});
    out.push_back({d->name + ".bias", d->bias});
  }
  return out;
}

std::vector<Tensor> Backbone::parameters() const {
  std::vector<Tensor> out;
  for (auto& nt : named_parameters()) out.push_back(nt.tensor);
  return out;
}

std::int64_t Backbone::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& p : parameters()) total += p.numel();
  return total;
}

std::int64_t parameter_count(const Backbone& network) { return network.parameter_count(); }

}  // namespace vsop3d
