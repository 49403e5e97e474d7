#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vsop3d/tensor/ops.hpp"
#include "vsop3d/tensor/rng.hpp"
#include "vsop3d/tensor/tensor.hpp"

namespace vsop3d {

enum class ConvKind { kConv2d, kConv3d };

std::string to_string(ConvKind kind);
ConvKind parse_conv_kind(const std::string& text);

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct BackboneConfig {
  std::int64_t frames = 1;
  ConvKind conv_kind = ConvKind::kConv2d;
  std::int64_t width_multiplier = 1;
  std::int64_t obs_height = 32;
  std::int64_t obs_width = 32;
  std::int64_t obs_channels = 3;
  std::int64_t num_actions = 15;
  // IMPALA stage widths before the multiplier.
  std::array<std::int64_t, 3> base_channels{16, 32, 32};
  // Trunk dense width before the multiplier.
  std::int64_t hidden_units = 256;

  // Throws ConfigError listing the first violated constraint.
  void validate() const;
  // Channels seen by the first convolution.
  std::int64_t input_channels() const;
  // Observation batch shape: [N, frames*C, H, W] or [N, C, frames, H, W].
  Shape observation_shape(std::int64_t batch) const;

  friend bool operator==(const BackboneConfig&, const BackboneConfig&) = default;
};

struct PolicyValueOutput {
  Tensor logits;  // [N, num_actions]
  Tensor value;   // [N]
};

struct ConvLayer {
  std::string name;
  ConvSpec spec;
  Tensor weight;
  Tensor bias;
};

struct DenseLayer {
  std::string name;
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// IMPALA residual network: three stages of conv -> max-pool -> two residual
// blocks, then relu -> dense trunk -> relu -> policy and value heads. The 3D
// variant convolves over (frames, H, W) with temporal kernel 3 / stride 1 /
// padding 1, pools spatially, and averages over time before the trunk.
// Dropout follows every residual block and the trunk when active.
class Backbone {
 public:
  Backbone(const BackboneConfig& config, Rng& rng);

  PolicyValueOutput forward(const Tensor& observations, Mode mode, double dropout_rate, Rng& rng) const;

  const BackboneConfig& config() const { return config_; }
  const std::vector<ConvLayer>& conv_layers() const { return convs_; }
  const DenseLayer& trunk() const { return trunk_; }
  const DenseLayer& policy_head() const { return policy_; }
  const DenseLayer& value_head() const { return value_; }

  // Stable order shared by the optimizer and checkpoints.
  std::vector<Tensor> parameters() const;
  std::vector<NamedTensor> named_parameters() const;
  std::int64_t parameter_count() const;

 private:
  Tensor conv(const ConvLayer& layer, const Tensor& x) const;

  BackboneConfig config_;
  std::vector<ConvLayer> convs_;  // stage-major: stage conv, then 4 block convs
  DenseLayer trunk_;
  DenseLayer policy_;
  DenseLayer value_;
  std::int64_t flat_features_ = 0;
};

// Semi-orthogonal [rows, cols] matrix scaled by gain; rows of the result are
// orthonormal when rows <= cols, columns otherwise.
std::vector<double> orthogonal_matrix(std::int64_t rows, std::int64_t cols, double gain, Rng& rng);

std::int64_t parameter_count(const Backbone& network);

}  // namespace vsop3d
