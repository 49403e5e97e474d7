#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "vsop3d/tensor/rng.hpp"
#include "vsop3d/tensor/tensor.hpp"

namespace vsop3d {

enum class Mode { kTrain, kEval };

// Geometry of a cross-correlation over up to three spatial axes, ordered
// (depth, height, width). 2D convolutions use depth extent 1.
struct ConvSpec {
  std::array<std::int64_t, 3> kernel{1, 1, 1};
  std::array<std::int64_t, 3> stride{1, 1, 1};
  std::array<std::int64_t, 3> padding{0, 0, 0};
  std::int64_t in_channels = 1;
  std::int64_t out_channels = 1;

  static ConvSpec make2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kh,
                         std::int64_t kw, std::int64_t stride = 1, std::int64_t padding = 0);
  static ConvSpec make3d(std::int64_t in_channels, std::int64_t out_channels,
                         std::array<std::int64_t, 3> kernel, std::array<std::int64_t, 3> stride,
                         std::array<std::int64_t, 3> padding);

  // floor((input + 2*padding - kernel) / stride) + 1; throws DimensionError when < 1.
  std::int64_t output_extent(std::size_t axis, std::int64_t input) const;
};

namespace ops {

// input [N,C,H,W], kernel [O,C,kh,kw] -> [N,O,H',W']. Bias-free.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const ConvSpec& spec);
// input [N,C,D,H,W], kernel [O,C,kd,kh,kw] -> [N,O,D',H',W']. Bias-free.
Tensor conv3d(const Tensor& input, const Tensor& kernel, const ConvSpec& spec);

// input [N,F] x weight [F,G] + bias [G].
Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias);
// Adds bias [C] along axis 1 of x [N,C,...].
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

Tensor relu(const Tensor& x);
// Inverted dropout. Eval mode returns x itself. Throws std::invalid_argument for rate outside [0,1).
Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng);

// Max pool over the trailing `spatial_axes` axes (2 or 3 spatial axes present;
// pooling is applied to the last two only). Window 3, stride 2, padding 1
// unless overridden.
Tensor max_pool_hw(const Tensor& x, std::int64_t window = 3, std::int64_t stride = 2,
                   std::int64_t padding = 1);
// Mean over a single axis; the axis is removed.
Tensor mean_axis(const Tensor& x, std::size_t axis);
Tensor reshape(const Tensor& x, Shape shape);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);
Tensor maximum(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
Tensor exp(const Tensor& x);
Tensor square(const Tensor& x);
// Gradient is zero outside [lo, hi] and passes through inside.
Tensor clamp(const Tensor& x, double lo, double hi);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
// [N,A] -> [N]
Tensor row_sum(const Tensor& x);
// Row-wise, max-shifted. [N,A] -> [N,A]
Tensor log_softmax(const Tensor& logits);
// out[i] = x[i, index[i]] for x [N,A].
Tensor gather_rows(const Tensor& x, const std::vector<std::int64_t>& index);
// -sum p log p per row of logits [N,A] -> [N]
Tensor categorical_entropy(const Tensor& logits);

struct CategoricalSample {
  std::vector<std::int64_t> actions;
  Tensor logprobs;  // [N]
  Tensor entropy;   // [N]
};
// Samples one action per row. Throws std::domain_error on non-finite logits.
CategoricalSample softmax_categorical(const Tensor& logits, Rng& rng);
// Probabilities of a single row, computed with the max shift.
std::vector<double> softmax_row(std::span<const double> logits);

}  // namespace ops
}  // namespace vsop3d
