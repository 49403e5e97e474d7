#pragma once

// Direct convolution kernels over a batch-interleaved layout: eight samples
// share one vector lane group, so every multiply-add is a full-width vector
// operation regardless of how small the spatial extents are.

#include <array>
#include <cstdint>
#include <vector>

namespace vsop3d::detail {

inline constexpr std::int64_t kLanes = 8;

struct ConvGeometry {
  std::int64_t batch = 0, in_c = 0, out_c = 0;
  std::array<std::int64_t, 3> in{}, out{}, k{}, s{}, p{};

  std::int64_t offsets() const { return k[0] * k[1] * k[2]; }
  std::int64_t in_volume() const { return in[0] * in[1] * in[2]; }
  std::int64_t out_volume() const { return out[0] * out[1] * out[2]; }
  std::int64_t lane_blocks() const { return (batch + kLanes - 1) / kLanes; }
};

// Precomputed tap lists: for every output position, the (kernel offset,
// input position) pairs that fall inside the unpadded input.
struct ConvPlan {
  ConvGeometry geo;
  std::vector<std::int32_t> tap_start;  // out_volume + 1 entries
  std::vector<std::int32_t> tap_offset;
  std::vector<std::int32_t> tap_input;
  // Input position per (offset, output position), -1 for padding.
  std::vector<std::int32_t> table;

  explicit ConvPlan(const ConvGeometry& g);
};

// [batch][per_sample] -> [blocks][per_sample][kLanes]; missing lanes are zero.
std::vector<double> pack_lanes(const double* src, std::int64_t batch, std::int64_t per_sample);
// Inverse of pack_lanes, accumulating into dst when accumulate is set.
void unpack_lanes(const std::vector<double>& packed, std::int64_t batch, std::int64_t per_sample, double* dst,
                  bool accumulate);

// packed_in [blocks][C][Vin][L], weight [O][C][K] -> packed_out [blocks][O][Vout][L]
std::vector<double> conv_forward(const ConvPlan& plan, const std::vector<double>& packed_in, const double* weight);
// packed_gout [blocks][O][Vout][L] -> packed_gin [blocks][C][Vin][L]
std::vector<double> conv_backward_input(const ConvPlan& plan, const std::vector<double>& packed_gout,
                                        const double* weight);
// Accumulates dL/dweight [O][C][K].
void conv_backward_weight(const ConvPlan& plan, const std::vector<double>& packed_in,
                          const std::vector<double>& packed_gout, double* grad_weight);

}  // namespace vsop3d::detail
