#include "conv_kernels.hpp"

#include <algorithm>
#include <cstring>

namespace vsop3d::detail {

namespace {

typedef double Vec __attribute__((vector_size(kLanes * sizeof(double))));

inline Vec load(const double* p) {
  Vec v;
  std::memcpy(&v, p, sizeof(Vec));
  return v;
}

inline void store(double* p, Vec v) { std::memcpy(p, &v, sizeof(Vec)); }

inline double lane_sum(Vec v) {
  double total = 0.0;
  for (std::int64_t l = 0; l < kLanes; ++l) total += v[l];
  return total;
}

// Weights as [C][K][O] so the OB weights of one tap are contiguous.
std::vector<double> tap_major(const ConvGeometry& g, const double* weight) {
  const std::int64_t k = g.offsets();
  std::vector<double> wt(static_cast<std::size_t>(g.out_c * g.in_c * k));
  for (std::int64_t o = 0; o < g.out_c; ++o) {
    for (std::int64_t c = 0; c < g.in_c; ++c) {
      for (std::int64_t ko = 0; ko < k; ++ko) wt[(c * k + ko) * g.out_c + o] = weight[(o * g.in_c + c) * k + ko];
    }
  }
  return wt;
}

template <int OB>
void forward_block(const ConvPlan& plan, const double* in, const double* wt, std::int64_t o0, double* out) {
  const ConvGeometry& g = plan.geo;
  const std::int64_t vin = g.in_volume(), vout = g.out_volume(), k = g.offsets(), o_total = g.out_c;
  for (std::int64_t p = 0; p < vout; ++p) {
    Vec acc[OB];
    for (int j = 0; j < OB; ++j) acc[j] = Vec{};
    const std::int32_t e0 = plan.tap_start[p], e1 = plan.tap_start[p + 1];
    for (std::int64_t c = 0; c < g.in_c; ++c) {
      const double* in_c = in + c * vin * kLanes;
      const double* w_c = wt + c * k * o_total + o0;
      for (std::int32_t e = e0; e < e1; ++e) {
        const Vec x = load(in_c + static_cast<std::int64_t>(plan.tap_input[e]) * kLanes);
        const double* w = w_c + static_cast<std::int64_t>(plan.tap_offset[e]) * o_total;
        for (int j = 0; j < OB; ++j) acc[j] += w[j] * x;
      }
    }
    for (int j = 0; j < OB; ++j) store(out + ((o0 + j) * vout + p) * kLanes, acc[j]);
  }
}

template <int OB>
void backward_input_block(const ConvPlan& plan, const double* gout, const double* wt, std::int64_t o0, double* gin) {
  const ConvGeometry& g = plan.geo;
  const std::int64_t vin = g.in_volume(), vout = g.out_volume(), k = g.offsets(), o_total = g.out_c;
  for (std::int64_t p = 0; p < vout; ++p) {
    Vec gv[OB];
    for (int j = 0; j < OB; ++j) gv[j] = load(gout + ((o0 + j) * vout + p) * kLanes);
    const std::int32_t e0 = plan.tap_start[p], e1 = plan.tap_start[p + 1];
    for (std::int64_t c = 0; c < g.in_c; ++c) {
      double* gin_c = gin + c * vin * kLanes;
      const double* w_c = wt + c * k * o_total + o0;
      for (std::int32_t e = e0; e < e1; ++e) {
        const double* w = w_c + static_cast<std::int64_t>(plan.tap_offset[e]) * o_total;
        Vec s = w[0] * gv[0];
        for (int j = 1; j < OB; ++j) s += w[j] * gv[j];
        double* dst = gin_c + static_cast<std::int64_t>(plan.tap_input[e]) * kLanes;
        store(dst, load(dst) + s);
      }
    }
  }
}

template <int OB>
void backward_weight_block(const ConvPlan& plan, const double* in, const double* gout, std::int64_t o0,
                           double* gw) {
  const ConvGeometry& g = plan.geo;
  const std::int64_t vin = g.in_volume(), vout = g.out_volume(), k = g.offsets();
  for (std::int64_t c = 0; c < g.in_c; ++c) {
    const double* in_c = in + c * vin * kLanes;
    for (std::int64_t ko = 0; ko < k; ++ko) {
      Vec acc[OB];
      for (int j = 0; j < OB; ++j) acc[j] = Vec{};
      const std::int32_t* tab = plan.table.data() + ko * vout;
      for (std::int64_t p = 0; p < vout; ++p) {
        if (tab[p] < 0) continue;
        const Vec x = load(in_c + static_cast<std::int64_t>(tab[p]) * kLanes);
        for (int j = 0; j < OB; ++j) acc[j] += load(gout + ((o0 + j) * vout + p) * kLanes) * x;
      }
      for (int j = 0; j < OB; ++j) gw[((o0 + j) * g.in_c + c) * k + ko] += lane_sum(acc[j]);
    }
  }
}

template <template <int> class Op, typename... Args>
void dispatch(std::int64_t ob, Args&&... args) {
  switch (ob) {
    case 1: Op<1>::run(args...); break;
    case 2: Op<2>::run(args...); break;
    case 3: Op<3>::run(args...); break;
    case 4: Op<4>::run(args...); break;
    case 5: Op<5>::run(args...); break;
    case 6: Op<6>::run(args...); break;
    case 7: Op<7>::run(args...); break;
    default: Op<8>::run(args...); break;
  }
}

template <int OB>
struct Forward {
  static void run(const ConvPlan& plan, const double* in, const double* wt, std::int64_t o0, double* out) {
    forward_block<OB>(plan, in, wt, o0, out);
  }
};
template <int OB>
struct BackwardInput {
  static void run(const ConvPlan& plan, const double* gout, const double* wt, std::int64_t o0, double* gin) {
    backward_input_block<OB>(plan, gout, wt, o0, gin);
  }
};
template <int OB>
struct BackwardWeight {
  static void run(const ConvPlan& plan, const double* in, const double* gout, std::int64_t o0, double* gw) {
    backward_weight_block<OB>(plan, in, gout, o0, gw);
  }
};

constexpr std::int64_t kOutputBlock = 8;

}  // namespace

ConvPlan::ConvPlan(const ConvGeometry& g) : geo(g) {
  const std::int64_t vout = g.out_volume();
  table.resize(static_cast<std::size_t>(g.offsets() * vout));
  std::vector<std::vector<std::pair<std::int32_t, std::int32_t>>> taps(static_cast<std::size_t>(vout));
  std::int64_t ko = 0;
  for (std::int64_t a = 0; a < g.k[0]; ++a) {
    for (std::int64_t b = 0; b < g.k[1]; ++b) {
      for (std::int64_t e = 0; e < g.k[2]; ++e, ++ko) {
        std::int64_t q = 0;
        for (std::int64_t od = 0; od < g.out[0]; ++od) {
          const std::int64_t id = od * g.s[0] - g.p[0] + a;
          for (std::int64_t oh = 0; oh < g.out[1]; ++oh) {
            const std::int64_t ih = oh * g.s[1] - g.p[1] + b;
            for (std::int64_t ow = 0; ow < g.out[2]; ++ow, ++q) {
              const std::int64_t iw = ow * g.s[2] - g.p[2] + e;
              const bool inside = id >= 0 && id < g.in[0] && ih >= 0 && ih < g.in[1] && iw >= 0 && iw < g.in[2];
              const auto idx = inside ? static_cast<std::int32_t>((id * g.in[1] + ih) * g.in[2] + iw) : -1;
              table[ko * vout + q] = idx;
              if (inside) taps[q].emplace_back(static_cast<std::int32_t>(ko), idx);
            }
          }
        }
      }
    }
  }
  tap_start.reserve(static_cast<std::size_t>(vout + 1));
  tap_start.push_back(0);
  for (const auto& list : taps) {
    for (const auto& [off, idx] : list) {
      tap_offset.push_back(off);
      tap_input.push_back(idx);
    }
    tap_start.push_back(static_cast<std::int32_t>(tap_offset.size()));
  }
}

std::vector<double> pack_lanes(const double* src, std::int64_t batch, std::int64_t per_sample) {
  const std::int64_t blocks = (batch + kLanes - 1) / kLanes;
  std::vector<double> out(static_cast<std::size_t>(blocks * per_sample * kLanes), 0.0);
  for (std::int64_t n = 0; n < batch; ++n) {
    const std::int64_t b = n / kLanes, l = n % kLanes;
    const double* s = src + n * per_sample;
    double* d = out.data() + b * per_sample * kLanes + l;
    for (std::int64_t i = 0; i < per_sample; ++i) d[i * kLanes] = s[i];
  }
  return out;
}

void unpack_lanes(const std::vector<double>& packed, std::int64_t batch, std::int64_t per_sample, double* dst,
                  bool accumulate) {
  for (std::int64_t n = 0; n < batch; ++n) {
    const std::int64_t b = n / kLanes, l = n % kLanes;
    const double* s = packed.data() + b * per_sample * kLanes + l;
    double* d = dst + n * per_sample;
    if (accumulate) {
      for (std::int64_t i = 0; i < per_sample; ++i) d[i] += s[i * kLanes];
    } else {
      for (std::int64_t i = 0; i < per_sample; ++i) d[i] = s[i * kLanes];
    }
  }
}

std::vector<double> conv_forward(const ConvPlan& plan, const std::vector<double>& packed_in, const double* weight) {
  const ConvGeometry& g = plan.geo;
  const std::int64_t in_block = g.in_c * g.in_volume() * kLanes;
  const std::int64_t out_block = g.out_c * g.out_volume() * kLanes;
  const auto wt = tap_major(g, weight);
  std::vector<double> out(static_cast<std::size_t>(g.lane_blocks() * out_block));
  for (std::int64_t b = 0; b < g.lane_blocks(); ++b) {
    for (std::int64_t o0 = 0; o0 < g.out_c; o0 += kOutputBlock) {
      dispatch<Forward>(std::min(kOutputBlock, g.out_c - o0), plan, packed_in.data() + b * in_block, wt.data(), o0,
                        out.data() + b * out_block);
    }
  }
  return out;
}

std::vector<double> conv_backward_input(const ConvPlan& plan, const std::vector<double>& packed_gout,
                                        const double* weight) {
  const ConvGeometry& g = plan.geo;
  const std::int64_t in_block = g.in_c * g.in_volume() * kLanes;
  const std::int64_t out_block = g.out_c * g.out_volume() * kLanes;
  const auto wt = tap_major(g, weight);
  std::vector<double> gin(static_cast<std::size_t>(g.lane_blocks() * in_block), 0.0);
  for (std::int64_t b = 0; b < g.lane_blocks(); ++b) {
    for (std::int64_t o0 = 0; o0 < g.out_c; o0 += kOutputBlock) {
      dispatch<BackwardInput>(std::min(kOutputBlock, g.out_c - o0), plan, packed_gout.data() + b * out_block,
                              wt.data(), o0, gin.data() + b * in_block);
    }
  }
  return gin;
}

void conv_backward_weight(const ConvPlan& plan, const std::vector<double>& packed_in,
                          const std::vector<double>& packed_gout, double* grad_weight) {
  const ConvGeometry& g = plan.geo;
  const std::int64_t in_block = g.in_c * g.in_volume() * kLanes;
  const std::int64_t out_block = g.out_c * g.out_volume() * kLanes;
  for (std::int64_t b = 0; b < g.lane_blocks(); ++b) {
    for (std::int64_t o0 = 0; o0 < g.out_c; o0 += kOutputBlock) {
      dispatch<BackwardWeight>(std::min(kOutputBlock, g.out_c - o0), plan, packed_in.data() + b * in_block,
                               packed_gout.data() + b * out_block, o0, grad_weight);
    }
  }
}

}  // namespace vsop3d::detail
