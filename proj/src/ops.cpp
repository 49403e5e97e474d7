#include "vsop3d/tensor/ops.hpp"

#include "conv_kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

namespace vsop3d {

using detail::Node;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

namespace {

// Grad buffer of a parent, or nullptr when the parent is not differentiable.
double* grad_of(Node& self, std::size_t parent) {
  Node& p = *self.parents[parent];
  if (!p.requires_grad) return nullptr;
  return p.ensure_grad().data();
}

std::vector<double> copy_data(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

using detail::ConvGeometry;
using detail::ConvPlan;

Tensor conv_nd(const Tensor& input, const Tensor& kernel, const ConvGeometry& g, Shape out_shape) {
  auto plan = std::make_shared<const ConvPlan>(g);
  const std::int64_t in_sample = g.in_c * g.in_volume();
  const std::int64_t out_sample = g.out_c * g.out_volume();
  auto packed_in = std::make_shared<std::vector<double>>(detail::pack_lanes(input.data().data(), g.batch, in_sample));
  const auto packed_out = detail::conv_forward(*plan, *packed_in, kernel.data().data());
  std::vector<double> out(static_cast<std::size_t>(g.batch * out_sample));
  detail::unpack_lanes(packed_out, g.batch, out_sample, out.data(), false);
  return detail::make_result(std::move(out_shape), std::move(out), {input, kernel},
                             [plan, packed_in, in_sample, out_sample](Node& self) {
                               const ConvGeometry& g = plan->geo;
                               double* gin = grad_of(self, 0);
                               double* gk = grad_of(self, 1);
                               const auto packed_gout = detail::pack_lanes(self.grad.data(), g.batch, out_sample);
                               if (gk != nullptr) detail::conv_backward_weight(*plan, *packed_in, packed_gout, gk);
                               if (gin != nullptr) {
                                 const auto packed_gin =
                                     detail::conv_backward_input(*plan, packed_gout, self.parents[1]->data.data());
                                 detail::unpack_lanes(packed_gin, g.batch, in_sample, gin, true);
                               }
                             });
}

ConvGeometry geometry(const Tensor& input, const Tensor& kernel, const ConvSpec& spec, bool three_d,
                      const char* op) {
  const std::size_t rank = three_d ? 5 : 4;
  if (input.rank() != rank || kernel.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank-" + std::to_string(rank) + " input and kernel, got " +
                         shape_str(input.shape()) + " and " + shape_str(kernel.shape()));
  }
  if (input.dim(1) != spec.in_channels || kernel.dim(1) != spec.in_channels) {
    throw DimensionError(std::string(op) + ": input channels " + std::to_string(input.dim(1)) + ", kernel channels " +
                         std::to_string(kernel.dim(1)) + ", spec in_channels " + std::to_string(spec.in_channels));
  }
  if (kernel.dim(0) != spec.out_channels) {
    throw DimensionError(std::string(op) + ": kernel has " + std::to_string(kernel.dim(0)) +
                         " output channels, spec says " + std::to_string(spec.out_channels));
  }
  ConvGeometry g{};
  g.batch = input.dim(0);
  g.in_c = spec.in_channels;
  g.out_c = spec.out_channels;
  const std::size_t first = three_d ? 0 : 1;
  g.in = {1, 1, 1};
  g.k = {1, 1, 1};
  for (std::size_t axis = first; axis < 3; ++axis) {
    const std::size_t dim = 2 + axis - first;
    g.in[axis] = input.dim(dim);
    g.k[axis] = kernel.dim(dim);
    if (g.k[axis] != spec.kernel[axis]) {
      throw DimensionError(std::string(op) + ": kernel extent " + std::to_string(g.k[axis]) + " on axis " +
                           std::to_string(dim) + " disagrees with spec " + std::to_string(spec.kernel[axis]));
    }
  }
  g.s = spec.stride;
  g.p = spec.padding;
  if (!three_d) {
    if (spec.kernel[0] != 1 || spec.stride[0] != 1 || spec.padding[0] != 0) {
      throw DimensionError(std::string(op) + ": 2D spec must have unit depth geometry");
    }
  }
  for (std::size_t axis = 0; axis < 3; ++axis) g.out[axis] = spec.output_extent(axis, g.in[axis]);
  return g;
}

template <typename Fwd, typename Bwd>
Tensor unary(const Tensor& x, Fwd fwd, Bwd dfdx) {
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x.data()[i]);
  return detail::make_result(x.shape(), std::move(out), {x}, [dfdx](Node& self) {
    double* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    const auto& xd = self.parents[0]->data;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * dfdx(xd[i], self.data[i]);
  });
}

}  // namespace

ConvSpec ConvSpec::make2d(std::int64_t in_channels, std::int64_t out_channels, std::int64_t kh, std::int64_t kw,
                          std::int64_t stride, std::int64_t padding) {
  ConvSpec s;
  s.kernel = {1, kh, kw};
  s.stride = {1, stride, stride};
  s.padding = {0, padding, padding};
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  return s;
}

ConvSpec ConvSpec::make3d(std::int64_t in_channels, std::int64_t out_channels, std::array<std::int64_t, 3> kernel,
                          std::array<std::int64_t, 3> stride, std::array<std::int64_t, 3> padding) {
  ConvSpec s;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  return s;
}

std::int64_t ConvSpec::output_extent(std::size_t axis, std::int64_t input) const {
  if (kernel[axis] < 1 || stride[axis] < 1 || padding[axis] < 0) {
    throw DimensionError("ConvSpec: kernel and stride must be positive and padding non-negative");
  }
  const std::int64_t span = input + 2 * padding[axis] - kernel[axis];
  if (span < 0) {
    throw DimensionError("ConvSpec: kernel extent " + std::to_string(kernel[axis]) + " exceeds padded input " +
                         std::to_string(input + 2 * padding[axis]) + " on axis " + std::to_string(axis));
  }
  return span / stride[axis] + 1;
}

namespace ops {

Tensor conv2d(const Tensor& input, const Tensor& kernel, const ConvSpec& spec) {
  const ConvGeometry g = geometry(input, kernel, spec, false, "conv2d");
  return conv_nd(input, kernel, g, {g.batch, g.out_c, g.out[1], g.out[2]});
}

Tensor conv3d(const Tensor& input, const Tensor& kernel, const ConvSpec& spec) {
  const ConvGeometry g = geometry(input, kernel, spec, true, "conv3d");
  return conv_nd(input, kernel, g, {g.batch, g.out_c, g.out[0], g.out[1], g.out[2]});
}

Tensor dense(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 2 || weight.rank() != 2 || bias.rank() != 1 || input.dim(1) != weight.dim(0) ||
      bias.dim(0) != weight.dim(1)) {
    throw DimensionError("dense: incompatible shapes input " + shape_str(input.shape()) + ", weight " +
                         shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()));
  }
  const std::int64_t n = input.dim(0), f = weight.dim(0), g = weight.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n * g));
  MatrixMap out_map(out.data(), n, g);
  out_map.noalias() = ConstMatrixMap(input.data().data(), n, f) * ConstMatrixMap(weight.data().data(), f, g);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < g; ++j) out_map(i, j) += bias[j];
  }
  return detail::make_result({n, g}, std::move(out), {input, weight, bias}, [n, f, g](Node& self) {
    ConstMatrixMap gout(self.grad.data(), n, g);
    if (double* gx = grad_of(self, 0)) {
      MatrixMap(gx, n, f).noalias() += gout * ConstMatrixMap(self.parents[1]->data.data(), f, g).transpose();
    }
    if (double* gw = grad_of(self, 1)) {
      MatrixMap(gw, f, g).noalias() += ConstMatrixMap(self.parents[0]->data.data(), n, f).transpose() * gout;
    }
    if (double* gb = grad_of(self, 2)) {
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < g; ++j) gb[j] += gout(i, j);
      }
    }
  });
}

Tensor add_channel_bias(const Tensor& x, const Tensor& bias) {
  if (x.rank() < 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1)) {
    throw DimensionError("add_channel_bias: bias " + shape_str(bias.shape()) + " does not match channels of " +
                         shape_str(x.shape()));
  }
  const std::int64_t n = x.dim(0), c = x.dim(1);
  const std::int64_t inner = x.numel() / (n * c);
  std::vector<double> out = copy_data(x);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < c; ++j) {
      double* p = out.data() + (i * c + j) * inner;
      for (std::int64_t k = 0; k < inner; ++k) p[k] += bias[j];
    }
  }
  return detail::make_result(x.shape(), std::move(out), {x, bias}, [n, c, inner](Node& self) {
    if (double* gx = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
    }
    if (double* gb = grad_of(self, 1)) {
      for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < c; ++j) {
          const double* p = self.grad.data() + (i * c + j) * inner;
          double acc = 0.0;
          for (std::int64_t k = 0; k < inner; ++k) acc += p[k];
          gb[j] += acc;
        }
      }
    }
  });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor dropout(const Tensor& x, double rate, Mode mode, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw std::invalid_argument("dropout: rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (mode == Mode::kEval || rate == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - rate);
  std::vector<double> mask(x.data().size());
  std::vector<double> out(x.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
    out[i] = x.data()[i] * mask[i];
  }
  return detail::make_result(x.shape(), std::move(out), {x}, [mask = std::move(mask)](Node& self) {
    double* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i] * mask[i];
  });
}

Tensor max_pool_hw(const Tensor& x, std::int64_t window, std::int64_t stride, std::int64_t padding) {
  if (x.rank() < 3) throw DimensionError("max_pool_hw: need at least rank 3, got " + shape_str(x.shape()));
  const std::int64_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  ConvSpec geo = ConvSpec::make2d(1, 1, window, window, stride, padding);
  const std::int64_t oh = geo.output_extent(1, h), ow = geo.output_extent(2, w);
  const std::int64_t planes = x.numel() / (h * w);
  Shape out_shape = x.shape();
  out_shape[out_shape.size() - 2] = oh;
  out_shape[out_shape.size() - 1] = ow;
  std::vector<double> out(static_cast<std::size_t>(planes * oh * ow));
  std::vector<std::int64_t> argmax(out.size());
  for (std::int64_t pl = 0; pl < planes; ++pl) {
    const double* src = x.data().data() + pl * h * w;
    for (std::int64_t i = 0; i < oh; ++i) {
      for (std::int64_t j = 0; j < ow; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        std::int64_t best_idx = -1;
        for (std::int64_t a = 0; a < window; ++a) {
          const std::int64_t r = i * stride - padding + a;
          if (r < 0 || r >= h) continue;
          for (std::int64_t b = 0; b < window; ++b) {
            const std::int64_t c = j * stride - padding + b;
            if (c < 0 || c >= w) continue;
            if (best_idx < 0 || src[r * w + c] > best) {
              best = src[r * w + c];
              best_idx = r * w + c;
            }
          }
        }
        const std::int64_t o = (pl * oh + i) * ow + j;
        out[static_cast<std::size_t>(o)] = best;
        argmax[static_cast<std::size_t>(o)] = pl * h * w + best_idx;
      }
    }
  }
  return detail::make_result(std::move(out_shape), std::move(out), {x}, [argmax = std::move(argmax)](Node& self) {
    double* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[argmax[i]] += self.grad[i];
  });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
  if (axis >= x.rank()) throw DimensionError("mean_axis: axis out of range for " + shape_str(x.shape()));
  std::int64_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= x.dim(i);
  for (std::size_t i = axis + 1; i < x.rank(); ++i) inner *= x.dim(i);
  const std::int64_t len = x.dim(axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.dim(i));
  }
  if (out_shape.empty()) out_shape.push_back(1);
  std::vector<double> out(static_cast<std::size_t>(outer * inner), 0.0);
  const double inv = 1.0 / static_cast<double>(len);
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t l = 0; l < len; ++l) {
      const double* src = x.data().data() + (o * len + l) * inner;
      double* dst = out.data() + o * inner;
      for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i];
    }
  }
  for (auto& v : out) v *= inv;
  return detail::make_result(std::move(out_shape), std::move(out), {x}, [outer, inner, len, inv](Node& self) {
    double* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    for (std::int64_t o = 0; o < outer; ++o) {
      for (std::int64_t l = 0; l < len; ++l) {
        double* dst = gx + (o * len + l) * inner;
        const double* src = self.grad.data() + o * inner;
        for (std::int64_t i = 0; i < inner; ++i) dst[i] += src[i] * inv;
      }
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  }
  return detail::make_result(std::move(shape), copy_data(x), {x}, [](Node& self) {
    double* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
  });
}

namespace {

template <typename Fwd, typename Da, typename Db>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, Da dfda, Db dfdb) {
  require_same_shape(a, b, op);
  std::vector<double> out(a.data().size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(a.data()[i], b.data()[i]);
  return detail::make_result(a.shape(), std::move(out), {a, b}, [dfda, dfdb](Node& self) {
    const auto& ad = self.parents[0]->data;
    const auto& bd = self.parents[1]->data;
    if (double* ga = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i] * dfda(ad[i], bd[i]);
    }
    if (double* gb = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) gb[i] += self.grad[i] * dfdb(ad[i], bd[i]);
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

// Ties send the gradient to the first operand.
Tensor minimum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "minimum", [](double x, double y) { return std::min(x, y); },
      [](double x, double y) { return x <= y ? 1.0 : 0.0; }, [](double x, double y) { return x <= y ? 0.0 : 1.0; });
}

Tensor maximum(const Tensor& a, const Tensor& b) {
  return binary(
      a, b, "maximum", [](double x, double y) { return std::max(x, y); },
      [](double x, double y) { return x >= y ? 1.0 : 0.0; }, [](double x, double y) { return x >= y ? 0.0 : 1.0; });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(
      x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
  return unary(
      x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return detail::make_result({1}, {acc}, {x}, [](Node& self) {
    double* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    const std::size_t n = self.parents[0]->data.size();
    for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor row_sum(const Tensor& x) {
  if (x.rank() != 2) throw DimensionError("row_sum: expected [N,A], got " + shape_str(x.shape()));
  const std::int64_t n = x.dim(0), a = x.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t j = 0; j < a; ++j) out[i] += x[i * a + j];
  }
  return detail::make_result({n}, std::move(out), {x}, [n, a](Node& self) {
    double* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    for (std::int64_t i = 0; i < n; ++i) {
      for (std::int64_t j = 0; j < a; ++j) gx[i * a + j] += self.grad[i];
    }
  });
}

std::vector<double> softmax_row(std::span<const double> logits) {
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) z += (p[j] = std::exp(logits[j] - shift));
  for (auto& v : p) v /= z;
  return p;
}

Tensor log_softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("log_softmax: expected [N,A], got " + shape_str(logits.shape()));
  const std::int64_t n = logits.dim(0), a = logits.dim(1);
  std::vector<double> out(logits.data().size());
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = logits.data().data() + i * a;
    const double shift = *std::max_element(row, row + a);
    double z = 0.0;
    for (std::int64_t j = 0; j < a; ++j) z += std::exp(row[j] - shift);
    const double log_z = shift + std::log(z);
    for (std::int64_t j = 0; j < a; ++j) out[i * a + j] = row[j] - log_z;
  }
  return detail::make_result(logits.shape(), std::move(out), {logits}, [n, a](Node& self) {
    double* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    for (std::int64_t i = 0; i < n; ++i) {
      double gsum = 0.0;
      for (std::int64_t j = 0; j < a; ++j) gsum += self.grad[i * a + j];
      for (std::int64_t j = 0; j < a; ++j) {
        gx[i * a + j] += self.grad[i * a + j] - std::exp(self.data[i * a + j]) * gsum;
      }
    }
  });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::int64_t>& index) {
  if (x.rank() != 2 || static_cast<std::int64_t>(index.size()) != x.dim(0)) {
    throw DimensionError("gather_rows: need one index per row of " + shape_str(x.shape()));
  }
  const std::int64_t n = x.dim(0), a = x.dim(1);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    if (index[i] < 0 || index[i] >= a) throw DimensionError("gather_rows: index out of range");
    out[i] = x[i * a + index[i]];
  }
  return detail::make_result({n}, std::move(out), {x}, [index, a](Node& self) {
    double* gx = grad_of(self, 0);
    if (gx == nullptr) return;
    for (std::size_t i = 0; i < index.size(); ++i) gx[static_cast<std::int64_t>(i) * a + index[i]] += self.grad[i];
  });
}

Tensor categorical_entropy(const Tensor& logits) {
  if (logits.rank() != 2) throw DimensionError("categorical_entropy: expected [N,A]");
  const std::int64_t n = logits.dim(0), a = logits.dim(1);
  std::vector<double> probs(logits.data().size());
  std::vector<double> logp(logits.data().size());
  std::vector<double> out(static_cast<std::size_t>(n), 0.0);
  for (std::int64_t i = 0; i < n; ++i) {
    const double* row = logits.data().data() + i * a;
    const double shift = *std::max_element(row, row + a);
    double z = 0.0;
    for (std::int64_t j = 0; j < a; ++j) z += std::exp(row[j] - shift);
    const double log_z = shift + std::log(z);
    for (std::int64_t j = 0; j < a; ++j) {
      logp[i * a + j] = row[j] - log_z;
      probs[i * a + j] = std::exp(logp[i * a + j]);
      out[i] -= probs[i * a + j] * logp[i * a + j];
    }
  }
  return detail::make_result({n}, std::move(out), {logits},
                             [n, a, probs = std::move(probs), logp = std::move(logp)](Node& self) {
                               double* gx = grad_of(self, 0);
                               if (gx == nullptr) return;
                               // dH/dz_j = -p_j (log p_j + H)
                               for (std::int64_t i = 0; i < n; ++i) {
                                 for (std::int64_t j = 0; j < a; ++j) {
                                   const auto k = i * a + j;
                                   gx[k] -= self.grad[i] * probs[k] * (logp[k] + self.data[i]);
                                 }
                               }
                             });
}

CategoricalSample softmax_categorical(const Tensor& logits, Rng& rng) {
  if (logits.rank() != 2 || logits.dim(1) < 1) {
    throw DimensionError("softmax_categorical: expected [N,A] with A >= 1, got " + shape_str(logits.shape()));
  }
  for (double v : logits.data()) {
    if (!std::isfinite(v)) throw std::domain_error("softmax_categorical: non-finite logit");
  }
  const std::int64_t n = logits.dim(0), a = logits.dim(1);
  CategoricalSample out;
  out.actions.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const auto p = softmax_row(logits.data().subspan(static_cast<std::size_t>(i * a), static_cast<std::size_t>(a)));
    const double u = rng.uniform();
    double cdf = 0.0;
    std::int64_t pick = a - 1;
    for (std::int64_t j = 0; j < a; ++j) {
      cdf += p[j];
      if (u < cdf) {
        pick = j;
        break;
      }
    }
    // Never land on a zero-probability tail action through rounding.
    while (pick > 0 && p[pick] == 0.0) --pick;
    out.actions[i] = pick;
  }
  out.logprobs = gather_rows(log_softmax(logits), out.actions);
  out.entropy = categorical_entropy(logits);
  return out;
}

}  // namespace ops
}  // namespace vsop3d
