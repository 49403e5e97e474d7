#include "vsop3d/cli/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "vsop3d/eval/stats.hpp"
#include "vsop3d/rl/rollout.hpp"
#include "vsop3d/tensor/gradcheck.hpp"

namespace vsop3d {

nlohmann::ordered_json SelfcheckReport::to_json() const {
  nlohmann::ordered_json j;
  j["passed"] = passed;
  j["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : checks) j["checks"].push_back({{"op", c.op}, {"passed", c.passed}, {"detail", c.detail}});
  return j;
}

std::vector<std::string> SelfcheckReport::failed_ops() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.passed && std::find(out.begin(), out.end(), c.op) == out.end()) out.push_back(c.op);
  }
  return out;
}

Tensor mutated_conv2d(const Tensor& input, const Tensor& kernel, const ConvSpec& spec) {
  const std::int64_t kw = kernel.dim(3);
  std::vector<double> flipped(kernel.data().begin(), kernel.data().end());
  for (std::size_t row = 0; row < flipped.size(); row += static_cast<std::size_t>(kw)) {
    std::reverse(flipped.begin() + static_cast<std::ptrdiff_t>(row),
                 flipped.begin() + static_cast<std::ptrdiff_t>(row) + kw);
  }
  return ops::conv2d(input, Tensor::from(kernel.shape(), flipped), spec);
}

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (double& x : v) x = rng.normal();
  return Tensor::from(shape, v);
}

// Plain nested-loop cross-correlation over [N,C,D,H,W] with [O,C,kd,kh,kw].
std::vector<double> naive_conv(const Tensor& x, const Tensor& k, const std::array<std::int64_t, 3>& s,
                               const std::array<std::int64_t, 3>& p, Shape& out_shape) {
  const std::int64_t n = x.dim(0), c = x.dim(1), d = x.dim(2), h = x.dim(3), w = x.dim(4);
  const std::int64_t o = k.dim(0), kd = k.dim(2), kh = k.dim(3), kw = k.dim(4);
  const std::int64_t od = (d + 2 * p[0] - kd) / s[0] + 1, oh = (h + 2 * p[1] - kh) / s[1] + 1,
                     ow = (w + 2 * p[2] - kw) / s[2] + 1;
  out_shape = {n, o, od, oh, ow};
  std::vector<double> out(static_cast<std::size_t>(n * o * od * oh * ow), 0.0);
  for (std::int64_t b = 0; b < n; ++b)
    for (std::int64_t oc = 0; oc < o; ++oc)
      for (std::int64_t z = 0; z < od; ++z)
        for (std::int64_t y = 0; y < oh; ++y)
          for (std::int64_t xx = 0; xx < ow; ++xx) {
            double acc = 0.0;
            for (std::int64_t ic = 0; ic < c; ++ic)
              for (std::int64_t a = 0; a < kd; ++a)
                for (std::int64_t bb = 0; bb < kh; ++bb)
                  for (std::int64_t e = 0; e < kw; ++e) {
                    const std::int64_t iz = z * s[0] - p[0] + a, iy = y * s[1] - p[1] + bb, ix = xx * s[2] - p[2] + e;
                    if (iz < 0 || iz >= d || iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                    acc += x[(((b * c + ic) * d + iz) * h + iy) * w + ix] *
                           k[(((oc * c + ic) * kd + a) * kh + bb) * kw + e];
                  }
            out[static_cast<std::size_t>((((b * o + oc) * od + z) * oh + y) * ow + xx)] = acc;
          }
  return out;
}

class Suite {
 public:
  void record(const std::string& op, bool passed, const std::string& detail) {
    report_.checks.push_back({op, passed, passed ? "" : detail});
    report_.passed = report_.passed && passed;
  }
  // Runs a check body, turning exceptions into failures.
  template <typename Fn>
  void run(const std::string& op, Fn&& fn) {
    try {
      std::string detail;
      const bool ok = fn(detail);
      record(op, ok, detail);
    } catch (const std::exception& e) {
      record(op, false, std::string("threw: ") + e.what());
    }
  }
  SelfcheckReport take() { return std::move(report_); }

 private:
  SelfcheckReport report_;
};

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

bool conv2d_vs_naive(const Conv2dFn& conv2d, std::string& detail) {
  Rng rng(101);
  for (int t = 0; t < 20; ++t) {
    const std::int64_t n = 1 + rng.below(3), c = 1 + rng.below(3), o = 1 + rng.below(4);
    const std::int64_t kh = 1 + rng.below(3), kw = 1 + rng.below(3);
    const std::int64_t sh = 1 + rng.below(2), ph = rng.below(2);
    const std::int64_t sw = sh, pw = ph;
    const std::int64_t h = kh + rng.below(6), w = kw + rng.below(6);
    const Tensor x = random_tensor({n, c, h, w}, rng), k = random_tensor({o, c, kh, kw}, rng);
    const Tensor y = conv2d(x, k, ConvSpec::make2d(c, o, kh, kw, sh, ph));
    Shape shape;
    const auto expect = naive_conv(ops::reshape(x, {n, c, 1, h, w}), ops::reshape(k, {o, c, 1, kh, kw}), {1, sh, sw},
                                   {0, ph, pw}, shape);
    double worst = 0.0;
    if (static_cast<std::size_t>(y.numel()) != expect.size()) {
      detail = "case " + std::to_string(t) + ": output shape " + shape_str(y.shape()) + ", expected " +
               shape_str({n, o, shape[3], shape[4]});
      return false;
    }
    for (std::size_t i = 0; i < expect.size(); ++i) worst = std::max(worst, std::abs(y[static_cast<std::int64_t>(i)] - expect[i]));
    if (worst > 1e-12) {
      detail = "case " + std::to_string(t) + ": input " + shape_str(x.shape()) + ", kernel " + shape_str(k.shape()) +
               ", stride (" + std::to_string(sh) + "," + std::to_string(sw) + "), padding (" + std::to_string(ph) +
               "," + std::to_string(pw) + "): max |observed - expected| = " + fmt(worst) + " (tolerance 1e-12)";
      return false;
    }
  }
  return true;
}

bool conv3d_vs_naive(std::string& detail) {
  Rng rng(202);
  for (int t = 0; t < 12; ++t) {
    const std::int64_t n = 1 + rng.below(2), c = 1 + rng.below(3), o = 1 + rng.below(3);
    const std::int64_t kd = 1 + rng.below(3), kh = 1 + rng.below(3), kw = 1 + rng.below(3);
    const std::array<std::int64_t, 3> s{1 + static_cast<std::int64_t>(rng.below(2)),
                                        1 + static_cast<std::int64_t>(rng.below(2)),
                                        1 + static_cast<std::int64_t>(rng.below(2))};
    const std::array<std::int64_t, 3> p{static_cast<std::int64_t>(rng.below(2)),
                                        static_cast<std::int64_t>(rng.below(2)),
                                        static_cast<std::int64_t>(rng.below(2))};
    const std::int64_t d = kd + rng.below(4), h = kh + rng.below(4), w = kw + rng.below(4);
    const Tensor x = random_tensor({n, c, d, h, w}, rng), k = random_tensor({o, c, kd, kh, kw}, rng);
    const Tensor y = ops::conv3d(x, k, ConvSpec::make3d(c, o, {kd, kh, kw}, s, p));
    Shape shape;
    const auto expect = naive_conv(x, k, s, p, shape);
    double worst = 0.0;
    for (std::size_t i = 0; i < expect.size(); ++i) worst = std::max(worst, std::abs(y[static_cast<std::int64_t>(i)] - expect[i]));
    if (y.shape() != shape || worst > 1e-12) {
      detail = "case " + std::to_string(t) + ": input " + shape_str(x.shape()) + ", kernel " + shape_str(k.shape()) +
               ": output " + shape_str(y.shape()) + " vs " + shape_str(shape) + ", max diff " + fmt(worst);
      return false;
    }
  }
  return true;
}

bool gae_vs_recursion(std::string& detail) {
  Rng rng(303);
  for (int t = 0; t < 50; ++t) {
    const std::int64_t T = 1 + rng.below(16), E = 1 + rng.below(4);
    const double gamma = rng.uniform(), lambda = rng.uniform();
    std::vector<double> r(static_cast<std::size_t>(T * E)), v(r.size()), dn(r.size()), boot(static_cast<std::size_t>(E));
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = rng.normal();
      v[i] = rng.normal();
      dn[i] = rng.bernoulli(0.2) ? 1.0 : 0.0;
    }
    for (double& b : boot) b = rng.normal();
    const auto gae = compute_gae(r, v, dn, boot, T, E, gamma, lambda);
    for (std::int64_t e = 0; e < E; ++e) {
      for (std::int64_t s = 0; s < T; ++s) {
        // Closed form: sum_k (gamma lambda)^k delta_{s+k}, truncated after a done.
        double total = 0.0, weight = 1.0;
        for (std::int64_t k = s; k < T; ++k) {
          const auto i = static_cast<std::size_t>(k * E + e);
          const double next = k + 1 < T ? v[static_cast<std::size_t>((k + 1) * E + e)] : boot[static_cast<std::size_t>(e)];
          total += weight * (r[i] + gamma * (1.0 - dn[i]) * next - v[i]);
          if (dn[i] != 0.0) break;
          weight *= gamma * lambda;
        }
        const double got = gae.advantages[static_cast<std::size_t>(s * E + e)];
        if (std::abs(got - total) > 1e-10) {
          detail = "instance " + std::to_string(t) + " (T=" + std::to_string(T) + ", E=" + std::to_string(E) +
                   "), t=" + std::to_string(s) + ", env " + std::to_string(e) + ": observed " + fmt(got) +
                   ", expected " + fmt(total);
          return false;
        }
      }
    }
  }
  return true;
}

bool stats_vs_bruteforce(std::string& detail) {
  Rng rng(404);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<double> x(n);
    for (double& v : x) v = rng.uniform() * 1.4 - 0.2;
    // IQM oracle: every value repeated four times, then exactly n copies
    // trimmed from each end.
    std::vector<double> rep;
    for (double v : x) rep.insert(rep.end(), 4, v);
    std::sort(rep.begin(), rep.end());
    double trimmed = 0.0;
    for (std::size_t i = n; i < 3 * n; ++i) trimmed += rep[i];
    trimmed /= static_cast<double>(2 * n);
    std::vector<double> sorted = x;
    std::sort(sorted.begin(), sorted.end());
    const double med = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    double gap = 0.0;
    for (double v : x) gap += 1.0 - std::min(v, 1.0);
    gap /= static_cast<double>(n);
    if (std::abs(iqm(x) - trimmed) > 1e-12 || std::abs(median(x) - med) > 1e-12 ||
        std::abs(optimality_gap(x) - gap) > 1e-12) {
      detail = "sample " + std::to_string(t) + " (n=" + std::to_string(n) + "): iqm " + fmt(iqm(x)) + " vs " +
               fmt(trimmed) + ", median " + fmt(median(x)) + " vs " + fmt(med) + ", gap " +
               fmt(optimality_gap(x)) + " vs " + fmt(gap);
      return false;
    }
  }
  return true;
}

using Fn = std::function<Tensor(const std::vector<Tensor>&)>;

bool grad_ok(const std::string& name, const Fn& f, const std::vector<Tensor>& inputs, std::uint64_t seed,
             std::string& detail) {
  Rng rng(seed);
  const auto res = gradient_check(f, inputs, rng);
  if (res.max_relative_error < 1e-4) return true;
  detail = name + ": relative error " + fmt(res.max_relative_error) + " on input " + std::to_string(res.worst_input) +
           " (tolerance 1e-4)";
  return false;
}

// Values kept away from the kinks of relu / max / clamp.
Tensor away_from_zero(const Shape& shape, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (double& x : v) x = (rng.bernoulli(0.5) ? 1.0 : -1.0) * (0.1 + rng.uniform());
  return Tensor::from(shape, v);
}

}  // namespace

SelfcheckReport run_selfcheck(const SelfcheckOptions& options) {
  Suite suite;
  Rng rng(7);
  suite.run("conv2d", [&](std::string& d) { return conv2d_vs_naive(options.conv2d, d); });
  suite.run("conv3d", [&](std::string& d) { return conv3d_vs_naive(d); });
  suite.run("conv3d_depth1_equals_conv2d", [&](std::string& d) {
    Rng r(11);
    const Tensor x = random_tensor({2, 3, 6, 5}, r), k = random_tensor({4, 3, 3, 3}, r);
    const Tensor a = options.conv2d(x, k, ConvSpec::make2d(3, 4, 3, 3, 1, 1));
    const Tensor b = ops::conv3d(ops::reshape(x, {2, 3, 1, 6, 5}), ops::reshape(k, {4, 3, 1, 3, 3}),
                                 ConvSpec::make3d(3, 4, {1, 3, 3}, {1, 1, 1}, {0, 1, 1}));
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    d = "conv2d vs depth-1 conv3d: max diff " + fmt(worst);
    return a.numel() == b.numel() && worst <= 1e-12;
  });
  suite.run("conv2d", [&](std::string& d) {
    const Tensor x = random_tensor({2, 2, 5, 5}, rng), k = random_tensor({3, 2, 3, 3}, rng);
    const auto spec = ConvSpec::make2d(2, 3, 3, 3, 2, 1);
    return grad_ok("conv2d gradient", [&](const std::vector<Tensor>& in) { return options.conv2d(in[0], in[1], spec); },
                   {x, k}, 1, d);
  });
  suite.run("conv3d", [&](std::string& d) {
    const Tensor x = random_tensor({2, 2, 3, 4, 4}, rng), k = random_tensor({2, 2, 3, 3, 3}, rng);
    const auto spec = ConvSpec::make3d(2, 2, {3, 3, 3}, {1, 1, 1}, {1, 1, 1});
    return grad_ok("conv3d gradient", [&](const std::vector<Tensor>& in) { return ops::conv3d(in[0], in[1], spec); },
                   {x, k}, 2, d);
  });
  suite.run("dense", [&](std::string& d) {
    return grad_ok("dense gradient", [](const std::vector<Tensor>& in) { return ops::dense(in[0], in[1], in[2]); },
                   {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng), random_tensor({2}, rng)}, 3, d);
  });
  suite.run("relu", [&](std::string& d) {
    return grad_ok("relu gradient", [](const std::vector<Tensor>& in) { return ops::relu(in[0]); },
                   {away_from_zero({4, 5}, rng)}, 4, d);
  });
  suite.run("max_pool", [&](std::string& d) {
    return grad_ok("max_pool gradient", [](const std::vector<Tensor>& in) { return ops::max_pool_hw(in[0]); },
                   {random_tensor({2, 2, 5, 6}, rng)}, 5, d);
  });
  suite.run("log_softmax", [&](std::string& d) {
    return grad_ok("log_softmax gradient",
                   [](const std::vector<Tensor>& in) { return ops::gather_rows(ops::log_softmax(in[0]), {0, 2, 1}); },
                   {random_tensor({3, 4}, rng)}, 6, d);
  });
  suite.run("categorical_entropy", [&](std::string& d) {
    return grad_ok("entropy gradient", [](const std::vector<Tensor>& in) { return ops::categorical_entropy(in[0]); },
                   {random_tensor({3, 5}, rng)}, 7, d);
  });
  suite.run("dropout", [&](std::string& d) {
    return grad_ok("dropout gradient",
                   [](const std::vector<Tensor>& in) {
                     Rng mask(99);
                     return ops::dropout(in[0], 0.3, Mode::kTrain, mask);
                   },
                   {random_tensor({4, 6}, rng)}, 8, d);
  });
  suite.run("gae", [&](std::string& d) { return gae_vs_recursion(d); });
  suite.run("aggregate_metrics", [&](std::string& d) { return stats_vs_bruteforce(d); });
  suite.run("optimality_gap_identity", [&](std::string& d) {
    RunMatrix m;
    m.seed_ids = {0, 1, 2, 3, 4};
    m.env_names = {"a", "b"};
    m.scores = {0.64, 0.64, 0.64, 0.64, 0.64, 0.64, 0.64, 0.64, 0.64, 0.64};
    const auto agg = aggregate(m);
    d = "mean " + fmt(agg.mean) + ", gap " + fmt(agg.optimality_gap);
    return std::abs(agg.optimality_gap - (1.0 - agg.mean)) <= 1e-12;
  });
  return suite.take();
}

}  // namespace vsop3d
