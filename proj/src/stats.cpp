#include "vsop3d/eval/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace vsop3d {

void RunMatrix::validate() const {
  if (seed_ids.empty() || env_names.empty()) throw std::invalid_argument("run matrix is empty");
  if (scores.size() != seed_ids.size() * env_names.size()) {
    throw std::invalid_argument("run matrix has " + std::to_string(scores.size()) + " scores for " +
                                std::to_string(seed_ids.size()) + " seeds x " + std::to_string(env_names.size()) +
                                " environments");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("run matrix contains a non-finite score");
  }
}

std::string to_string(Metric metric) {
  switch (metric) {
    case Metric::kMedian: return "median";
    case Metric::kIqm: return "iqm";
    case Metric::kMean: return "mean";
    case Metric::kOptimalityGap: return "optimality_gap";
  }
  return "unknown";
}

Metric parse_metric(const std::string& text) {
  for (Metric m : kAllMetrics) {
    if (to_string(m) == text) return m;
  }
  throw std::invalid_argument("unknown metric '" + text + "'");
}

namespace {
void require_values(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("metric of an empty sample");
}
}  // namespace

double median(std::vector<double> values) {
  require_values(values);
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double iqm(std::vector<double> values) {
  require_values(values);
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  const double lo = 0.25 * n, hi = 0.75 * n;
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double a = std::max(lo, static_cast<double>(i));
    const double b = std::min(hi, static_cast<double>(i + 1));
    if (b > a) total += (b - a) * values[i];
  }
  return total / (hi - lo);
}

double mean(const std::vector<double>& values) {
  require_values(values);
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double optimality_gap(const std::vector<double>& values) {
  require_values(values);
  double total = 0.0;
  for (double v : values) total += 1.0 - std::min(v, 1.0);
  return total / static_cast<double>(values.size());
}

double compute_metric(Metric metric, const std::vector<double>& values) {
  switch (metric) {
    case Metric::kMedian: return median(values);
    case Metric::kIqm: return iqm(values);
    case Metric::kMean: return mean(values);
    case Metric::kOptimalityGap: return optimality_gap(values);
  }
  throw std::invalid_argument("unknown metric");
}

double MetricValues::get(Metric metric) const {
  switch (metric) {
    case Metric::kMedian: return median;
    case Metric::kIqm: return iqm;
    case Metric::kMean: return mean;
    case Metric::kOptimalityGap: return optimality_gap;
  }
  return 0.0;
}

void MetricValues::set(Metric metric, double value) {
  switch (metric) {
    case Metric::kMedian: median = value; break;
    case Metric::kIqm: iqm = value; break;
    case Metric::kMean: mean = value; break;
    case Metric::kOptimalityGap: optimality_gap = value; break;
  }
}

MetricValues aggregate(const RunMatrix& matrix) {
  matrix.validate();
  MetricValues out;
  out.median = median(matrix.scores);
  out.iqm = iqm(matrix.scores);
  out.mean = mean(matrix.scores);
  out.optimality_gap = optimality_gap(matrix.scores);
  return out;
}

namespace {

// Linear interpolation between order statistics at position q (n - 1).
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(i);
  if (i + 1 >= sorted.size()) return sorted.back();
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

}  // namespace

Interval bootstrap_ci(const RunMatrix& matrix, Metric metric, std::int64_t num_resamples, double confidence,
                      const Rng& rng, BootstrapMode mode) {
  matrix.validate();
  if (num_resamples < 100) throw std::invalid_argument("bootstrap needs at least 100 resamples");
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must lie in (0, 1)");
  const std::int64_t s = matrix.num_seeds(), m = matrix.num_envs();
  if (s == 1) {
    const double point = compute_metric(metric, matrix.scores);
    return {point, point, true};
  }
  std::vector<double> stats(static_cast<std::size_t>(num_resamples));
  std::vector<double> sample(matrix.scores.size());
  for (std::int64_t r = 0; r < num_resamples; ++r) {
    Rng draw = rng.split(static_cast<std::uint64_t>(r));
    if (mode == BootstrapMode::kStratified) {
      for (std::int64_t env = 0; env < m; ++env) {
        for (std::int64_t i = 0; i < s; ++i) {
          const auto pick = static_cast<std::int64_t>(draw.below(static_cast<std::uint64_t>(s)));
          sample[static_cast<std::size_t>(i * m + env)] = matrix.at(pick, env);
        }
      }
    } else {
      for (std::int64_t i = 0; i < s; ++i) {
        const auto pick = static_cast<std::int64_t>(draw.below(static_cast<std::uint64_t>(s)));
        for (std::int64_t env = 0; env < m; ++env) sample[static_cast<std::size_t>(i * m + env)] = matrix.at(pick, env);
      }
    }
    stats[static_cast<std::size_t>(r)] = compute_metric(metric, sample);
  }
  std::sort(stats.begin(), stats.end());
  const double tail = 0.5 * (1.0 - confidence);
  return {quantile(stats, tail), quantile(stats, 1.0 - tail), false};
}

AggregateMetrics aggregate_with_ci(const RunMatrix& matrix, std::int64_t num_resamples, double confidence,
                                   const Rng& rng, BootstrapMode mode) {
  AggregateMetrics out;
  out.point = aggregate(matrix);
  for (std::size_t k = 0; k < kAllMetrics.size(); ++k) {
    const Metric metric = kAllMetrics[k];
    Interval ci = bootstrap_ci(matrix, metric, num_resamples, confidence, rng.split(to_string(metric)), mode);
    const double point = out.point.get(metric);
    ci.low = std::min(ci.low, point);
    ci.high = std::max(ci.high, point);
    out.ci[k] = ci;
  }
  return out;
}

double final_score(const std::vector<double>& normalized_returns, std::int64_t window) {
  if (normalized_returns.empty()) throw std::invalid_argument("final_score of an empty timeline");
  if (window < 1) throw std::invalid_argument("final_score window must be >= 1");
  const auto n = static_cast<std::int64_t>(normalized_returns.size());
  const std::int64_t start = std::max<std::int64_t>(0, n - window);
  double total = 0.0;
  for (std::int64_t i = start; i < n; ++i) total += normalized_returns[static_cast<std::size_t>(i)];
  return total / static_cast<double>(n - start);
}

}  // namespace vsop3d
