#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vsop3d/tensor/rng.hpp"

namespace vsop3d {

// Seeds x environments grid of normalized final scores, row-major by seed.
struct RunMatrix {
  std::vector<std::uint64_t> seed_ids;
  std::vector<std::string> env_names;
  std::vector<double> scores;

  std::int64_t num_seeds() const { return static_cast<std::int64_t>(seed_ids.size()); }
  std::int64_t num_envs() const { return static_cast<std::int64_t>(env_names.size()); }
  double at(std::int64_t seed, std::int64_t env) const {
    return scores[static_cast<std::size_t>(seed * num_envs() + env)];
  }
  // Throws std::invalid_argument when empty, ragged or non-finite.
  void validate() const;
};

enum class Metric { kMedian, kIqm, kMean, kOptimalityGap };
inline constexpr std::array<Metric, 4> kAllMetrics{Metric::kMedian, Metric::kIqm, Metric::kMean,
                                                   Metric::kOptimalityGap};

std::string to_string(Metric metric);
Metric parse_metric(const std::string& text);

double median(std::vector<double> values);
// Mean of the middle half of the sorted sample. When the count is not a
// multiple of four the two boundary order statistics enter with fractional
// weight, so every sample position in [n/4, 3n/4) counts exactly once.
double iqm(std::vector<double> values);
double mean(const std::vector<double>& values);
// mean(1 - min(x, 1)).
double optimality_gap(const std::vector<double>& values);
double compute_metric(Metric metric, const std::vector<double>& values);

struct MetricValues {
  double median = 0.0;
  double iqm = 0.0;
  double mean = 0.0;
  double optimality_gap = 0.0;

  double get(Metric metric) const;
  void set(Metric metric, double value);
};

// Point estimates over all S*M scores pooled.
MetricValues aggregate(const RunMatrix& matrix);

enum class BootstrapMode {
  kStratified,  // resample seeds independently within each environment
  kJoint,       // resample whole seed rows, keeping environments together
};

struct Interval {
  double low = 0.0;
  double high = 0.0;
  bool degenerate = false;  // a single seed leaves nothing to resample
};

// Percentile bootstrap interval. Resample r draws from rng.split(r), so the
// result does not depend on evaluation order. Throws std::invalid_argument
// for fewer than 100 resamples or confidence outside (0, 1).
Interval bootstrap_ci(const RunMatrix& matrix, Metric metric, std::int64_t num_resamples, double confidence,
                      const Rng& rng, BootstrapMode mode = BootstrapMode::kStratified);

struct AggregateMetrics {
  MetricValues point;
  std::array<Interval, 4> ci;  // indexed like kAllMetrics

  const Interval& interval(Metric metric) const { return ci[static_cast<std::size_t>(metric)]; }
};

// Point estimates plus intervals widened where needed so low <= point <= high.
AggregateMetrics aggregate_with_ci(const RunMatrix& matrix, std::int64_t num_resamples, double confidence,
                                   const Rng& rng, BootstrapMode mode = BootstrapMode::kStratified);

// Mean of the last `window` values (all of them when fewer). Throws on an
// empty timeline or window < 1.
double final_score(const std::vector<double>& normalized_returns, std::int64_t window = 100);

}  // namespace vsop3d
