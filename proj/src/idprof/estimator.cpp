#include "idprof/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "idprof/error.hpp"
#include "idprof/parallel.hpp"
#include "idprof/random.hpp"

namespace idprof {

void validate(const FitOptions& opts) {
  if (!(opts.discard_fraction >= 0.0 && opts.discard_fraction < 1.0)) {
    fail(ErrorCode::InvalidArgument, "discard_fraction must be in [0, 1), got " +
                                         std::to_string(opts.discard_fraction));
  }
  if (opts.min_points < 2) fail(ErrorCode::InvalidArgument, "min_points must be >= 2");
}

MuSample mu_ratios(const NeighborPairs& pairs, std::size_t min_points) {
  MuSample sample;
  const std::size_t n = pairs.size();
  sample.mu.reserve(n);
  sample.point.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (pairs.r1[i] == 0.0) {
      fail(ErrorCode::ZeroFirstNeighbor,
           "point " + std::to_string(i) + " has a zero-distance neighbor; deduplicate first");
    }
    if (pairs.r2[i] == pairs.r1[i]) {
      ++sample.dropped_ties;
      continue;
    }
    sample.mu.push_back(pairs.r2[i] / pairs.r1[i]);
    sample.point.push_back(i);
  }
  const std::size_t count = sample.mu.size();
  if (count < min_points) {
    fail(ErrorCode::TooFewValid, std::to_string(count) + " valid ratios, need at least " +
                                     std::to_string(min_points));
  }
  sample.sigma.resize(count);
  std::iota(sample.sigma.begin(), sample.sigma.end(), std::size_t{0});
  std::sort(sample.sigma.begin(), sample.sigma.end(), [&](std::size_t a, std::size_t b) {
    return sample.mu[a] < sample.mu[b] || (sample.mu[a] == sample.mu[b] && a < b);
  });
  sample.f_emp.resize(count);
  for (std::size_t k = 0; k < count; ++k) {
    sample.f_emp[k] = static_cast<double>(k + 1) / static_cast<double>(count);
  }
  return sample;
}

FitPoints cumulate_coordinates(const MuSample& sample, const FitOptions& opts) {
  validate(opts);
  const std::size_t n = sample.size();
  const double keep = static_cast<double>(n) * (1.0 - opts.discard_fraction);
  std::size_t m = static_cast<std::size_t>(std::floor(keep + 1e-9));
  m = std::min(m, n == 0 ? 0 : n - 1);
  if (m < opts.min_points) {
    fail(ErrorCode::TooFewValid, std::to_string(m) + " fit points after discarding, need at least " +
                                     std::to_string(opts.min_points));
  }
  FitPoints points;
  points.x.resize(m);
  points.y.resize(m);
  const double count = static_cast<double>(n);
  for (std::size_t k = 0; k < m; ++k) {
    points.x[k] = std::log(sample.sorted(k));
    points.y[k] = -std::log(1.0 - static_cast<double>(k + 1) / count);
  }
  return points;
}

IdEstimate fit_origin_line(const FitPoints& points) {
  const std::size_t m = points.size();
  if (m == 0 || points.y.size() != m) {
    fail(ErrorCode::DegenerateFit, "no fit points");
  }
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t k = 0; k < m; ++k) {
    sxx += points.x[k] * points.x[k];
    sxy += points.x[k] * points.y[k];
    syy += points.y[k] * points.y[k];
  }
  if (!(sxx > 1e-300) || !std::isfinite(sxx)) {
    fail(ErrorCode::DegenerateFit, "all abscissae are zero");
  }
  IdEstimate est;
  est.d_hat = sxy / sxx;
  est.n_used = m;
  double ss_res = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double r = points.y[k] - est.d_hat * points.x[k];
    ss_res += r * r;
  }
  est.std_error = m > 1 ? std::sqrt(ss_res / static_cast<double>(m - 1) / sxx)
                        : std::numeric_limits<double>::quiet_NaN();
  est.r_squared = syy > 0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  return est;
}

double fit_mle(const MuSample& sample, const FitOptions& opts) {
  if (sample.size() < opts.min_points || sample.size() == 0) {
    fail(ErrorCode::TooFewValid, std::to_string(sample.size()) + " valid ratios, need at least " +
                                     std::to_string(opts.min_points));
  }
  double sum_log = 0;
  for (std::size_t k = 0; k < sample.size(); ++k) sum_log += std::log(sample.sorted(k));
  return static_cast<double>(sample.size()) / sum_log;
}

IdEstimate estimate_from_pairs(const NeighborPairs& pairs, const FitOptions& opts) {
  validate(opts);
  const MuSample sample = mu_ratios(pairs, opts.min_points);
  IdEstimate est = fit_origin_line(cumulate_coordinates(sample, opts));
  if (!(est.d_hat > 0)) {
    fail(ErrorCode::DegenerateFit, "fitted slope is not positive");
  }
  est.d_mle = fit_mle(sample, opts);
  est.n_points = pairs.size();
  est.n_ties = sample.dropped_ties;
  return est;
}

IdEstimate estimate_id(const PointCloud& cloud, const FitOptions& opts, const ChunkPolicy& policy) {
  validate(opts);
  if (cloud.size() < 3) {
    fail(ErrorCode::CloudTooSmall, "need at least 3 points, got " + std::to_string(cloud.size()));
  }
  auto [unique, report] = deduplicate(cloud);
  IdEstimate est = estimate_from_pairs(two_nearest_exact(unique, policy), opts);
  est.n_points = cloud.size();
  est.n_duplicates = report.dropped.size();
  return est;
}

IdEstimate estimate_id(const RowSource& source, const FitOptions& opts, const ChunkPolicy& policy) {
  validate(opts);
  if (source.rows() < 3) {
    fail(ErrorCode::CloudTooSmall, "need at least 3 points, got " + std::to_string(source.rows()));
  }
  const std::size_t strip =
      std::min<std::size_t>(source.dim(), std::max<std::uint64_t>(
                                              8, policy.max_resident_bytes / 4 /
                                                     (2 * sizeof(double) + source.read_overhead(1))));
  const DedupReport report = deduplicate_exact(source, strip);
  if (report.kept.size() < 3) {
    fail(ErrorCode::AllPointsIdentical,
         "only " + std::to_string(report.kept.size()) + " distinct points remain after deduplication");
  }
  IdEstimate est;
  if (report.dropped.empty()) {
    est = estimate_from_pairs(two_nearest_exact(source, policy), opts);
  } else {
    est = estimate_from_pairs(two_nearest_exact(SubsetRows(source, report.kept), policy), opts);
  }
  est.n_points = source.rows();
  est.n_duplicates = report.dropped.size();
  return est;
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::InvalidArgument, "quantile of empty sample");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_ci(const PointCloud& cloud, std::size_t replicates, std::uint64_t seed,
                      const FitOptions& opts, const ChunkPolicy& policy) {
  if (replicates < kMinReplicates) {
    fail(ErrorCode::InvalidArgument, "bootstrap needs at least " + std::to_string(kMinReplicates) +
                                         " replicates, got " + std::to_string(replicates));
  }
  validate(opts);
  const std::size_t n = cloud.size();
  if (n < 3) fail(ErrorCode::CloudTooSmall, "need at least 3 points, got " + std::to_string(n));

  ChunkPolicy inner = policy;
  inner.threads = 1;
  std::vector<double> estimates(replicates);
  parallel_for(replicates, policy.threads, [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    std::vector<std::size_t> rows(n);
    for (auto& row : rows) row = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(n) - 1));
    try {
      estimates[r] = estimate_id(cloud.select(rows), opts, inner).d_hat;
    } catch (const Error& e) {
      throw Error(e.code(), "bootstrap replicate " + std::to_string(r) + ": " + e.what());
    }
  });
  std::sort(estimates.begin(), estimates.end());
  return Interval{quantile_sorted(estimates, 0.025), quantile_sorted(estimates, 0.975)};
}

std::vector<DecimationPoint> decimation_curve(const PointCloud& cloud,
                                              std::span<const double> fractions,
                                              std::uint64_t seed, const FitOptions& opts,
                                              const ChunkPolicy& policy) {
  validate(opts);
  const std::size_t n = cloud.size();
  // One seeded permutation; every fraction takes a prefix, so subsamples nest.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, 0));
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(i) - 1));
    std::swap(order[i - 1], order[j]);
  }

  std::vector<DecimationPoint> curve;
  curve.reserve(fractions.size());
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      fail(ErrorCode::InvalidArgument, "decimation fraction must be in (0, 1], got " + std::to_string(f));
    }
    const auto n_sub = static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
    if (n_sub < opts.min_points + 2) {
      fail(ErrorCode::TooFewValid, "fraction " + std::to_string(f) + " keeps " +
                                       std::to_string(n_sub) + " points, need at least " +
                                       std::to_string(opts.min_points + 2));
    }
    std::vector<std::size_t> rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_sub));
    std::sort(rows.begin(), rows.end());
    const IdEstimate est = n_sub == n ? estimate_id(cloud, opts, policy)
                                      : estimate_id(cloud.select(rows), opts, policy);
    curve.push_back({n_sub, est});
  }
  return curve;
}

}  // namespace idprof
