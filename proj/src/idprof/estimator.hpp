#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "idprof/neighbors.hpp"
#include "idprof/point_cloud.hpp"

namespace idprof {

struct FitOptions {
  // Fraction of the largest mu values left out of the line fit.
  double discard_fraction = 0.1;
  std::size_t min_points = 20;
};

// Ratios mu = r2 / r1 of the retained points.
struct MuSample {
  std::vector<double> mu;             // per retained point, input order
  std::vector<std::size_t> point;     // input index of each retained point
  std::vector<std::size_t> sigma;     // sigma[k] = position in mu of the (k+1)-th smallest
  std::vector<double> f_emp;          // f_emp[k] = (k + 1) / N
  std::size_t dropped_ties = 0;       // points with r1 == r2

  std::size_t size() const noexcept { return mu.size(); }
  double sorted(std::size_t k) const noexcept { return mu[sigma[k]]; }
};

struct FitPoints {
  std::vector<double> x;
  std::vector<double> y;
  std::size_t size() const noexcept { return x.size(); }
};

struct IdEstimate {
  double d_hat = 0;
  double std_error = 0;
  double r_squared = 0;
  double d_mle = 0;
  std::size_t n_used = 0;
  // Diagnostics.
  std::size_t n_points = 0;
  std::size_t n_duplicates = 0;
  std::size_t n_ties = 0;

  friend bool operator==(const IdEstimate&, const IdEstimate&) = default;
};

struct Interval {
  double lo = 0;
  double hi = 0;
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct DecimationPoint {
  std::size_t n_sub = 0;
  IdEstimate estimate;
};

// Throws ZeroFirstNeighbor if any r1 is 0 and TooFewValid if fewer than
// min_points ratios survive the r1 == r2 exclusion.
MuSample mu_ratios(const NeighborPairs& pairs, std::size_t min_points = FitOptions{}.min_points);

// (log mu_(i), -log(1 - i/N)) for ranks 1..floor(N (1 - discard)), never
// including rank N.
FitPoints cumulate_coordinates(const MuSample& sample, const FitOptions& opts);

// Least-squares line through the origin. n_used, d_hat, std_error and
// r_squared are filled; r_squared is measured against the zero-intercept model.
IdEstimate fit_origin_line(const FitPoints& points);

// N / sum(log mu): maximum-likelihood slope under F(mu) = 1 - mu^-d.
double fit_mle(const MuSample& sample, const FitOptions& opts);

IdEstimate estimate_from_pairs(const NeighborPairs& pairs, const FitOptions& opts);

// deduplicate -> two_nearest_exact -> mu_ratios -> cumulate_coordinates -> fit_origin_line
IdEstimate estimate_id(const PointCloud& cloud, const FitOptions& opts, const ChunkPolicy& policy);

// Streaming variant; exact duplicates are removed by hashing rows in strips.
IdEstimate estimate_id(const RowSource& source, const FitOptions& opts, const ChunkPolicy& policy);

void validate(const FitOptions& opts);

inline constexpr std::size_t kMinReplicates = 100;

// Percentile 95% interval over `replicates` resampled-with-replacement clouds.
// Replicate r draws from a stream derived from (seed, r).
Interval bootstrap_ci(const PointCloud& cloud, std::size_t replicates, std::uint64_t seed,
                      const FitOptions& opts, const ChunkPolicy& policy);

// Estimates on nested random subsamples of round(fraction * n) points.
std::vector<DecimationPoint> decimation_curve(const PointCloud& cloud,
                                              std::span<const double> fractions,
                                              std::uint64_t seed, const FitOptions& opts,
                                              const ChunkPolicy& policy);

// Linear-interpolation quantile of sorted values (type 7).
double quantile_sorted(std::span<const double> sorted, double q);

}  // namespace idprof
