#include "idprof/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "idprof/error.hpp"
#include "idprof/parallel.hpp"
#include "idprof/random.hpp"

namespace idprof {

namespace {

constexpr std::size_t kLeafSize = 8;
// Rounding in the sqrt/triangle-inequality tests is a few ulps; the slack
// only ever widens the search, so exactness is kept.
constexpr double kPruneSlack = 1e-9;

}  // namespace

struct SpatialIndex::QueryState {
  std::size_t query;
  double d1 = std::numeric_limits<double>::infinity();  // squared
  double d2 = std::numeric_limits<double>::infinity();
  std::size_t i1 = kNoNeighbor;
  std::size_t i2 = kNoNeighbor;

  void consider(double d, std::size_t j) noexcept {
    if (j == query) return;
    if (d < d1 || (d == d1 && j < i1)) {
      d2 = d1;
      i2 = i1;
      d1 = d;
      i1 = j;
    } else if (d < d2 || (d == d2 && j < i2)) {
      d2 = d;
      i2 = j;
    }
  }
  double tau() const noexcept { return std::sqrt(d2); }
};

SpatialIndex SpatialIndex::build(PointCloud cloud, std::uint64_t seed) {
  if (cloud.size() < 3) {
    fail(ErrorCode::CloudTooSmall, "need at least 3 points, got " + std::to_string(cloud.size()));
  }
  SpatialIndex index;
  index.cloud_ = std::move(cloud);
  std::vector<std::size_t> ids(index.cloud_.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  std::uint64_t state = splitmix64(seed);
  index.build_node(ids, 0, ids.size(), state);
  return index;
}

std::int64_t SpatialIndex::build_node(std::vector<std::size_t>& ids, std::size_t lo, std::size_t hi,
                                      std::uint64_t& state) {
  const auto self = static_cast<std::int64_t>(nodes_.size());
  nodes_.emplace_back();
  if (hi - lo <= kLeafSize) {
    Node& leaf = nodes_.back();
    leaf.bucket_begin = bucket_.size();
    bucket_.insert(bucket_.end(), ids.begin() + static_cast<std::ptrdiff_t>(lo),
                   ids.begin() + static_cast<std::ptrdiff_t>(hi));
    leaf.bucket_end = bucket_.size();
    return self;
  }

  state = splitmix64(state);
  std::swap(ids[lo], ids[lo + state % (hi - lo)]);
  const std::size_t vantage = ids[lo];
  const auto vp = cloud_.row(vantage);

  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(hi - lo - 1);
  for (std::size_t k = lo + 1; k < hi; ++k) {
    dist.emplace_back(std::sqrt(squared_distance(vp, cloud_.row(ids[k]))), ids[k]);
  }
  const std::size_t half = (dist.size() - 1) / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(half), dist.end());
  const double radius = dist[half].first;
  for (std::size_t k = 0; k < dist.size(); ++k) ids[lo + 1 + k] = dist[k].second;

  const std::size_t mid = lo + 1 + half + 1;  // inner = [lo+1, mid), outer = [mid, hi)
  const std::int64_t inner = build_node(ids, lo + 1, mid, state);
  const std::int64_t outer = mid < hi ? build_node(ids, mid, hi, state) : -1;
  Node& node = nodes_[static_cast<std::size_t>(self)];
  node.vantage = vantage;
  node.radius = radius;
  node.inner = inner;
  node.outer = outer;
  return self;
}

void SpatialIndex::search(std::int64_t id, std::size_t query, QueryState& state) const {
  if (id < 0) return;
  const Node& node = nodes_[static_cast<std::size_t>(id)];
  const auto q = cloud_.row(query);
  if (node.inner < 0 && node.outer < 0) {
    for (std::size_t k = node.bucket_begin; k < node.bucket_end; ++k) {
      const std::size_t j = bucket_[k];
      if (j != query) state.consider(squared_distance(q, cloud_.row(j)), j);
    }
    return;
  }

  const double d2 = squared_distance(q, cloud_.row(node.vantage));
  state.consider(d2, node.vantage);
  const double d = std::sqrt(d2);

  auto inner_reachable = [&] {
    const double tau = state.tau();
    return d - tau <= node.radius + kPruneSlack * (d + node.radius + tau);
  };
  auto outer_reachable = [&] {
    const double tau = state.tau();
    return d + tau >= node.radius - kPruneSlack * (d + node.radius + tau);
  };

  if (d <= node.radius) {
    if (inner_reachable()) search(node.inner, query, state);
    if (outer_reachable()) search(node.outer, query, state);
  } else {
    if (outer_reachable()) search(node.outer, query, state);
    if (inner_reachable()) search(node.inner, query, state);
  }
}

NeighborPairs SpatialIndex::two_nearest(unsigned threads) const {
  const std::size_t n = cloud_.size();
  NeighborPairs out;
  out.r1.resize(n);
  out.r2.resize(n);
  out.idx1.resize(n);
  out.idx2.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    QueryState state{i};
    search(0, i, state);
    out.r1[i] = std::sqrt(state.d1);
    out.r2[i] = std::sqrt(state.d2);
    out.idx1[i] = state.i1;
    out.idx2[i] = state.i2;
  });
  return out;
}

}  // namespace idprof
