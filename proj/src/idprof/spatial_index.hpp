#pragma once

#include <cstdint>
#include <vector>

#include "idprof/neighbors.hpp"
#include "idprof/point_cloud.hpp"

namespace idprof {

// Vantage-point tree over an owned copy of a cloud. Queries return the same
// distances and the same (distance, index) tie resolution as
// two_nearest_exact.
class SpatialIndex {
 public:
  static SpatialIndex build(PointCloud cloud, std::uint64_t seed);

  const PointCloud& cloud() const noexcept { return cloud_; }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  NeighborPairs two_nearest(unsigned threads = 0) const;

 private:
  struct Node {
    std::size_t vantage = 0;
    double radius = 0;  // inner subtree holds points with distance <= radius
    std::int64_t inner = -1;
    std::int64_t outer = -1;
    std::size_t bucket_begin = 0;  // leaf bucket in bucket_ (vantage unused)
    std::size_t bucket_end = 0;
  };

  struct QueryState;

  std::int64_t build_node(std::vector<std::size_t>& ids, std::size_t lo, std::size_t hi,
                          std::uint64_t& state);
  void search(std::int64_t node, std::size_t query, QueryState& state) const;

  PointCloud cloud_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> bucket_;
};

inline SpatialIndex build_index(PointCloud cloud, std::uint64_t seed) {
  return SpatialIndex::build(std::move(cloud), seed);
}

inline NeighborPairs two_nearest_indexed(const SpatialIndex& index, unsigned threads = 0) {
  return index.two_nearest(threads);
}

}  // namespace idprof
