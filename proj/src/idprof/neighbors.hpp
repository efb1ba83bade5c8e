#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "idprof/point_cloud.hpp"

namespace idprof {

inline constexpr std::size_t kNoNeighbor = std::numeric_limits<std::size_t>::max();

// First and second nearest non-self neighbor of every point.
struct NeighborPairs {
  std::vector<double> r1;
  std::vector<double> r2;
  std::vector<std::size_t> idx1;
  std::vector<std::size_t> idx2;

  std::size_t size() const noexcept { return r1.size(); }
  friend bool operator==(const NeighborPairs&, const NeighborPairs&) = default;
};

struct ChunkPolicy {
  // Budget for everything the distance kernel allocates, excluding the input.
  std::uint64_t max_resident_bytes = std::uint64_t{2} << 30;
  // Rows per block; 0 derives it from the budget.
  std::size_t chunk_rows = 0;
  // Columns per streamed strip, rounded up to a multiple of 8; 0 derives it.
  std::size_t chunk_cols = 0;
  // 0 uses the hardware concurrency.
  unsigned threads = 0;
};

// Resolved block geometry for one kernel run.
struct KernelPlan {
  std::size_t block_rows = 0;
  std::size_t strip_cols = 0;
  std::uint64_t transient_bytes = 0;
};

// Random-access row provider. Implementations must allow concurrent read()
// calls and must report non-finite values as errors.
class RowSource {
 public:
  virtual ~RowSource() = default;
  virtual std::size_t rows() const = 0;
  virtual std::size_t dim() const = 0;
  // Copies columns [col, col + out.size()) of `row` into out.
  virtual void read(std::size_t row, std::size_t col, std::span<double> out) const = 0;
  // Transient bytes a single read() of `cols` columns allocates.
  virtual std::uint64_t read_overhead(std::size_t /*cols*/) const { return 0; }
};

class CloudRows final : public RowSource {
 public:
  explicit CloudRows(const PointCloud& cloud) : cloud_(&cloud) {}
  std::size_t rows() const override { return cloud_->size(); }
  std::size_t dim() const override { return cloud_->dim(); }
  void read(std::size_t row, std::size_t col, std::span<double> out) const override;

 private:
  const PointCloud* cloud_;
};

// A subset of another source's rows, in the given order.
class SubsetRows final : public RowSource {
 public:
  SubsetRows(const RowSource& base, std::vector<std::size_t> rows)
      : base_(&base), rows_(std::move(rows)) {}
  std::size_t rows() const override { return rows_.size(); }
  std::size_t dim() const override { return base_->dim(); }
  void read(std::size_t row, std::size_t col, std::span<double> out) const override {
    base_->read(rows_[row], col, out);
  }
  std::uint64_t read_overhead(std::size_t cols) const override { return base_->read_overhead(cols); }

 private:
  const RowSource* base_;
  std::vector<std::size_t> rows_;
};

// Squared Euclidean distance accumulated in 8 lanes keyed by column index
// modulo 8, each lane summed left to right, lanes combined in a fixed tree.
// Every distance in the library goes through this order, so results do not
// depend on how columns are chunked.
double squared_distance(std::span<const double> a, std::span<const double> b) noexcept;

KernelPlan plan_kernel(const RowSource& source, const ChunkPolicy& policy);

NeighborPairs two_nearest_exact(const RowSource& source, const ChunkPolicy& policy);
NeighborPairs two_nearest_exact(const PointCloud& cloud, const ChunkPolicy& policy);

struct DedupReport {
  std::vector<std::size_t> dropped;  // original indices, ascending
  std::vector<std::size_t> kept;     // original indices, ascending
};

// Keeps the first point of every cluster of points within eps of an already
// kept point. Throws AllPointsIdentical when fewer than 3 points survive.
std::pair<PointCloud, DedupReport> deduplicate(const PointCloud& cloud, double eps = 0.0);

// Exact-duplicate detection over a streamed source; reads at most
// `strip_cols` columns of one row at a time.
DedupReport deduplicate_exact(const RowSource& source, std::size_t strip_cols);

}  // namespace idprof
