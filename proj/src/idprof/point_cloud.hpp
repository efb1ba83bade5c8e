#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace idprof {

// n points in dim-dimensional space, row-major. Every coordinate is finite.
class PointCloud {
 public:
  PointCloud() = default;

  // Throws NonFiniteInput when a coordinate is NaN/Inf and InvalidArgument
  // when data.size() != n * dim.
  PointCloud(std::size_t n, std::size_t dim, std::vector<double> data,
             std::vector<std::string> labels = {});

  std::size_t size() const noexcept { return n_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return n_ == 0; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  // Rows picked by index, in the given order. Labels follow their rows.
  PointCloud select(std::span<const std::size_t> rows) const;

  // Every coordinate multiplied by factor.
  PointCloud scaled(double factor) const;

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
  std::vector<std::string> labels_;
};

}  // namespace idprof
