#include "idprof/point_cloud.hpp"

#include <cmath>

#include "idprof/error.hpp"

namespace idprof {

PointCloud::PointCloud(std::size_t n, std::size_t dim, std::vector<double> data,
                       std::vector<std::string> labels)
    : n_(n), dim_(dim), data_(std::move(data)), labels_(std::move(labels)) {
  if (dim_ == 0 && n_ > 0) fail(ErrorCode::InvalidArgument, "point cloud dimension must be >= 1");
  if (data_.size() != n_ * dim_) {
    fail(ErrorCode::InvalidArgument,
         "point cloud buffer holds " + std::to_string(data_.size()) + " values, expected " +
             std::to_string(n_) + " x " + std::to_string(dim_));
  }
  if (!labels_.empty() && labels_.size() != n_) {
    fail(ErrorCode::InvalidArgument, "label count does not match point count");
  }
  for (std::size_t k = 0; k < data_.size(); ++k) {
    if (!std::isfinite(data_[k])) {
      fail(ErrorCode::NonFiniteInput, "non-finite coordinate at row " + std::to_string(k / dim_) +
                                          ", column " + std::to_string(k % dim_));
    }
  }
}

PointCloud PointCloud::select(std::span<const std::size_t> rows) const {
  std::vector<double> out;
  out.reserve(rows.size() * dim_);
  std::vector<std::string> labels;
  if (!labels_.empty()) labels.reserve(rows.size());
  for (std::size_t r : rows) {
    if (r >= n_) fail(ErrorCode::InvalidArgument, "row index out of range");
    auto src = row(r);
    out.insert(out.end(), src.begin(), src.end());
    if (!labels_.empty()) labels.push_back(labels_[r]);
  }
  PointCloud result;
  result.n_ = rows.size();
  result.dim_ = dim_;
  result.data_ = std::move(out);
  result.labels_ = std::move(labels);
  return result;
}

PointCloud PointCloud::scaled(double factor) const {
  std::vector<double> out(data_);
  for (double& v : out) v *= factor;
  return PointCloud(n_, dim_, std::move(out), labels_);
}

}  // namespace idprof
