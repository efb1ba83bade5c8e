#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <unistd.h>

#include "idprof/dump_io.hpp"
#include "idprof/estimator.hpp"
#include "idprof/manifolds.hpp"
#include "idprof/neighbors.hpp"
#include "idprof/point_cloud.hpp"
#include "idprof/random.hpp"

namespace testing {

namespace fs = std::filesystem;

// Scratch directory removed on scope exit. IDPROF_TEST_TMP overrides the parent.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const char* root = std::getenv("IDPROF_TEST_TMP");
    fs::path parent = root ? fs::path(root) : fs::temp_directory_path();
    static std::uint64_t counter = 0;
    const auto salt = idprof::splitmix64(reinterpret_cast<std::uintptr_t>(this) ^ ++counter ^
                                         static_cast<std::uint64_t>(::getpid()));
    path_ = parent / ("idprof_" + tag + "_" + std::to_string(salt % 1000000007ULL));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline idprof::PointCloud random_cloud(std::size_t n, std::size_t dim, std::uint64_t seed,
                                       double lo = -1.0, double hi = 1.0) {
  idprof::Rng rng(seed);
  std::vector<double> v(n * dim);
  for (auto& x : v) x = idprof::uniform(rng, lo, hi);
  return idprof::PointCloud(n, dim, std::move(v));
}

// Integer-valued coordinates: plenty of exact distance ties.
inline idprof::PointCloud lattice_cloud(std::size_t n, std::size_t dim, std::uint64_t seed, int range) {
  idprof::Rng rng(seed);
  std::vector<double> v(n * dim);
  for (auto& x : v) x = static_cast<double>(idprof::uniform_int(rng, 0, range));
  return idprof::PointCloud(n, dim, std::move(v));
}

inline idprof::PointCloud hypercube(std::size_t d, std::size_t D, std::size_t n, std::uint64_t seed) {
  return idprof::sample(idprof::ManifoldSpec{idprof::ManifoldKind::Hypercube, d, D, n, seed});
}

// Straightforward O(n^2 D) scan, summing in natural column order.
inline idprof::NeighborPairs naive_two_nearest(const idprof::PointCloud& c) {
  const std::size_t n = c.size();
  idprof::NeighborPairs out;
  out.r1.assign(n, 0);
  out.r2.assign(n, 0);
  out.idx1.assign(n, 0);
  out.idx2.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double s = 0;
      for (std::size_t k = 0; k < c.dim(); ++k) {
        const double t = c.row(i)[k] - c.row(j)[k];
        s += t * t;
      }
      d.emplace_back(s, j);
    }
    std::partial_sort(d.begin(), d.begin() + 2, d.end());
    out.r1[i] = std::sqrt(d[0].first);
    out.r2[i] = std::sqrt(d[1].first);
    out.idx1[i] = d[0].second;
    out.idx2[i] = d[1].second;
  }
  return out;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(a), std::abs(b));
}

// A row-streamed IDCD file whose rows are `latent`-dimensional uniform points
// mapped into R^dim through fixed random +-1/sqrt(dim) directions. Never holds
// more than one row plus the direction table.
inline void write_latent_dump(const fs::path& path, std::size_t n, std::size_t dim, std::size_t latent,
                              std::uint64_t seed, idprof::DType dtype) {
  idprof::Rng rng(seed);
  const float scale = static_cast<float>(1.0 / std::sqrt(static_cast<double>(dim)));
  std::vector<float> basis(latent * dim);
  for (std::size_t k = 0; k < latent; ++k) {
    for (std::size_t c = 0; c < dim; c += 64) {
      std::uint64_t bits = rng();
      for (std::size_t b = 0; b < 64 && c + b < dim; ++b) {
        basis[k * dim + c + b] = ((bits >> b) & 1) ? scale : -scale;
      }
    }
  }
  idprof::DumpWriter writer(path, "synthetic", n, dim, dtype);
  std::vector<float> row(dim);
  std::vector<double> row64(dtype == idprof::DType::F64 ? dim : 0);
  std::vector<float> z(latent);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : z) v = static_cast<float>(idprof::uniform01(rng) * 10.0);
    std::fill(row.begin(), row.end(), 0.0f);
    for (std::size_t k = 0; k < latent; ++k) {
      const float* b = basis.data() + k * dim;
      const float zk = z[k];
      for (std::size_t c = 0; c < dim; ++c) row[c] += zk * b[c];
    }
    if (dtype == idprof::DType::F32) {
      writer.write_row(std::span<const float>(row));
    } else {
      std::copy(row.begin(), row.end(), row64.begin());
      writer.write_row(std::span<const double>(row64));
    }
  }
  writer.close();
}

}  // namespace testing
