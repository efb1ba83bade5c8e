#include "idprof/neighbors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>
#include <unordered_map>

#include "idprof/error.hpp"
#include "idprof/lanes.hpp"
#include "idprof/parallel.hpp"

namespace idprof {

namespace {

constexpr std::uint64_t kAccCapBytes = std::uint64_t{32} << 20;
constexpr std::uint64_t kComputeTileBytes = std::uint64_t{1} << 20;
constexpr std::uint64_t kSlackBytes = 4096;

struct BestTwo {
  double d1 = std::numeric_limits<double>::infinity();
  double d2 = std::numeric_limits<double>::infinity();
  std::size_t i1 = kNoNeighbor;
  std::size_t i2 = kNoNeighbor;

  // (distance, index) lexicographic order makes the result independent of
  // the order candidates arrive in.
  void consider(double d, std::size_t j) noexcept {
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
};

std::size_t round_up8(std::size_t v) { return (v + 7) / 8 * 8; }

std::uint64_t plan_bytes(std::size_t n, std::size_t rows, std::size_t cols, bool single_block,
                         const RowSource& source) {
  const std::uint64_t fixed = std::uint64_t{n} * (sizeof(BestTwo) + 2 * sizeof(double) +
                                                  2 * sizeof(std::size_t));
  const std::uint64_t acc = std::uint64_t{rows} * rows * lanes::kLanes * sizeof(double);
  const std::uint64_t buffers = (single_block ? 1u : 2u) * std::uint64_t{rows} * cols * sizeof(double);
  return fixed + acc + buffers + source.read_overhead(cols) + kSlackBytes;
}

}  // namespace

void CloudRows::read(std::size_t row, std::size_t col, std::span<double> out) const {
  auto src = cloud_->row(row).subspan(col, out.size());
  std::copy(src.begin(), src.end(), out.begin());
}

double squared_distance(std::span<const double> a, std::span<const double> b) noexcept {
  double acc[lanes::kLanes] = {};
  lanes::accumulate(a.data(), b.data(), std::min(a.size(), b.size()), acc);
  return lanes::combine(acc);
}

KernelPlan plan_kernel(const RowSource& source, const ChunkPolicy& policy) {
  const std::size_t n = source.rows();
  const std::size_t dim = source.dim();
  const std::uint64_t budget = policy.max_resident_bytes;

  auto fits = [&](std::size_t rows, std::size_t cols) {
    const bool single = rows >= n;
    const std::uint64_t bytes = plan_bytes(n, rows, cols, single, source);
    return std::pair{bytes <= budget, bytes};
  };

  auto finish = [&](std::size_t rows, std::size_t cols) -> KernelPlan {
    rows = std::min(rows, n);
    cols = std::min(cols, dim);
    auto [ok, bytes] = fits(rows, cols);
    if (!ok) {
      fail(ErrorCode::BudgetTooSmall,
           "distance kernel needs " + std::to_string(bytes) + " bytes for " + std::to_string(rows) +
               " x " + std::to_string(cols) + " blocks, budget is " + std::to_string(budget));
    }
    return KernelPlan{rows, cols, bytes};
  };

  // Largest strip (multiple of 8, or the whole row) that fits next to `rows`.
  auto widest_strip = [&](std::size_t rows) -> std::size_t {
    if (fits(rows, dim).first) return dim;
    std::size_t lo = 0, hi = dim / 8;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo + 1) / 2;
      if (fits(rows, mid * 8).first) lo = mid; else hi = mid - 1;
    }
    return lo * 8;
  };

  if (policy.chunk_rows != 0 || policy.chunk_cols != 0) {
    std::size_t rows = policy.chunk_rows;
    std::size_t cols = policy.chunk_cols == 0 ? 0 : round_up8(policy.chunk_cols);
    if (rows == 0) {
      rows = n;
      while (rows > 1 && !fits(rows, std::min(cols, dim)).first) rows = (rows + 1) / 2;
    }
    if (cols == 0) cols = std::max<std::size_t>(widest_strip(std::min(rows, n)), 1);
    return finish(rows, cols);
  }

  std::size_t rows = n;
  while (rows > 1 && std::uint64_t{rows} * rows * lanes::kLanes * sizeof(double) > kAccCapBytes) {
    rows = (rows + 1) / 2;
  }
  for (;;) {
    const std::size_t cols = widest_strip(rows);
    if (cols >= std::min<std::size_t>(8, dim)) return finish(rows, cols);
    if (rows == 1) return finish(1, std::min<std::size_t>(8, dim));
    rows = (rows + 1) / 2;
  }
}

NeighborPairs two_nearest_exact(const RowSource& source, const ChunkPolicy& policy) {
  const std::size_t n = source.rows();
  const std::size_t dim = source.dim();
  if (n < 3) {
    fail(ErrorCode::CloudTooSmall, "need at least 3 points, got " + std::to_string(n));
  }
  if (dim == 0) fail(ErrorCode::InvalidArgument, "point dimension must be >= 1");

  const KernelPlan plan = plan_kernel(source, policy);
  const std::size_t block = plan.block_rows;
  const std::size_t strip = plan.strip_cols;
  const std::size_t nblocks = (n + block - 1) / block;
  const unsigned threads = resolve_threads(policy.threads);

  std::vector<BestTwo> best(n);
  std::vector<double> acc(block * block * lanes::kLanes);
  std::vector<double> buf_i(block * strip);
  std::vector<double> buf_j(nblocks > 1 ? block * strip : 0);

  for (std::size_t bi = 0; bi < nblocks; ++bi) {
    const std::size_t i0 = bi * block;
    const std::size_t ni = std::min(block, n - i0);
    for (std::size_t bj = bi; bj < nblocks; ++bj) {
      const std::size_t j0 = bj * block;
      const std::size_t nj = std::min(block, n - j0);
      const bool same = bi == bj;
      std::fill(acc.begin(), acc.begin() + ni * nj * lanes::kLanes, 0.0);

      for (std::size_t c0 = 0; c0 < dim; c0 += strip) {
        const std::size_t w = std::min(strip, dim - c0);
        for (std::size_t a = 0; a < ni; ++a) {
          source.read(i0 + a, c0, std::span<double>(buf_i.data() + a * w, w));
        }
        if (!same) {
          for (std::size_t b = 0; b < nj; ++b) {
            source.read(j0 + b, c0, std::span<double>(buf_j.data() + b * w, w));
          }
        }
        const double* rows_i = buf_i.data();
        const double* rows_j = same ? buf_i.data() : buf_j.data();

        // Column sub-strips keep the J rows cache resident while every I row
        // streams past them.
        std::size_t sub = kComputeTileBytes / (std::max<std::size_t>(nj, 1) * sizeof(double));
        sub = std::clamp<std::size_t>(sub / 8 * 8, 64, std::max<std::size_t>(round_up8(w), 64));

        const unsigned workers =
            static_cast<unsigned>(std::min<std::size_t>(threads, ni));
        run_workers(workers, [&](unsigned worker, unsigned total) {
          for (std::size_t s0 = 0; s0 < w; s0 += sub) {
            const std::size_t len = std::min(sub, w - s0);
            for (std::size_t a = worker; a < ni; a += total) {
              const double* ra = rows_i + a * w + s0;
              double* acc_row = acc.data() + a * nj * lanes::kLanes;
              std::size_t b = same ? a + 1 : 0;
              for (; b + 4 <= nj; b += 4) {
                lanes::accumulate4(ra, rows_j + b * w + s0, rows_j + (b + 1) * w + s0,
                                   rows_j + (b + 2) * w + s0, rows_j + (b + 3) * w + s0, len,
                                   acc_row + b * lanes::kLanes, acc_row + (b + 1) * lanes::kLanes,
                                   acc_row + (b + 2) * lanes::kLanes,
                                   acc_row + (b + 3) * lanes::kLanes);
              }
              for (; b < nj; ++b) {
                lanes::accumulate(ra, rows_j + b * w + s0, len, acc_row + b * lanes::kLanes);
              }
            }
          }
        });
      }

      for (std::size_t a = 0; a < ni; ++a) {
        for (std::size_t b = same ? a + 1 : 0; b < nj; ++b) {
          const double d = lanes::combine(acc.data() + (a * nj + b) * lanes::kLanes);
          best[i0 + a].consider(d, j0 + b);
          best[j0 + b].consider(d, i0 + a);
        }
      }
    }
  }

  NeighborPairs out;
  out.r1.resize(n);
  out.r2.resize(n);
  out.idx1.resize(n);
  out.idx2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.r1[i] = std::sqrt(best[i].d1);
    out.r2[i] = std::sqrt(best[i].d2);
    out.idx1[i] = best[i].i1;
    out.idx2[i] = best[i].i2;
  }
  return out;
}

NeighborPairs two_nearest_exact(const PointCloud& cloud, const ChunkPolicy& policy) {
  return two_nearest_exact(CloudRows(cloud), policy);
}

namespace {

std::uint64_t hash_values(std::span<const double> values, std::uint64_t h) {
  for (double v : values) {
    const double canonical = v + 0.0;  // -0.0 -> +0.0
    std::uint64_t bits;
    std::memcpy(&bits, &canonical, sizeof bits);
    h ^= bits + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

bool rows_equal(const RowSource& source, std::size_t a, std::size_t b, std::size_t strip,
                std::vector<double>& buf_a, std::vector<double>& buf_b) {
  const std::size_t dim = source.dim();
  for (std::size_t c0 = 0; c0 < dim; c0 += strip) {
    const std::size_t w = std::min(strip, dim - c0);
    source.read(a, c0, std::span<double>(buf_a.data(), w));
    source.read(b, c0, std::span<double>(buf_b.data(), w));
    for (std::size_t k = 0; k < w; ++k) {
      if (!(buf_a[k] == buf_b[k])) return false;
    }
  }
  return true;
}

}  // namespace

DedupReport deduplicate_exact(const RowSource& source, std::size_t strip_cols) {
  const std::size_t n = source.rows();
  const std::size_t dim = source.dim();
  strip_cols = std::max<std::size_t>(1, std::min(strip_cols, dim));

  std::vector<std::uint64_t> hashes(n, 0x243f6a8885a308d3ULL);
  std::vector<double> buf_a(strip_cols), buf_b(strip_cols);
  for (std::size_t c0 = 0; c0 < dim; c0 += strip_cols) {
    const std::size_t w = std::min(strip_cols, dim - c0);
    for (std::size_t i = 0; i < n; ++i) {
      source.read(i, c0, std::span<double>(buf_a.data(), w));
      hashes[i] = hash_values(std::span<const double>(buf_a.data(), w), hashes[i]);
    }
  }

  DedupReport report;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> seen;
  for (std::size_t i = 0; i < n; ++i) {
    auto& bucket = seen[hashes[i]];
    bool duplicate = false;
    for (std::size_t k : bucket) {
      if (rows_equal(source, k, i, strip_cols, buf_a, buf_b)) {
        duplicate = true;
        break;
      }
    }
    if (duplicate) {
      report.dropped.push_back(i);
    } else {
      bucket.push_back(i);
      report.kept.push_back(i);
    }
  }
  return report;
}

std::pair<PointCloud, DedupReport> deduplicate(const PointCloud& cloud, double eps) {
  if (!std::isfinite(eps) || eps < 0) {
    fail(ErrorCode::InvalidArgument, "dedup eps must be finite and >= 0");
  }
  DedupReport report;
  if (eps == 0.0) {
    report = deduplicate_exact(CloudRows(cloud), std::max<std::size_t>(cloud.dim(), 1));
  } else {
    const double eps2 = eps * eps;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      bool near = false;
      for (std::size_t k : report.kept) {
        if (squared_distance(cloud.row(k), cloud.row(i)) <= eps2) {
          near = true;
          break;
        }
      }
      (near ? report.dropped : report.kept).push_back(i);
    }
  }
  if (report.kept.size() < 3) {
    fail(ErrorCode::AllPointsIdentical,
         "only " + std::to_string(report.kept.size()) + " distinct points remain after deduplication");
  }
  PointCloud out = report.dropped.empty() ? cloud : cloud.select(report.kept);
  return {std::move(out), std::move(report)};
}

}  // namespace idprof
