// Heap high-water marks of the streamed kernel on a wide dump.
#include "doctest.h"

#include "alloc_tracker.hpp"
#include "idprof/error.hpp"
#include "support.hpp"

using namespace idprof;

namespace {

constexpr std::size_t kRows = 400;
constexpr std::size_t kDim = 100000;

const std::filesystem::path& wide_dump() {
  static testing::TempDir dir("mem");
  static const auto path = [] {
    const auto p = dir / "wide.idcd";
    testing::write_latent_dump(p, kRows, kDim, 6, 17, DType::F32);
    return p;
  }();
  return path;
}

}  // namespace

TEST_CASE("kernel transient allocations stay within the budget") {
  const DumpFile file(wide_dump());
  NeighborPairs reference;
  for (std::uint64_t budget : {std::uint64_t{256} << 20, std::uint64_t{16} << 20, std::uint64_t{2} << 20}) {
    CAPTURE(budget);
    const ChunkPolicy policy{budget, 0, 0, 1};
    const KernelPlan plan = plan_kernel(file, policy);
    CHECK(plan.transient_bytes <= budget);
    NeighborPairs pairs;
    std::size_t growth = 0;
    {
      const alloc_tracker::Scope scope;
      pairs = two_nearest_exact(file, policy);
      growth = scope.peak_growth();
    }
    MESSAGE("budget " << budget << " plan " << plan.block_rows << "x" << plan.strip_cols << " peak heap growth "
                      << growth);
    CHECK(growth <= budget);
    if (reference.size() == 0) {
      reference = pairs;
    } else {
      CHECK(pairs == reference);
    }
  }
}

TEST_CASE("budgets below the minimum plan are refused") {
  const DumpFile file(wide_dump());
  try {
    two_nearest_exact(file, ChunkPolicy{4096, 0, 0, 1});
    FAIL("expected BudgetTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BudgetTooSmall);
  }
}

TEST_CASE("streamed estimation stays near the budget") {
  const DumpFile file(wide_dump());
  const std::uint64_t budget = std::uint64_t{8} << 20;
  const alloc_tracker::Scope scope;
  const auto est = estimate_id(file, {}, ChunkPolicy{budget, 0, 0, 1});
  MESSAGE("estimate " << est.d_hat << " peak heap growth " << scope.peak_growth());
  // Per-point bookkeeping (neighbour pairs, ratios, hashes) sits on top of the kernel budget.
  CHECK(scope.peak_growth() <= budget + kRows * 256);
  CHECK(est.d_hat == doctest::Approx(6.0).epsilon(0.25));
}
