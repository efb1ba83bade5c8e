#include "doctest.h"

#include <cmath>
#include <numbers>

#include "idprof/error.hpp"
#include "support.hpp"

using namespace idprof;

namespace {

NeighborPairs pairs_of(std::vector<double> r1, std::vector<double> r2) {
  NeighborPairs p;
  p.idx1.assign(r1.size(), 0);
  p.idx2.assign(r1.size(), 0);
  p.r1 = std::move(r1);
  p.r2 = std::move(r2);
  return p;
}

MuSample sample_of(std::vector<double> mu) {
  std::vector<double> r1(mu.size(), 1.0);
  return mu_ratios(pairs_of(r1, mu), 1);
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an idprof::Error");
  return ErrorCode::InvalidArgument;
}

PointCloud segment_in(std::size_t D, std::size_t n, std::uint64_t seed) {
  return embed_isometric(testing::hypercube(1, 1, n, seed), D, seed + 1000);
}

}  // namespace

TEST_CASE("mu ratios") {
  const auto s = mu_ratios(pairs_of({1, 2}, {2, 8}), 1);
  CHECK(s.mu == std::vector<double>{2, 4});
  CHECK(s.sorted(0) == 2);
  CHECK(s.sorted(1) == 4);
  CHECK(s.f_emp == std::vector<double>{0.5, 1.0});
  CHECK(s.dropped_ties == 0);

  const auto unsorted = mu_ratios(pairs_of({1, 1, 1}, {5, 2, 3}), 1);
  CHECK(unsorted.sigma == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("tied first and second neighbours are dropped") {
  const auto s = mu_ratios(pairs_of({1, 2, 3}, {2, 2, 6}), 1);
  CHECK(s.size() == 2);
  CHECK(s.dropped_ties == 1);
  CHECK(s.point == std::vector<std::size_t>{0, 2});
  CHECK(s.f_emp == std::vector<double>{0.5, 1.0});
}

TEST_CASE("mu ratio errors") {
  CHECK(code_of([] { mu_ratios(pairs_of({0, 1}, {1, 2}), 1); }) == ErrorCode::ZeroFirstNeighbor);
  CHECK(code_of([] { mu_ratios(pairs_of({1, 1}, {2, 1}), 2); }) == ErrorCode::TooFewValid);
}

TEST_CASE("mu against raw pairwise distances") {
  const auto c = testing::random_cloud(200, 5, 42);
  const auto s = mu_ratios(two_nearest_exact(c, {}), 20);
  REQUIRE(s.size() == 200);
  for (std::size_t i = 0; i < c.size(); ++i) {
    std::vector<double> d;
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (j == i) continue;
      double acc = 0;
      for (std::size_t k = 0; k < c.dim(); ++k) acc += std::pow(c.row(i)[k] - c.row(j)[k], 2);
      d.push_back(std::sqrt(acc));
    }
    std::sort(d.begin(), d.end());
    CHECK(s.mu[i] == doctest::Approx(d[1] / d[0]).epsilon(1e-12));
  }
}

TEST_CASE("cumulate coordinates") {
  const auto s = sample_of({1.1, 1.2, 1.5, 3.0});
  SUBCASE("quarter discarded") {
    const auto fp = cumulate_coordinates(s, FitOptions{0.25, 2});
    REQUIRE(fp.size() == 3);
    CHECK(fp.x == std::vector<double>{std::log(1.1), std::log(1.2), std::log(1.5)});
    CHECK(fp.y == std::vector<double>{-std::log(3.0 / 4), -std::log(2.0 / 4), -std::log(1.0 / 4)});
  }
  SUBCASE("nothing discarded still drops rank N") {
    const auto fp = cumulate_coordinates(s, FitOptions{0.0, 2});
    CHECK(fp.size() == 3);
  }
  SUBCASE("too few after discard") {
    CHECK(code_of([&] { cumulate_coordinates(s, FitOptions{0.5, 3}); }) == ErrorCode::TooFewValid);
  }
  SUBCASE("invalid options") {
    CHECK(code_of([&] { cumulate_coordinates(s, FitOptions{1.0, 2}); }) == ErrorCode::InvalidArgument);
    CHECK(code_of([&] { cumulate_coordinates(s, FitOptions{-0.1, 2}); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("uniform square: cumulate points hug a line of slope two") {
  const auto c = testing::hypercube(2, 2, 20000, 3);
  const auto s = mu_ratios(two_nearest_exact(c, {}), 20);
  const auto fp = cumulate_coordinates(s, {});
  // Compare y against 2x in the bulk of the distribution.
  double worst = 0;
  for (std::size_t k = fp.size() / 10; k < fp.size() * 9 / 10; ++k) {
    worst = std::max(worst, std::abs(fp.y[k] - 2 * fp.x[k]) / fp.y[k]);
  }
  CHECK(worst < 0.15);
  for (std::size_t k = 0; k < fp.size(); ++k) {
    CHECK(fp.x[k] > 0);
    CHECK(fp.y[k] > 0);
  }
}

TEST_CASE("origin line fit") {
  SUBCASE("perfect line") {
    const auto e = fit_origin_line(FitPoints{{1, 2, 3}, {2, 4, 6}});
    CHECK(e.d_hat == 2.0);
    CHECK(e.r_squared == 1.0);
    CHECK(e.std_error == 0.0);
    CHECK(e.n_used == 3);
  }
  SUBCASE("two points") {
    const auto e = fit_origin_line(FitPoints{{1, 2}, {2, 3}});
    CHECK(e.d_hat == doctest::Approx(1.6).epsilon(1e-15));
    // Residuals 0.4 and -0.2; SS_res = 0.2, m - 1 = 1, sxx = 5.
    CHECK(e.std_error == doctest::Approx(std::sqrt(0.2 / 5)).epsilon(1e-12));
    CHECK(e.r_squared == doctest::Approx(1 - 0.2 / 13).epsilon(1e-12));
  }
  SUBCASE("degenerate") {
    CHECK(code_of([] { fit_origin_line(FitPoints{{0, 0}, {1, 2}}); }) == ErrorCode::DegenerateFit);
    CHECK(code_of([] { fit_origin_line(FitPoints{}); }) == ErrorCode::DegenerateFit);
  }
}

TEST_CASE("mle cross-check") {
  const double e = std::numbers::e;
  CHECK(fit_mle(sample_of({e, e}), FitOptions{0.1, 1}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(fit_mle(sample_of({e * e}), FitOptions{0.1, 1}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(code_of([&] { fit_mle(sample_of({e}), FitOptions{0.1, 5}); }) == ErrorCode::TooFewValid);

  const auto est = estimate_id(testing::hypercube(2, 2, 3000, 17), {}, {});
  CHECK(std::abs(est.d_mle - est.d_hat) <= 0.3);
}

TEST_CASE("estimate_id on known manifolds") {
  SUBCASE("segment in D=5") {
    const auto est = estimate_id(segment_in(5, 1000, 1), {}, {});
    CHECK(est.d_hat >= 0.9);
    CHECK(est.d_hat <= 1.1);
  }
  SUBCASE("square in D=10") {
    const auto est = estimate_id(embed_isometric(testing::hypercube(2, 2, 2000, 2), 10, 3), {}, {});
    CHECK(est.d_hat >= 1.8);
    CHECK(est.d_hat <= 2.2);
    CHECK(est.n_used == 1800);
    CHECK(est.r_squared > 0.99);
    CHECK(est.r_squared <= 1.0);
  }
  SUBCASE("deterministic") {
    const auto c = testing::hypercube(3, 4, 1500, 4);
    CHECK(estimate_id(c, {}, {}) == estimate_id(c, {}, {}));
  }
}

TEST_CASE("estimate_id reports and removes duplicates") {
  const auto base = testing::hypercube(2, 2, 500, 5);
  std::vector<std::size_t> order(500);
  std::iota(order.begin(), order.end(), std::size_t{0});
  order.insert(order.end(), {3, 3, 10});
  const auto est = estimate_id(base.select(order), {}, {});
  CHECK(est.n_points == 503);
  CHECK(est.n_duplicates == 3);
  CHECK(est.d_hat == estimate_id(base, {}, {}).d_hat);
}

TEST_CASE("estimate_id errors") {
  CHECK(code_of([] { estimate_id(testing::random_cloud(2, 2, 1), {}, {}); }) == ErrorCode::CloudTooSmall);
  CHECK(code_of([] { estimate_id(testing::random_cloud(21, 3, 1), {}, {}); }) == ErrorCode::TooFewValid);
  CHECK(code_of([] { estimate_id(PointCloud(4, 1, {1, 1, 1, 1}), {}, {}); }) ==
        ErrorCode::AllPointsIdentical);
  CHECK(code_of([] { estimate_id(testing::random_cloud(50, 3, 1), FitOptions{1.5, 20}, {}); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("streaming estimate equals in-memory estimate") {
  testing::TempDir dir("est");
  const auto c = embed_isometric(testing::hypercube(3, 3, 800, 6), 40, 7);
  write_dump(ActivationDump{"l", c}, dir / "c.idcd");
  const DumpFile file(dir / "c.idcd");
  CHECK(estimate_id(file, {}, {}) == estimate_id(c, {}, {}));

  std::vector<std::size_t> order(800);
  std::iota(order.begin(), order.end(), std::size_t{0});
  order.insert(order.end(), {5, 9, 5});
  const auto dup = c.select(order);
  write_dump(ActivationDump{"l", dup}, dir / "d.idcd");
  const DumpFile dfile(dir / "d.idcd");
  ChunkPolicy small;
  small.max_resident_bytes = 1 << 20;
  CHECK(estimate_id(dfile, {}, small) == estimate_id(dup, {}, {}));
}

TEST_CASE("bootstrap interval") {
  const auto seg = segment_in(3, 600, 8);
  const auto ci = bootstrap_ci(seg, 100, 99, {}, {});
  CHECK(ci.lo <= 1.0);
  CHECK(ci.hi >= 1.0);
  CHECK(ci.lo < ci.hi);
  CHECK(bootstrap_ci(seg, 100, 99, {}, {}) == ci);
  ChunkPolicy one;
  one.threads = 1;
  CHECK(bootstrap_ci(seg, 100, 99, {}, one) == ci);
  CHECK(bootstrap_ci(seg, 100, 100, {}, {}) != ci);
  CHECK(code_of([&] { bootstrap_ci(seg, 10, 1, {}, {}); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("bootstrap errors carry the replicate index") {
  try {
    bootstrap_ci(testing::random_cloud(25, 2, 3), 100, 1, {}, {});
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooFewValid);
    CHECK(std::string(e.what()).find("replicate") != std::string::npos);
  }
}

TEST_CASE("decimation curve") {
  const auto seg = segment_in(4, 2000, 9);
  SUBCASE("full fraction is the plain estimate") {
    const std::vector<double> f{1.0};
    const auto curve = decimation_curve(seg, f, 3, {}, {});
    REQUIRE(curve.size() == 1);
    CHECK(curve[0].n_sub == 2000);
    CHECK(curve[0].estimate == estimate_id(seg, {}, {}));
  }
  SUBCASE("segment stays near one") {
    const std::vector<double> f{0.25, 0.5, 1.0};
    const auto curve = decimation_curve(seg, f, 3, {}, {});
    REQUIRE(curve.size() == 3);
    for (const auto& p : curve) {
      CHECK(p.estimate.d_hat >= 0.8);
      CHECK(p.estimate.d_hat <= 1.2);
    }
    CHECK(curve[0].n_sub == 500);
    CHECK(curve[1].n_sub == 1000);
    const auto again = decimation_curve(seg, f, 3, {}, {});
    for (std::size_t k = 0; k < 3; ++k) CHECK(again[k].estimate == curve[k].estimate);
  }
  SUBCASE("errors") {
    const std::vector<double> tiny{0.005};
    CHECK(code_of([&] { decimation_curve(seg, tiny, 1, {}, {}); }) == ErrorCode::TooFewValid);
    const std::vector<double> bad{1.5};
    CHECK(code_of([&] { decimation_curve(seg, bad, 1, {}, {}); }) == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("type-7 quantiles") {
  const std::vector<double> v{1, 2, 3, 4};
  CHECK(quantile_sorted(v, 0.0) == 1);
  CHECK(quantile_sorted(v, 1.0) == 4);
  CHECK(quantile_sorted(v, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_sorted(v, 0.25) == doctest::Approx(1.75));
}
