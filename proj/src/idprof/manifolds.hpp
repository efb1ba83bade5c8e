#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "idprof/point_cloud.hpp"

namespace idprof {

enum class ManifoldKind { Hypercube, SphereSurface, SwissRoll, Gaussian, NonuniformBeta };

std::string_view to_string(ManifoldKind kind) noexcept;
std::optional<ManifoldKind> parse_manifold_kind(std::string_view name) noexcept;

struct ManifoldSpec {
  ManifoldKind kind = ManifoldKind::Hypercube;
  std::size_t intrinsic_dim = 2;
  std::size_t ambient_dim = 2;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
};

// Ground-truth intrinsic dimension of the sampled distribution.
std::size_t true_dimension(const ManifoldSpec& spec) noexcept;

// Smallest ambient dimension the kind accepts for the given intrinsic_dim.
std::size_t min_ambient_dim(ManifoldKind kind, std::size_t intrinsic_dim) noexcept;

// Throws InvalidSpec naming the offending field.
void validate(const ManifoldSpec& spec);

// Samples spec.n i.i.d. points. Intrinsic coordinates occupy the leading
// columns, the rest are zero:
//   hypercube        uniform on [0, 1]^d
//   sphere_surface   uniform on the unit sphere S^d in R^(d+1)
//   swiss_roll       (t cos t, h, t sin t), t ~ U[1.5 pi, 4.5 pi], h ~ U[0, 21]
//   gaussian         standard normal in R^d, d == D
//   nonuniform_beta  independent beta(2, 5) coordinates on [0, 1]^d
PointCloud sample(const ManifoldSpec& spec);

// Zero-pads to target_dim, then applies a random orthogonal map (QR of a
// seeded Gaussian matrix) and a random translation in [-1, 1]^target_dim.
// seed == 0 is the identity convention: padding only.
PointCloud embed_isometric(const PointCloud& cloud, std::size_t target_dim, std::uint64_t seed);

}  // namespace idprof
