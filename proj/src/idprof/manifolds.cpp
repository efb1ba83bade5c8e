#include "idprof/manifolds.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "idprof/error.hpp"
#include "idprof/random.hpp"

namespace idprof {

namespace {

// Box-Muller on our own uniforms so clouds are identical across standard libraries.
double standard_normal(Rng& rng) {
  double u;
  do {
    u = uniform01(rng);
  } while (u == 0.0);
  const double v = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * std::numbers::pi * v);
}

// Gamma(k, 1) for integer k as a sum of k unit exponentials.
double gamma_integer(Rng& rng, int k) {
  double s = 0;
  for (int i = 0; i < k; ++i) {
    double u;
    do {
      u = uniform01(rng);
    } while (u == 0.0);
    s -= std::log(u);
  }
  return s;
}

double beta_2_5(Rng& rng) {
  const double a = gamma_integer(rng, 2);
  const double b = gamma_integer(rng, 5);
  return a / (a + b);
}

std::string describe(const ManifoldSpec& spec) {
  return std::string(to_string(spec.kind)) + "(d=" + std::to_string(spec.intrinsic_dim) +
         ",D=" + std::to_string(spec.ambient_dim) + ",seed=" + std::to_string(spec.seed) + ")";
}

}  // namespace

std::string_view to_string(ManifoldKind kind) noexcept {
  switch (kind) {
    case ManifoldKind::Hypercube: return "hypercube";
    case ManifoldKind::SphereSurface: return "sphere_surface";
    case ManifoldKind::SwissRoll: return "swiss_roll";
    case ManifoldKind::Gaussian: return "gaussian";
    case ManifoldKind::NonuniformBeta: return "nonuniform_beta";
  }
  return "unknown";
}

std::optional<ManifoldKind> parse_manifold_kind(std::string_view name) noexcept {
  for (auto kind : {ManifoldKind::Hypercube, ManifoldKind::SphereSurface, ManifoldKind::SwissRoll,
                    ManifoldKind::Gaussian, ManifoldKind::NonuniformBeta}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::size_t true_dimension(const ManifoldSpec& spec) noexcept {
  return spec.kind == ManifoldKind::SwissRoll ? 2 : spec.intrinsic_dim;
}

std::size_t min_ambient_dim(ManifoldKind kind, std::size_t intrinsic_dim) noexcept {
  switch (kind) {
    case ManifoldKind::SphereSurface: return intrinsic_dim + 1;
    case ManifoldKind::SwissRoll: return 3;
    default: return intrinsic_dim;
  }
}

void validate(const ManifoldSpec& spec) {
  if (spec.n == 0) fail(ErrorCode::InvalidSpec, "n must be >= 1");
  if (spec.intrinsic_dim == 0) fail(ErrorCode::InvalidSpec, "intrinsic_dim must be >= 1");
  switch (spec.kind) {
    case ManifoldKind::SwissRoll:
      if (spec.intrinsic_dim != 2) fail(ErrorCode::InvalidSpec, "intrinsic_dim must be 2 for swiss_roll");
      if (spec.ambient_dim != 3) fail(ErrorCode::InvalidSpec, "ambient_dim must be 3 for swiss_roll");
      break;
    case ManifoldKind::Gaussian:
      if (spec.ambient_dim != spec.intrinsic_dim) {
        fail(ErrorCode::InvalidSpec, "ambient_dim must equal intrinsic_dim for gaussian");
      }
      break;
    case ManifoldKind::SphereSurface:
      if (spec.ambient_dim < spec.intrinsic_dim + 1) {
        fail(ErrorCode::InvalidSpec, "ambient_dim must be >= intrinsic_dim + 1 for sphere_surface");
      }
      break;
    default:
      if (spec.ambient_dim < spec.intrinsic_dim) {
        fail(ErrorCode::InvalidSpec, "ambient_dim must be >= intrinsic_dim");
      }
  }
}

PointCloud sample(const ManifoldSpec& spec) {
  validate(spec);
  const std::size_t d = spec.intrinsic_dim;
  const std::size_t dim = spec.ambient_dim;
  Rng rng(derive_seed(spec.seed, static_cast<std::uint64_t>(spec.kind)));
  std::vector<double> data(spec.n * dim, 0.0);

  for (std::size_t i = 0; i < spec.n; ++i) {
    double* row = data.data() + i * dim;
    switch (spec.kind) {
      case ManifoldKind::Hypercube:
        for (std::size_t k = 0; k < d; ++k) row[k] = uniform01(rng);
        break;
      case ManifoldKind::NonuniformBeta:
        for (std::size_t k = 0; k < d; ++k) row[k] = beta_2_5(rng);
        break;
      case ManifoldKind::Gaussian:
        for (std::size_t k = 0; k < d; ++k) row[k] = standard_normal(rng);
        break;
      case ManifoldKind::SphereSurface: {
        double norm2 = 0;
        do {
          norm2 = 0;
          for (std::size_t k = 0; k <= d; ++k) {
            row[k] = standard_normal(rng);
            norm2 += row[k] * row[k];
          }
        } while (norm2 < 1e-24);
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t k = 0; k <= d; ++k) row[k] *= inv;
        break;
      }
      case ManifoldKind::SwissRoll: {
        const double t = uniform(rng, 1.5 * std::numbers::pi, 4.5 * std::numbers::pi);
        const double h = uniform(rng, 0.0, 21.0);
        row[0] = t * std::cos(t);
        row[1] = h;
        row[2] = t * std::sin(t);
        break;
      }
    }
  }

  const std::string tag = describe(spec);
  std::vector<std::string> labels(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) labels[i] = tag + "#" + std::to_string(i);
  return PointCloud(spec.n, dim, std::move(data), std::move(labels));
}

PointCloud embed_isometric(const PointCloud& cloud, std::size_t target_dim, std::uint64_t seed) {
  const std::size_t dim = cloud.dim();
  if (target_dim < dim || target_dim == 0) {
    fail(ErrorCode::InvalidSpec, "target_dim " + std::to_string(target_dim) +
                                     " is smaller than the cloud dimension " + std::to_string(dim));
  }
  const std::size_t n = cloud.size();
  std::vector<double> out(n * target_dim, 0.0);

  if (seed == 0) {
    for (std::size_t i = 0; i < n; ++i) {
      auto src = cloud.row(i);
      std::copy(src.begin(), src.end(), out.begin() + static_cast<std::ptrdiff_t>(i * target_dim));
    }
    return PointCloud(n, target_dim, std::move(out), cloud.labels());
  }

  Rng rng(derive_seed(seed, 0x656d626564ULL));
  const auto rows = static_cast<Eigen::Index>(target_dim);
  const auto cols = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd gauss(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) gauss(r, c) = standard_normal(rng);
  }
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(gauss);
  const Eigen::MatrixXd basis = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  Eigen::VectorXd shift(rows);
  for (Eigen::Index r = 0; r < rows; ++r) shift(r) = uniform(rng, -1.0, 1.0);

  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Map<const Eigen::VectorXd> x(cloud.row(i).data(), cols);
    Eigen::Map<Eigen::VectorXd> y(out.data() + i * target_dim, rows);
    y = basis * x + shift;
  }
  return PointCloud(n, target_dim, std::move(out), cloud.labels());
}

}  // namespace idprof
