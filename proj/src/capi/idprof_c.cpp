#include "idprof/idprof.h"

#include <cstdlib>
#include <cstring>
#include <new>
#include <string>
#include <vector>

#include "idprof/dump_io.hpp"
#include "idprof/estimator.hpp"
#include "idprof/manifolds.hpp"
#include "idprof/neighbors.hpp"
#include "idprof/profile.hpp"
#include "idprof/spatial_index.hpp"
#include "idprof/augment.hpp"

struct idprof_cloud {
  idprof::PointCloud cloud;
  std::string layer;
};

struct idprof_profile {
  idprof::LayerProfile profile;
};

namespace {

thread_local std::string g_last_error;

static_assert(static_cast<int>(idprof::ErrorCode::TooFewLayers) + 1 == IDPROF_E_TOO_FEW_LAYERS,
              "status codes must mirror ErrorCode");

idprof_status to_status(idprof::ErrorCode code) {
  return static_cast<idprof_status>(static_cast<int>(code) + 1);
}

template <class Fn>
idprof_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    return IDPROF_OK;
  } catch (const idprof::Error& e) {
    g_last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return IDPROF_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return IDPROF_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return IDPROF_E_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) idprof::fail(idprof::ErrorCode::InvalidArgument, what);
}

idprof::FitOptions fit_from(const idprof_fit_options* opts) {
  idprof::FitOptions out;
  if (opts) {
    out.discard_fraction = opts->discard_fraction;
    out.min_points = opts->min_points;
  }
  return out;
}

idprof::ChunkPolicy policy_from(const idprof_chunk_policy* policy) {
  idprof::ChunkPolicy out;
  if (policy) {
    out.max_resident_bytes = policy->max_resident_bytes;
    out.chunk_rows = policy->chunk_rows;
    out.chunk_cols = policy->chunk_cols;
    out.threads = policy->threads;
  }
  return out;
}

idprof_estimate estimate_to_c(const idprof::IdEstimate& e) {
  return idprof_estimate{e.d_hat,    e.std_error, e.r_squared,    e.d_mle,
                         e.n_used,   e.n_points,  e.n_duplicates, e.n_ties};
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void copy_pairs(const idprof::NeighborPairs& pairs, double* r1, double* r2, size_t* idx1, size_t* idx2) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (r1) r1[i] = pairs.r1[i];
    if (r2) r2[i] = pairs.r2[i];
    if (idx1) idx1[i] = pairs.idx1[i];
    if (idx2) idx2[i] = pairs.idx2[i];
  }
}

}  // namespace

extern "C" {

const char* idprof_last_error(void) { return g_last_error.c_str(); }

const char* idprof_status_name(idprof_status status) {
  if (status == IDPROF_OK) return "Ok";
  if (status == IDPROF_E_INTERNAL) return "Internal";
  if (status < IDPROF_E_INVALID_ARGUMENT || status > IDPROF_E_TOO_FEW_LAYERS) return "Unknown";
  return idprof::to_string(static_cast<idprof::ErrorCode>(status - 1)).data();
}

int idprof_status_is_io(idprof_status status) {
  if (status <= IDPROF_OK || status > IDPROF_E_TOO_FEW_LAYERS) return 0;
  return idprof::is_io_error(static_cast<idprof::ErrorCode>(status - 1)) ? 1 : 0;
}

void idprof_string_free(char* s) { std::free(s); }

const char* idprof_version(void) { return "1.0.0"; }

void idprof_fit_options_default(idprof_fit_options* opts) {
  if (!opts) return;
  const idprof::FitOptions d;
  opts->discard_fraction = d.discard_fraction;
  opts->min_points = d.min_points;
}

void idprof_chunk_policy_default(idprof_chunk_policy* policy) {
  if (!policy) return;
  const idprof::ChunkPolicy d;
  policy->max_resident_bytes = d.max_resident_bytes;
  policy->chunk_rows = d.chunk_rows;
  policy->chunk_cols = d.chunk_cols;
  policy->threads = d.threads;
}

idprof_status idprof_cloud_create(size_t n, size_t dim, const double* data, idprof_cloud** out) {
  return guarded([&] {
    require(out != nullptr, "out must not be NULL");
    require(data != nullptr || n * dim == 0, "data must not be NULL");
    *out = nullptr;
    std::vector<double> values(data, data + n * dim);
    *out = new idprof_cloud{idprof::PointCloud(n, dim, std::move(values)), {}};
  });
}

void idprof_cloud_free(idprof_cloud* cloud) { delete cloud; }

size_t idprof_cloud_size(const idprof_cloud* cloud) { return cloud ? cloud->cloud.size() : 0; }

size_t idprof_cloud_dim(const idprof_cloud* cloud) { return cloud ? cloud->cloud.dim() : 0; }

const double* idprof_cloud_data(const idprof_cloud* cloud) {
  return cloud ? cloud->cloud.data().data() : nullptr;
}

const char* idprof_cloud_layer(const idprof_cloud* cloud) { return cloud ? cloud->layer.c_str() : ""; }

idprof_status idprof_manifold_sample(const char* kind, size_t intrinsic_dim, size_t ambient_dim,
                                     size_t n, uint64_t seed, idprof_cloud** out) {
  return guarded([&] {
    require(kind && out, "kind and out must not be NULL");
    *out = nullptr;
    const auto parsed = idprof::parse_manifold_kind(kind);
    if (!parsed) idprof::fail(idprof::ErrorCode::InvalidSpec, std::string("unknown manifold kind '") + kind + "'");
    const idprof::ManifoldSpec spec{*parsed, intrinsic_dim, ambient_dim, n, seed};
    *out = new idprof_cloud{idprof::sample(spec), {}};
  });
}

idprof_status idprof_cloud_embed(const idprof_cloud* cloud, size_t target_dim, uint64_t seed,
                                 idprof_cloud** out) {
  return guarded([&] {
    require(cloud && out, "cloud and out must not be NULL");
    *out = nullptr;
    *out = new idprof_cloud{idprof::embed_isometric(cloud->cloud, target_dim, seed), cloud->layer};
  });
}

idprof_status idprof_two_nearest(const idprof_cloud* cloud, const idprof_chunk_policy* policy,
                                 double* r1, double* r2, size_t* idx1, size_t* idx2) {
  return guarded([&] {
    require(cloud != nullptr, "cloud must not be NULL");
    copy_pairs(idprof::two_nearest_exact(cloud->cloud, policy_from(policy)), r1, r2, idx1, idx2);
  });
}

idprof_status idprof_two_nearest_indexed(const idprof_cloud* cloud, uint64_t seed, double* r1,
                                         double* r2, size_t* idx1, size_t* idx2) {
  return guarded([&] {
    require(cloud != nullptr, "cloud must not be NULL");
    const auto index = idprof::build_index(cloud->cloud, seed);
    copy_pairs(idprof::two_nearest_indexed(index), r1, r2, idx1, idx2);
  });
}

idprof_status idprof_estimate_cloud(const idprof_cloud* cloud, const idprof_fit_options* opts,
                                    const idprof_chunk_policy* policy, idprof_estimate* out) {
  return guarded([&] {
    require(cloud && out, "cloud and out must not be NULL");
    *out = estimate_to_c(idprof::estimate_id(cloud->cloud, fit_from(opts), policy_from(policy)));
  });
}

idprof_status idprof_estimate_file(const char* path, const idprof_fit_options* opts,
                                   const idprof_chunk_policy* policy, idprof_estimate* out) {
  return guarded([&] {
    require(path && out, "path and out must not be NULL");
    const std::filesystem::path p(path);
    if (p.extension() == ".csv") {
      const auto dump = idprof::read_dump(p);
      *out = estimate_to_c(idprof::estimate_id(dump.cloud, fit_from(opts), policy_from(policy)));
    } else {
      const idprof::DumpFile file(p);
      *out = estimate_to_c(idprof::estimate_id(file, fit_from(opts), policy_from(policy)));
    }
  });
}

idprof_status idprof_bootstrap_ci(const idprof_cloud* cloud, size_t replicates, uint64_t seed,
                                  const idprof_fit_options* opts, const idprof_chunk_policy* policy,
                                  idprof_interval* out) {
  return guarded([&] {
    require(cloud && out, "cloud and out must not be NULL");
    const auto ci = idprof::bootstrap_ci(cloud->cloud, replicates, seed, fit_from(opts), policy_from(policy));
    *out = idprof_interval{ci.lo, ci.hi};
  });
}

idprof_status idprof_decimation_curve(const idprof_cloud* cloud, const double* fractions, size_t count,
                                      uint64_t seed, const idprof_fit_options* opts,
                                      const idprof_chunk_policy* policy, size_t* n_sub,
                                      idprof_estimate* estimates) {
  return guarded([&] {
    require(cloud && (fractions || count == 0), "cloud and fractions must not be NULL");
    const auto curve = idprof::decimation_curve(cloud->cloud, std::span<const double>(fractions, count),
                                                seed, fit_from(opts), policy_from(policy));
    for (std::size_t k = 0; k < curve.size(); ++k) {
      if (n_sub) n_sub[k] = curve[k].n_sub;
      if (estimates) estimates[k] = estimate_to_c(curve[k].estimate);
    }
  });
}

idprof_status idprof_dump_write(const idprof_cloud* cloud, const char* layer, const char* path,
                                idprof_dtype dtype) {
  return guarded([&] {
    require(cloud && layer && path, "cloud, layer and path must not be NULL");
    require(dtype == IDPROF_F32 || dtype == IDPROF_F64, "unknown dtype");
    idprof::write_dump(idprof::ActivationDump{layer, cloud->cloud}, path,
                       dtype == IDPROF_F32 ? idprof::DType::F32 : idprof::DType::F64);
  });
}

idprof_status idprof_dump_read(const char* path, idprof_cloud** out) {
  return guarded([&] {
    require(path && out, "path and out must not be NULL");
    *out = nullptr;
    auto dump = idprof::read_dump(path);
    *out = new idprof_cloud{std::move(dump.cloud), std::move(dump.layer_name)};
  });
}

idprof_status idprof_profile_from_manifest(const char* manifest_path, const idprof_fit_options* opts,
                                           const idprof_chunk_policy* policy, size_t replicates,
                                           uint64_t seed, idprof_profile** out) {
  return guarded([&] {
    require(manifest_path && out, "manifest_path and out must not be NULL");
    *out = nullptr;
    const auto manifest = idprof::read_manifest(manifest_path);
    auto profile = idprof::profile_from_manifest(manifest, fit_from(opts), policy_from(policy),
                                                 idprof::BootstrapOptions{replicates, seed});
    *out = new idprof_profile{std::move(profile)};
  });
}

idprof_status idprof_profile_from_paths(const char* const* paths, size_t count,
                                        const idprof_fit_options* opts, const idprof_chunk_policy* policy,
                                        size_t replicates, uint64_t seed, idprof_profile** out) {
  return guarded([&] {
    require(out && (paths || count == 0), "paths and out must not be NULL");
    *out = nullptr;
    idprof::Manifest manifest;
    for (std::size_t k = 0; k < count; ++k) {
      require(paths[k] != nullptr, "dump path must not be NULL");
      manifest.dumps.push_back({paths[k], std::nullopt});
    }
    auto profile = idprof::profile_from_manifest(manifest, fit_from(opts), policy_from(policy),
                                                 idprof::BootstrapOptions{replicates, seed});
    *out = new idprof_profile{std::move(profile)};
  });
}

idprof_status idprof_profile_load(const char* json_path, idprof_profile** out) {
  return guarded([&] {
    require(json_path && out, "json_path and out must not be NULL");
    *out = nullptr;
    *out = new idprof_profile{idprof::load_profile_json(json_path)};
  });
}

void idprof_profile_free(idprof_profile* profile) { delete profile; }

size_t idprof_profile_layer_count(const idprof_profile* profile) {
  return profile ? profile->profile.layers.size() : 0;
}

idprof_status idprof_profile_set_config(idprof_profile* profile, const char* config_json) {
  return guarded([&] {
    require(profile && config_json, "profile and config_json must not be NULL");
    auto j = nlohmann::json::parse(config_json, nullptr, false);
    require(j.is_object(), "config must be a JSON object");
    profile->profile.config = std::move(j);
  });
}

idprof_status idprof_profile_set_metadata(idprof_profile* profile, const char* dataset,
                                          const char* augmentation, const char* model) {
  return guarded([&] {
    require(profile != nullptr, "profile must not be NULL");
    auto& meta = profile->profile.metadata;
    if (dataset) meta.dataset = dataset;
    if (augmentation) meta.augmentation = augmentation;
    if (model) meta.model = model;
  });
}

idprof_status idprof_profile_export(const idprof_profile* profile, const char* format, char** out) {
  return guarded([&] {
    require(profile && format && out, "profile, format and out must not be NULL");
    *out = nullptr;
    const auto fmt = idprof::parse_export_format(format);
    require(fmt.has_value(), "format must be csv or json");
    *out = copy_string(*fmt == idprof::ExportFormat::Csv
                           ? idprof::profile_to_csv(profile->profile)
                           : idprof::profile_to_json(profile->profile).dump(2) + "\n");
  });
}

idprof_status idprof_profile_shape(const idprof_profile* profile, double flat_threshold, char** out_json) {
  return guarded([&] {
    require(profile && out_json, "profile and out_json must not be NULL");
    *out_json = nullptr;
    *out_json = copy_string(idprof::to_json(idprof::shape_stats(profile->profile, flat_threshold)).dump());
  });
}

idprof_status idprof_profile_compare(const idprof_profile* a, const idprof_profile* b, char** out_json) {
  return guarded([&] {
    require(a && b && out_json, "profiles and out_json must not be NULL");
    *out_json = nullptr;
    *out_json = copy_string(idprof::to_json(idprof::compare_profiles(a->profile, b->profile)).dump());
  });
}

idprof_status idprof_augment_batch(const char* in_dir, const char* out_dir, const char* kind,
                                   uint64_t seed, const char* fill, unsigned threads, char** out_report) {
  return guarded([&] {
    require(in_dir && out_dir && kind, "in_dir, out_dir and kind must not be NULL");
    if (out_report) *out_report = nullptr;
    const auto k = idprof::parse_augment_kind(kind);
    if (!k) idprof::fail(idprof::ErrorCode::InvalidArgument, std::string("unknown augmentation kind '") + kind + "'");
    const auto f = idprof::parse_fill_policy(fill ? fill : "interp");
    if (!f) idprof::fail(idprof::ErrorCode::InvalidArgument, std::string("unknown fill policy '") + fill + "'");
    const auto report = idprof::augment_batch(in_dir, out_dir, idprof::AugmentSpec{*k, seed, *f}, threads);
    if (out_report) *out_report = copy_string(idprof::report_jsonl(report));
  });
}

}  // extern "C"
