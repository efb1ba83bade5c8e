/*
 * idprof: intrinsic-dimension profiling of point clouds and per-layer
 * activation dumps with the two-nearest-neighbour (TwoNN) estimator.
 *
 * Plain C interface. Objects are opaque handles released with the matching
 * *_free function. Every fallible call returns an idprof_status; on failure
 * idprof_last_error() describes the most recent error of the calling thread.
 * Strings returned through char** are allocated by the library and released
 * with idprof_string_free.
 */
#ifndef IDPROF_IDPROF_H
#define IDPROF_IDPROF_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(IDPROF_BUILDING)
#    define IDPROF_API __declspec(dllexport)
#  else
#    define IDPROF_API __declspec(dllimport)
#  endif
#else
#  define IDPROF_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum idprof_status {
  IDPROF_OK = 0,
  IDPROF_E_INVALID_ARGUMENT,
  IDPROF_E_CLOUD_TOO_SMALL,
  IDPROF_E_NON_FINITE_INPUT,
  IDPROF_E_BUDGET_TOO_SMALL,
  IDPROF_E_ALL_POINTS_IDENTICAL,
  IDPROF_E_ZERO_FIRST_NEIGHBOR,
  IDPROF_E_TOO_FEW_VALID,
  IDPROF_E_DEGENERATE_FIT,
  IDPROF_E_INVALID_SPEC,
  IDPROF_E_DELTA_OUT_OF_RANGE,
  IDPROF_E_ANGLE_OUT_OF_RANGE,
  IDPROF_E_FRACTION_OUT_OF_RANGE,
  IDPROF_E_UNREADABLE_IMAGE,
  IDPROF_E_EMPTY_INPUT,
  IDPROF_E_BAD_MAGIC,
  IDPROF_E_TRUNCATED_FILE,
  IDPROF_E_NON_FINITE_VALUE,
  IDPROF_E_IO_FAILURE,
  IDPROF_E_INCONSISTENT_ROWS,
  IDPROF_E_LAYER_MISMATCH,
  IDPROF_E_LAYER_ORDER,
  IDPROF_E_TOO_FEW_LAYERS,
  IDPROF_E_INTERNAL = 99
} idprof_status;

typedef struct idprof_cloud idprof_cloud;
typedef struct idprof_profile idprof_profile;

typedef struct idprof_fit_options {
  double discard_fraction; /* largest-mu fraction left out of the fit, default 0.1 */
  size_t min_points;       /* default 20 */
} idprof_fit_options;

typedef struct idprof_chunk_policy {
  uint64_t max_resident_bytes; /* default 2 GiB */
  size_t chunk_rows;           /* 0 = derive from budget */
  size_t chunk_cols;           /* 0 = derive from budget */
  unsigned threads;            /* 0 = hardware concurrency */
} idprof_chunk_policy;

typedef struct idprof_estimate {
  double d_hat;
  double std_error;
  double r_squared;
  double d_mle;
  size_t n_used;
  size_t n_points;
  size_t n_duplicates;
  size_t n_ties;
} idprof_estimate;

typedef struct idprof_interval {
  double lo;
  double hi;
} idprof_interval;

typedef enum idprof_dtype { IDPROF_F32 = 0, IDPROF_F64 = 1 } idprof_dtype;

/* --- errors and memory ------------------------------------------------- */

IDPROF_API const char* idprof_last_error(void);
IDPROF_API const char* idprof_status_name(idprof_status status);
/* 1 for failures of the filesystem or of file contents, 0 otherwise. */
IDPROF_API int idprof_status_is_io(idprof_status status);
IDPROF_API void idprof_string_free(char* s);
IDPROF_API const char* idprof_version(void);

IDPROF_API void idprof_fit_options_default(idprof_fit_options* opts);
IDPROF_API void idprof_chunk_policy_default(idprof_chunk_policy* policy);

/* --- point clouds ------------------------------------------------------ */

/* Copies n*dim row-major values. */
IDPROF_API idprof_status idprof_cloud_create(size_t n, size_t dim, const double* data,
                                             idprof_cloud** out);
IDPROF_API void idprof_cloud_free(idprof_cloud* cloud);
IDPROF_API size_t idprof_cloud_size(const idprof_cloud* cloud);
IDPROF_API size_t idprof_cloud_dim(const idprof_cloud* cloud);
/* Borrowed pointer to the n*dim row-major values; valid until the cloud is freed. */
IDPROF_API const double* idprof_cloud_data(const idprof_cloud* cloud);
/* Layer name attached by idprof_dump_read; empty otherwise. */
IDPROF_API const char* idprof_cloud_layer(const idprof_cloud* cloud);

/* kind: hypercube | sphere_surface | swiss_roll | gaussian | nonuniform_beta */
IDPROF_API idprof_status idprof_manifold_sample(const char* kind, size_t intrinsic_dim,
                                                size_t ambient_dim, size_t n, uint64_t seed,
                                                idprof_cloud** out);
/* seed 0 pads with zeros only. */
IDPROF_API idprof_status idprof_cloud_embed(const idprof_cloud* cloud, size_t target_dim,
                                            uint64_t seed, idprof_cloud** out);

/* --- neighbours -------------------------------------------------------- */

/* Arrays of cloud size; idx arrays receive neighbour row indices. */
IDPROF_API idprof_status idprof_two_nearest(const idprof_cloud* cloud,
                                            const idprof_chunk_policy* policy, double* r1,
                                            double* r2, size_t* idx1, size_t* idx2);
IDPROF_API idprof_status idprof_two_nearest_indexed(const idprof_cloud* cloud, uint64_t seed,
                                                    double* r1, double* r2, size_t* idx1,
                                                    size_t* idx2);

/* --- estimation -------------------------------------------------------- */

/* NULL options select the defaults. */
IDPROF_API idprof_status idprof_estimate_cloud(const idprof_cloud* cloud,
                                               const idprof_fit_options* opts,
                                               const idprof_chunk_policy* policy,
                                               idprof_estimate* out);
/* Streams an IDCD file (or loads a .csv dump) without holding the matrix. */
IDPROF_API idprof_status idprof_estimate_file(const char* path, const idprof_fit_options* opts,
                                              const idprof_chunk_policy* policy,
                                              idprof_estimate* out);
IDPROF_API idprof_status idprof_bootstrap_ci(const idprof_cloud* cloud, size_t replicates,
                                             uint64_t seed, const idprof_fit_options* opts,
                                             const idprof_chunk_policy* policy,
                                             idprof_interval* out);
/* n_sub and estimates hold `count` entries each. */
IDPROF_API idprof_status idprof_decimation_curve(const idprof_cloud* cloud,
                                                 const double* fractions, size_t count,
                                                 uint64_t seed, const idprof_fit_options* opts,
                                                 const idprof_chunk_policy* policy,
                                                 size_t* n_sub, idprof_estimate* estimates);

/* --- dumps ------------------------------------------------------------- */

IDPROF_API idprof_status idprof_dump_write(const idprof_cloud* cloud, const char* layer,
                                           const char* path, idprof_dtype dtype);
IDPROF_API idprof_status idprof_dump_read(const char* path, idprof_cloud** out);

/* --- profiles ---------------------------------------------------------- */

/* replicates == 0 skips bootstrap intervals. */
IDPROF_API idprof_status idprof_profile_from_manifest(const char* manifest_path,
                                                      const idprof_fit_options* opts,
                                                      const idprof_chunk_policy* policy,
                                                      size_t replicates, uint64_t seed,
                                                      idprof_profile** out);
/* Layer order follows `paths`; layer names come from the dump headers. */
IDPROF_API idprof_status idprof_profile_from_paths(const char* const* paths, size_t count,
                                                   const idprof_fit_options* opts,
                                                   const idprof_chunk_policy* policy,
                                                   size_t replicates, uint64_t seed,
                                                   idprof_profile** out);
IDPROF_API idprof_status idprof_profile_load(const char* json_path, idprof_profile** out);
IDPROF_API void idprof_profile_free(idprof_profile* profile);
IDPROF_API size_t idprof_profile_layer_count(const idprof_profile* profile);
/* Replaces the run configuration echoed into exports; must be a JSON object. */
IDPROF_API idprof_status idprof_profile_set_config(idprof_profile* profile, const char* config_json);
/* NULL leaves a tag unchanged. */
IDPROF_API idprof_status idprof_profile_set_metadata(idprof_profile* profile, const char* dataset,
                                                     const char* augmentation, const char* model);
/* format: "csv" | "json" */
IDPROF_API idprof_status idprof_profile_export(const idprof_profile* profile, const char* format,
                                              char** out);
IDPROF_API idprof_status idprof_profile_shape(const idprof_profile* profile, double flat_threshold,
                                             char** out_json);
IDPROF_API idprof_status idprof_profile_compare(const idprof_profile* a, const idprof_profile* b,
                                               char** out_json);

/* --- augmentation ------------------------------------------------------ */

/* kind: horizontal_flip | vertical_flip | channel_shift | rotation |
 *       horizontal_shift | vertical_shift; fill: interp | black.
 * out_report receives the JSON-lines batch report. */
IDPROF_API idprof_status idprof_augment_batch(const char* in_dir, const char* out_dir,
                                             const char* kind, uint64_t seed, const char* fill,
                                             unsigned threads, char** out_report);

#ifdef __cplusplus
}
#endif

#endif /* IDPROF_IDPROF_H */
