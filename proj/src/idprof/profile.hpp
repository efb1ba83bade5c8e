#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "idprof/dump_io.hpp"
#include "idprof/error.hpp"
#include "idprof/estimator.hpp"

namespace idprof {

// Canonical layer order of the supported detection architectures.
std::span<const std::string_view> faster_rcnn_layers() noexcept;
std::span<const std::string_view> retinanet_layers() noexcept;

// Layers fed by the highest-score proposal; images without predictions are
// absent from these dumps.
bool is_post_proposal_layer(std::string_view name) noexcept;

struct LayerError {
  ErrorCode code = ErrorCode::InvalidArgument;
  std::string message;
  friend bool operator==(const LayerError&, const LayerError&) = default;
};

struct LayerEntry {
  std::string layer;
  std::size_t n_rows = 0;
  std::optional<IdEstimate> estimate;
  std::optional<Interval> interval;
  std::optional<LayerError> error;
  friend bool operator==(const LayerEntry&, const LayerEntry&) = default;
};

struct ProfileMetadata {
  std::string dataset;
  std::string augmentation;
  std::string model;
  std::size_t n_images = 0;
  friend bool operator==(const ProfileMetadata&, const ProfileMetadata&) = default;
};

struct LayerProfile {
  std::vector<LayerEntry> layers;
  ProfileMetadata metadata;
  nlohmann::json config = nlohmann::json::object();  // resolved run configuration
  friend bool operator==(const LayerProfile&, const LayerProfile&) = default;
};

struct BootstrapOptions {
  std::size_t replicates = 0;  // 0 disables intervals
  std::uint64_t seed = 0;
};

// One layer's rows. `cloud` is required only when bootstrap intervals are
// requested; otherwise estimation streams from `rows`.
struct LayerInput {
  std::string layer;
  const RowSource* rows = nullptr;
  const PointCloud* cloud = nullptr;
};

// Throws InconsistentRows, LayerOrder, or InvalidArgument on duplicate names.
// Estimation failures are recorded per layer and do not abort the profile.
LayerProfile layer_profile(std::span<const LayerInput> inputs, const FitOptions& opts,
                           const ChunkPolicy& policy, const BootstrapOptions& bootstrap = {});

LayerProfile layer_profile(std::span<const ActivationDump> dumps, const FitOptions& opts,
                           const ChunkPolicy& policy, const BootstrapOptions& bootstrap = {});

struct Manifest {
  struct Entry {
    std::filesystem::path path;
    std::optional<std::string> layer;  // overrides the dump's layer name
  };
  std::vector<Entry> dumps;
  ProfileMetadata metadata;
};

// JSON manifest: either an array of dump paths or
// {"dataset", "augmentation", "model", "dumps": [path | {"path", "layer"}]}.
// Relative paths resolve against the manifest's directory.
Manifest read_manifest(const std::filesystem::path& path);

// Streams each dump from disk (loading fully only when bootstrapping).
LayerProfile profile_from_manifest(const Manifest& manifest, const FitOptions& opts,
                                   const ChunkPolicy& policy, const BootstrapOptions& bootstrap = {});

struct ShapeStats {
  std::string peak_layer;
  double flatness = 0;
  bool hunchback = false;
  double median = 0;
};

inline constexpr double kDefaultFlatThreshold = 0.1;

// Over layers with successful estimates (at least 3, else TooFewLayers):
// flatness = (max - min) / median; hunchback iff the peak is interior and both
// the rise from the first layer and the fall to the last are at least
// flat_threshold * median.
ShapeStats shape_stats(const LayerProfile& profile, double flat_threshold = kDefaultFlatThreshold);

struct LayerComparison {
  std::string layer;
  std::optional<double> difference;  // b - a
  std::optional<double> ratio;       // b / a
  std::optional<bool> intervals_overlap;
};

struct ComparisonReport {
  std::vector<LayerComparison> layers;
  std::optional<std::string> max_difference_layer;
  double max_abs_difference = 0;
};

// Throws LayerMismatch unless both profiles list the same layers in order.
ComparisonReport compare_profiles(const LayerProfile& a, const LayerProfile& b);

enum class ExportFormat { Csv, Json };

std::optional<ExportFormat> parse_export_format(std::string_view name) noexcept;

// CSV columns: layer,d_hat,stderr,ci_lo,ci_hi,n_used; missing values are blank.
// The resolved config is echoed on a leading "# config: " comment line.
std::string profile_to_csv(const LayerProfile& profile);
nlohmann::json profile_to_json(const LayerProfile& profile);
LayerProfile profile_from_json(const nlohmann::json& j);

void export_profile(const LayerProfile& profile, ExportFormat format,
                    const std::filesystem::path& path);
LayerProfile load_profile_json(const std::filesystem::path& path);

nlohmann::json to_json(const IdEstimate& est);
nlohmann::json to_json(const ShapeStats& stats);
nlohmann::json to_json(const ComparisonReport& report);

}  // namespace idprof
