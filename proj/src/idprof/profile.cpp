#include "idprof/profile.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <set>

namespace idprof {

namespace {

constexpr std::array<std::string_view, 11> kFasterRcnn = {
    "pool1", "pool2", "pool3", "pool4", "pool5", "rpn_c", "rpn_b", "roi", "fc", "cls_p", "box_p"};
constexpr std::array<std::string_view, 9> kRetinaNet = {
    "pool1", "pool2", "pool3", "pool4", "pool5", "cls_h", "cls_l", "box_h", "box_r"};
constexpr std::array<std::string_view, 4> kPostProposal = {"roi", "fc", "cls_p", "box_p"};

// When every name belongs to one known architecture, names must follow its order.
void check_layer_order(std::span<const LayerInput> inputs) {
  for (auto arch : {std::span<const std::string_view>(kFasterRcnn),
                    std::span<const std::string_view>(kRetinaNet)}) {
    std::vector<std::size_t> positions;
    for (const auto& in : inputs) {
      auto it = std::find(arch.begin(), arch.end(), in.layer);
      if (it == arch.end()) break;
      positions.push_back(static_cast<std::size_t>(it - arch.begin()));
    }
    if (positions.size() != inputs.size()) continue;
    for (std::size_t k = 1; k < positions.size(); ++k) {
      if (positions[k] < positions[k - 1]) {
        fail(ErrorCode::LayerOrder, "layer '" + inputs[k].layer + "' is listed after '" +
                                        inputs[k - 1].layer + "', contrary to the architecture order");
      }
    }
    return;
  }
}

void check_rows(std::span<const LayerInput> inputs) {
  std::optional<std::size_t> backbone, post;
  for (const auto& in : inputs) {
    const std::size_t n = in.rows->rows();
    auto& group = is_post_proposal_layer(in.layer) ? post : backbone;
    if (group && *group != n) {
      fail(ErrorCode::InconsistentRows, "layer '" + in.layer + "' has " + std::to_string(n) +
                                            " rows, other layers in its group have " +
                                            std::to_string(*group));
    }
    group = n;
  }
  if (backbone && post && *post > *backbone) {
    fail(ErrorCode::InconsistentRows, "post-proposal layers have more rows (" + std::to_string(*post) +
                                          ") than backbone layers (" + std::to_string(*backbone) + ")");
  }
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::optional<ErrorCode> parse_error_code(std::string_view name) {
  for (int c = 0; c <= static_cast<int>(ErrorCode::TooFewLayers); ++c) {
    if (to_string(static_cast<ErrorCode>(c)) == name) return static_cast<ErrorCode>(c);
  }
  return std::nullopt;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::span<const std::string_view> faster_rcnn_layers() noexcept { return kFasterRcnn; }
std::span<const std::string_view> retinanet_layers() noexcept { return kRetinaNet; }

bool is_post_proposal_layer(std::string_view name) noexcept {
  return std::find(kPostProposal.begin(), kPostProposal.end(), name) != kPostProposal.end();
}

LayerProfile layer_profile(std::span<const LayerInput> inputs, const FitOptions& opts,
                           const ChunkPolicy& policy, const BootstrapOptions& bootstrap) {
  validate(opts);
  std::set<std::string> seen;
  for (const auto& in : inputs) {
    if (!in.rows) fail(ErrorCode::InvalidArgument, "layer '" + in.layer + "' has no rows");
    if (!seen.insert(in.layer).second) {
      fail(ErrorCode::InvalidArgument, "duplicate layer name '" + in.layer + "'");
    }
  }
  check_layer_order(inputs);
  check_rows(inputs);

  LayerProfile profile;
  for (const auto& in : inputs) {
    LayerEntry entry;
    entry.layer = in.layer;
    entry.n_rows = in.rows->rows();
    profile.metadata.n_images = std::max(profile.metadata.n_images, entry.n_rows);
    try {
      entry.estimate = estimate_id(*in.rows, opts, policy);
      if (bootstrap.replicates > 0) {
        if (!in.cloud) fail(ErrorCode::InvalidArgument, "bootstrap needs an in-memory cloud");
        entry.interval = bootstrap_ci(*in.cloud, bootstrap.replicates, bootstrap.seed, opts, policy);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::IoFailure) throw;
      entry.error = LayerError{e.code(), e.what()};
    }
    profile.layers.push_back(std::move(entry));
  }
  return profile;
}

LayerProfile layer_profile(std::span<const ActivationDump> dumps, const FitOptions& opts,
                           const ChunkPolicy& policy, const BootstrapOptions& bootstrap) {
  std::vector<CloudRows> sources;
  sources.reserve(dumps.size());
  std::vector<LayerInput> inputs;
  for (const auto& d : dumps) {
    sources.emplace_back(d.cloud);
    inputs.push_back({d.layer_name, &sources.back(), &d.cloud});
  }
  return layer_profile(inputs, opts, policy, bootstrap);
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open manifest '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, "manifest '" + path.string() + "' is not valid JSON: " + e.what());
  }
  const auto base = path.parent_path();
  Manifest m;
  const nlohmann::json* list = &j;
  if (j.is_object()) {
    m.metadata.dataset = j.value("dataset", "");
    m.metadata.augmentation = j.value("augmentation", "");
    m.metadata.model = j.value("model", "");
    if (!j.contains("dumps")) fail(ErrorCode::InvalidArgument, "manifest has no 'dumps' list");
    list = &j["dumps"];
  }
  if (!list->is_array()) fail(ErrorCode::InvalidArgument, "manifest 'dumps' must be an array");
  for (const auto& item : *list) {
    Manifest::Entry entry;
    if (item.is_string()) {
      entry.path = item.get<std::string>();
    } else if (item.is_object() && item.contains("path")) {
      entry.path = item["path"].get<std::string>();
      if (item.contains("layer")) entry.layer = item["layer"].get<std::string>();
    } else {
      fail(ErrorCode::InvalidArgument, "manifest entries must be paths or {\"path\", \"layer\"}");
    }
    if (entry.path.is_relative()) entry.path = base / entry.path;
    m.dumps.push_back(std::move(entry));
  }
  return m;
}

LayerProfile profile_from_manifest(const Manifest& manifest, const FitOptions& opts,
                                   const ChunkPolicy& policy, const BootstrapOptions& bootstrap) {
  std::vector<std::unique_ptr<RowSource>> sources;
  std::vector<std::unique_ptr<PointCloud>> clouds;
  std::vector<LayerInput> inputs;
  for (const auto& entry : manifest.dumps) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(entry.path, ec)) {
      fail(ErrorCode::IoFailure, "dump file '" + entry.path.string() + "' does not exist");
    }
    LayerInput in;
    if (entry.path.extension() == ".csv" || bootstrap.replicates > 0) {
      ActivationDump dump = read_dump(entry.path);
      in.layer = entry.layer.value_or(dump.layer_name);
      clouds.push_back(std::make_unique<PointCloud>(std::move(dump.cloud)));
      in.cloud = clouds.back().get();
      sources.push_back(std::make_unique<CloudRows>(*clouds.back()));
    } else {
      auto file = std::make_unique<DumpFile>(entry.path);
      in.layer = entry.layer.value_or(file->header().layer_name);
      sources.push_back(std::move(file));
    }
    in.rows = sources.back().get();
    inputs.push_back(std::move(in));
  }
  LayerProfile profile = layer_profile(inputs, opts, policy, bootstrap);
  const std::size_t n = profile.metadata.n_images;
  profile.metadata = manifest.metadata;
  profile.metadata.n_images = n;
  return profile;
}

ShapeStats shape_stats(const LayerProfile& profile, double flat_threshold) {
  if (!(flat_threshold >= 0) || !std::isfinite(flat_threshold)) {
    fail(ErrorCode::InvalidArgument, "flat_threshold must be finite and >= 0");
  }
  std::vector<double> values;
  std::vector<const std::string*> names;
  for (const auto& entry : profile.layers) {
    if (entry.estimate) {
      values.push_back(entry.estimate->d_hat);
      names.push_back(&entry.layer);
    }
  }
  if (values.size() < 3) {
    fail(ErrorCode::TooFewLayers, std::to_string(values.size()) +
                                      " layers with estimates, shape statistics need at least 3");
  }
  const auto peak = static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
  const double lo = *std::min_element(values.begin(), values.end());
  ShapeStats stats;
  stats.median = median_of(values);
  stats.peak_layer = *names[peak];
  stats.flatness = (values[peak] - lo) / stats.median;
  const double margin = flat_threshold * stats.median;
  const bool interior = peak > 0 && peak + 1 < values.size();
  stats.hunchback = interior && values[peak] - values.front() >= margin &&
                    values[peak] - values.back() >= margin && stats.flatness >= flat_threshold;
  return stats;
}

ComparisonReport compare_profiles(const LayerProfile& a, const LayerProfile& b) {
  if (a.layers.size() != b.layers.size()) {
    fail(ErrorCode::LayerMismatch, "profiles have " + std::to_string(a.layers.size()) + " and " +
                                       std::to_string(b.layers.size()) + " layers");
  }
  ComparisonReport report;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    const auto& la = a.layers[k];
    const auto& lb = b.layers[k];
    if (la.layer != lb.layer) {
      fail(ErrorCode::LayerMismatch, "layer " + std::to_string(k) + " is '" + la.layer + "' vs '" +
                                         lb.layer + "'");
    }
    LayerComparison cmp;
    cmp.layer = la.layer;
    if (la.estimate && lb.estimate) {
      cmp.difference = lb.estimate->d_hat - la.estimate->d_hat;
      cmp.ratio = lb.estimate->d_hat / la.estimate->d_hat;
      if (!report.max_difference_layer || std::abs(*cmp.difference) > report.max_abs_difference) {
        report.max_abs_difference = std::abs(*cmp.difference);
        report.max_difference_layer = la.layer;
      }
    }
    if (la.interval && lb.interval) {
      cmp.intervals_overlap = la.interval->lo <= lb.interval->hi && lb.interval->lo <= la.interval->hi;
    }
    report.layers.push_back(std::move(cmp));
  }
  return report;
}

std::optional<ExportFormat> parse_export_format(std::string_view name) noexcept {
  if (name == "csv") return ExportFormat::Csv;
  if (name == "json") return ExportFormat::Json;
  return std::nullopt;
}

std::string profile_to_csv(const LayerProfile& profile) {
  std::string out = "# config: " + profile.config.dump() + "\n";
  out += "layer,d_hat,stderr,ci_lo,ci_hi,n_used\n";
  for (const auto& entry : profile.layers) {
    out += entry.layer;
    out += ',';
    if (entry.estimate) out += format_number(entry.estimate->d_hat);
    out += ',';
    if (entry.estimate && std::isfinite(entry.estimate->std_error)) out += format_number(entry.estimate->std_error);
    out += ',';
    if (entry.interval) out += format_number(entry.interval->lo);
    out += ',';
    if (entry.interval) out += format_number(entry.interval->hi);
    out += ',';
    if (entry.estimate) out += std::to_string(entry.estimate->n_used);
    out += '\n';
  }
  return out;
}

nlohmann::json to_json(const IdEstimate& est) {
  return {{"d_hat", number_or_null(est.d_hat)},
          {"stderr", number_or_null(est.std_error)},
          {"r_squared", number_or_null(est.r_squared)},
          {"d_mle", number_or_null(est.d_mle)},
          {"n_used", est.n_used},
          {"n_points", est.n_points},
          {"n_duplicates", est.n_duplicates},
          {"n_ties", est.n_ties}};
}

nlohmann::json to_json(const ShapeStats& stats) {
  return {{"peak_layer", stats.peak_layer},
          {"flatness", stats.flatness},
          {"hunchback", stats.hunchback},
          {"median", stats.median}};
}

nlohmann::json to_json(const ComparisonReport& report) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : report.layers) {
    layers.push_back({{"layer", l.layer},
                      {"difference", l.difference ? nlohmann::json(*l.difference) : nlohmann::json()},
                      {"ratio", l.ratio ? nlohmann::json(*l.ratio) : nlohmann::json()},
                      {"intervals_overlap",
                       l.intervals_overlap ? nlohmann::json(*l.intervals_overlap) : nlohmann::json()}});
  }
  return {{"layers", layers},
          {"max_difference_layer",
           report.max_difference_layer ? nlohmann::json(*report.max_difference_layer) : nlohmann::json()},
          {"max_abs_difference", report.max_abs_difference}};
}

nlohmann::json profile_to_json(const LayerProfile& profile) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& entry : profile.layers) {
    nlohmann::json l = {{"layer", entry.layer}, {"n_rows", entry.n_rows}};
    if (entry.estimate) {
      l.update(to_json(*entry.estimate));
    } else {
      for (const char* key : {"d_hat", "stderr", "r_squared", "d_mle", "n_used"}) l[key] = nullptr;
    }
    l["ci_lo"] = entry.interval ? nlohmann::json(entry.interval->lo) : nlohmann::json();
    l["ci_hi"] = entry.interval ? nlohmann::json(entry.interval->hi) : nlohmann::json();
    l["error"] = entry.error ? nlohmann::json{{"code", std::string(to_string(entry.error->code))},
                                              {"message", entry.error->message}}
                             : nlohmann::json();
    layers.push_back(std::move(l));
  }
  return {{"metadata",
           {{"dataset", profile.metadata.dataset},
            {"augmentation", profile.metadata.augmentation},
            {"model", profile.metadata.model},
            {"n_images", profile.metadata.n_images}}},
          {"config", profile.config},
          {"layers", layers}};
}

LayerProfile profile_from_json(const nlohmann::json& j) {
  try {
    LayerProfile profile;
    const auto& meta = j.at("metadata");
    profile.metadata.dataset = meta.value("dataset", "");
    profile.metadata.augmentation = meta.value("augmentation", "");
    profile.metadata.model = meta.value("model", "");
    profile.metadata.n_images = meta.value("n_images", std::size_t{0});
    profile.config = j.value("config", nlohmann::json::object());
    for (const auto& l : j.at("layers")) {
      LayerEntry entry;
      entry.layer = l.at("layer").get<std::string>();
      entry.n_rows = l.value("n_rows", std::size_t{0});
      if (!l.at("d_hat").is_null()) {
        IdEstimate est;
        est.d_hat = l.at("d_hat").get<double>();
        est.std_error = number_or_nan(l.at("stderr"));
        est.r_squared = number_or_nan(l.at("r_squared"));
        est.d_mle = number_or_nan(l.at("d_mle"));
        est.n_used = l.at("n_used").get<std::size_t>();
        est.n_points = l.value("n_points", std::size_t{0});
        est.n_duplicates = l.value("n_duplicates", std::size_t{0});
        est.n_ties = l.value("n_ties", std::size_t{0});
        entry.estimate = est;
      }
      if (l.contains("ci_lo") && !l["ci_lo"].is_null()) {
        entry.interval = Interval{l["ci_lo"].get<double>(), l.at("ci_hi").get<double>()};
      }
      if (l.contains("error") && !l["error"].is_null()) {
        const auto code = parse_error_code(l["error"].at("code").get<std::string>());
        entry.error = LayerError{code.value_or(ErrorCode::InvalidArgument),
                                 l["error"].value("message", "")};
      }
      profile.layers.push_back(std::move(entry));
    }
    return profile;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, std::string("malformed profile JSON: ") + e.what());
  }
}

void export_profile(const LayerProfile& profile, ExportFormat format, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::IoFailure, "cannot create '" + path.string() + "'");
  if (format == ExportFormat::Csv) {
    out << profile_to_csv(profile);
  } else {
    out << profile_to_json(profile).dump(2) << '\n';
  }
  if (!out) fail(ErrorCode::IoFailure, "write failed on '" + path.string() + "'");
}

LayerProfile load_profile_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::IoFailure, "cannot open '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidArgument, "'" + path.string() + "' is not valid JSON: " + e.what());
  }
  return profile_from_json(j);
}

}  // namespace idprof
