// idprof command-line front end. Talks to the library through the C API only.
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "idprof/idprof.h"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kExitIo = 1;
constexpr int kExitValidation = 2;

struct CliError {
  std::string name;
  std::string message;
  int exit_code;
};

[[noreturn]] void validation(const std::string& message) {
  throw CliError{"InvalidArgument", message, kExitValidation};
}

[[noreturn]] void io_failure(const std::string& message) {
  throw CliError{"IoFailure", message, kExitIo};
}

void check(idprof_status status) {
  if (status == IDPROF_OK) return;
  throw CliError{idprof_status_name(status), idprof_last_error(),
                 idprof_status_is_io(status) ? kExitIo : kExitValidation};
}

struct CloudDeleter {
  void operator()(idprof_cloud* c) const { idprof_cloud_free(c); }
};
struct ProfileDeleter {
  void operator()(idprof_profile* p) const { idprof_profile_free(p); }
};
using CloudPtr = std::unique_ptr<idprof_cloud, CloudDeleter>;
using ProfilePtr = std::unique_ptr<idprof_profile, ProfileDeleter>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  idprof_string_free(s);
  return out;
}

// "2G", "512M", "65536", "1.5GiB"; binary multiples.
std::uint64_t parse_bytes(const std::string& text) {
  std::size_t pos = 0;
  double value = 0;
  try {
    value = std::stod(text, &pos);
  } catch (const std::exception&) {
    validation("--max-mem: cannot parse '" + text + "'");
  }
  std::string unit = text.substr(pos);
  for (auto& ch : unit) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  double scale = 1;
  if (unit.empty() || unit == "B") scale = 1;
  else if (unit == "K" || unit == "KB" || unit == "KIB") scale = 1024.0;
  else if (unit == "M" || unit == "MB" || unit == "MIB") scale = 1024.0 * 1024;
  else if (unit == "G" || unit == "GB" || unit == "GIB") scale = 1024.0 * 1024 * 1024;
  else validation("--max-mem: unknown unit '" + unit + "'");
  if (!(value > 0)) validation("--max-mem: must be positive");
  return static_cast<std::uint64_t>(value * scale);
}

// Parameters that take part in the run config. Each knows its CLI option so
// values given on the command line win over values loaded with --config.
struct Param {
  std::string key;
  CLI::Option* option;
  std::function<void(const json&)> load;
  std::function<ordered_json()> save;
};

struct Command {
  Command(std::string n, CLI::App* a) : name(std::move(n)), app(a) {}

  std::string name;
  CLI::App* app = nullptr;
  std::vector<Param> params;
  std::string config_path;

  template <class T>
  CLI::Option* add(const std::string& flags, const std::string& key, T& var, const std::string& desc) {
    auto* opt = app->add_option(flags, var, desc);
    params.push_back({key, opt, [&var](const json& j) { var = j.get<T>(); },
                      [&var] { return ordered_json(var); }});
    return opt;
  }

  void add_config_option() {
    app->add_option("--config", config_path, "Re-run from a config file or from an output that embeds one");
  }

  // Applies a loaded config to every parameter not given on the command line.
  void merge_config() {
    if (config_path.empty()) return;
    const json cfg = load_config(config_path);
    if (cfg.value("command", name) != name)
      validation("--config: file holds a '" + cfg.value("command", std::string()) + "' config, not '" + name + "'");
    for (auto& p : params) {
      if (p.option->count() > 0 || !cfg.contains(p.key)) continue;
      try {
        p.load(cfg.at(p.key));
      } catch (const json::exception& e) {
        validation("--config: bad value for '" + p.key + "': " + e.what());
      }
    }
  }

  ordered_json resolved() const {
    ordered_json cfg;
    cfg["command"] = name;
    cfg["version"] = idprof_version();
    for (const auto& p : params) cfg[p.key] = p.save();
    return cfg;
  }

  static json load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) io_failure("cannot open config file '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    const std::string csv_tag = "# config: ";
    if (text.rfind(csv_tag, 0) == 0) text = text.substr(csv_tag.size(), text.find('\n') - csv_tag.size());
    else if (text.find('\n') != std::string::npos && text.front() == '{' && text.find("\"config\"") != std::string::npos) {
      // JSON-lines reports carry the config on their first line.
      const auto first = json::parse(text.substr(0, text.find('\n')), nullptr, false);
      if (!first.is_discarded() && first.contains("config")) return first.at("config");
    }
    const auto j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) validation("--config: '" + path + "' is not a JSON object");
    if (j.contains("config") && j.at("config").is_object()) return j.at("config");
    return j;
  }
};

struct FitArgs {
  double discard_fraction = 0.1;
  std::size_t min_points = 20;
  std::string max_mem = "2G";
  std::size_t chunk_rows = 0;
  std::size_t chunk_cols = 0;
  unsigned threads = 0;

  void attach(Command& cmd) {
    cmd.add("--discard-fraction", "discard_fraction", discard_fraction,
            "Fraction of the largest ratios left out of the fit")
        ->capture_default_str();
    cmd.add("--min-points", "min_points", min_points, "Minimum usable points")->capture_default_str();
    cmd.add("--max-mem", "max_mem", max_mem, "Resident memory budget for the neighbour search (e.g. 2G)")
        ->capture_default_str();
    cmd.add("--chunk-rows", "chunk_rows", chunk_rows, "Row block size (0 = from budget)");
    cmd.add("--chunk-cols", "chunk_cols", chunk_cols, "Column strip width (0 = from budget)");
    cmd.add("--threads", "threads", threads, "Worker threads (0 = all cores)");
  }

  idprof_fit_options fit() const {
    idprof_fit_options o;
    idprof_fit_options_default(&o);
    o.discard_fraction = discard_fraction;
    o.min_points = min_points;
    return o;
  }

  idprof_chunk_policy policy() const {
    idprof_chunk_policy p;
    idprof_chunk_policy_default(&p);
    p.max_resident_bytes = parse_bytes(max_mem);
    p.chunk_rows = chunk_rows;
    p.chunk_cols = chunk_cols;
    p.threads = threads;
    return p;
  }
};

void check_format(const std::string& format) {
  if (format != "csv" && format != "json") validation("--format: must be csv or json, got '" + format + "'");
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) io_failure("cannot open output file '" + out_path + "'");
  out << text;
  if (!out) io_failure("write failed for '" + out_path + "'");
}

json estimate_json(const idprof_estimate& e) {
  return json{{"d_hat", e.d_hat},       {"stderr", e.std_error},   {"r_squared", e.r_squared},
              {"d_mle", e.d_mle},       {"n_used", e.n_used},      {"n_points", e.n_points},
              {"n_duplicates", e.n_duplicates}, {"n_ties", e.n_ties}};
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
  std::string kind;
  std::size_t d = 2;
  std::size_t D = 2;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::size_t embed_dim = 0;
  std::uint64_t embed_seed = 0;
  std::string layer;
  std::string dtype = "f64";
  std::string out;
};

int run_generate(Command& cmd, GenerateArgs& a) {
  cmd.merge_config();
  if (a.kind.empty()) validation("--kind: required");
  if (a.out.empty()) validation("--out: required");
  if (a.dtype != "f32" && a.dtype != "f64") validation("--dtype: must be f32 or f64, got '" + a.dtype + "'");
  if (a.layer.empty()) a.layer = a.kind;
  const auto cfg = cmd.resolved();

  idprof_cloud* raw = nullptr;
  check(idprof_manifold_sample(a.kind.c_str(), a.d, a.D, a.n, a.seed, &raw));
  CloudPtr cloud(raw);
  if (a.embed_dim > 0) {
    idprof_cloud* embedded = nullptr;
    check(idprof_cloud_embed(cloud.get(), a.embed_dim, a.embed_seed, &embedded));
    cloud.reset(embedded);
  }
  check(idprof_dump_write(cloud.get(), a.layer.c_str(), a.out.c_str(), a.dtype == "f32" ? IDPROF_F32 : IDPROF_F64));
  emit(cfg.dump(2) + "\n", a.out + ".config.json");

  ordered_json summary;
  summary["output"] = a.out;
  summary["layer"] = a.layer;
  summary["n"] = idprof_cloud_size(cloud.get());
  summary["dim"] = idprof_cloud_dim(cloud.get());
  summary["config"] = cfg;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// --- estimate ---------------------------------------------------------------

struct EstimateArgs {
  std::string input;
  FitArgs fit;
  std::size_t bootstrap = 0;
  std::uint64_t seed = 0;
  std::string format = "json";
  std::string out;
};

int run_estimate(Command& cmd, EstimateArgs& a) {
  cmd.merge_config();
  if (a.input.empty()) validation("input: required");
  check_format(a.format);
  const auto cfg = cmd.resolved();
  const auto fit = a.fit.fit();
  const auto policy = a.fit.policy();

  idprof_estimate est{};
  std::optional<idprof_interval> ci;
  if (a.bootstrap > 0) {
    idprof_cloud* raw = nullptr;
    check(idprof_dump_read(a.input.c_str(), &raw));
    CloudPtr cloud(raw);
    check(idprof_estimate_cloud(cloud.get(), &fit, &policy, &est));
    idprof_interval iv{};
    check(idprof_bootstrap_ci(cloud.get(), a.bootstrap, a.seed, &fit, &policy, &iv));
    ci = iv;
  } else {
    check(idprof_estimate_file(a.input.c_str(), &fit, &policy, &est));
  }

  if (a.format == "json") {
    ordered_json doc;
    doc["estimate"] = estimate_json(est);
    doc["interval"] = ci ? ordered_json{{"lo", ci->lo}, {"hi", ci->hi}} : ordered_json(nullptr);
    doc["config"] = cfg;
    emit(doc.dump(2) + "\n", a.out);
  } else {
    std::ostringstream os;
    os.precision(17);
    os << "# config: " << cfg.dump() << "\n";
    os << "d_hat,stderr,r_squared,d_mle,n_used,n_points,n_duplicates,ci_lo,ci_hi\n";
    os << est.d_hat << ',' << est.std_error << ',' << est.r_squared << ',' << est.d_mle << ',' << est.n_used << ','
       << est.n_points << ',' << est.n_duplicates << ',';
    if (ci) os << ci->lo << ',' << ci->hi;
    else os << ',';
    os << "\n";
    emit(os.str(), a.out);
  }
  return 0;
}

// --- profile ----------------------------------------------------------------

struct ProfileArgs {
  std::string manifest;
  std::vector<std::string> dumps;
  FitArgs fit;
  std::size_t bootstrap = 0;
  std::uint64_t seed = 0;
  std::string format = "csv";
  std::string out;
  std::string dataset;
  std::string augmentation;
  std::string model;
  std::string shape_out;
  double flat_threshold = 0.1;
};

int run_profile(Command& cmd, ProfileArgs& a) {
  cmd.merge_config();
  if (a.manifest.empty() == a.dumps.empty()) validation("manifest: give either a manifest or --dumps, not both or neither");
  check_format(a.format);
  if (!(a.flat_threshold >= 0)) validation("--flat-threshold: must be non-negative");
  const auto cfg = cmd.resolved();
  const auto fit = a.fit.fit();
  const auto policy = a.fit.policy();

  idprof_profile* raw = nullptr;
  if (!a.manifest.empty()) {
    check(idprof_profile_from_manifest(a.manifest.c_str(), &fit, &policy, a.bootstrap, a.seed, &raw));
  } else {
    std::vector<const char*> paths;
    for (const auto& d : a.dumps) paths.push_back(d.c_str());
    check(idprof_profile_from_paths(paths.data(), paths.size(), &fit, &policy, a.bootstrap, a.seed, &raw));
  }
  ProfilePtr profile(raw);
  check(idprof_profile_set_metadata(profile.get(), a.dataset.empty() ? nullptr : a.dataset.c_str(),
                                    a.augmentation.empty() ? nullptr : a.augmentation.c_str(),
                                    a.model.empty() ? nullptr : a.model.c_str()));
  check(idprof_profile_set_config(profile.get(), cfg.dump().c_str()));

  if (!a.shape_out.empty()) {
    char* shape = nullptr;
    check(idprof_profile_shape(profile.get(), a.flat_threshold, &shape));
    ordered_json doc;
    doc["shape"] = ordered_json::parse(take_string(shape));
    doc["config"] = cfg;
    if (a.shape_out == "-" && (a.out.empty() || a.out == "-"))
      validation("--shape-out: stdout already carries the profile; give --out or a shape file");
    emit(doc.dump(2) + "\n", a.shape_out);
  }

  char* text = nullptr;
  check(idprof_profile_export(profile.get(), a.format.c_str(), &text));
  emit(take_string(text), a.out);
  return 0;
}

// --- compare ----------------------------------------------------------------

struct CompareArgs {
  std::string baseline;
  std::string other;
  std::string out;
};

int run_compare(Command& cmd, CompareArgs& a) {
  cmd.merge_config();
  if (a.baseline.empty() || a.other.empty()) validation("baseline/other: two profile JSON files are required");
  const auto cfg = cmd.resolved();
  idprof_profile* pa = nullptr;
  check(idprof_profile_load(a.baseline.c_str(), &pa));
  ProfilePtr first(pa);
  idprof_profile* pb = nullptr;
  check(idprof_profile_load(a.other.c_str(), &pb));
  ProfilePtr second(pb);
  char* report = nullptr;
  check(idprof_profile_compare(first.get(), second.get(), &report));
  ordered_json doc;
  doc["comparison"] = ordered_json::parse(take_string(report));
  doc["config"] = cfg;
  emit(doc.dump(2) + "\n", a.out);
  return 0;
}

// --- augment ----------------------------------------------------------------

struct AugmentArgs {
  std::string kind;
  std::uint64_t seed = 0;
  std::string fill = "interp";
  std::string in;
  std::string out;
  std::string report;
  unsigned threads = 0;
};

int run_augment(Command& cmd, AugmentArgs& a) {
  cmd.merge_config();
  if (a.kind.empty()) validation("--kind: required");
  if (a.in.empty()) validation("--in: required");
  if (a.out.empty()) validation("--out: required");
  if (a.fill != "interp" && a.fill != "black") validation("--fill: must be interp or black, got '" + a.fill + "'");
  if (a.report.empty()) a.report = (fs::path(a.out) / "report.jsonl").string();
  auto cfg = cmd.resolved();
  // Thread count never changes the images, so keep it out of the artefacts.
  cfg.erase("threads");

  std::error_code ec;
  fs::create_directories(a.out, ec);
  if (ec) io_failure("cannot create output directory '" + a.out + "': " + ec.message());
  char* report = nullptr;
  check(idprof_augment_batch(a.in.c_str(), a.out.c_str(), a.kind.c_str(), a.seed, a.fill.c_str(), a.threads,
                             &report));
  const std::string lines = take_string(report);
  emit(ordered_json{{"config", cfg}}.dump() + "\n" + lines, a.report);

  std::size_t written = 0;
  std::size_t skipped = 0;
  std::istringstream is(lines);
  for (std::string line; std::getline(is, line);) {
    if (line.empty()) continue;
    const auto j = json::parse(line);
    (j.contains("error") ? skipped : written) += 1;
  }
  ordered_json summary;
  summary["written"] = written;
  summary["skipped"] = skipped;
  summary["report"] = a.report;
  summary["config"] = cfg;
  std::cout << summary.dump(2) << "\n";
  return 0;
}

void print_error(const CliError& e, bool as_json) {
  if (as_json) {
    std::cerr << json{{"error", e.name}, {"message", e.message}, {"exit_code", e.exit_code}}.dump() << "\n";
  } else {
    std::cerr << "idprof: " << e.name << ": " << e.message << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intrinsic-dimension profiling with the TwoNN estimator"};
  app.require_subcommand(1);
  bool errors_json = false;
  app.add_flag("--errors-json", errors_json, "Report errors on stderr as JSON");
  app.set_version_flag("--version", idprof_version());

  Command gen_cmd{"generate", app.add_subcommand("generate", "Sample a synthetic manifold into a dump file")};
  GenerateArgs gen;
  gen_cmd.add("--kind", "kind", gen.kind, "hypercube | sphere_surface | swiss_roll | gaussian | nonuniform_beta");
  gen_cmd.add("-d,--intrinsic-dim", "intrinsic_dim", gen.d, "Intrinsic dimension")->capture_default_str();
  gen_cmd.add("-D,--ambient-dim", "ambient_dim", gen.D, "Ambient dimension")->capture_default_str();
  gen_cmd.add("-n,--points", "n", gen.n, "Number of points")->capture_default_str();
  gen_cmd.add("--seed", "seed", gen.seed, "Sampling seed")->capture_default_str();
  gen_cmd.add("--embed-dim", "embed_dim", gen.embed_dim, "Isometrically embed into this many dimensions (0 = off)");
  gen_cmd.add("--embed-seed", "embed_seed", gen.embed_seed, "Rotation seed for --embed-dim (0 = pad only)");
  gen_cmd.add("--layer", "layer", gen.layer, "Layer name stored in the dump (default: kind)");
  gen_cmd.add("--dtype", "dtype", gen.dtype, "f32 | f64")->capture_default_str();
  gen_cmd.add("-o,--out", "out", gen.out, "Output dump path");
  gen_cmd.add_config_option();

  Command est_cmd{"estimate", app.add_subcommand("estimate", "Estimate the intrinsic dimension of one dump")};
  EstimateArgs est;
  est_cmd.add("input,--input", "input", est.input, "IDCD or CSV dump");
  est.fit.attach(est_cmd);
  est_cmd.add("--bootstrap", "bootstrap", est.bootstrap, "Bootstrap replicates (0 = none, else >= 100)");
  est_cmd.add("--seed", "seed", est.seed, "Bootstrap seed");
  est_cmd.add("--format", "format", est.format, "json | csv")->capture_default_str();
  est_cmd.add("-o,--out", "out", est.out, "Output file (default stdout)");
  est_cmd.add_config_option();

  Command prof_cmd{"profile", app.add_subcommand("profile", "Profile intrinsic dimension across layers")};
  ProfileArgs prof;
  prof_cmd.add("manifest,--manifest", "manifest", prof.manifest, "JSON manifest of layer-ordered dumps");
  prof_cmd.add("--dumps", "dumps", prof.dumps, "Layer-ordered dump files instead of a manifest");
  prof.fit.attach(prof_cmd);
  prof_cmd.add("--bootstrap", "bootstrap", prof.bootstrap, "Bootstrap replicates per layer (0 = none)");
  prof_cmd.add("--seed", "seed", prof.seed, "Bootstrap seed");
  prof_cmd.add("--format", "format", prof.format, "csv | json")->capture_default_str();
  prof_cmd.add("-o,--out", "out", prof.out, "Output file (default stdout)");
  prof_cmd.add("--dataset", "dataset", prof.dataset, "Dataset tag");
  prof_cmd.add("--augmentation", "augmentation", prof.augmentation, "Augmentation tag");
  prof_cmd.add("--model", "model", prof.model, "Model tag");
  prof_cmd.add("--shape-out", "shape_out", prof.shape_out, "Write shape statistics JSON here ('-' = stdout)");
  prof_cmd.add("--flat-threshold", "flat_threshold", prof.flat_threshold, "Relative hunchback margin")
      ->capture_default_str();
  prof_cmd.add_config_option();

  Command cmp_cmd{"compare", app.add_subcommand("compare", "Compare two profile JSON files layer by layer")};
  CompareArgs cmp;
  cmp_cmd.add("baseline,--baseline", "baseline", cmp.baseline, "Reference profile JSON");
  cmp_cmd.add("other,--other", "other", cmp.other, "Profile JSON to compare");
  cmp_cmd.add("-o,--out", "out", cmp.out, "Output file (default stdout)");
  cmp_cmd.add_config_option();

  Command aug_cmd{"augment", app.add_subcommand("augment", "Apply one augmentation to a directory of PNG images")};
  AugmentArgs aug;
  aug_cmd.add("--kind", "kind", aug.kind,
              "horizontal_flip | vertical_flip | channel_shift | rotation | horizontal_shift | vertical_shift");
  aug_cmd.add("--seed", "seed", aug.seed, "Batch seed")->capture_default_str();
  aug_cmd.add("--fill", "fill", aug.fill, "interp | black")->capture_default_str();
  aug_cmd.add("--in", "in", aug.in, "Input directory");
  aug_cmd.add("--out", "out", aug.out, "Output directory");
  aug_cmd.add("--report", "report", aug.report, "JSON-lines report (default <out>/report.jsonl)");
  aug_cmd.add("--threads", "threads", aug.threads, "Worker threads (0 = all cores)");
  aug_cmd.add_config_option();

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    bool as_json = errors_json;
    for (int k = 1; k < argc; ++k)
      if (std::string(argv[k]) == "--errors-json") as_json = true;
    print_error(CliError{"InvalidArgument", e.what(), kExitValidation}, as_json);
    return kExitValidation;
  }

  try {
    if (gen_cmd.app->parsed()) return run_generate(gen_cmd, gen);
    if (est_cmd.app->parsed()) return run_estimate(est_cmd, est);
    if (prof_cmd.app->parsed()) return run_profile(prof_cmd, prof);
    if (cmp_cmd.app->parsed()) return run_compare(cmp_cmd, cmp);
    if (aug_cmd.app->parsed()) return run_augment(aug_cmd, aug);
  } catch (const CliError& e) {
    print_error(e, errors_json);
    return e.exit_code;
  } catch (const std::exception& e) {
    print_error(CliError{"Internal", e.what(), kExitIo}, errors_json);
    return kExitIo;
  }
  return kExitValidation;
}
