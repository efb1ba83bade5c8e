#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "idprof/random.hpp"

namespace idprof {

// 8-bit RGB, row-major, interleaved.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w);
  Image(std::size_t h, std::size_t w, std::vector<std::uint8_t> data);

  static constexpr std::size_t kChannels = 3;

  std::uint8_t& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * kChannels + c];
  }
  std::uint8_t at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * kChannels + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

enum class AugmentKind {
  HorizontalFlip,
  VerticalFlip,
  ChannelShift,
  Rotation,
  HorizontalShift,
  VerticalShift,
};

// Interp: edge-replicate the exposed pixels, then smooth them with a 3x3
// bilinear (tent) kernel. Black: exposed pixels are 0.
enum class FillPolicy { Interp, Black };

std::string_view to_string(AugmentKind kind) noexcept;
std::optional<AugmentKind> parse_augment_kind(std::string_view name) noexcept;
std::string_view to_string(FillPolicy fill) noexcept;
std::optional<FillPolicy> parse_fill_policy(std::string_view name) noexcept;

inline constexpr int kMaxChannelDelta = 50;
inline constexpr double kMaxRotationDeg = 45.0;
inline constexpr double kMaxShiftFraction = 0.7;

Image hflip(const Image& img);
Image vflip(const Image& img);
// v -> clamp(v + delta_c, 0, 255); throws DeltaOutOfRange outside [-50, 50].
Image channel_shift(const Image& img, std::array<int, 3> deltas);
// Rotation about the pixel-grid centre, counter-clockwise as displayed for
// positive angles, bilinear sampling, same output size. Throws AngleOutOfRange.
Image rotate(const Image& img, double angle_deg, FillPolicy fill = FillPolicy::Interp);
// Translates by round(frac * dimension) pixels (half away from zero); positive
// dx moves content right, positive dy moves it down. Throws FractionOutOfRange.
Image shift(const Image& img, double dx_frac, double dy_frac, FillPolicy fill = FillPolicy::Interp);

struct AugmentParams {
  AugmentKind kind = AugmentKind::HorizontalFlip;
  std::array<int, 3> deltas{};
  double angle_deg = 0;
  double dx_frac = 0;
  double dy_frac = 0;
};

AugmentParams draw_params(AugmentKind kind, Rng& rng);
Image apply(const Image& img, const AugmentParams& params, FillPolicy fill);
nlohmann::json to_json(const AugmentParams& params, FillPolicy fill);

struct AugmentSpec {
  AugmentKind kind = AugmentKind::HorizontalFlip;
  std::uint64_t seed = 0;
  FillPolicy fill = FillPolicy::Interp;
};

// Parameter stream for one file, derived from (seed, file name) only.
Rng file_rng(std::uint64_t seed, std::string_view file_name);

struct BatchItem {
  std::string file;
  std::optional<AugmentParams> params;  // empty when the file was skipped
  std::string error;
};

struct BatchReport {
  std::vector<BatchItem> items;
  FillPolicy fill = FillPolicy::Interp;
  std::size_t written = 0;
  std::size_t skipped = 0;
};

// One PNG per regular file in in_dir, named like its input. Undecodable files
// are skipped and reported. Throws EmptyInput when in_dir holds no files.
BatchReport augment_batch(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                          const AugmentSpec& spec, unsigned threads = 0);

// JSON lines, one {"file", "params"} object per input, in file-name order.
std::string report_jsonl(const BatchReport& report);

Image read_png(const std::filesystem::path& path);
void write_png(const Image& img, const std::filesystem::path& path);

}  // namespace idprof
