#include "idprof/augment.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "idprof/error.hpp"
#include "idprof/parallel.hpp"

namespace idprof {

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

double bilinear(const Image& img, double sx, double sy, std::size_t c) {
  const double fx0 = std::floor(sx);
  const double fy0 = std::floor(sy);
  const auto x0 = static_cast<std::size_t>(fx0);
  const auto y0 = static_cast<std::size_t>(fy0);
  const std::size_t x1 = std::min(x0 + 1, img.width - 1);
  const std::size_t y1 = std::min(y0 + 1, img.height - 1);
  const double fx = sx - fx0;
  const double fy = sy - fy0;
  const double top = (1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
  const double bottom = (1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
  return (1 - fy) * top + fy * bottom;
}

// Replaces exposed pixels of an edge-replicated image by the tent-weighted
// mean of their in-bounds 3x3 neighbourhood.
void smooth_exposed(Image& img, const std::vector<bool>& exposed) {
  const Image src = img;
  constexpr double kTent[3] = {1, 2, 1};
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      if (!exposed[y * img.width + x]) continue;
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        double sum = 0, weight = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const auto yy = static_cast<std::ptrdiff_t>(y) + dy;
            const auto xx = static_cast<std::ptrdiff_t>(x) + dx;
            if (yy < 0 || xx < 0 || yy >= static_cast<std::ptrdiff_t>(img.height) ||
                xx >= static_cast<std::ptrdiff_t>(img.width)) {
              continue;
            }
            const double w = kTent[dy + 1] * kTent[dx + 1];
            sum += w * src.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), c);
            weight += w;
          }
        }
        img.at(y, x, c) = to_byte(sum / weight);
      }
    }
  }
}

void check_image(const Image& img) {
  if (img.height == 0 || img.width == 0 ||
      img.pixels.size() != img.height * img.width * Image::kChannels) {
    fail(ErrorCode::InvalidArgument, "image buffer does not match its dimensions");
  }
}

}  // namespace

Image::Image(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w * kChannels, 0) {}

Image::Image(std::size_t h, std::size_t w, std::vector<std::uint8_t> data)
    : height(h), width(w), pixels(std::move(data)) {
  check_image(*this);
}

std::string_view to_string(AugmentKind kind) noexcept {
  switch (kind) {
    case AugmentKind::HorizontalFlip: return "horizontal_flip";
    case AugmentKind::VerticalFlip: return "vertical_flip";
    case AugmentKind::ChannelShift: return "channel_shift";
    case AugmentKind::Rotation: return "rotation";
    case AugmentKind::HorizontalShift: return "horizontal_shift";
    case AugmentKind::VerticalShift: return "vertical_shift";
  }
  return "unknown";
}

std::optional<AugmentKind> parse_augment_kind(std::string_view name) noexcept {
  for (auto kind : {AugmentKind::HorizontalFlip, AugmentKind::VerticalFlip, AugmentKind::ChannelShift,
                    AugmentKind::Rotation, AugmentKind::HorizontalShift, AugmentKind::VerticalShift}) {
    if (to_string(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(FillPolicy fill) noexcept {
  return fill == FillPolicy::Interp ? "interp" : "black";
}

std::optional<FillPolicy> parse_fill_policy(std::string_view name) noexcept {
  if (name == "interp") return FillPolicy::Interp;
  if (name == "black") return FillPolicy::Black;
  return std::nullopt;
}

Image hflip(const Image& img) {
  check_image(img);
  Image out(img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      for (std::size_t c = 0; c < Image::kChannels; ++c) out.at(y, img.width - 1 - x, c) = img.at(y, x, c);
    }
  }
  return out;
}

Image vflip(const Image& img) {
  check_image(img);
  Image out(img.height, img.width);
  const std::size_t stride = img.width * Image::kChannels;
  for (std::size_t y = 0; y < img.height; ++y) {
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>(y * stride), stride,
                out.pixels.begin() + static_cast<std::ptrdiff_t>((img.height - 1 - y) * stride));
  }
  return out;
}

Image channel_shift(const Image& img, std::array<int, 3> deltas) {
  check_image(img);
  for (int d : deltas) {
    if (d < -kMaxChannelDelta || d > kMaxChannelDelta) {
      fail(ErrorCode::DeltaOutOfRange, "channel delta " + std::to_string(d) + " outside [-50, 50]");
    }
  }
  Image out = img;
  for (std::size_t k = 0; k < out.pixels.size(); ++k) {
    const int v = out.pixels[k] + deltas[k % Image::kChannels];
    out.pixels[k] = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
  }
  return out;
}

Image rotate(const Image& img, double angle_deg, FillPolicy fill) {
  check_image(img);
  if (!(std::abs(angle_deg) <= kMaxRotationDeg)) {
    fail(ErrorCode::AngleOutOfRange, "rotation angle " + std::to_string(angle_deg) + " outside [-45, 45]");
  }
  if (angle_deg == 0.0) return img;

  const double theta = angle_deg * std::numbers::pi / 180.0;
  const double cs = std::cos(theta);
  const double sn = std::sin(theta);
  const double cx = (static_cast<double>(img.width) - 1) / 2;
  const double cy = (static_cast<double>(img.height) - 1) / 2;
  const double max_x = static_cast<double>(img.width - 1);
  const double max_y = static_cast<double>(img.height - 1);
  constexpr double kEdge = 1e-9;

  Image out(img.height, img.width);
  std::vector<bool> exposed(img.height * img.width, false);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double dx = static_cast<double>(x) - cx;
      const double dy = static_cast<double>(y) - cy;
      // Inverse map: output pixel -> source position.
      double sx = cx + cs * dx - sn * dy;
      double sy = cy + sn * dx + cs * dy;
      const bool inside = sx >= -kEdge && sy >= -kEdge && sx <= max_x + kEdge && sy <= max_y + kEdge;
      if (!inside) {
        exposed[y * img.width + x] = true;
        if (fill == FillPolicy::Black) continue;
      }
      sx = std::clamp(sx, 0.0, max_x);
      sy = std::clamp(sy, 0.0, max_y);
      for (std::size_t c = 0; c < Image::kChannels; ++c) out.at(y, x, c) = to_byte(bilinear(img, sx, sy, c));
    }
  }
  if (fill == FillPolicy::Interp) smooth_exposed(out, exposed);
  return out;
}

Image shift(const Image& img, double dx_frac, double dy_frac, FillPolicy fill) {
  check_image(img);
  if (!(std::abs(dx_frac) <= kMaxShiftFraction) || !(std::abs(dy_frac) <= kMaxShiftFraction)) {
    fail(ErrorCode::FractionOutOfRange, "shift fraction outside [-0.7, 0.7]");
  }
  const auto w = static_cast<std::ptrdiff_t>(img.width);
  const auto h = static_cast<std::ptrdiff_t>(img.height);
  const auto sx = static_cast<std::ptrdiff_t>(std::round(dx_frac * static_cast<double>(w)));
  const auto sy = static_cast<std::ptrdiff_t>(std::round(dy_frac * static_cast<double>(h)));
  if (sx == 0 && sy == 0) return img;

  Image out(img.height, img.width);
  std::vector<bool> exposed(img.height * img.width, false);
  for (std::ptrdiff_t y = 0; y < h; ++y) {
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      std::ptrdiff_t src_x = x - sx;
      std::ptrdiff_t src_y = y - sy;
      const bool inside = src_x >= 0 && src_x < w && src_y >= 0 && src_y < h;
      const auto ux = static_cast<std::size_t>(x);
      const auto uy = static_cast<std::size_t>(y);
      if (!inside) {
        exposed[uy * img.width + ux] = true;
        if (fill == FillPolicy::Black) continue;
        src_x = std::clamp<std::ptrdiff_t>(src_x, 0, w - 1);
        src_y = std::clamp<std::ptrdiff_t>(src_y, 0, h - 1);
      }
      for (std::size_t c = 0; c < Image::kChannels; ++c) {
        out.at(uy, ux, c) = img.at(static_cast<std::size_t>(src_y), static_cast<std::size_t>(src_x), c);
      }
    }
  }
  if (fill == FillPolicy::Interp) smooth_exposed(out, exposed);
  return out;
}

AugmentParams draw_params(AugmentKind kind, Rng& rng) {
  AugmentParams p;
  p.kind = kind;
  switch (kind) {
    case AugmentKind::ChannelShift:
      for (int& d : p.deltas) d = static_cast<int>(uniform_int(rng, -kMaxChannelDelta, kMaxChannelDelta));
      break;
    case AugmentKind::Rotation:
      p.angle_deg = uniform(rng, -kMaxRotationDeg, kMaxRotationDeg);
      break;
    case AugmentKind::HorizontalShift:
      p.dx_frac = uniform(rng, -kMaxShiftFraction, kMaxShiftFraction);
      break;
    case AugmentKind::VerticalShift:
      p.dy_frac = uniform(rng, -kMaxShiftFraction, kMaxShiftFraction);
      break;
    case AugmentKind::HorizontalFlip:
    case AugmentKind::VerticalFlip:
      break;
  }
  return p;
}

Image apply(const Image& img, const AugmentParams& params, FillPolicy fill) {
  switch (params.kind) {
    case AugmentKind::HorizontalFlip: return hflip(img);
    case AugmentKind::VerticalFlip: return vflip(img);
    case AugmentKind::ChannelShift: return channel_shift(img, params.deltas);
    case AugmentKind::Rotation: return rotate(img, params.angle_deg, fill);
    case AugmentKind::HorizontalShift:
    case AugmentKind::VerticalShift: return shift(img, params.dx_frac, params.dy_frac, fill);
  }
  return img;
}

nlohmann::json to_json(const AugmentParams& params, FillPolicy fill) {
  nlohmann::json j = {{"kind", std::string(to_string(params.kind))}};
  switch (params.kind) {
    case AugmentKind::ChannelShift:
      j["deltas"] = params.deltas;
      break;
    case AugmentKind::Rotation:
      j["angle_deg"] = params.angle_deg;
      j["fill"] = std::string(to_string(fill));
      break;
    case AugmentKind::HorizontalShift:
    case AugmentKind::VerticalShift:
      j["dx_frac"] = params.dx_frac;
      j["dy_frac"] = params.dy_frac;
      j["fill"] = std::string(to_string(fill));
      break;
    default:
      break;
  }
  return j;
}

Rng file_rng(std::uint64_t seed, std::string_view file_name) {
  return Rng(derive_seed(seed, fnv1a64(file_name)));
}

BatchReport augment_batch(const std::filesystem::path& in_dir, const std::filesystem::path& out_dir,
                          const AugmentSpec& spec, unsigned threads) {
  std::error_code ec;
  if (!std::filesystem::is_directory(in_dir, ec)) {
    fail(ErrorCode::IoFailure, "input directory '" + in_dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(in_dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  if (files.empty()) fail(ErrorCode::EmptyInput, "no files in '" + in_dir.string() + "'");
  std::sort(files.begin(), files.end(),
            [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });

  std::filesystem::create_directories(out_dir, ec);
  if (ec) fail(ErrorCode::IoFailure, "cannot create '" + out_dir.string() + "': " + ec.message());

  BatchReport report;
  report.fill = spec.fill;
  report.items.resize(files.size());
  parallel_for(files.size(), threads, [&](std::size_t k) {
    const std::string name = files[k].filename().string();
    BatchItem& item = report.items[k];
    item.file = name;
    Rng rng = file_rng(spec.seed, name);
    const AugmentParams params = draw_params(spec.kind, rng);
    Image img;
    try {
      img = read_png(files[k]);
    } catch (const Error& e) {
      item.error = e.what();
      return;
    }
    write_png(apply(img, params, spec.fill), out_dir / name);
    item.params = params;
  });
  for (const auto& item : report.items) (item.params ? report.written : report.skipped)++;
  return report;
}

std::string report_jsonl(const BatchReport& report) {
  std::string out;
  for (const auto& item : report.items) {
    nlohmann::json line = {{"file", item.file}};
    if (item.params) {
      line["params"] = to_json(*item.params, report.fill);
    } else {
      line["params"] = nullptr;
      line["skipped"] = item.error;
    }
    out += line.dump();
    out += '\n';
  }
  return out;
}

Image read_png(const std::filesystem::path& path) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    fail(ErrorCode::UnreadableImage, "cannot decode '" + path.string() + "': " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  Image img(png.height, png.width);
  if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
    const std::string msg = png.message;
    png_image_free(&png);
    fail(ErrorCode::UnreadableImage, "cannot decode '" + path.string() + "': " + msg);
  }
  return img;
}

void write_png(const Image& img, const std::filesystem::path& path) {
  check_image(img);
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(img.width);
  png.height = static_cast<png_uint_32>(img.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    fail(ErrorCode::IoFailure, "cannot write '" + path.string() + "': " + png.message);
  }
}

}  // namespace idprof
