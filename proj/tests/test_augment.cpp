#include "doctest.h"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "idprof/augment.hpp"
#include "idprof/error.hpp"
#include "support.hpp"

using namespace idprof;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an idprof::Error");
  return ErrorCode::InvalidArgument;
}

Image random_image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  Image img(h, w);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(uniform_int(rng, 0, 255));
  return img;
}

Image constant_image(std::size_t h, std::size_t w, std::array<std::uint8_t, 3> rgb) {
  Image img(h, w);
  for (std::size_t k = 0; k < img.pixels.size(); ++k) img.pixels[k] = rgb[k % 3];
  return img;
}

std::array<std::uint8_t, 3> px(const Image& img, std::size_t y, std::size_t x) {
  return {img.at(y, x, 0), img.at(y, x, 1), img.at(y, x, 2)};
}

// Reference rotation written from polar coordinates about the centre: an
// output pixel at angle phi reads the source at angle phi + theta.
Image reference_rotate(const Image& img, double deg, bool black) {
  const double h = static_cast<double>(img.height), w = static_cast<double>(img.width);
  const double cx = (w - 1) * 0.5, cy = (h - 1) * 0.5;
  const double theta = deg / 180.0 * std::numbers::pi;
  Image out(img.height, img.width);
  std::vector<char> hole(img.height * img.width, 0);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double ox = static_cast<double>(x) - cx, oy = static_cast<double>(y) - cy;
      const double r = std::hypot(ox, oy);
      const double phi = std::atan2(oy, ox) + theta;
      double sx = cx + r * std::cos(phi), sy = cy + r * std::sin(phi);
      const bool out_of_frame = sx < -1e-9 || sy < -1e-9 || sx > w - 1 + 1e-9 || sy > h - 1 + 1e-9;
      hole[y * img.width + x] = out_of_frame;
      if (out_of_frame && black) continue;
      sx = std::min(std::max(sx, 0.0), w - 1);
      sy = std::min(std::max(sy, 0.0), h - 1);
      const int x0 = static_cast<int>(sx), y0 = static_cast<int>(sy);
      const int x1 = std::min(x0 + 1, static_cast<int>(w) - 1), y1 = std::min(y0 + 1, static_cast<int>(h) - 1);
      const double ax = sx - x0, ay = sy - y0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = img.at(y0, x0, c) * (1 - ax) * (1 - ay) + img.at(y0, x1, c) * ax * (1 - ay) +
                         img.at(y1, x0, c) * (1 - ax) * ay + img.at(y1, x1, c) * ax * ay;
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(std::min(std::max(v, 0.0), 255.0)));
      }
    }
  }
  if (black) return out;
  const Image snap = out;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      if (!hole[y * img.width + x]) continue;
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0, norm = 0;
        for (std::size_t yy = y ? y - 1 : 0; yy <= std::min(y + 1, img.height - 1); ++yy) {
          for (std::size_t xx = x ? x - 1 : 0; xx <= std::min(x + 1, img.width - 1); ++xx) {
            const double wt = (yy == y ? 2.0 : 1.0) * (xx == x ? 2.0 : 1.0);
            acc += wt * snap.at(yy, xx, c);
            norm += wt;
          }
        }
        out.at(y, x, c) = static_cast<std::uint8_t>(std::lround(acc / norm));
      }
    }
  }
  return out;
}

void put_png(const std::filesystem::path& p, const Image& img) { write_png(img, p); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("flips") {
  const std::array<std::uint8_t, 3> A{10, 20, 30}, B{40, 50, 60};
  Image row(1, 2, {A[0], A[1], A[2], B[0], B[1], B[2]});
  CHECK(hflip(row) == Image(1, 2, {B[0], B[1], B[2], A[0], A[1], A[2]}));
  Image col(2, 1, row.pixels);
  CHECK(vflip(col) == Image(2, 1, {B[0], B[1], B[2], A[0], A[1], A[2]}));
  CHECK(vflip(row) == row);

  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto img = random_image(7 + s, 5 + 2 * s, s);
    CHECK(hflip(hflip(img)) == img);
    CHECK(vflip(vflip(img)) == img);
    CHECK(vflip(hflip(img)) == hflip(vflip(img)));
    CHECK(hflip(img).height == img.height);
    CHECK(hflip(img).width == img.width);
  }
  auto sym = random_image(4, 5, 3);
  for (std::size_t y = 0; y < 4; ++y) {
    for (std::size_t x = 0; x < 2; ++x) {
      for (std::size_t c = 0; c < 3; ++c) sym.at(y, 4 - x, c) = sym.at(y, x, c);
    }
  }
  CHECK(hflip(sym) == sym);
}

TEST_CASE("channel shift") {
  const Image one(1, 1, {250, 10, 128});
  CHECK(channel_shift(one, {50, -50, 50}) == Image(1, 1, {255, 0, 178}));
  const auto img = random_image(6, 6, 9);
  CHECK(channel_shift(img, {0, 0, 0}) == img);
  CHECK(code_of([&] { channel_shift(img, {51, 0, 0}); }) == ErrorCode::DeltaOutOfRange);
  CHECK(code_of([&] { channel_shift(img, {0, 0, -51}); }) == ErrorCode::DeltaOutOfRange);

  // Values that did not saturate are restored exactly by the opposite shift.
  for (int d : {-50, -17, 1, 33, 50}) {
    const auto up = channel_shift(img, {d, d, d});
    const auto back = channel_shift(up, {-d, -d, -d});
    for (std::size_t k = 0; k < img.pixels.size(); ++k) {
      const int v = img.pixels[k] + d;
      if (v >= 0 && v <= 255) {
        CHECK(back.pixels[k] == img.pixels[k]);
      } else {
        CHECK(up.pixels[k] == (v < 0 ? 0 : 255));
      }
    }
  }
}

TEST_CASE("rotation") {
  const auto img = random_image(9, 11, 4);
  CHECK(rotate(img, 0.0) == img);
  CHECK(rotate(img, 0.0, FillPolicy::Black) == img);
  CHECK(code_of([&] { rotate(img, 45.5); }) == ErrorCode::AngleOutOfRange);
  CHECK(code_of([&] { rotate(img, -46); }) == ErrorCode::AngleOutOfRange);
  CHECK(code_of([&] { rotate(img, std::nan("")); }) == ErrorCode::AngleOutOfRange);

  SUBCASE("2x2 at 45 degrees against the reference sampler") {
    const Image small(2, 2, {0, 50, 100, 200, 10, 30, 90, 90, 90, 255, 0, 7});
    CHECK(rotate(small, 45, FillPolicy::Black) == reference_rotate(small, 45, true));
    CHECK(rotate(small, 45, FillPolicy::Interp) == reference_rotate(small, 45, false));
  }
  SUBCASE("larger images against the reference sampler") {
    for (double deg : {-45.0, -30.0, -7.5, 12.0, 33.3, 45.0}) {
      const auto big = random_image(13, 17, static_cast<std::uint64_t>(deg + 100));
      for (bool black : {true, false}) {
        const auto got = rotate(big, deg, black ? FillPolicy::Black : FillPolicy::Interp);
        const auto want = reference_rotate(big, deg, black);
        std::size_t off = 0;
        for (std::size_t k = 0; k < got.pixels.size(); ++k) {
          const int diff = std::abs(int(got.pixels[k]) - int(want.pixels[k]));
          CHECK(diff <= 1);
          off += diff != 0;
        }
        // Disagreements can only come from values landing on a rounding midpoint.
        CHECK(off <= got.pixels.size() / 100);
      }
    }
  }
  SUBCASE("rotation direction") {
    // A mark right of centre; +45 carries it up and to the right.
    Image m(5, 5);
    m.at(2, 4, 0) = 255;
    const auto r = rotate(m, 45, FillPolicy::Black);
    CHECK(r.at(1, 3, 0) > 0);
    CHECK(r.at(3, 3, 0) == 0);
  }
  SUBCASE("constant colour survives any angle with content fill") {
    const auto flat = constant_image(8, 12, {17, 200, 99});
    for (double deg : {-45.0, -20.0, 3.0, 44.0}) CHECK(rotate(flat, deg, FillPolicy::Interp) == flat);
  }
  SUBCASE("shape") {
    const auto r = rotate(img, 30);
    CHECK(r.height == img.height);
    CHECK(r.width == img.width);
  }
}

TEST_CASE("shift") {
  const std::array<std::uint8_t, 3> A{1, 2, 3}, B{4, 5, 6}, C{7, 8, 9}, D{10, 11, 12};
  const Image strip(1, 4, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  const auto black = shift(strip, 0.25, 0, FillPolicy::Black);
  CHECK(px(black, 0, 0) == std::array<std::uint8_t, 3>{0, 0, 0});
  CHECK(px(black, 0, 1) == A);
  CHECK(px(black, 0, 2) == B);
  CHECK(px(black, 0, 3) == C);
  const auto interp = shift(strip, 0.25, 0);
  CHECK(px(interp, 0, 1) == A);
  CHECK(px(interp, 0, 3) == C);
  // Edge replicated A,A,B then tent weights 2:1 over the two in-bounds columns.
  CHECK(px(interp, 0, 0) == A);
  CHECK(px(shift(strip, -0.25, 0, FillPolicy::Black), 0, 2) == D);

  const auto img = random_image(10, 20, 5);
  CHECK(shift(img, 0, 0) == img);
  CHECK(shift(img, 0.02, 0.04) == img);  // rounds to zero pixels
  CHECK(code_of([&] { shift(img, 0.71, 0); }) == ErrorCode::FractionOutOfRange);
  CHECK(code_of([&] { shift(img, 0, -0.8); }) == ErrorCode::FractionOutOfRange);

  for (double f : {0.1, 0.35, 0.7}) {
    const auto px_shift = static_cast<std::size_t>(std::lround(f * 20));
    const auto there = shift(img, f, 0);
    const auto back = shift(there, -f, 0);
    // Columns [0, 20 - px_shift) of back came from original content both ways.
    for (std::size_t y = 0; y < 10; ++y) {
      for (std::size_t x = 0; x + px_shift < 20; ++x) CHECK(px(back, y, x) == px(img, y, x));
    }
    const auto vert = shift(shift(img, 0, f), 0, -f);
    const auto py = static_cast<std::size_t>(std::lround(f * 10));
    for (std::size_t y = 0; y + py < 10; ++y) {
      for (std::size_t x = 0; x < 20; ++x) CHECK(px(vert, y, x) == px(img, y, x));
    }
  }
  // Round half away from zero: 0.5 px becomes 1 px either way.
  const Image two(1, 2, {1, 1, 1, 9, 9, 9});
  CHECK(px(shift(two, 0.25, 0, FillPolicy::Black), 0, 1)[0] == 1);
  CHECK(px(shift(two, -0.25, 0, FillPolicy::Black), 0, 0)[0] == 9);
}

TEST_CASE("parameter draws stay in range") {
  Rng rng(2024);
  double lo_angle = 0, hi_angle = 0, lo_frac = 0, hi_frac = 0;
  int lo_delta = 0, hi_delta = 0;
  for (int k = 0; k < 100000; ++k) {
    const auto cs = draw_params(AugmentKind::ChannelShift, rng);
    for (int d : cs.deltas) {
      REQUIRE(d >= -50);
      REQUIRE(d <= 50);
      lo_delta = std::min(lo_delta, d);
      hi_delta = std::max(hi_delta, d);
    }
    const auto rot = draw_params(AugmentKind::Rotation, rng);
    REQUIRE(std::abs(rot.angle_deg) <= 45.0);
    lo_angle = std::min(lo_angle, rot.angle_deg);
    hi_angle = std::max(hi_angle, rot.angle_deg);
    const auto hs = draw_params(AugmentKind::HorizontalShift, rng);
    REQUIRE(std::abs(hs.dx_frac) <= 0.7);
    REQUIRE(hs.dy_frac == 0.0);
    const auto vs = draw_params(AugmentKind::VerticalShift, rng);
    REQUIRE(std::abs(vs.dy_frac) <= 0.7);
    REQUIRE(vs.dx_frac == 0.0);
    lo_frac = std::min(lo_frac, hs.dx_frac);
    hi_frac = std::max(hi_frac, vs.dy_frac);
  }
  CHECK(lo_delta == -50);
  CHECK(hi_delta == 50);
  CHECK(lo_angle < -44.9);
  CHECK(hi_angle > 44.9);
  CHECK(lo_frac < -0.69);
  CHECK(hi_frac > 0.69);
}

TEST_CASE("names") {
  for (auto k : {AugmentKind::HorizontalFlip, AugmentKind::VerticalFlip, AugmentKind::ChannelShift,
                 AugmentKind::Rotation, AugmentKind::HorizontalShift, AugmentKind::VerticalShift}) {
    CHECK(parse_augment_kind(to_string(k)) == k);
  }
  CHECK_FALSE(parse_augment_kind("shear").has_value());
  CHECK(parse_fill_policy("black") == FillPolicy::Black);
  CHECK_FALSE(parse_fill_policy("mirror").has_value());
}

TEST_CASE("png round trip") {
  testing::TempDir dir("aug");
  const auto img = random_image(5, 7, 1);
  put_png(dir / "a.png", img);
  CHECK(read_png(dir / "a.png") == img);
  {
    std::ofstream(dir / "junk.png") << "not an image";
  }
  CHECK(code_of([&] { read_png(dir / "junk.png"); }) == ErrorCode::UnreadableImage);
  CHECK(code_of([&] { write_png(img, dir / "no" / "a.png"); }) == ErrorCode::IoFailure);
}

TEST_CASE("batch") {
  testing::TempDir dir("aug");
  const auto in = dir / "in";
  std::filesystem::create_directories(in);
  std::vector<std::string> names{"c.png", "a.png", "b.png", "d.png"};
  for (std::size_t k = 0; k < names.size(); ++k) put_png(in / names[k], random_image(12, 16, k));

  SUBCASE("horizontal flip per file") {
    const auto rep = augment_batch(in, dir / "out", {AugmentKind::HorizontalFlip, 1, FillPolicy::Interp}, 2);
    CHECK(rep.written == 4);
    CHECK(rep.skipped == 0);
    for (const auto& n : names) CHECK(read_png(dir / "out" / n) == hflip(read_png(in / n)));
    CHECK(rep.items[0].file == "a.png");
  }
  SUBCASE("reproducible and independent of threads") {
    const AugmentSpec spec{AugmentKind::Rotation, 77, FillPolicy::Interp};
    const auto r1 = augment_batch(in, dir / "o1", spec, 1);
    const auto r2 = augment_batch(in, dir / "o2", spec, 3);
    CHECK(report_jsonl(r1) == report_jsonl(r2));
    for (const auto& n : names) CHECK(slurp(dir / "o1" / n) == slurp(dir / "o2" / n));
    const auto other = augment_batch(in, dir / "o3", {AugmentKind::Rotation, 78, FillPolicy::Interp}, 1);
    CHECK(report_jsonl(other) != report_jsonl(r1));
  }
  SUBCASE("draws depend only on seed and file name") {
    const auto sub = dir / "sub";
    std::filesystem::create_directories(sub);
    put_png(sub / "b.png", random_image(3, 3, 50));
    const AugmentSpec spec{AugmentKind::ChannelShift, 5, FillPolicy::Interp};
    const auto full = augment_batch(in, dir / "o1", spec, 1);
    const auto one = augment_batch(sub, dir / "o2", spec, 1);
    CHECK(one.items[0].params->deltas == full.items[1].params->deltas);
    Rng rng = file_rng(5, "b.png");
    CHECK(draw_params(AugmentKind::ChannelShift, rng).deltas == one.items[0].params->deltas);
  }
  SUBCASE("unreadable files are skipped and reported") {
    std::ofstream(in / "broken.png") << "garbage";
    const auto rep = augment_batch(in, dir / "out", {AugmentKind::VerticalShift, 3, FillPolicy::Black}, 1);
    CHECK(rep.written == 4);
    CHECK(rep.skipped == 1);
    CHECK_FALSE(std::filesystem::exists(dir / "out" / "broken.png"));
    const auto text = report_jsonl(rep);
    std::istringstream is(text);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(is, line)) {
      const auto j = nlohmann::json::parse(line);
      if (j["file"] == "broken.png") {
        CHECK(j["params"].is_null());
        CHECK(j["skipped"].get<std::string>().find("broken.png") != std::string::npos);
      } else {
        CHECK(j["params"]["kind"] == "vertical_shift");
        CHECK(j["params"]["fill"] == "black");
      }
      ++lines;
    }
    CHECK(lines == 5);
  }
  SUBCASE("errors") {
    std::filesystem::create_directories(dir / "empty");
    CHECK(code_of([&] { augment_batch(dir / "empty", dir / "o", {}); }) == ErrorCode::EmptyInput);
    CHECK(code_of([&] { augment_batch(dir / "nope", dir / "o", {}); }) == ErrorCode::IoFailure);
  }
}
