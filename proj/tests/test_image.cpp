#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "enlighten/image.hpp"
#include "test_util.hpp"

using namespace enlighten;

TEST_CASE("png round trip preserves every byte") {
  testutil::TempDir dir("img-roundtrip");
  ImageU8 src = testutil::textured_image(23, 31, 77);
  std::string path = dir.file("a.png");
  save_png(path, src);
  ImageU8 back = load_image_u8(path);
  REQUIRE(back.h == src.h);
  REQUIRE(back.w == src.w);
  CHECK(back.px == src.px);
}

TEST_CASE("decode failure reports an io error") {
  testutil::TempDir dir("img-bad");
  std::string path = dir.file("not-an-image.png");
  {
    FILE* f = fopen(path.c_str(), "wb");
    fputs("junk", f);
    fclose(f);
  }
  CHECK_THROWS_AS(load_image_u8(path), Error);
  CHECK_THROWS_AS(load_image_u8(dir.file("missing.png")), Error);
}

TEST_CASE("range conversions") {
  ImageU8 u8;
  u8.h = 1;
  u8.w = 2;
  u8.px = {0, 128, 255, 51, 102, 204};
  Image unit = to_unit(u8);
  CHECK(unit.range == Range::Unit);
  CHECK(unit.at(0, 0, 0) == doctest::Approx(0.0));
  CHECK(unit.at(0, 0, 1) == doctest::Approx(128.0 / 255.0));
  CHECK(unit.at(0, 0, 2) == doctest::Approx(1.0));
  CHECK(unit.at(0, 1, 0) == doctest::Approx(0.2));

  Image sig = unit_to_signed(unit);
  CHECK(sig.range == Range::Signed);
  CHECK(sig.at(0, 0, 0) == doctest::Approx(-1.0));
  CHECK(sig.at(0, 0, 2) == doctest::Approx(1.0));
  Image round = signed_to_unit(sig);
  for (size_t i = 0; i < unit.px.size(); ++i)
    CHECK(round.px[i] == doctest::Approx(unit.px[i]).epsilon(1e-12));

  ImageU8 back = to_u8(sig);
  CHECK(back.px == u8.px);
  ImageU8 back2 = to_u8(unit);
  CHECK(back2.px == u8.px);
}

TEST_CASE("to_u8 clamps out-of-range values") {
  Image img;
  img.h = 1;
  img.w = 1;
  img.range = Range::Signed;
  img.px = {-1.5, 0.0, 2.0};
  ImageU8 u = to_u8(img);
  CHECK(static_cast<int>(u.px[0]) == 0);
  CHECK(static_cast<int>(u.px[1]) == 128);
  CHECK(static_cast<int>(u.px[2]) == 255);
}

TEST_CASE("mean intensity") {
  ImageU8 img;
  img.h = 2;
  img.w = 1;
  img.px = {10, 20, 30, 40, 50, 60};
  CHECK(mean_intensity_u8(img) == doctest::Approx(35.0));
}

TEST_CASE("bilinear resize is corner aligned") {
  GrayMap m(2, 2);
  m.at(0, 0) = 0.0;
  m.at(0, 1) = 1.0;
  m.at(1, 0) = 2.0;
  m.at(1, 1) = 3.0;
  GrayMap up = bilinear_resize(m, 3, 3);
  CHECK(up.at(0, 0) == doctest::Approx(0.0));
  CHECK(up.at(0, 2) == doctest::Approx(1.0));
  CHECK(up.at(2, 0) == doctest::Approx(2.0));
  CHECK(up.at(2, 2) == doctest::Approx(3.0));
  CHECK(up.at(1, 1) == doctest::Approx(1.5));
  GrayMap down = bilinear_resize(up, 2, 2);
  CHECK(down.at(0, 0) == doctest::Approx(0.0));
  CHECK(down.at(1, 1) == doctest::Approx(3.0));
  GrayMap one = bilinear_resize(m, 1, 1);
  CHECK(one.at(0, 0) == doctest::Approx(0.0));

  // identity for same-size output
  GrayMap same = bilinear_resize(m, 2, 2);
  CHECK(same.v == m.v);
}

TEST_CASE("image resize matches per-channel gray resize") {
  ImageU8 u8 = testutil::textured_image(9, 13, 5);
  Image img = to_unit(u8);
  Image resized = bilinear_resize(img, 5, 7);
  for (int c = 0; c < 3; ++c) {
    GrayMap g(img.h, img.w);
    for (int y = 0; y < img.h; ++y)
      for (int x = 0; x < img.w; ++x) g.at(y, x) = img.at(y, x, c);
    GrayMap gr = bilinear_resize(g, 5, 7);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 7; ++x)
        CHECK(resized.at(y, x, c) == doctest::Approx(gr.at(y, x)));
  }
}

TEST_CASE("pad_to_multiple reflects and restores") {
  Image img = to_unit(testutil::textured_image(5, 7, 31));
  auto [padded, rec] = pad_to_multiple(img, 4);
  CHECK(padded.h == 8);
  CHECK(padded.w == 8);
  CHECK(rec.orig_h == 5);
  CHECK(rec.orig_w == 7);
  // symmetric reflection down: rows 5,6,7 mirror rows 4,3,2
  for (int x = 0; x < 7; ++x)
    for (int c = 0; c < 3; ++c) {
      CHECK(padded.at(5, x, c) == doctest::Approx(img.at(4, x, c)));
      CHECK(padded.at(6, x, c) == doctest::Approx(img.at(3, x, c)));
      CHECK(padded.at(7, x, c) == doctest::Approx(img.at(2, x, c)));
    }
  // and right: col 7 mirrors col 6
  for (int y = 0; y < 5; ++y)
    for (int c = 0; c < 3; ++c) CHECK(padded.at(y, 7, c) == doctest::Approx(img.at(y, 6, c)));

  Image restored = crop_to_record(padded, rec);
  CHECK(restored.h == img.h);
  CHECK(restored.w == img.w);
  CHECK(restored.px == img.px);

  // already-multiple sizes pass through untouched
  Image img2 = to_unit(testutil::textured_image(8, 12, 3));
  auto [p2, r2] = pad_to_multiple(img2, 4);
  CHECK(p2.h == 8);
  CHECK(p2.w == 12);
  CHECK(p2.px == img2.px);
  (void)r2;
}

TEST_CASE("pad_to_multiple handles tiny inputs") {
  Image img;
  img.h = 1;
  img.w = 1;
  img.px = {0.25, 0.5, 0.75};
  auto [padded, rec] = pad_to_multiple(img, 16);
  CHECK(padded.h == 16);
  CHECK(padded.w == 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) CHECK(padded.at(y, x, 1) == doctest::Approx(0.5));
  Image restored = crop_to_record(padded, rec);
  CHECK(restored.h == 1);
  CHECK(restored.w == 1);
}

TEST_CASE("flip and crop") {
  Image img = to_unit(testutil::textured_image(4, 6, 13));
  Image flipped = flip_horizontal(img);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 6; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(flipped.at(y, x, c) == doctest::Approx(img.at(y, 5 - x, c)));
  Image twice = flip_horizontal(flipped);
  CHECK(twice.px == img.px);

  Image sub = crop(img, 1, 2, 2, 3);
  CHECK(sub.h == 2);
  CHECK(sub.w == 3);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(sub.at(y, x, c) == doctest::Approx(img.at(y + 1, x + 2, c)));
  CHECK_THROWS_AS(crop(img, 3, 0, 2, 2), Error);
}
