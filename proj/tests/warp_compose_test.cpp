#include "aerostitch/warp_compose.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <vector>

#include "aerostitch/image_io.hpp"
#include "aerostitch/synthetic_scene.hpp"

namespace aerostitch {
namespace {

namespace fs = std::filesystem;

Homography about_center(double angle, int w, int h) {
  return Homography(Homography::translation(w / 2.0, h / 2.0).matrix() * yaw_rotation(angle) *
                    Homography::translation(-w / 2.0, -h / 2.0).matrix());
}

TEST(CanvasBounds, SingleIdentityFrame) {
  const std::vector<FrameSize> sizes{{640, 480}};
  const std::vector<Homography> t{Homography::identity()};
  const auto b = canvas_bounds(sizes, t);
  EXPECT_EQ(b.origin, Eigen::Vector2i(0, 0));
  EXPECT_EQ(b.width, 640);
  EXPECT_EQ(b.height, 480);
}

TEST(CanvasBounds, TwoFramesSideBySide) {
  const std::vector<FrameSize> sizes{{640, 480}, {640, 480}};
  const std::vector<Homography> t{Homography::identity(), Homography::translation(640, 0)};
  const auto b = canvas_bounds(sizes, t);
  EXPECT_EQ(b.width, 1280);
  EXPECT_EQ(b.height, 480);
  const std::vector<Homography> back{Homography::identity(), Homography::translation(-100.5, -20)};
  const auto c = canvas_bounds(sizes, back);
  EXPECT_EQ(c.origin, Eigen::Vector2i(-101, -20));
  EXPECT_EQ(c.width, 741);
  EXPECT_EQ(c.height, 500);
}

TEST(CanvasBounds, RotatedSquareGrowsByRootTwo) {
  const int side = 400;
  const std::vector<FrameSize> sizes{{side, side}};
  const std::vector<Homography> t{about_center(std::numbers::pi / 4, side, side)};
  const auto b = canvas_bounds(sizes, t);
  const int expected = static_cast<int>(std::ceil(side * std::numbers::sqrt2));
  EXPECT_LE(std::abs(b.width - expected), 1);
  EXPECT_LE(std::abs(b.height - expected), 1);
}

TEST(CanvasBounds, RejectsMismatchedInputs) {
  const std::vector<FrameSize> sizes{{64, 64}};
  EXPECT_THROW(canvas_bounds(sizes, std::vector<Homography>{}), Error);
}

TEST(ComposeMosaic, IdentityReproducesTheFrame) {
  const ImageBuffer img = fractal_noise(96, 72, 2);
  const std::vector<ImageBuffer> frames{img};
  const std::vector<Homography> t{Homography::identity()};
  const Mosaic m = compose_mosaic(frames, t, {0.1, 1});
  ASSERT_EQ(m.image.width(), 96);
  ASSERT_EQ(m.image.height(), 72);
  for (std::size_t i = 0; i < img.samples().size(); ++i) {
    ASSERT_NEAR(m.image.samples()[i], img.samples()[i], 1e-12);
  }
}

TEST(ComposeMosaic, IntegerTranslationShiftsExactly) {
  const ImageBuffer img = fractal_noise(64, 48, 3);
  const std::vector<ImageBuffer> frames{img};
  const std::vector<Homography> t{Homography::translation(7, -3)};
  const Mosaic m = compose_mosaic(frames, t);
  EXPECT_EQ(m.origin, Eigen::Vector2i(7, -3));
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) ASSERT_NEAR(m.image.at(x, y), img.at(x, y), 1e-12);
  }
}

TEST(ComposeMosaic, WarpAndUnwarpRoundTrip) {
  const ImageBuffer img = fractal_noise(160, 120, 8);
  Matrix3 hm;
  hm << 0.97, 0.12, 15, -0.1, 1.02, 8, 1e-4, -5e-5, 1;
  const Homography h(hm);
  const std::vector<ImageBuffer> one{img};
  const std::vector<Homography> forward{h};
  const Mosaic warped = compose_mosaic(one, forward, {0.0, 0});
  const std::vector<ImageBuffer> back_frames{warped.image};
  const std::vector<Homography> back{
      Homography(h.inverse().matrix() * Homography::translation(warped.origin.x(), warped.origin.y()).matrix())};
  const Mosaic restored = compose_mosaic(back_frames, back, {0.0, 0});
  double sum = 0.0;
  int count = 0;
  for (int y = 10; y < 110; ++y) {
    for (int x = 10; x < 150; ++x) {
      const int rx = x - restored.origin.x(), ry = y - restored.origin.y();
      ASSERT_TRUE(restored.image.contains(rx, ry));
      sum += std::abs(restored.image.at(rx, ry) - img.at(x, y));
      ++count;
    }
  }
  EXPECT_LT(sum / count, 0.02);
}

TEST(Finalize, UntouchedCanvasIsBlack) {
  MosaicCanvas canvas({{0, 0}, 8, 6}, 1);
  const ImageBuffer out = finalize(canvas);
  for (double v : out.samples()) EXPECT_EQ(v, 0.0);
}

TEST(Finalize, IdenticalOverlapKeepsTheValue) {
  const ImageBuffer img(50, 40, 1, 0.37);
  const std::vector<ImageBuffer> frames{img, img};
  const std::vector<Homography> t{Homography::identity(), Homography::translation(20, 0)};
  const Mosaic m = compose_mosaic(frames, t);
  for (int y = 0; y < 40; ++y) {
    for (int x = 0; x < 70; ++x) ASSERT_NEAR(m.image.at(x, y), 0.37, 1e-12);
  }
}

TEST(Finalize, SeamBetweenDifferentFramesIsMonotone) {
  const ImageBuffer dark(100, 60, 1, 0.2), light(100, 60, 1, 0.8);
  const std::vector<ImageBuffer> frames{dark, light};
  const std::vector<Homography> t{Homography::identity(), Homography::translation(50, 0)};
  const Mosaic m = compose_mosaic(frames, t, {0.3, 2});
  const int row = 30;
  for (int x = 1; x < m.image.width(); ++x) {
    const double v = m.image.at(x, row);
    EXPECT_GE(v, 0.2 - 1e-12);
    EXPECT_LE(v, 0.8 + 1e-12);
    EXPECT_GE(v, m.image.at(x - 1, row) - 1e-12) << "x = " << x;
  }
}

TEST(Finalize, OutputIsAConvexCombinationOfContributors) {
  std::vector<ImageBuffer> frames;
  std::vector<Homography> t;
  for (int i = 0; i < 3; ++i) {
    frames.push_back(fractal_noise(80, 60, 10 + i));
    t.push_back(Homography::translation(13.3 * i, 7.7 * i));
  }
  const Mosaic m = compose_mosaic(frames, t);
  for (int y = 0; y < m.image.height(); ++y) {
    for (int x = 0; x < m.image.width(); ++x) {
      double lo = 2.0, hi = -1.0;
      for (std::size_t f = 0; f < frames.size(); ++f) {
        const Vec2 s = t[f].inverse().apply(Vec2(x + m.origin.x(), y + m.origin.y()));
        if (s.x() < -0.5 || s.y() < -0.5 || s.x() > 79.5 || s.y() > 59.5) continue;
        // Bilinear sampling stays within the 2x2 neighbourhood.
        for (int dy = 0; dy <= 1; ++dy) {
          for (int dx = 0; dx <= 1; ++dx) {
            const int sx = std::clamp(static_cast<int>(std::floor(s.x())) + dx, 0, 79);
            const int sy = std::clamp(static_cast<int>(std::floor(s.y())) + dy, 0, 59);
            lo = std::min(lo, frames[f].at(sx, sy));
            hi = std::max(hi, frames[f].at(sx, sy));
          }
        }
      }
      if (hi < 0.0) continue;
      const double v = m.image.at(x, y);
      if (v == 0.0) continue;  // contributors whose feather weight is zero
      ASSERT_GE(v, lo - 1e-9);
      ASSERT_LE(v, hi + 1e-9);
    }
  }
}

TEST(ComposeMosaic, StitchingTheSameFrameTwiceIsIdempotent) {
  const ImageBuffer img = fractal_noise(90, 70, 21);
  const std::vector<ImageBuffer> once{img}, twice{img, img};
  const std::vector<Homography> t1{Homography::identity()}, t2{Homography::identity(), Homography::identity()};
  const Mosaic a = compose_mosaic(once, t1), b = compose_mosaic(twice, t2);
  ASSERT_EQ(a.image.width(), b.image.width());
  for (std::size_t i = 0; i < a.image.samples().size(); ++i) {
    ASSERT_NEAR(a.image.samples()[i], b.image.samples()[i], 1e-12);
  }
}

TEST(ComposeMosaic, ThreadCountDoesNotChangeTheResult) {
  std::vector<ImageBuffer> frames{fractal_noise(120, 90, 1), fractal_noise(120, 90, 2)};
  std::vector<Homography> t{Homography::identity(), about_center(0.3, 120, 90) * Homography::translation(40, 10)};
  const Mosaic one = compose_mosaic(frames, t, {0.1, 1});
  const Mosaic four = compose_mosaic(frames, t, {0.1, 4});
  EXPECT_EQ(one.image, four.image);
}

TEST(FeatherWeight, Properties) {
  const int w = 100, h = 80;
  const double margin = 8.0;
  EXPECT_EQ(feather_weight(50, 40, w, h, margin), 1.0);
  EXPECT_DOUBLE_EQ(feather_weight(0, 40, w, h, margin), 0.5 / margin);
  EXPECT_EQ(feather_weight(-0.5, 40, w, h, margin), 0.0);
  EXPECT_EQ(feather_weight(3, 3, w, h, 0.0), 1.0);
  for (double x = -0.4; x < w / 2.0; x += 0.7) {
    const double a = feather_weight(x, 40, w, h, margin);
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    EXPECT_LE(a, feather_weight(x + 0.7, 40, w, h, margin));
    EXPECT_NEAR(a, feather_weight(w - 1 - x, 40, w, h, margin), 1e-12);
  }
}

TEST(ParallelRows, CoversEveryRowOnce) {
  for (unsigned threads : {1u, 3u, 8u}) {
    std::vector<int> hits(37, 0);
    parallel_rows(37, threads, [&](int b, int e) {
      for (int r = b; r < e; ++r) ++hits[r];
    });
    for (int v : hits) EXPECT_EQ(v, 1);
  }
}

class ImageIo : public ::testing::Test {
 protected:
  fs::path dir = fs::temp_directory_path() / "aerostitch_image_io_test";
  void SetUp() override { fs::create_directories(dir); }
  void TearDown() override { fs::remove_all(dir); }
};

TEST_F(ImageIo, PgmRoundTripIsLosslessAt8Bits) {
  const ImageBuffer img = fractal_noise(33, 17, 4);
  write_image((dir / "a.pgm").string(), img);
  const ImageBuffer back = read_image((dir / "a.pgm").string());
  ASSERT_EQ(back.width(), 33);
  ASSERT_EQ(back.height(), 17);
  for (std::size_t i = 0; i < img.samples().size(); ++i) EXPECT_NEAR(back.samples()[i], img.samples()[i], 0.5 / 255 + 1e-12);
  EXPECT_EQ(encode_pgm(back), encode_pgm(img));
}

TEST_F(ImageIo, PngRoundTripGrayAndRgb) {
  const ImageBuffer gray = fractal_noise(20, 12, 9);
  write_image((dir / "g.png").string(), gray);
  const ImageBuffer g = read_image((dir / "g.png").string());
  EXPECT_EQ(g.channels(), 1);
  EXPECT_EQ(to_bytes(g), to_bytes(gray));

  std::vector<double> rgb(8 * 5 * 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<double>(i % 256) / 255.0;
  const ImageBuffer color(8, 5, 3, rgb);
  write_image((dir / "c.png").string(), color);
  const ImageBuffer c = read_image((dir / "c.png").string());
  EXPECT_EQ(c.channels(), 3);
  EXPECT_EQ(to_bytes(c), to_bytes(color));
}

TEST_F(ImageIo, Errors) {
  EXPECT_THROW(read_image((dir / "missing.png").string()), Error);
  EXPECT_THROW(write_image((dir / "x.bmp").string(), ImageBuffer(4, 4, 1)), Error);
  EXPECT_THROW(decode_pgm("P2\n2 2\n255\n0 0 0 0"), Error);
  EXPECT_THROW(decode_pgm("P5\n4 4\n255\nabc"), Error);
  EXPECT_THROW(encode_pgm(ImageBuffer(2, 2, 3)), Error);
}

}  // namespace
}  // namespace aerostitch
