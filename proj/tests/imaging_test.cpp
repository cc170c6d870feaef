#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "spider/imaging.hpp"
#include "spider/png_io.hpp"

using namespace spider;

namespace {

RegionMask random_mask(Dims d, std::mt19937& gen, double p) {
  std::bernoulli_distribution coin(p);
  RegionMask m(d);
  for (int y = 0; y < d.height; ++y)
    for (int x = 0; x < d.width; ++x) m.set(x, y, coin(gen));
  return m;
}

}  // namespace

TEST(Rle, EncodesZerosFirstRowMajor) {
  RegionMask m({3, 2});
  m.set(0, 0);
  m.set(2, 1);
  EXPECT_EQ(rle_encode(m).counts, (std::vector<std::uint32_t>{0, 1, 4, 1}));
  EXPECT_EQ(rle_encode(RegionMask({2, 2})).counts, (std::vector<std::uint32_t>{4}));
}

TEST(Rle, RoundTripsRandomMasks) {
  std::mt19937 gen(11);
  for (int i = 0; i < 200; ++i) {
    const Dims d{1 + static_cast<int>(gen() % 17), 1 + static_cast<int>(gen() % 13)};
    const auto m = random_mask(d, gen, (gen() % 100) / 100.0);
    const auto rle = rle_encode(m);
    std::uint64_t sum = 0;
    for (auto c : rle.counts) sum += c;
    EXPECT_EQ(sum, d.area());
    EXPECT_EQ(rle_decode(rle, d), m);
  }
}

TEST(Rle, DecodeRejectsWrongTotal) {
  try {
    rle_decode(Rle{{3, 2}}, {2, 2});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
}

TEST(MaskIou, HandValues) {
  RegionMask a({4, 1}), b({4, 1});
  a.set(0, 0);
  a.set(1, 0);
  b.set(1, 0);
  b.set(2, 0);
  EXPECT_DOUBLE_EQ(mask_iou(a, b), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(mask_iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(mask_iou(RegionMask({4, 1}), RegionMask({4, 1})), 1.0);
  EXPECT_THROW(mask_iou(a, RegionMask({2, 2})), Error);
}

TEST(MaskIou, SymmetricAndBounded) {
  std::mt19937 gen(5);
  for (int i = 0; i < 100; ++i) {
    const Dims d{9, 7};
    const auto a = random_mask(d, gen, 0.4);
    const auto b = random_mask(d, gen, 0.4);
    const double ab = mask_iou(a, b);
    EXPECT_EQ(ab, mask_iou(b, a));
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, 1.0);
  }
}

TEST(BBox, InclusiveCoordinatesAndCenter) {
  RegionMask m({10, 10});
  m.set(2, 3);
  m.set(5, 8);
  const auto bc = bbox_of_mask(m);
  EXPECT_EQ(bc.bbox.x_min, 2);
  EXPECT_EQ(bc.bbox.y_min, 3);
  EXPECT_EQ(bc.bbox.x_max, 5);
  EXPECT_EQ(bc.bbox.y_max, 8);
  EXPECT_DOUBLE_EQ(bc.center.x, 3.5);
  EXPECT_DOUBLE_EQ(bc.center.y, 5.5);
  try {
    bbox_of_mask(RegionMask({3, 3}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
  }
}

TEST(Composite, TakesOverlayInsideOnly) {
  const ImageBuffer base({3, 1}, Rgb{1, 2, 3});
  const ImageBuffer over({3, 1}, Rgb{9, 9, 9});
  RegionMask m({3, 1});
  m.set(1, 0);
  const auto out = composite_by_mask(base, over, m);
  EXPECT_EQ(out.pixel(0, 0), (Rgb{1, 2, 3}));
  EXPECT_EQ(out.pixel(1, 0), (Rgb{9, 9, 9}));
  EXPECT_EQ(out.pixel(2, 0), (Rgb{1, 2, 3}));
  EXPECT_THROW(composite_by_mask(base, ImageBuffer({2, 1}), m), Error);
}

TEST(Png, RoundTripsImageAndMask) {
  const auto dir = std::filesystem::temp_directory_path() / "spider_png_test";
  std::filesystem::create_directories(dir);
  std::mt19937 gen(3);
  ImageBuffer img({13, 7});
  for (auto& b : img.bytes()) b = static_cast<std::uint8_t>(gen());
  write_png(dir / "img.png", img);
  EXPECT_EQ(read_png(dir / "img.png"), img);
  const auto m = random_mask({13, 7}, gen, 0.5);
  write_mask_png(dir / "m.png", m);
  EXPECT_EQ(read_mask_png(dir / "m.png"), m);
  EXPECT_THROW(read_png(dir / "missing.png"), Error);
  std::filesystem::remove_all(dir);
}
