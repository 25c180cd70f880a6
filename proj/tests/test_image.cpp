#include <gtest/gtest.h>

#include <fstream>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <set>

#include "json.hpp"
#include "support.hpp"
#include "vaguegan/errors.hpp"
#include "vaguegan/image.hpp"

using namespace vaguegan;
using namespace vaguegan::image;
using vaguegan::testing::TempDir;

namespace {

ImageU8 step_image(int side, int column) {
  ImageU8 img(side, side);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < side; ++y) {
      for (int x = column; x < side; ++x) img.at(c, y, x) = 255;
    }
  }
  return img;
}

ImageU8 random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  ImageU8 img(h, w);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(gen() & 0xff);
  return img;
}

}  // namespace

TEST(GanRange, EndpointsAndMidpoint) {
  ImageU8 sq(2, 2);
  sq.at(0, 0, 0) = 0;
  sq.at(0, 0, 1) = 255;
  const ImageTensor x = to_gan_input(sq, 2);
  EXPECT_DOUBLE_EQ(x(0, 0, 0), -1.0);
  EXPECT_DOUBLE_EQ(x(0, 0, 1), 1.0);

  ImageTensor v(3, 1, 3);
  for (int c = 0; c < 3; ++c) {
    v(c, 0, 0) = -1.0;
    v(c, 0, 1) = 1.0;
    v(c, 0, 2) = 0.0;
  }
  const ImageU8 u = from_gan_output(v);
  EXPECT_EQ(u.at(0, 0, 0), 0);
  EXPECT_EQ(u.at(1, 0, 1), 255);
  EXPECT_EQ(u.at(2, 0, 2), 128);
}

TEST(GanRange, OutputWithinUnitInterval) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ImageTensor x = to_gan_input(random_image(37, 23, s), 16);
    EXPECT_EQ(x.height(), 16);
    EXPECT_EQ(x.width(), 16);
    EXPECT_GE(*std::min_element(x.values().begin(), x.values().end()), -1.0);
    EXPECT_LE(*std::max_element(x.values().begin(), x.values().end()), 1.0);
  }
}

TEST(GanRange, RoundTripWithinOneQuantStep) {
  const ImageTensor x = to_gan_input(random_image(20, 20, 7), 20);
  const ImageTensor y = to_gan_input(from_gan_output(x), 20);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_LE(std::abs(x[i] - y[i]), 2.0 / 255.0 + 1e-12);
  const ImageTensor z = to_gan_input(from_gan_output(y), 20);
  EXPECT_EQ(y, z);
}

TEST(GanRange, NonFiniteRejected) {
  ImageTensor x(3, 2, 2);
  x[1] = std::nan("");
  EXPECT_THROW(from_gan_output(x), InvalidTensorError);
}

TEST(Resize, IdentityAtSameSize) {
  const Tensor t = vaguegan::testing::random_tensor(3, 9, 9, 3);
  EXPECT_EQ(resize_bilinear(t, 9, 9), t);
}

TEST(Resize, AdjointIdentity) {
  const Tensor a = vaguegan::testing::random_tensor(1, 5, 7, 1);
  const Tensor b = vaguegan::testing::random_tensor(1, 11, 13, 2);
  const Tensor ra = resize_bilinear(a, 11, 13);
  const Tensor rb = resize_bilinear_adjoint(b, 5, 7);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) lhs += ra[i] * b[i];
  for (std::size_t i = 0; i < a.size(); ++i) rhs += a[i] * rb[i];
  EXPECT_NEAR(lhs, rhs, 1e-10);
}

TEST(LoadImage, MissingFile) {
  EXPECT_THROW(load_image("/nonexistent/none.png"), MissingFileError);
}

TEST(LoadImage, GarbageIsDecodeError) {
  TempDir dir("img");
  std::ofstream(dir / "bad.png") << "not an image";
  EXPECT_THROW(load_image(dir / "bad.png"), DecodeError);
}

TEST(LoadImage, PngRoundTripKeepsRgbOrder) {
  TempDir dir("img");
  ImageU8 img(4, 5);
  img.at(0, 1, 2) = 200;  // red only
  img.at(2, 3, 4) = 90;   // blue only
  save_png(img, dir / "a.png");
  EXPECT_EQ(load_image(dir / "a.png"), img);
  const cv::Mat bgr = cv::imread((dir / "a.png").string(), cv::IMREAD_COLOR);
  EXPECT_EQ(bgr.at<cv::Vec3b>(1, 2)[2], 200);
}

TEST(Canny, ConstantImageHasNoEdges) {
  const EdgeMap e = canny_edge_map(ImageU8(16, 16, 77));
  for (double v : e.values.values()) EXPECT_EQ(v, 0.0);
}

TEST(Canny, InvertedThresholdsRejected) {
  EXPECT_THROW(canny_edge_map(ImageU8(8, 8), 200, 100), InvalidConfigError);
}

TEST(Canny, StepColumnMatchesOpenCv) {
  const ImageU8 img = step_image(16, 8);
  const EdgeMap ours = canny_edge_map(img);

  cv::Mat gray(16, 16, CV_8U);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) gray.at<std::uint8_t>(y, x) = img.at(0, y, x);
  }
  cv::Mat blurred, ref;
  cv::GaussianBlur(gray, blurred, cv::Size(5, 5), 1.4, 1.4, cv::BORDER_REPLICATE);
  cv::Canny(blurred, ref, 100, 200, 3, false);

  std::set<int> ours_cols, ref_cols;
  for (int y = 3; y < 13; ++y) {
    for (int x = 0; x < 16; ++x) {
      if (ours.values(0, y, x) > 0.5) ours_cols.insert(x);
      if (ref.at<std::uint8_t>(y, x) > 0) ref_cols.insert(x);
    }
  }
  ASSERT_FALSE(ref_cols.empty());
  EXPECT_EQ(ours_cols, ref_cols);
  for (double v : ours.values.values()) EXPECT_TRUE(v == 0.0 || v == 1.0);
}

TEST(Laplacian, ConstantImageIsZero) {
  const EdgeMap e = laplacian_edge_map(ImageU8(9, 9, 200));
  for (double v : e.values.values()) EXPECT_EQ(v, 0.0);
}

TEST(Laplacian, ImpulseCenterIsFourTimesNeighbour) {
  ImageU8 img(5, 5);
  for (int c = 0; c < 3; ++c) img.at(c, 2, 2) = 100;
  const EdgeMap e = laplacian_edge_map(img);
  EXPECT_DOUBLE_EQ(e.values(0, 2, 2), 1.0);
  for (auto [y, x] : {std::pair{1, 2}, {3, 2}, {2, 1}, {2, 3}}) {
    EXPECT_NEAR(e.values(0, y, x), 0.25, 1e-12);
  }
  EXPECT_EQ(e.values(0, 0, 0), 0.0);
}

TEST(Laplacian, AffineImageZeroOnInterior) {
  ImageU8 img(8, 12);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 12; ++x) img.at(c, y, x) = static_cast<std::uint8_t>(10 * x + 5 * y);
    }
  }
  const EdgeMap e = laplacian_edge_map(img);
  for (int y = 1; y < 7; ++y) {
    for (int x = 1; x < 11; ++x) EXPECT_NEAR(e.values(0, y, x), 0.0, 1e-12);
  }
}

TEST(EdgeRgb, ScalingAndDuplication) {
  EdgeMap e{Tensor(1, 2, 2)};
  e.values(0, 0, 0) = 1.0;
  e.values(0, 1, 1) = 0.5;
  const ImageU8 rgb = edge_to_rgb(e);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(rgb.at(c, 0, 0), 255);
    EXPECT_EQ(rgb.at(c, 0, 1), 0);
  }
  const EdgeMap rnd = laplacian_edge_map(random_image(10, 10, 3));
  const ImageU8 r = edge_to_rgb(rnd);
  for (int y = 0; y < 10; ++y) {
    for (int x = 0; x < 10; ++x) {
      EXPECT_EQ(r.at(0, y, x), r.at(1, y, x));
      EXPECT_EQ(r.at(1, y, x), r.at(2, y, x));
    }
  }
}

TEST(DiffusionExport, WritesArtifactsAndManifest) {
  TempDir dir("export");
  const ImageTensor x = vaguegan::testing::random_tensor(3, 16, 16, 4);
  const auto manifest_path = export_diffusion_manifest(x, "a cat", "blurry", dir.path());
  EXPECT_TRUE(std::filesystem::exists(dir / "image.png"));
  EXPECT_TRUE(std::filesystem::exists(dir / "edge_map.png"));
  std::ifstream is(manifest_path);
  const auto j = nlohmann::json::parse(is);
  EXPECT_EQ(j.at("steps").get<int>(), 80);
  EXPECT_DOUBLE_EQ(j.at("guidance_scale").get<double>(), 12.0);
  EXPECT_EQ(j.at("prompt"), "a cat");
  EXPECT_EQ(j.at("negative_prompt"), "blurry");
  const ImageU8 img = load_image(dir / "image.png");
  EXPECT_EQ(img.height, 512);
  EXPECT_EQ(img.width, 512);
}

TEST(DiffusionExport, UnwritableDirectory) {
  TempDir dir("export");
  std::ofstream(dir / "file") << "x";
  const ImageTensor x(3, 8, 8);
  EXPECT_THROW(export_diffusion_manifest(x, "p", "n", dir / "file" / "sub"), IoError);
}

TEST(SyntheticScene, DeterministicPerSeed) {
  EXPECT_EQ(synthetic_scene(32, 1), synthetic_scene(32, 1));
  EXPECT_NE(synthetic_scene(32, 1), synthetic_scene(32, 2));
}
