#include "vaguegan/image.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "json.hpp"
#include "vaguegan/errors.hpp"
#include "vaguegan/filters.hpp"
#include "vaguegan/random.hpp"

namespace vaguegan::image {

namespace fs = std::filesystem;

ImageU8 load_image(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw MissingFileError("no such image file: " + path.string());
  }
  cv::Mat bgr;
  try {
    bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception& e) {
    throw DecodeError("cannot decode " + path.string() + ": " + e.what());
  }
  if (bgr.empty() || bgr.type() != CV_8UC3) {
    throw DecodeError("cannot decode image " + path.string());
  }
  ImageU8 out(bgr.rows, bgr.cols);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      out.at(0, y, x) = row[x][2];
      out.at(1, y, x) = row[x][1];
      out.at(2, y, x) = row[x][0];
    }
  }
  return out;
}

void save_png(const ImageU8& img, const fs::path& path) {
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      row[x] = cv::Vec3b(img.at(2, y, x), img.at(1, y, x), img.at(0, y, x));
    }
  }
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

namespace {

struct AxisWeights {
  std::vector<int> lo, hi;
  std::vector<double> frac;
};

AxisWeights axis_weights(int in, int out) {
  AxisWeights w;
  w.lo.resize(out);
  w.hi.resize(out);
  w.frac.resize(out);
  const double scale = static_cast<double>(in) / out;
  for (int i = 0; i < out; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    if (s < 0.0) s = 0.0;
    int i0 = std::min(static_cast<int>(std::floor(s)), in - 1);
    w.lo[i] = i0;
    w.hi[i] = std::min(i0 + 1, in - 1);
    w.frac[i] = s - i0;
  }
  return w;
}

std::uint8_t round_half_up_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

}  // namespace

Tensor resize_bilinear(const Tensor& in, int out_height, int out_width) {
  if (out_height <= 0 || out_width <= 0) {
    throw InvalidConfigError("side", "resize target must be positive");
  }
  if (in.height() == out_height && in.width() == out_width) return in;
  const AxisWeights wy = axis_weights(in.height(), out_height);
  const AxisWeights wx = axis_weights(in.width(), out_width);
  Tensor out(in.channels(), out_height, out_width);
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < out_height; ++y) {
      const double fy = wy.frac[y];
      for (int x = 0; x < out_width; ++x) {
        const double fx = wx.frac[x];
        const double top = (1 - fx) * in(c, wy.lo[y], wx.lo[x]) + fx * in(c, wy.lo[y], wx.hi[x]);
        const double bot = (1 - fx) * in(c, wy.hi[y], wx.lo[x]) + fx * in(c, wy.hi[y], wx.hi[x]);
        out(c, y, x) = (1 - fy) * top + fy * bot;
      }
    }
  }
  return out;
}

Tensor resize_bilinear_adjoint(const Tensor& grad_out, int in_height, int in_width) {
  if (grad_out.height() == in_height && grad_out.width() == in_width) return grad_out;
  const AxisWeights wy = axis_weights(in_height, grad_out.height());
  const AxisWeights wx = axis_weights(in_width, grad_out.width());
  Tensor grad_in(grad_out.channels(), in_height, in_width);
  for (int c = 0; c < grad_out.channels(); ++c) {
    for (int y = 0; y < grad_out.height(); ++y) {
      const double fy = wy.frac[y];
      for (int x = 0; x < grad_out.width(); ++x) {
        const double fx = wx.frac[x];
        const double g = grad_out(c, y, x);
        grad_in(c, wy.lo[y], wx.lo[x]) += (1 - fy) * (1 - fx) * g;
        grad_in(c, wy.lo[y], wx.hi[x]) += (1 - fy) * fx * g;
        grad_in(c, wy.hi[y], wx.lo[x]) += fy * (1 - fx) * g;
        grad_in(c, wy.hi[y], wx.hi[x]) += fy * fx * g;
      }
    }
  }
  return grad_in;
}

ImageTensor to_gan_input(const ImageU8& img, int side) {
  if (side <= 0) throw InvalidConfigError("side", "must be positive");
  Tensor raw(3, img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) raw[i] = img.pixels[i];
  Tensor out = resize_bilinear(raw, side, side);
  for (double& v : out.values()) {
    v = std::clamp((v / 255.0) / 0.5 - 1.0, -1.0, 1.0);
  }
  return out;
}

ImageU8 from_gan_output(const ImageTensor& x) {
  if (x.channels() != 3) {
    throw ShapeError("from_gan_output: expected 3 channels, got " + x.shape_string());
  }
  if (!all_finite(x.values())) {
    throw InvalidTensorError("from_gan_output: non-finite value in tensor");
  }
  ImageU8 out(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) {
    out.pixels[i] = round_half_up_u8(255.0 * (x[i] + 1.0) / 2.0);
  }
  return out;
}

Tensor grayscale(const ImageU8& img) {
  Tensor g(1, img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      g(0, y, x) = 0.299 * img.at(0, y, x) + 0.587 * img.at(1, y, x) +
                   0.114 * img.at(2, y, x);
    }
  }
  return g;
}

namespace {

// Separable 2-D filter with replicate borders on a single plane.
Tensor separable_filter(const Tensor& in, std::span<const double> kx,
                        std::span<const double> ky) {
  const int h = in.height(), w = in.width();
  const int rx = static_cast<int>(kx.size()) / 2;
  const int ry = static_cast<int>(ky.size()) / 2;
  Tensor tmp(1, h, w), out(1, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -rx; k <= rx; ++k) {
        s += kx[k + rx] * in(0, y, std::clamp(x + k, 0, w - 1));
      }
      tmp(0, y, x) = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int k = -ry; k <= ry; ++k) {
        s += ky[k + ry] * tmp(0, std::clamp(y + k, 0, h - 1), x);
      }
      out(0, y, x) = s;
    }
  }
  return out;
}

std::array<double, 5> gaussian_kernel5(double sigma) {
  std::array<double, 5> k{};
  double sum = 0.0;
  for (int i = -2; i <= 2; ++i) {
    k[i + 2] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += k[i + 2];
  }
  for (double& v : k) v /= sum;
  return k;
}

}  // namespace

EdgeMap canny_edge_map(const ImageU8& img, double low, double high) {
  if (low > high) {
    throw InvalidConfigError("canny_thresholds", "low threshold exceeds high threshold");
  }
  const int h = img.height, w = img.width;
  const auto gauss = gaussian_kernel5(1.4);
  const Tensor smooth = separable_filter(grayscale(img), gauss, gauss);

  constexpr std::array<double, 3> kDeriv{-1.0, 0.0, 1.0};
  constexpr std::array<double, 3> kSmooth{1.0, 2.0, 1.0};
  const Tensor gx = separable_filter(smooth, kDeriv, kSmooth);
  const Tensor gy = separable_filter(smooth, kSmooth, kDeriv);

  Tensor mag(1, h, w);
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(gx[i]) + std::abs(gy[i]);

  auto mag_at = [&](int y, int x) {
    return (y < 0 || y >= h || x < 0 || x >= w) ? 0.0 : mag(0, y, x);
  };

  // Non-maximum suppression along the quantized gradient direction.
  enum : std::uint8_t { kNone = 0, kWeak = 1, kStrong = 2 };
  std::vector<std::uint8_t> cls(static_cast<std::size_t>(h) * w, kNone);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double m = mag(0, y, x);
      if (m <= low) continue;
      double angle = std::atan2(gy(0, y, x), gx(0, y, x)) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      int dy = 0, dx = 1;
      if (angle >= 22.5 && angle < 67.5) {
        dy = 1, dx = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        dy = 1, dx = 0;
      } else if (angle >= 112.5 && angle < 157.5) {
        dy = 1, dx = -1;
      }
      if (m > mag_at(y - dy, x - dx) && m >= mag_at(y + dy, x + dx)) {
        cls[static_cast<std::size_t>(y) * w + x] = m > high ? kStrong : kWeak;
      }
    }
  }

  // Hysteresis: keep weak pixels 8-connected to a strong one.
  EdgeMap out{Tensor(1, h, w)};
  std::vector<int> stack;
  for (int i = 0; i < h * w; ++i) {
    if (cls[i] == kStrong) stack.push_back(i);
  }
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (out.values[i] == 1.0) continue;
    out.values[i] = 1.0;
    const int y = i / w, x = i % w;
    for (int ny = y - 1; ny <= y + 1; ++ny) {
      for (int nx = x - 1; nx <= x + 1; ++nx) {
        if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
        const int j = ny * w + nx;
        if (cls[j] != kNone && out.values[j] == 0.0) stack.push_back(j);
      }
    }
  }
  return out;
}

EdgeMap laplacian_edge_map(const ImageU8& img) {
  const Tensor gray = grayscale(img);
  EdgeMap out{Tensor(1, img.height, img.width)};
  laplacian_plane(gray.values(), img.height, img.width, out.values.values());
  double peak = 0.0;
  for (double& v : out.values.values()) {
    v = std::abs(v);
    peak = std::max(peak, v);
  }
  if (peak > 0.0) {
    for (double& v : out.values.values()) v /= peak;
  }
  return out;
}

EdgeMap edge_map(const ImageU8& img, EdgeMethod method) {
  return method == EdgeMethod::kCanny ? canny_edge_map(img) : laplacian_edge_map(img);
}

ImageU8 edge_to_rgb(const EdgeMap& edges) {
  const Tensor& e = edges.values;
  ImageU8 out(e.height(), e.width());
  for (int y = 0; y < e.height(); ++y) {
    for (int x = 0; x < e.width(); ++x) {
      const std::uint8_t v = round_half_up_u8(255.0 * std::clamp(e(0, y, x), 0.0, 1.0));
      out.at(0, y, x) = out.at(1, y, x) = out.at(2, y, x) = v;
    }
  }
  return out;
}

fs::path export_diffusion_manifest(const ImageTensor& generated,
                                   const std::string& prompt,
                                   const std::string& negative_prompt,
                                   const fs::path& out_dir, EdgeMethod method) {
  require_image_tensor(generated, "export_diffusion_manifest");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());

  const ImageU8 upscaled =
      from_gan_output(resize_bilinear(generated, kDiffusionSide, kDiffusionSide));
  save_png(upscaled, out_dir / "image.png");
  save_png(edge_to_rgb(edge_map(upscaled, method)), out_dir / "edge_map.png");

  nlohmann::json manifest = {
      {"image", "image.png"},
      {"edge_map", "edge_map.png"},
      {"edge_method", method == EdgeMethod::kCanny ? "canny" : "laplacian"},
      {"prompt", prompt},
      {"negative_prompt", negative_prompt},
      {"steps", kDiffusionSteps},
      {"guidance_scale", kDiffusionGuidance},
  };
  const fs::path path = out_dir / "manifest.json";
  std::ofstream os(path);
  os << manifest.dump(2) << '\n';
  if (!os) throw IoError("cannot write " + path.string());
  return path;
}

ImageU8 synthetic_scene(int side, std::uint64_t seed) {
  if (side <= 0) throw InvalidConfigError("side", "must be positive");
  RandomStream rng(mix_seed(seed, 0x5ce9e));
  Tensor img(3, side, side);
  std::array<double, 3> base{}, slope{};
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.2 + 0.5 * rng.uniform();
    slope[c] = 0.4 * (rng.uniform() - 0.5);
  }
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        img(c, y, x) = base[c] + slope[c] * (x + y) / side;
      }
    }
  }
  for (int blob = 0; blob < 4; ++blob) {
    const double cy = side * (0.15 + 0.7 * rng.uniform());
    const double cx = side * (0.15 + 0.7 * rng.uniform());
    const double r = side * (0.08 + 0.15 * rng.uniform());
    std::array<double, 3> colour{rng.uniform(), rng.uniform(), rng.uniform()};
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const double d = std::hypot(y - cy, x - cx);
        const double a = 1.0 / (1.0 + std::exp((d - r) / (0.04 * side + 0.5)));
        for (int c = 0; c < 3; ++c) img(c, y, x) = (1 - a) * img(c, y, x) + a * colour[c];
      }
    }
  }
  ImageU8 out(side, side);
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.pixels[i] = round_half_up_u8(255.0 * std::clamp(img[i], 0.0, 1.0));
  }
  return out;
}

}  // namespace vaguegan::image
