#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "vaguegan/tensor.hpp"

namespace vaguegan::image {

// 8-bit RGB image, channel-major (3 x H x W).
struct ImageU8 {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  ImageU8() = default;
  ImageU8(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), pixels(static_cast<std::size_t>(3) * h * w, fill) {}

  std::uint8_t& at(int c, int y, int x) {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  std::uint8_t at(int c, int y, int x) const {
    return pixels[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
  bool operator==(const ImageU8&) const = default;
};

// Single-channel map with values in [0, 1].
struct EdgeMap {
  Tensor values;  // 1 x H x W
};

enum class EdgeMethod { kCanny, kLaplacian };

// Decodes PNG/JPEG (anything OpenCV reads) and always returns RGB.
// Throws MissingFileError / DecodeError.
ImageU8 load_image(const std::filesystem::path& path);

// Throws IoError when the file cannot be written.
void save_png(const ImageU8& img, const std::filesystem::path& path);

// Bilinear resampling with half-pixel centers and edge clamping; the identity
// when the size is unchanged.
Tensor resize_bilinear(const Tensor& in, int out_height, int out_width);

// Adjoint of resize_bilinear: maps a gradient on the resized tensor back onto
// an in_height x in_width input.
Tensor resize_bilinear_adjoint(const Tensor& grad_out, int in_height, int in_width);

// Resize to side x side, then u -> (u / 255) / 0.5 - 1.
ImageTensor to_gan_input(const ImageU8& img, int side = 128);

// Inverse mapping u = floor(255 * (x + 1) / 2 + 0.5), clamped to [0, 255].
ImageU8 from_gan_output(const ImageTensor& x);

// Luma (0.299, 0.587, 0.114) in the 0..255 range, 1 x H x W.
Tensor grayscale(const ImageU8& img);

// Gaussian smoothing, Sobel gradient (L1 magnitude), non-maximum suppression
// and hysteresis between `low` and `high`. Output is binary {0, 1}.
EdgeMap canny_edge_map(const ImageU8& img, double low = 100.0, double high = 200.0);

// |4-neighbour Laplacian| of the luma image (replicate border), divided by its
// maximum. A flat image gives an all-zero map.
EdgeMap laplacian_edge_map(const ImageU8& img);

EdgeMap edge_map(const ImageU8& img, EdgeMethod method);

// Replicates the edge map into three channels scaled to 0..255.
ImageU8 edge_to_rgb(const EdgeMap& edges);

inline constexpr int kDiffusionSide = 512;
inline constexpr int kDiffusionSteps = 80;
inline constexpr double kDiffusionGuidance = 12.0;

// Writes image.png (512x512 upscale of `generated`), edge_map.png and
// manifest.json into out_dir and returns the manifest path.
std::filesystem::path export_diffusion_manifest(
    const ImageTensor& generated, const std::string& prompt,
    const std::string& negative_prompt, const std::filesystem::path& out_dir,
    EdgeMethod method = EdgeMethod::kLaplacian);

// Procedural "scratch image": smooth colour gradients with a few soft
// shapes. Used for fixtures and desk-scale runs without an input file.
ImageU8 synthetic_scene(int side, std::uint64_t seed);

}  // namespace vaguegan::image
