#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "nutpose/edge_class.hpp"
#include "nutpose/geometry.hpp"

namespace nutpose {

/// 8-bit grayscale image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  std::uint8_t at(int x, int y) const {
    return values[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return values[static_cast<std::size_t>(y) * width + x];
  }
};

/// Per-pixel gradient magnitude. Border ring is zeroed.
struct GradientImage {
  int width = 0;
  int height = 0;
  std::vector<double> magnitude;

  GradientImage() = default;
  GradientImage(int w, int h)
      : width(w), height(h), magnitude(static_cast<std::size_t>(w) * h, 0.0) {}

  double at(int x, int y) const {
    return magnitude[static_cast<std::size_t>(y) * width + x];
  }
  double& at(int x, int y) {
    return magnitude[static_cast<std::size_t>(y) * width + x];
  }
};

/// 0/1 edge raster.
struct BinaryEdgeImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryEdgeImage() = default;
  BinaryEdgeImage(int w, int h)
      : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  std::uint8_t at(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
};

/// Scharr gradient magnitude, sqrt(gx^2 + gy^2), with the horizontal kernel
///   -3   0   3
///  -10   0  10
///   -3   0   3
/// and the vertical kernel its transpose. No normalization is applied, so a
/// 0->255 step peaks at 16*255 = 4080. The outermost pixel ring is set to 0.
/// Throws std::invalid_argument for images smaller than 3x3.
GradientImage scharr_magnitude(const GrayImage& img);

/// bit = 1 iff magnitude >= t. Throws std::invalid_argument for t < 0.
BinaryEdgeImage threshold(const GradientImage& grad, double t);

/// Decodes PGM P2 (ASCII) or P5 (binary), maxval <= 255. Throws ParseError
/// with the byte offset of the problem.
GrayImage decode_pgm(std::string_view bytes);

/// Encodes as binary PGM (P5, maxval 255). decode_pgm(encode_pgm(img)) == img.
std::string encode_pgm(const GrayImage& img);

struct OverlayPoint {
  Pixel px;
  EdgeClass cls;
};

/// Binary PPM (P6): the photo replicated to gray RGB with classified model
/// points painted in the per-class colors. Out-of-bounds points are skipped.
std::string encode_ppm_overlay(const GrayImage& photo,
                               const std::vector<OverlayPoint>& classified);

}  // namespace nutpose
