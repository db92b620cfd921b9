#include "nutpose/imaging.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>

#include "nutpose/errors.hpp"

namespace nutpose {

GradientImage scharr_magnitude(const GrayImage& img) {
  if (img.width < 3 || img.height < 3) {
    throw std::invalid_argument("scharr_magnitude: image must be at least 3x3");
  }
  GradientImage out(img.width, img.height);
  for (int y = 1; y < img.height - 1; ++y) {
    for (int x = 1; x < img.width - 1; ++x) {
      const double tl = img.at(x - 1, y - 1), tc = img.at(x, y - 1), tr = img.at(x + 1, y - 1);
      const double ml = img.at(x - 1, y), mr = img.at(x + 1, y);
      const double bl = img.at(x - 1, y + 1), bc = img.at(x, y + 1), br = img.at(x + 1, y + 1);
      const double gx = 3.0 * (tr - tl) + 10.0 * (mr - ml) + 3.0 * (br - bl);
      const double gy = 3.0 * (bl - tl) + 10.0 * (bc - tc) + 3.0 * (br - tr);
      out.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

BinaryEdgeImage threshold(const GradientImage& grad, double t) {
  if (!(t >= 0.0)) {
    throw std::invalid_argument("threshold: t must be nonnegative");
  }
  BinaryEdgeImage out(grad.width, grad.height);
  const std::size_t n = grad.magnitude.size();
  for (std::size_t i = 0; i < n; ++i) {
    out.bits[i] = grad.magnitude[i] >= t ? 1 : 0;
  }
  return out;
}

namespace {

struct PgmReader {
  std::string_view data;
  std::size_t pos = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("PGM: " + msg + " at byte " + std::to_string(pos), pos);
  }

  bool eof() const { return pos >= data.size(); }
  char peek() const { return data[pos]; }

  // Whitespace and '#' comments (through end of line) between header tokens.
  void skip_separators() {
    while (!eof()) {
      const char c = peek();
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos;
      } else if (c == '#') {
        while (!eof() && peek() != '\n') ++pos;
      } else {
        break;
      }
    }
  }

  int read_int(const char* what) {
    skip_separators();
    if (eof() || !std::isdigit(static_cast<unsigned char>(peek()))) {
      fail(std::string("expected ") + what);
    }
    long v = 0;
    while (!eof() && std::isdigit(static_cast<unsigned char>(peek()))) {
      v = v * 10 + (peek() - '0');
      if (v > 1000000000L) fail(std::string(what) + " out of range");
      ++pos;
    }
    return static_cast<int>(v);
  }
};

}  // namespace

GrayImage decode_pgm(std::string_view bytes) {
  PgmReader r{bytes};
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
    throw ParseError("PGM: bad magic at byte 0", 0);
  }
  const bool binary = bytes[1] == '5';
  r.pos = 2;

  const int width = r.read_int("width");
  const int height = r.read_int("height");
  const int maxval = r.read_int("maxval");
  if (width <= 0 || height <= 0) r.fail("dimensions must be positive");
  if (maxval <= 0 || maxval > 255) r.fail("maxval must be in [1,255]");

  GrayImage img(width, height);
  const std::size_t count = img.values.size();

  if (binary) {
    // Exactly one whitespace byte separates the header from the payload.
    if (r.eof() || !std::isspace(static_cast<unsigned char>(r.peek()))) {
      r.fail("expected whitespace before pixel data");
    }
    ++r.pos;
    if (bytes.size() - r.pos < count) {
      r.pos = bytes.size();
      r.fail("truncated pixel data");
    }
    for (std::size_t i = 0; i < count; ++i) {
      const auto v = static_cast<std::uint8_t>(bytes[r.pos + i]);
      if (v > maxval) {
        r.pos += i;
        r.fail("pixel value exceeds maxval");
      }
      img.values[i] = v;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      const int v = r.read_int("pixel value");
      if (v > maxval) r.fail("pixel value exceeds maxval");
      img.values[i] = static_cast<std::uint8_t>(v);
    }
  }
  return img;
}

std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.values.data()), img.values.size());
  return out;
}

std::string encode_ppm_overlay(const GrayImage& photo,
                               const std::vector<OverlayPoint>& classified) {
  std::vector<std::uint8_t> rgb(photo.values.size() * 3);
  for (std::size_t i = 0; i < photo.values.size(); ++i) {
    rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = photo.values[i];
  }
  for (const auto& p : classified) {
    if (p.px.u < 0 || p.px.u >= photo.width || p.px.v < 0 || p.px.v >= photo.height) {
      continue;
    }
    const auto color = edge_class_color(p.cls);
    const std::size_t i = static_cast<std::size_t>(p.px.v) * photo.width + p.px.u;
    rgb[3 * i] = color[0];
    rgb[3 * i + 1] = color[1];
    rgb[3 * i + 2] = color[2];
  }
  std::string out = "P6\n" + std::to_string(photo.width) + " " +
                    std::to_string(photo.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  return out;
}

}  // namespace nutpose
