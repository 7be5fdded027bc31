#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>

#include <Eigen/Core>

namespace hshseg {

/// Row-major 2-D raster; rows index image rows (y), columns index x.
template <typename T>
using Plane = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Plane<bool>;

using NodeId = std::int32_t;

/// Axis-aligned pixel rectangle. (x, y) is the top-left pixel; w and h count
/// pixels, so the box covers columns [x, x + w) and rows [y, y + h).
struct PixelBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  [[nodiscard]] int right() const { return x + w; }
  [[nodiscard]] int bottom() const { return y + h; }
  [[nodiscard]] std::int64_t area() const {
    return static_cast<std::int64_t>(w) * h;
  }
  [[nodiscard]] bool valid() const { return w >= 1 && h >= 1; }
  [[nodiscard]] bool inside(int width, int height) const {
    return valid() && x >= 0 && y >= 0 && right() <= width &&
           bottom() <= height;
  }

  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

/// Smallest box enclosing both arguments.
inline PixelBox box_union(const PixelBox& a, const PixelBox& b) {
  const int x0 = std::min(a.x, b.x);
  const int y0 = std::min(a.y, b.y);
  const int x1 = std::max(a.right(), b.right());
  const int y1 = std::max(a.bottom(), b.bottom());
  return {x0, y0, x1 - x0, y1 - y0};
}

inline std::int64_t box_intersection_area(const PixelBox& a,
                                          const PixelBox& b) {
  const int w = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const int h = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (w <= 0 || h <= 0) return 0;
  return static_cast<std::int64_t>(w) * h;
}

/// Tight bounding box of the set pixels, or nullopt for an empty mask.
inline std::optional<PixelBox> tight_box(const Mask& mask) {
  int x0 = static_cast<int>(mask.cols()), y0 = static_cast<int>(mask.rows());
  int x1 = -1, y1 = -1;
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      x0 = std::min(x0, static_cast<int>(c));
      x1 = std::max(x1, static_cast<int>(c));
      y0 = std::min(y0, static_cast<int>(r));
      y1 = std::max(y1, static_cast<int>(r));
    }
  }
  if (x1 < 0) return std::nullopt;
  return PixelBox{x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

/// 8-bit RGB raster stored as three planes. Grayscale inputs replicate the
/// single channel.
struct RgbImage {
  std::array<Plane<std::uint8_t>, 3> channels;

  RgbImage() = default;
  RgbImage(int width, int height) {
    for (auto& ch : channels) ch = Plane<std::uint8_t>::Zero(height, width);
  }

  [[nodiscard]] int width() const {
    return static_cast<int>(channels[0].cols());
  }
  [[nodiscard]] int height() const {
    return static_cast<int>(channels[0].rows());
  }

  static RgbImage filled(int width, int height, std::uint8_t r,
                         std::uint8_t g, std::uint8_t b) {
    RgbImage img(width, height);
    img.channels[0].setConstant(r);
    img.channels[1].setConstant(g);
    img.channels[2].setConstant(b);
    return img;
  }

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    channels[0](y, x) = r;
    channels[1](y, x) = g;
    channels[2](y, x) = b;
  }
};

/// A detector output box with its class and confidence.
struct Detection {
  std::string image_id;
  std::string class_label;
  double score = 0.0;
  PixelBox box;
};

/// A selected hierarchy region promoted to an instance. `bbox` is the tight
/// box of `mask`.
struct InstanceMask {
  std::string image_id;
  std::string class_label;
  double score = 0.0;
  NodeId node_id = -1;
  Mask mask;
  PixelBox bbox;
};

}  // namespace hshseg
