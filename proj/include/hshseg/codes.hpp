#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hshseg/error.hpp"
#include "hshseg/hierarchy.hpp"
#include "hshseg/types.hpp"

namespace hshseg {

/// Fixed-dimension image code compared under L1.
template <typename Scalar>
using ImageCode = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Descriptor layout: a grid x grid cell-mean raster per channel. Components
/// are ordered channel-major, then row-major over cells.
struct CodeConfig {
  int grid = 16;
  int channels = 1;  // 1 = luma, 3 = RGB
  bool masked = false;

  [[nodiscard]] int dim() const { return grid * grid * channels; }

  void validate() const {
    if (grid < 2) throw InvalidArgument("code grid must be >= 2");
    if (channels != 1 && channels != 3) {
      throw InvalidArgument("code channels must be 1 or 3");
    }
  }
};

namespace detail {

/// Pixel range [begin, end) of cell `i` along an axis of `extent` pixels.
/// Cells are extent / grid wide with the remainder in the last cell; axes
/// shorter than the grid sample one pixel per cell.
struct CellSpan {
  int begin;
  int end;
};

inline CellSpan cell_span(int extent, int grid, int i) {
  if (extent < grid) {
    const int at = static_cast<int>(static_cast<std::int64_t>(i) * extent / grid);
    return {at, at + 1};
  }
  const int base = extent / grid;
  const int begin = i * base;
  return {begin, i == grid - 1 ? extent : begin + base};
}

/// Cell means over `box`, optionally zeroing pixels outside `support`.
template <typename Scalar>
ImageCode<Scalar> cell_means(const RgbImage& image, const PixelBox& box,
                             const CodeConfig& cfg, const Mask* support) {
  cfg.validate();
  if (!box.inside(image.width(), image.height())) {
    throw BoxOutOfBounds("box (" + std::to_string(box.x) + ", " +
                         std::to_string(box.y) + ", " + std::to_string(box.w) +
                         ", " + std::to_string(box.h) +
                         ") lies outside the image");
  }
  const int g = cfg.grid;
  ImageCode<Scalar> code(cfg.dim());

  // Luma uses integer Rec.601 weights so that constant inputs map exactly.
  constexpr std::int64_t kLumaR = 299, kLumaG = 587, kLumaB = 114;
  const auto& R = image.channels[0];
  const auto& G = image.channels[1];
  const auto& B = image.channels[2];

  for (int cy = 0; cy < g; ++cy) {
    const CellSpan rows = cell_span(box.h, g, cy);
    for (int cx = 0; cx < g; ++cx) {
      const CellSpan cols = cell_span(box.w, g, cx);
      std::int64_t sum[3] = {0, 0, 0};
      for (int r = box.y + rows.begin; r < box.y + rows.end; ++r) {
        for (int c = box.x + cols.begin; c < box.x + cols.end; ++c) {
          if (support != nullptr && !(*support)(r, c)) continue;
          if (cfg.channels == 1) {
            sum[0] += kLumaR * R(r, c) + kLumaG * G(r, c) + kLumaB * B(r, c);
          } else {
            sum[0] += R(r, c);
            sum[1] += G(r, c);
            sum[2] += B(r, c);
          }
        }
      }
      const auto count = static_cast<double>(rows.end - rows.begin) *
                         static_cast<double>(cols.end - cols.begin);
      const int cell = cy * g + cx;
      if (cfg.channels == 1) {
        code(cell) = static_cast<Scalar>(static_cast<double>(sum[0]) /
                                         (count * 255000.0));
      } else {
        for (int ch = 0; ch < 3; ++ch) {
          code(ch * g * g + cell) = static_cast<Scalar>(
              static_cast<double>(sum[ch]) / (count * 255.0));
        }
      }
    }
  }
  return code;
}

}  // namespace detail

/// Code of the patch under `box`. Throws BoxOutOfBounds.
template <typename Scalar = double>
ImageCode<Scalar> extract_code(const RgbImage& image, const PixelBox& box,
                               const CodeConfig& cfg) {
  return detail::cell_means<Scalar>(image, box, cfg, nullptr);
}

/// Code of a hierarchy region's tight box. With cfg.masked, pixels outside
/// the region count as zero intensity. Throws UnknownNode.
template <typename Scalar = double>
ImageCode<Scalar> extract_region_code(const RgbImage& image,
                                      const RegionTree& tree, NodeId id,
                                      const CodeConfig& cfg) {
  const RegionNode& n = tree.node(id);
  if (tree.width() != image.width() || tree.height() != image.height()) {
    throw DimensionMismatch("region tree and image sizes differ");
  }
  if (!cfg.masked) return extract_code<Scalar>(image, n.bbox, cfg);
  const Mask support = region_mask(tree, id);
  return detail::cell_means<Scalar>(image, n.bbox, cfg, &support);
}

/// Sum of absolute component differences. Throws DimensionMismatch.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar l1_distance(const Eigen::MatrixBase<DerivedA>& a,
                                      const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size()) {
    throw DimensionMismatch("code dimensions differ: " +
                            std::to_string(a.size()) + " vs " +
                            std::to_string(b.size()));
  }
  return (a - b).cwiseAbs().sum();
}

}  // namespace hshseg
